"""
Adapters unit tests
"""
