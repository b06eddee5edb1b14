"""
Tests package for hp-nitsche-coupling
"""
