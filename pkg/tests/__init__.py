"""
Tests for docwatch
"""
