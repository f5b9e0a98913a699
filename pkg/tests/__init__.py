"""Unit tests for Hayward Tech Suite.

This package contains unit and integration tests for all modules.
"""

__all__ = []
