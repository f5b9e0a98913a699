"""Utility modules for qjudge."""

__all__ = ["logger", "config", "validators", "report"]
