"""
Input validation utilities for qjudge.

Validates the user-facing parameters of the command-line surface: consistency
levels, resource limits, search policies and input paths.
"""

import re
from pathlib import Path
from typing import Optional, Tuple

from src.utils.logger import get_logger

logger = get_logger("validators")


class ValidationError(Exception):
    """Custom exception for validation errors."""

    pass


class Validators:
    """Collection of validation utilities."""

    POLICY_PATTERN = re.compile(r"^(default|random:(\d+))$")

    @staticmethod
    def validate_path(path: str, must_exist: bool = True) -> bool:
        """
        Validate an input document path.

        Args:
            path: Path to validate
            must_exist: Whether the file must exist

        Returns:
            True if valid

        Raises:
            ValidationError: If validation fails
        """
        if not path:
            raise ValidationError("Path cannot be empty")

        path_obj = Path(path)
        if must_exist and not path_obj.exists():
            raise ValidationError(f"Path does not exist: {path}")
        if must_exist and path_obj.is_dir():
            raise ValidationError(f"Path is a directory: {path}")

        logger.debug(f"Path validated: {path}")
        return True

    @staticmethod
    def validate_k(k: int) -> bool:
        """
        Validate a consistency level.

        Args:
            k: Maximum judgement width

        Returns:
            True if valid

        Raises:
            ValidationError: If k is not a positive integer
        """
        if not isinstance(k, int) or isinstance(k, bool):
            raise ValidationError("k must be an integer")
        if k < 1:
            raise ValidationError(f"k must be at least 1, got {k}")
        return True

    @staticmethod
    def validate_limit(limit: int, name: str = "limit", min_value: int = 1) -> bool:
        """
        Validate a resource limit such as a step or judgement budget.

        Args:
            limit: Limit value
            name: Name used in the error message
            min_value: Minimum allowed value

        Returns:
            True if valid

        Raises:
            ValidationError: If validation fails
        """
        if not isinstance(limit, int) or isinstance(limit, bool):
            raise ValidationError(f"{name} must be an integer")
        if limit < min_value:
            raise ValidationError(f"{name} must be at least {min_value}, got {limit}")
        return True

    @staticmethod
    def parse_policy(policy: str) -> Tuple[str, Optional[int]]:
        """
        Validate and split a branching policy string.

        Args:
            policy: ``default`` or ``random:<seed>``

        Returns:
            Tuple of (policy name, seed or None)

        Raises:
            ValidationError: If the policy is unknown
        """
        match = Validators.POLICY_PATTERN.match(policy or "")
        if not match:
            raise ValidationError(f"Unknown policy: {policy!r} (expected default or random:<seed>)")
        if match.group(2) is None:
            return "default", None
        return "random", int(match.group(2))
