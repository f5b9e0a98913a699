"""Tests for validators module."""

import pytest

from src.utils.validators import ValidationError, Validators


class TestValidators:
    """Test suite for Validators class."""

    def test_validate_path_valid(self, instances_dir):
        """Test path validation with an existing document."""
        validator = Validators()
        assert validator.validate_path(str(instances_dir / "ex33.qcsp")) is True

    def test_validate_path_missing(self, tmp_path):
        """Test path validation rejects missing files."""
        validator = Validators()
        with pytest.raises(ValidationError):
            validator.validate_path(str(tmp_path / "missing.qcsp"))

    def test_validate_path_directory(self, tmp_path):
        """Test path validation rejects directories."""
        validator = Validators()
        with pytest.raises(ValidationError):
            validator.validate_path(str(tmp_path))

    def test_validate_path_empty(self):
        """Test path validation rejects empty paths."""
        validator = Validators()
        with pytest.raises(ValidationError):
            validator.validate_path("")

    def test_validate_path_not_required(self, tmp_path):
        """Test that output paths need not exist."""
        validator = Validators()
        assert validator.validate_path(str(tmp_path / "out.jpf"), must_exist=False) is True

    def test_validate_k(self):
        """Test consistency level validation."""
        validator = Validators()
        assert validator.validate_k(1) is True
        assert validator.validate_k(4) is True

    @pytest.mark.parametrize("k", [0, -2, True, "2", 2.0])
    def test_validate_k_invalid(self, k):
        """Test that k must be a positive integer."""
        validator = Validators()
        with pytest.raises(ValidationError):
            validator.validate_k(k)

    def test_validate_limit(self):
        """Test limit validation."""
        validator = Validators()
        assert validator.validate_limit(100, "max-steps") is True

    def test_validate_limit_invalid(self):
        """Test limit validation names the limit."""
        validator = Validators()
        with pytest.raises(ValidationError, match="max-steps"):
            validator.validate_limit(0, "max-steps")

    def test_parse_policy(self):
        """Test policy parsing."""
        validator = Validators()
        assert validator.parse_policy("default") == ("default", None)
        assert validator.parse_policy("random:42") == ("random", 42)

    @pytest.mark.parametrize("policy", ["", "random", "random:x", "greedy"])
    def test_parse_policy_invalid(self, policy):
        """Test policy parsing rejects unknown policies."""
        validator = Validators()
        with pytest.raises(ValidationError):
            validator.parse_policy(policy)
