"""Text formats for instances, proofs and traces."""

__all__ = ["sexpr", "instance_format", "proof_format", "trace_format"]
