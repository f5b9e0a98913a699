"""Core proof systems and decision procedures for qjudge."""

__all__ = [
    "model",
    "clauses",
    "constraints",
    "semantics",
    "judgement_proofs",
    "clause_proofs",
    "translation",
    "search_traces",
    "consistency",
    "rewrites",
]
