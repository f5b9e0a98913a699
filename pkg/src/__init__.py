"""
qjudge - Proof systems for quantified constraint satisfaction

Checks and generates judgement proofs and clause proofs for quantified
constraint formulas in non-prenex form, translates between the two proof
systems, searches for refuting traces, and decides k-judge-consistency.

License: GPL-3.0-or-later
Version: 1.0.0
"""

__version__ = "1.0.0"
__license__ = "GPL-3.0-or-later"

__all__ = ["__version__", "__license__"]
