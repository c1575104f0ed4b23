"""Exception hierarchy.

Every error carries a machine-readable ``code`` that ends up in report.json.
"""

from __future__ import annotations


class PHStabError(Exception):
    code = "error"


class NotSymmetric(PHStabError, ValueError):
    code = "not_symmetric"


class NearSingular(PHStabError, ValueError):
    code = "near_singular"


class DimensionMismatch(PHStabError, ValueError):
    code = "dimension_mismatch"


class Overflow(PHStabError, ArithmeticError):
    code = "overflow"


class NotPositiveDefinite(PHStabError, ValueError):
    code = "not_positive_definite"


class OutOfInterval(PHStabError, ValueError):
    code = "out_of_interval"


class RankDeficient(PHStabError, ValueError):
    code = "rank_deficient"


class ZSingular(PHStabError, ValueError):
    code = "z_singular"


class SSingular(PHStabError, ValueError):
    code = "s_singular"


class DissipativityViolated(PHStabError, ValueError):
    code = "dissipativity_violated"


class KSingular(PHStabError, ValueError):
    code = "k_singular"


class MNotContraction(PHStabError, ValueError):
    code = "m_not_contraction"


class DomainViolation(PHStabError, ValueError):
    code = "domain_violation"


class InvalidP0(PHStabError, ValueError):
    code = "invalid_p0"


class VSingular(PHStabError, ArithmeticError):
    """Raised when V_t is numerically singular; indicates an internal bug."""

    code = "v_singular"


class NotAGenerator(PHStabError):
    code = "not_a_generator"


class NotFound(PHStabError, LookupError):
    code = "not_found"


class GridMisaligned(PHStabError, ValueError):
    code = "grid_misaligned"


class BoundaryRowSingular(PHStabError, ArithmeticError):
    code = "boundary_row_singular"


class SolveFailure(PHStabError, ArithmeticError):
    code = "solve_failure"


class BudgetExceeded(PHStabError, ValueError):
    code = "budget_exceeded"


class ParseError(PHStabError, ValueError):
    code = "parse_error"


class ValidationError(PHStabError, ValueError):
    """Aggregates every problem found in a spec file, not just the first."""

    code = "validation_error"

    def __init__(self, errors):
        if isinstance(errors, str):
            errors = [errors]
        self.errors = list(errors)
        super().__init__("; ".join(self.errors))
