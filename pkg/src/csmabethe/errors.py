"""Exception types shared across the package.

Every error carries a short ``status`` code so that experiment harnesses can
record failures as data rows instead of aborting a sweep.
"""


class CsmaBetheError(Exception):
    status = "error"


class EnumerationTooLarge(CsmaBetheError):
    status = "enumeration_too_large"


class DegenerateRate(CsmaBetheError, ValueError):
    status = "degenerate_rate"


class InfeasibleLocalRates(CsmaBetheError):
    """Local solve diverged: the rates lie on or outside the local capacity region."""

    status = "infeasible_local_rates"

    def __init__(self, message, link=None):
        super().__init__(message)
        self.link = link


class RatePairOverload(CsmaBetheError, ValueError):
    status = "rate_pair_overload"


class TargetOutsideCapacity(CsmaBetheError):
    status = "target_outside_capacity_region"


class InconsistentMarginals(CsmaBetheError, ValueError):
    status = "inconsistent_marginals"
