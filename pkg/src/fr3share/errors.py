class Fr3ShareError(Exception):
    """Base class for all errors raised by this package."""


class InvalidDimension(Fr3ShareError, ValueError):
    pass


class NotHermitian(Fr3ShareError, ValueError):
    pass


class InvalidArgument(Fr3ShareError, ValueError):
    pass


class EmptySample(Fr3ShareError, ValueError):
    pass


class DegenerateGeometry(Fr3ShareError, ValueError):
    pass


class NotNormalized(Fr3ShareError, ValueError):
    pass


class EmptyRun(Fr3ShareError, ValueError):
    pass


class ConfigError(Fr3ShareError, ValueError):
    pass


class InfeasibleLink(Fr3ShareError):
    """No transmit power satisfies both the rate floor and the INR cap.

    ``lower`` is the smallest power meeting the rate floor (and P_min),
    ``upper`` the largest power meeting the INR cap (and P_max), both dBm.
    """

    def __init__(self, lower, upper):
        self.lower = lower
        self.upper = upper
        super().__init__(f"empty feasible power interval [{lower:.4f}, {upper:.4f}] dBm")


class SlotFailure(Fr3ShareError):
    """A numerical failure inside the per-slot pipeline."""

    def __init__(self, slot, cause):
        self.slot = slot
        self.cause = cause
        super().__init__(f"slot {slot}: {cause}")
