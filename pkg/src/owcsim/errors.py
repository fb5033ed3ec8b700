"""Exception types shared across the package."""


class OwcsimError(Exception):
    """Base class for all owcsim errors."""


class ConfigError(OwcsimError):
    """Configuration file is missing, malformed, or holds invalid values."""


class DimensionMismatch(OwcsimError):
    """Array shapes or row/column structure do not match the scenario."""


class OutOfRoom(OwcsimError):
    """A position lies outside the room bounds."""


class NonPositiveConstant(OwcsimError):
    """A physical constant that must be strictly positive is not."""


class NotOnAnyPlane(OwcsimError):
    """Point does not satisfy any candidate wall-plane condition."""


class OutOfPlaneRange(OwcsimError):
    """In-plane coordinates fall outside the wall's open rectangle."""


class DegenerateGeometry(OwcsimError):
    """Coincident points or zero distance make an angle/gain undefined."""


class DegenerateSemiAngle(OwcsimError):
    """Semi-angle at half power of 0 or 90 degrees has no Lambertian order."""


class NonPositiveNoise(OwcsimError):
    """Noise power must be strictly positive."""


class ZeroTotalPower(OwcsimError):
    """Total consumed power is zero; efficiency is undefined."""


class Infeasible(OwcsimError):
    """No solution satisfies the rate/power/QoS constraints."""


class NoConvergence(OwcsimError):
    """Iteration cap reached before meeting the convergence criteria."""


class TooLarge(OwcsimError):
    """Brute-force enumeration would exceed the size guard."""
