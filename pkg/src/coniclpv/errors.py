"""Exception hierarchy shared by all modules."""


class ConicLPVError(Exception):
    """Base class for every error raised by this package."""


class DimensionMismatch(ConicLPVError, ValueError):
    pass


class NonSquare(DimensionMismatch):
    pass


class NonSymmetric(ConicLPVError, ValueError):
    pass


class NoConvergence(ConicLPVError, RuntimeError):
    pass


class Singular(ConicLPVError, ValueError):
    pass


class NotHurwitz(ConicLPVError, ValueError):
    pass


class IllConditioned(ConicLPVError, ValueError):
    pass


class SingularAtFrequency(ConicLPVError, ValueError):
    pass


class EmptyProgram(ConicLPVError, ValueError):
    pass


class UnknownHandle(ConicLPVError, KeyError):
    pass


class NotOnSimplex(ConicLPVError, ValueError):
    pass


class Uncertified(ConicLPVError):
    """The cone LMI could not be satisfied.

    The conditions are sufficient only, so this never proves the system is
    outside the sector.
    """


class BadSector(ConicLPVError, ValueError):
    pass


class DegenerateSector(BadSector):
    pass


class NegativeGain(ConicLPVError, ValueError):
    pass


class LengthMismatch(ConicLPVError, ValueError):
    pass


class NotStabilizable(ConicLPVError):
    pass


class SynthesisInfeasible(ConicLPVError):
    pass


class GramianSingular(ConicLPVError):
    pass


class NonPositiveFlow(ConicLPVError, ValueError):
    pass


class SingularShift(ConicLPVError, ValueError):
    pass


class Divergence(ConicLPVError, RuntimeError):
    pass


class EmptyTrace(ConicLPVError, ValueError):
    pass


class NotSiso(ConicLPVError, ValueError):
    pass
