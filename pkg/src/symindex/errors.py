"""Exception hierarchy shared by all modules."""


class SymIndexError(Exception):
    """Base class; carries a machine-readable ``code`` for reports."""

    code = "error"

    def payload(self):
        return {"code": self.code, "message": str(self)}


class InvalidInput(SymIndexError, ValueError):
    code = "invalid_input"


class NotSymplectic(SymIndexError, ValueError):
    code = "not_symplectic"


class NotTransverse(SymIndexError, ValueError):
    code = "not_transverse"


class Diverged(SymIndexError, ArithmeticError):
    code = "diverged"


class DegenerateArc(SymIndexError):
    code = "degenerate_arc"

    def __init__(self, start, stop):
        super().__init__(f"path lies in the train on the whole arc [{start:.6g}, {stop:.6g}]")
        self.start = start
        self.stop = stop

    def payload(self):
        return {**super().payload(), "arc": [self.start, self.stop]}


class IrregularCrossing(SymIndexError):
    code = "irregular_crossing"

    def __init__(self, t, message=None):
        super().__init__(message or f"irregular crossing at t={t:.12g}")
        self.t = t

    def payload(self):
        return {**super().payload(), "t": self.t}


class IrregularEndpoint(IrregularCrossing):
    code = "irregular_endpoint"

    def __init__(self, t):
        super().__init__(t, f"irregular crossing at endpoint t={t:g}; endpoints are never perturbed")


class EpsilonUnstable(SymIndexError):
    code = "epsilon_unstable"


class AmbiguousFloor(SymIndexError, ValueError):
    code = "ambiguous_floor"

    def __init__(self, x):
        super().__init__(f"strict floor of {x!r} is ambiguous: argument is within guard of an integer")
        self.x = x


class OriginUndefined(SymIndexError, ValueError):
    code = "origin_undefined"


class DeltaTooLarge(SymIndexError, ValueError):
    code = "delta_too_large"


class CannotSeparate(SymIndexError):
    code = "cannot_separate"


class Uncertified(SymIndexError):
    code = "uncertified"

    def __init__(self, result, guard):
        super().__init__(f"certificate failed: result={result!r}, guard={guard!r}")
        self.result = result
        self.guard = guard


class RegimeViolation(SymIndexError, ValueError):
    code = "regime_violation"


class InconsistentModel(SymIndexError):
    code = "inconsistent_model"

    def __init__(self, residual):
        super().__init__(f"fixed-point data disagree: residual {residual:.3e}")
        self.residual = residual


class NotFixed(SymIndexError, ValueError):
    code = "not_fixed"
