"""Exception types raised by socmix.

Input/contract violations derive from :class:`InputError`; failures of the
numerical machinery derive from :class:`NumericalError`.  The CLI maps the
former to exit code 1 and the latter to exit code 2.
"""


class SocmixError(Exception):
    """Base class for all socmix errors."""


class InputError(SocmixError):
    """Malformed or contract-violating input."""


class NumericalError(SocmixError):
    """Numerical failure during fitting or a downstream computation."""


class MissingColumn(InputError):
    def __init__(self, column, path=None):
        self.column = column
        self.path = path
        where = f" in {path}" if path else ""
        super().__init__(f"required column {column!r} not found{where}")


class ParseError(InputError):
    def __init__(self, row, column, value):
        self.row = row
        self.column = column
        self.value = value
        super().__init__(f"row {row}: cannot parse column {column!r} value {value!r}")


class InvariantViolation(InputError):
    def __init__(self, message, row=None, field=None):
        self.row = row
        self.field = field
        where = f"row {row}, field {field!r}: " if row is not None else ""
        super().__init__(where + message)


class UnknownFacilityKind(InputError):
    def __init__(self, kind, row=None):
        self.kind = kind
        self.row = row
        where = f"row {row}: " if row is not None else ""
        super().__init__(f"{where}unknown facility kind {kind!r}")


class ConstantColumn(InputError):
    def __init__(self, name):
        self.name = name
        super().__init__(f"column {name!r} is constant; cannot standardize or diagnose")


class EmptyAfterExclusion(InputError):
    def __init__(self):
        super().__init__("no cells remain after excluding zero-price/zero-population cells")


class NonFinite(InputError):
    def __init__(self, what):
        super().__init__(f"non-finite values in {what}")


class TooFewRows(InputError):
    def __init__(self, n, needed):
        self.n = n
        self.needed = needed
        super().__init__(f"{n} rows, but more than {needed} are required")


class DegenerateComponent(NumericalError):
    def __init__(self, component, effective_n):
        self.component = component
        self.effective_n = effective_n
        super().__init__(
            f"component {component} collapsed: effective row count "
            f"{effective_n:.3f} is too small to fit a regression"
        )


class SingularDesign(NumericalError):
    def __init__(self, component=None):
        self.component = component
        where = f" for component {component}" if component is not None else ""
        super().__init__(f"design matrix is rank deficient{where}")


class AllRestartsDegenerate(NumericalError):
    def __init__(self, k, restarts, last_error):
        self.k = k
        self.restarts = restarts
        self.last_error = last_error
        super().__init__(
            f"all {restarts} restarts failed for {k} components; last error: {last_error}"
        )


class UndefinedForK1(InputError):
    def __init__(self):
        super().__init__("entropy criterion is undefined for a one-component fit")


class NonPositiveLikelihoodGain(NumericalError):
    def __init__(self, loglik_k, loglik_1):
        self.loglik_k = loglik_k
        self.loglik_1 = loglik_1
        super().__init__(
            f"log-likelihood gain over the one-component fit is not positive "
            f"({loglik_k:.6f} vs {loglik_1:.6f})"
        )


class EmptyReport(InputError):
    def __init__(self, criterion):
        self.criterion = criterion
        super().__init__(f"no selection rows carry a value for criterion {criterion!r}")


class LabelMismatch(InputError):
    def __init__(self, message):
        super().__init__(message)


class MissingFit(InputError):
    def __init__(self, path):
        self.path = path
        super().__init__(f"no serialized fit found at {path}")
