"""Exception hierarchy.

Two broad families matter to callers (and to the CLI's exit codes):
``DataError`` for problems with the input data or the request, and
``EstimationError`` for numerical failures inside an estimator.
"""


class WaossError(Exception):
    """Base class for all package errors."""


class DataError(WaossError):
    """The input data or request is invalid (CLI exit code 2)."""


class EstimationError(WaossError):
    """A numerical failure occurred during estimation (CLI exit code 3)."""


# -- data / request errors ---------------------------------------------------

class EmptyPanel(DataError):
    pass


class StayerFound(DataError):
    def __init__(self, unit_id, dd):
        self.unit_id = unit_id
        self.dd = dd
        super().__init__(
            f"unit {unit_id!r} has treatment change {dd!r} within the stayer "
            "tolerance; use StayerPolicy(mode='drop') to discard such units"
        )


class AllUnitsDropped(DataError):
    pass


class MissingColumn(DataError):
    pass


class NonNumericCell(DataError):
    def __init__(self, row, column, value):
        self.row = row
        self.column = column
        self.value = value
        super().__init__(f"row {row}, column {column!r}: cannot parse {value!r} as a number")


class DuplicateUnitId(DataError):
    pass


class EmptyFile(DataError):
    pass


class MissingPeriod(DataError):
    def __init__(self, unit_id, period):
        self.unit_id = unit_id
        self.period = period
        super().__init__(f"unit {unit_id!r} has no row for period {period!r}")


class DuplicatePeriod(DataError):
    def __init__(self, unit_id, period):
        self.unit_id = unit_id
        self.period = period
        super().__init__(f"unit {unit_id!r} has more than one row for period {period!r}")


class InconsistentWeight(DataError):
    def __init__(self, unit_id):
        self.unit_id = unit_id
        super().__init__(f"unit {unit_id!r} has different weights across its rows")


class TooFewUnits(DataError):
    pass


class MissingPrePeriod(DataError):
    pass


class TooFewQuasiStayers(DataError):
    def __init__(self, count, required):
        self.count = count
        self.required = required
        super().__init__(
            f"only {count} units are pre-period quasi-stayers; {required} required"
        )


class NoQuasiStayers(DataError):
    def __init__(self, eta, min_abs_dd):
        self.eta = eta
        self.min_abs_dd = min_abs_dd
        super().__init__(
            f"no unit has |treatment change| <= {eta!r}; smallest in sample is {min_abs_dd!r}"
        )


class NotNested(DataError):
    pass


class InvalidLevel(DataError):
    pass


class InvalidSpec(DataError):
    pass


# -- numerical errors --------------------------------------------------------

class RankDeficientDesign(EstimationError):
    def __init__(self, smallest_sv, largest_sv, threshold):
        self.smallest_sv = smallest_sv
        self.largest_sv = largest_sv
        self.threshold = threshold
        super().__init__(
            "design matrix is rank deficient: smallest singular value "
            f"{smallest_sv:.3e} below {threshold:.0e} x largest ({largest_sv:.3e})"
        )


class DegenerateDenominator(EstimationError):
    pass


class DegenerateRegressor(EstimationError):
    pass


class NoKernelMass(EstimationError):
    def __init__(self, n_points):
        self.n_points = n_points
        super().__init__(
            f"{n_points} evaluation point(s) received zero kernel mass; "
            "increase the bandwidths"
        )
