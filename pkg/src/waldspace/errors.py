"""Exception and warning types raised across the package."""


class WaldError(ValueError):
    """Base class for invalid input to a wald-space operation."""


class IncompatibleSplits(WaldError):
    def __init__(self, first, second):
        super().__init__(f"splits {first} and {second} are incompatible")
        self.first = first
        self.second = second


class SeparationViolated(WaldError):
    def __init__(self, u, v):
        super().__init__(f"no split separates labels {u} and {v}")
        self.u = u
        self.v = v


class OverlappingBlocks(WaldError):
    def __init__(self, first, second):
        super().__init__(f"splits {first} and {second} cover partially overlapping leaf sets")
        self.first = first
        self.second = second


class NotInWaldSpace(WaldError):
    """A boundary point whose matrix is not positive definite."""


class DomainError(WaldError):
    """A scalar argument lies outside the domain of the map."""


class NotPositiveDefinite(WaldError):
    def __init__(self, min_eigenvalue):
        super().__init__(f"matrix is not positive definite (smallest eigenvalue {min_eigenvalue:.3e})")
        self.min_eigenvalue = min_eigenvalue


class EigenFailure(ArithmeticError):
    """The symmetric eigensolver did not converge."""


class UnknownSplit(WaldError, KeyError):
    def __init__(self, split):
        WaldError.__init__(self, f"split {split} is not part of the topology")
        self.split = split

    def __str__(self):
        return self.args[0]


class NotAWaldMatrix(WaldError):
    def __init__(self, report):
        conditions = ", ".join(report.conditions)
        super().__init__(f"matrix violates {conditions}")
        self.report = report


class SingularMetric(ArithmeticError):
    """The pullback metric is numerically singular at the requested chart."""


class DegeneratePlane(WaldError):
    """The two tangent vectors do not span a plane."""


class TopologyMismatch(WaldError):
    """The operation requires both wälder to share one topology."""


class PreconditionViolated(WaldError):
    """Inputs are individually valid but inconsistent with each other."""


class DegenerateTriangle(WaldError):
    """Two corners of a triangle coincide."""


class NewickSyntaxError(WaldError):
    def __init__(self, message, position):
        super().__init__(f"{message} at position {position}")
        self.position = position


class DuplicateLabel(WaldError):
    def __init__(self, label):
        super().__init__(f"label {label} appears more than once")
        self.label = label


class MissingLength(WaldError):
    def __init__(self, edge):
        super().__init__(f"edge {edge} has no branch length")
        self.edge = edge


class NonPositiveLength(WaldError):
    def __init__(self, edge, length):
        super().__init__(f"edge {edge} has non-positive length {length}")
        self.edge = edge
        self.length = length


class DegreeTwoVertex(WaldError):
    def __init__(self, vertex):
        super().__init__(f"unlabeled vertex {vertex} has degree two")
        self.vertex = vertex


class ToleranceAmbiguity(UserWarning):
    """A split's support is too close to zero to decide reliably."""


class NoConvergence(RuntimeWarning):
    """An iterative solver stopped before reaching its tolerance."""


class EnergyIncrease(RuntimeWarning):
    """A straightening round increased the discrete path energy."""
