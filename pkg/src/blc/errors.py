"""Semantic exception hierarchy shared by all blc modules."""


class BlcError(Exception):
    """Base class for every error raised by this package."""


# -- linear algebra ----------------------------------------------------------

class RankAmbiguous(BlcError):
    """A numerical rank decision sits too close to the threshold to trust."""


class SingularGram(BlcError):
    """A Gram matrix that must be invertible is singular at tolerance."""


class NotSPD(BlcError):
    """Input to a symmetric-positive-definite routine is not SPD."""


class TooManySubsets(BlcError):
    """Subset enumeration was requested beyond the feasibility guard."""


# -- configurations ----------------------------------------------------------

class NotEssential(BlcError):
    """Essential-vector reduction was requested for a non-essential column."""


class EmptyOrFullSubset(BlcError):
    """Factorization needs a proper, non-empty column subset."""


class DefectiveConfiguration(BlcError):
    """Operation assumes a spanning / non-proportional configuration."""


# -- polytope ----------------------------------------------------------------

class NotMember(BlcError):
    """Exponent vector lies outside the feasibility polytope."""


# -- Gaussian solver ---------------------------------------------------------

class NotInterior(BlcError):
    """Newton iterates escape: the exponents are on the boundary or outside."""


class SingularHessian(BlcError):
    """Objective Hessian is singular on the gauge slice."""


class ResidualTooLarge(BlcError):
    """A purported stationary point does not satisfy its equation."""


class NotConverged(BlcError):
    """A solution object that must be converged is not."""


# -- optimizers --------------------------------------------------------------

class NotABasis(BlcError):
    """Subset does not index a basis of the ambient space."""


class DegreeTooLarge(BlcError):
    """Phase-relation degree exceeds the enumeration guard."""


class InteriorPoint(BlcError):
    """Boundary-only operation called with interior exponents."""


class VertexPoint(BlcError):
    """Operation excludes exponent vectors with infinite indices."""


# -- heat flow ---------------------------------------------------------------

class GridTooCoarse(BlcError):
    """Quadrature grid cannot conserve norms at the requested tolerance."""


class UnsupportedDimension(BlcError):
    """Tensor quadrature is restricted to ambient dimension at most 3."""


# -- sphere ------------------------------------------------------------------

class NormDiverges(BlcError):
    """A requested one-dimensional L^p norm is not finite."""


class ParameterOutOfRegime(BlcError):
    """Trial parameters outside the documented regime."""


class EmptyBin(BlcError):
    """Histogram bin received no samples."""


class EntropyUnstable(BlcError):
    """Entropy estimator variance is too large to certify anything."""


# -- CLI ---------------------------------------------------------------------

class ParseError(BlcError):
    """Problem file could not be parsed."""
