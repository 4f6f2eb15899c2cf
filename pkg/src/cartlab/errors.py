class CartlabError(Exception):
    """Base class for errors raised by cartlab."""


class ConfigurationError(CartlabError, ValueError):
    """Inconsistent or malformed specification (dimensions, kinds, modes)."""


class DomainError(CartlabError, ValueError):
    """A point or interval lies outside the unit cube."""


class EmptyCellError(CartlabError, ValueError):
    """A cell holds no samples."""


class SplitInfeasibleError(CartlabError, ValueError):
    """A split leaves one child empty (or with zero mass)."""


class DegenerateCellError(CartlabError, ValueError):
    """A cell has zero probability mass."""
