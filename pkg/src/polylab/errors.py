"""Exception types shared across the package."""


class PolylabError(Exception):
    """Base class for all polylab errors."""


class EmptyPolytope(PolylabError):
    """The halfspace system has no feasible point (or no interior)."""


class Unbounded(PolylabError):
    """The halfspace system admits a recession direction."""


class DegenerateInput(PolylabError):
    """Input points do not affinely span the ambient space."""


class DimensionMismatch(PolylabError):
    """Operands disagree on dimensions."""


class BoundaryHit(PolylabError):
    """State-enumeration argmin landed on the enumeration box boundary."""

    def __init__(self, state, msg=None):
        super().__init__(msg or f"ground state {state} touches the enumeration bound")
        self.state = state


class RetryExhausted(PolylabError):
    """A rejection-sampling generator ran out of attempts."""


class NoExit(PolylabError):
    """A line search stayed inside the polytope up to its ray bound."""


class SolverFailure(PolylabError):
    """The convex subproblem solver failed; carries diagnostics."""

    def __init__(self, msg, diagnostics=None):
        super().__init__(msg)
        self.diagnostics = diagnostics or {}


class OracleFailure(PolylabError):
    """A membership oracle violated its contract."""
