"""Closed-form sum-DoF values, (n_d, n_u) allocation enumeration and the
no-CSIT converse region.

Everything here is exact rational arithmetic on :class:`fractions.Fraction`.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from numbers import Rational

from .errors import InvalidAllocationError, InvalidArgumentError, UnsupportedTopologyError
from .network import NetworkConfig

__all__ = [
    "DofBounds",
    "SymbolAllocation",
    "sum_dof_no_csit",
    "sum_dof_partial_csit",
    "enumerate_allocations",
    "default_allocation",
    "distinguished_allocations",
    "region_feasible",
]


@dataclass(frozen=True)
class DofBounds:
    """Lower/upper sum-DoF bounds; ``exact`` is set iff they coincide.

    The upper bound is the cited full-CSIT converse evaluated for a single
    transmit/receive antenna; it is not derived in this package.
    """

    lower: Fraction
    upper: Fraction
    exact: Fraction | None = None

    def __post_init__(self):
        if self.lower > self.upper:
            raise ValueError(f"lower bound {self.lower} exceeds upper bound {self.upper}")
        if (self.exact is not None) != (self.lower == self.upper):
            raise ValueError("exact must be present iff lower == upper")


@dataclass(frozen=True, order=True)
class SymbolAllocation:
    """Symbols per served DL user (``n_d``) and per UL user (``n_u``) in one block."""

    n_d: int
    n_u: int

    def check(self, l_d: int, l_u: int) -> None:
        """Raise unless 1 <= n_d <= L_u, 1 <= n_u <= L_d and 2 <= n_d + n_u <= L_d*L_u."""
        ok = (
            1 <= self.n_d <= l_u
            and 1 <= self.n_u <= l_d
            and 2 <= self.n_d + self.n_u <= l_d * l_u
        )
        if not ok:
            raise InvalidAllocationError(
                f"(n_d, n_u) = ({self.n_d}, {self.n_u}) infeasible for (L_d, L_u) = ({l_d}, {l_u})"
            )

    def dof(self, l_d: int, l_u: int) -> Fraction:
        return Fraction(self.n_d, l_u) + Fraction(self.n_u, l_d)


def _single_user_dof(cfg: NetworkConfig) -> Fraction:
    return Fraction(min(max(cfg.k_d, cfg.k_u), 1))


def sum_dof_no_csit(cfg: NetworkConfig) -> Fraction:
    """Sum DoF without CSIT; equals 2 - 1/L_u once both user sets are nonempty."""
    if cfg.k_d == 0 or cfg.k_u == 0:
        return _single_user_dof(cfg)
    l_u = cfg.l_u
    dl_part = 1 + Fraction(min(cfg.k_d, 1) * (l_u - 1), l_u)
    return min(Fraction(max(cfg.k_d, cfg.k_u)), max(dl_part, Fraction(1)))


def _pair_bound(a: int, b: int) -> Fraction:
    """max(1 + b(a-1)/a, 1 + a(b-1)/b) for a, b >= 1."""
    return max(1 + Fraction(b * (a - 1), a), 1 + Fraction(a * (b - 1), b))


def sum_dof_partial_csit(cfg: NetworkConfig) -> DofBounds:
    """Achievable lower bound and cited upper bound on the partial-CSIT sum DoF."""
    if cfg.k_d == 0 or cfg.k_u == 0:
        value = _single_user_dof(cfg)
        return DofBounds(value, value, value)
    cap = min(Fraction(2), Fraction(max(cfg.k_d, cfg.k_u)))
    upper = min(cap, _pair_bound(cfg.k_d, cfg.k_u))
    lower = min(cap, _pair_bound(cfg.l_d, cfg.l_u))
    return DofBounds(lower, upper, upper if lower == upper else None)


def enumerate_allocations(cfg: NetworkConfig) -> list[tuple[SymbolAllocation, Fraction]]:
    """Every feasible (n_d, n_u) with its achieved DoF n_d/L_u + n_u/L_d.

    Sorted by ``(n_d, n_u)``. Empty when L_d = L_u = 1, where only
    single-user transmission remains.
    """
    if cfg.k_d == 0 or cfg.k_u == 0:
        raise UnsupportedTopologyError("allocations need at least one DL and one UL user")
    l_d, l_u = cfg.l_d, cfg.l_u
    out = []
    for n_d in range(1, l_u + 1):
        for n_u in range(1, l_d + 1):
            if 2 <= n_d + n_u <= l_d * l_u:
                alloc = SymbolAllocation(n_d, n_u)
                out.append((alloc, alloc.dof(l_d, l_u)))
    return out


def distinguished_allocations(cfg: NetworkConfig) -> tuple[SymbolAllocation, SymbolAllocation]:
    """The two corner pairs (L_u, min(L_u(L_d-1), L_d)) and (min(L_d(L_u-1), L_u), L_d).

    They are feasible only when L_d, L_u >= 2; for L_d = 1 or L_u = 1 one
    component is zero.
    """
    l_d, l_u = cfg.l_d, cfg.l_u
    return (
        SymbolAllocation(l_u, min(l_u * (l_d - 1), l_d)),
        SymbolAllocation(min(l_d * (l_u - 1), l_u), l_d),
    )


def default_allocation(cfg: NetworkConfig) -> SymbolAllocation:
    """Feasible pair with the largest achieved DoF, ties broken toward larger n_d."""
    allocs = enumerate_allocations(cfg)
    if not allocs:
        raise InvalidAllocationError(
            f"no feasible allocation for (L_d, L_u) = ({cfg.l_d}, {cfg.l_u})"
        )
    return max(allocs, key=lambda pair: (pair[1], pair[0].n_d))[0]


def _as_exact(x) -> Fraction | None:
    if isinstance(x, Rational):
        return Fraction(x)
    return None


def region_feasible(d_d_sum, d_u_sum, cfg: NetworkConfig) -> bool:
    """Whether (sum DL DoF, sum UL DoF) lies in the no-CSIT outer region.

    The region is d_d + d_u / L_u <= 1 together with the MAC bound d_u <= 1.
    Rational inputs are tested exactly; floats get a 1e-12 slack.
    """
    if cfg.k_u < 1:
        raise InvalidArgumentError("the no-CSIT region needs K_u >= 1")
    if d_d_sum < 0 or d_u_sum < 0:
        raise InvalidArgumentError("DoF values must be nonnegative")
    l_u = cfg.l_u
    dd, du = _as_exact(d_d_sum), _as_exact(d_u_sum)
    if dd is not None and du is not None:
        return dd + du / l_u <= 1 and du <= 1
    slack = 1e-12
    return d_d_sum + d_u_sum / l_u <= 1 + slack and d_u_sum <= 1 + slack
