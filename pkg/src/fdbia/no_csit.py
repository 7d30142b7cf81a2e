"""Blind IA without transmit-side CSI.

Over L_u slots the BS keeps transmit mode 1 and steps its receive mode
through 1..L_u. DL user 1 gets L_u - 1 symbols on the first L_u - 1 IDFT
columns (W1); every UL user sends one symbol on the last column (w2). Since
W1^H w2 = 0, user-to-user interference lands entirely outside the DL user's
filter, while the cycling receive modes give the BS a rank-L_u view of the
UL symbols.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .errors import DegenerateChannelError, InvalidDimensionError, UnsupportedTopologyError
from .linalg import idft_matrix
from .network import ChannelRealization, ModeSchedule, NetworkConfig

DEGENERATE_GAIN = 1e-12


@dataclass(frozen=True)
class NoCsitPrecoders:
    cfg: NetworkConfig
    W1: np.ndarray  # L_u x (L_u - 1)
    w2: np.ndarray  # length L_u
    schedule: ModeSchedule

    @property
    def n(self) -> int:
        return self.schedule.n

    @property
    def n_dl_symbols(self) -> int:
        return self.W1.shape[1]


@dataclass(frozen=True)
class UplinkEstimate:
    """Least-squares UL symbol estimates plus the number of resolvable streams."""

    symbols: list[np.ndarray]
    streams: int


def build_no_csit(cfg: NetworkConfig) -> NoCsitPrecoders:
    if cfg.k_d < 1 or cfg.k_u < 1:
        raise UnsupportedTopologyError(
            "the no-CSIT scheme needs K_d >= 1 and K_u >= 1; use single-user transmission"
        )
    l_u = cfg.l_u
    omega = idft_matrix(l_u)
    schedule = ModeSchedule(alpha=(1,) * l_u, beta=tuple(range(1, l_u + 1)))
    return NoCsitPrecoders(cfg, omega[:, : l_u - 1], omega[:, l_u - 1], schedule)


def encode_no_csit(p: NoCsitPrecoders, s_d1, s_u: Sequence) -> tuple[np.ndarray, list[np.ndarray]]:
    """x_d = W1 s_d1 and x_uj = w2 s_uj (one common UL precoder).

    For the average power constraint the caller draws s_d1 with
    E||s_d1||^2 = L_u P and each s_uj with E|s_uj|^2 = L_u P.
    """
    s_d1 = np.asarray(s_d1, dtype=np.complex128).reshape(-1)
    if s_d1.shape != (p.n_dl_symbols,):
        raise InvalidDimensionError(f"s_d1 must have length {p.n_dl_symbols}")
    s_u = np.asarray(s_u, dtype=np.complex128).reshape(-1)
    if s_u.shape != (p.cfg.k_u,):
        raise InvalidDimensionError(f"expected {p.cfg.k_u} UL symbols")
    return p.W1 @ s_d1, [p.w2 * s for s in s_u]


def decode_dl_no_csit(p: NoCsitPrecoders, cr: ChannelRealization, y_d1) -> np.ndarray:
    """Estimate s_d1 as W1^H y_d1 / h_1(1), using only DL user 1's own CSI."""
    y = np.asarray(y_d1, dtype=np.complex128).reshape(-1)
    if y.shape != (p.n,):
        raise InvalidDimensionError(f"y_d1 must have length {p.n}")
    h11 = cr.dl_user_csi(1)[0]
    if abs(h11) < DEGENERATE_GAIN:
        raise DegenerateChannelError(f"|h_1(1)| = {abs(h11):.3g} is numerically zero")
    return p.W1.conj().T @ y / h11


def ul_matrix(p: NoCsitPrecoders, cr: ChannelRealization) -> np.ndarray:
    """R = [F_1 w2, ..., F_Ku w2] built from the BS's receive-side CSI."""
    f = cr.bs_receive_csi()
    beta = np.asarray(p.schedule.beta) - 1
    return f[:, beta].T * p.w2[:, None]


def decode_ul_no_csit(p: NoCsitPrecoders, cr: ChannelRealization, y_u) -> UplinkEstimate:
    """Least-squares (minimum-norm when K_u > L_u) solve of y_u = R s_u.

    Raises:
        DegenerateChannelError: if rank(R) < min(K_u, L_u).
    """
    y = np.asarray(y_u, dtype=np.complex128).reshape(-1)
    if y.shape != (p.n,):
        raise InvalidDimensionError(f"y_u must have length {p.n}")
    R = ul_matrix(p, cr)
    # the SVD-based solver reports rank with the same threshold as numerical_rank
    s_hat, _, rank, _ = np.linalg.lstsq(R, y, rcond=None)
    if rank < min(p.cfg.k_u, p.cfg.l_u):
        raise DegenerateChannelError(f"rank(R) = {rank} < {min(p.cfg.k_u, p.cfg.l_u)}")
    return UplinkEstimate([np.atleast_1d(s) for s in s_hat], rank)
