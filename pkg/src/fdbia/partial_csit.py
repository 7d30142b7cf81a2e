"""Blind IA combined with zero forcing when the BS knows its own CSI.

Over L_d*L_u slots the BS cycles transmit modes with period L_d and receive
modes with period L_u. The IDFT matrix of that size is split into W3 (first
n_d columns, DL signal space) and W4 (next n_u columns, shared UL precoder
space). DL users project onto W3, which removes all UL signals, and the BS
zero-forces the residual DL cross-talk through the right inverse of

    P = [W3^H H_1; ...; W3^H H_Ld]        (L_d n_d x L_d L_u).

The BS decodes the UL from y_u = Q s_u + z_u with
Q = [F_1 W4, ..., F_Ku W4].

DL users 1..L_d are served; the remaining DL users get nothing in this block.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache
from typing import Sequence

import numpy as np

from .dof import SymbolAllocation, default_allocation
from .errors import (
    DegenerateChannelError,
    InvalidDimensionError,
    UnsupportedTopologyError,
)
from .linalg import block_diag, idft_matrix, right_pseudoinverse, right_pseudoinverse_stack
from .network import ChannelRealization, ModeSchedule, NetworkConfig
from .no_csit import UplinkEstimate


@lru_cache(maxsize=None)
def cyclic_schedule(l_d: int, l_u: int) -> ModeSchedule:
    """alpha(t) = (t-1) mod L_d + 1 and beta(t) = (t-1) mod L_u + 1, t in 1..L_d L_u."""
    t = np.arange(l_d * l_u)
    return ModeSchedule(alpha=tuple(t % l_d + 1), beta=tuple(t % l_u + 1))


@dataclass(frozen=True)
class PartialCsitPrecoders:
    cfg: NetworkConfig
    alloc: SymbolAllocation
    U: tuple[np.ndarray, ...]  # L_d blocks, each N x n_d
    V: np.ndarray  # N x n_u
    W3: np.ndarray
    W4: np.ndarray
    P: np.ndarray
    Q: np.ndarray
    p_dagger_norm: float
    schedule: ModeSchedule

    @property
    def n(self) -> int:
        return self.schedule.n

    @property
    def served_dl_users(self) -> range:
        return range(1, self.cfg.l_d + 1)


def signal_spaces(n: int, alloc: SymbolAllocation) -> tuple[np.ndarray, np.ndarray]:
    """(W3, W4): the first n_d and the next n_u columns of the n-point IDFT matrix."""
    omega = idft_matrix(n)
    return omega[:, : alloc.n_d], omega[:, alloc.n_d : alloc.n_d + alloc.n_u]


def build_partial_csit(
    cfg: NetworkConfig, cr: ChannelRealization, alloc: SymbolAllocation | None = None
) -> PartialCsitPrecoders:
    """Construct W3/W4, P, Q and the precoders [U_1..U_Ld] = P^+/||P^+||, V = W4/sqrt(n_u).

    Without ``alloc`` the feasible pair of largest DoF is used (ties toward
    larger n_d).

    Raises:
        UnsupportedTopologyError: if K_d = 0 or K_u = 0.
        InvalidAllocationError: if ``alloc`` is infeasible for (L_d, L_u).
        DegenerateChannelError: if P is not full row rank.
    """
    if cfg.k_d < 1 or cfg.k_u < 1:
        raise UnsupportedTopologyError("the partial-CSIT scheme needs K_d >= 1 and K_u >= 1")
    if cr.cfg != cfg:
        raise InvalidDimensionError("channel realization does not match the configuration")
    l_d, l_u = cfg.l_d, cfg.l_u
    if alloc is None:
        alloc = default_allocation(cfg)
    alloc.check(l_d, l_u)
    n = l_d * l_u
    schedule = cyclic_schedule(l_d, l_u)
    W3, W4 = signal_spaces(n, alloc)
    h, f = cr.bs_full_csi()
    stack = precoder_stack(cfg, h[None, :l_d], f[None], alloc)
    if not stack.full_rank[0]:
        raise DegenerateChannelError(f"P is rank deficient ({l_d * alloc.n_d} rows needed)")
    U_all = stack.U_all[0]
    U = tuple(U_all[:, i * alloc.n_d : (i + 1) * alloc.n_d] for i in range(l_d))
    V = W4 / np.sqrt(alloc.n_u)
    return PartialCsitPrecoders(
        cfg, alloc, U, V, W3, W4, stack.P[0], stack.Q[0], float(stack.p_dagger_norm[0]), schedule
    )


@dataclass(frozen=True)
class PrecoderStack:
    """Precoders for a batch of T draws; leading axis of every array is the draw."""

    P: np.ndarray  # T x L_d n_d x N
    Q: np.ndarray  # T x N x K_u n_u
    U_all: np.ndarray  # T x N x L_d n_d, [U_1 .. U_Ld] per draw
    p_dagger_norm: np.ndarray  # T
    full_rank: np.ndarray  # T, whether P was full row rank


def precoder_stack(cfg: NetworkConfig, h: np.ndarray, f: np.ndarray, alloc: SymbolAllocation) -> PrecoderStack:
    """Batched P, Q and normalised right inverse of P.

    ``h`` is T x L_d x M_d (served DL users only) and ``f`` is T x K_u x M_u.
    This is the one implementation of the precoder equations;
    :func:`build_partial_csit` calls it with T = 1.
    """
    l_d, l_u = cfg.l_d, cfg.l_u
    n = l_d * l_u
    schedule = cyclic_schedule(l_d, l_u)
    W3, W4 = signal_spaces(n, alloc)
    h_ext = h[..., np.asarray(schedule.alpha) - 1]  # T x L_d x N
    f_ext = f[..., np.asarray(schedule.beta) - 1]  # T x K_u x N
    t = h.shape[0]
    P = (W3.conj().T[None, None] * h_ext[:, :, None, :]).reshape(t, l_d * alloc.n_d, n)
    Q = (f_ext[..., None] * W4[None, None]).transpose(0, 2, 1, 3).reshape(t, n, -1)
    p_dag, ok = right_pseudoinverse_stack(P)
    p_norm = np.linalg.norm(p_dag, axis=(1, 2))
    p_norm = np.where(ok, p_norm, 1.0)
    return PrecoderStack(P, Q, p_dag / p_norm[:, None, None], p_norm, ok)


def encode_partial_csit(
    p: PartialCsitPrecoders, s_d: Sequence, s_u: Sequence
) -> tuple[np.ndarray, list[np.ndarray]]:
    """x_d = sum_i U_i s_di and x_uj = V s_uj.

    With sum_i ||U_i||^2 = ||V||^2 = 1, drawing every symbol entry with
    variance L_d L_u P meets the per-slot power P with equality.
    """
    n_d, n_u = p.alloc.n_d, p.alloc.n_u
    if len(s_d) != p.cfg.l_d:
        raise InvalidDimensionError(f"expected {p.cfg.l_d} DL symbol vectors")
    if len(s_u) != p.cfg.k_u:
        raise InvalidDimensionError(f"expected {p.cfg.k_u} UL symbol vectors")
    x_d = np.zeros(p.n, dtype=np.complex128)
    for Ui, s in zip(p.U, s_d):
        s = np.asarray(s, dtype=np.complex128).reshape(-1)
        if s.shape != (n_d,):
            raise InvalidDimensionError(f"DL symbol vectors must have length {n_d}")
        x_d = x_d + Ui @ s
    x_u = []
    for s in s_u:
        s = np.asarray(s, dtype=np.complex128).reshape(-1)
        if s.shape != (n_u,):
            raise InvalidDimensionError(f"UL symbol vectors must have length {n_u}")
        x_u.append(p.V @ s)
    return x_d, x_u


def decode_dl_partial_csit(p: PartialCsitPrecoders, i: int, y_di) -> np.ndarray:
    """||P^+|| W3^H y_di; the scale ||P^+|| is a per-block scheme constant."""
    if i not in p.served_dl_users:
        raise InvalidDimensionError(f"DL user {i} is not served (served: 1..{p.cfg.l_d})")
    y = np.asarray(y_di, dtype=np.complex128).reshape(-1)
    if y.shape != (p.n,):
        raise InvalidDimensionError(f"y_d{i} must have length {p.n}")
    return p.p_dagger_norm * (p.W3.conj().T @ y)


def decode_ul_partial_csit(p: PartialCsitPrecoders, y_u) -> UplinkEstimate:
    """Least-squares solve of y_u = Q s_u (minimum norm if Q is rank deficient).

    Symbols are per UL user in units of ``s_uj`` (the 1/sqrt(n_u) in V is
    undone). Every user is exactly recovered in the noiseless case when
    K_u n_u <= rank(Q).
    """
    y = np.asarray(y_u, dtype=np.complex128).reshape(-1)
    if y.shape != (p.n,):
        raise InvalidDimensionError(f"y_u must have length {p.n}")
    # the SVD-based solver reports rank with the same threshold as numerical_rank
    coeffs, _, rank, _ = np.linalg.lstsq(p.Q, y, rcond=None)
    need = p.cfg.l_u * p.alloc.n_u
    if rank < need:
        raise DegenerateChannelError(f"rank(Q) = {rank} < L_u n_u = {need}")
    coeffs = coeffs * np.sqrt(p.alloc.n_u)
    n_u = p.alloc.n_u
    return UplinkEstimate([coeffs[j * n_u : (j + 1) * n_u] for j in range(p.cfg.k_u)], rank)


@dataclass(frozen=True)
class Lemma1Report:
    rank_P: int
    rank_Q: int
    residual_A: float
    residual_B: float

    def holds(self, alloc: SymbolAllocation, cfg: NetworkConfig, tol: float = 1e-8) -> bool:
        return (
            self.rank_P == cfg.l_d * alloc.n_d
            and self.rank_Q >= cfg.l_u * alloc.n_u
            and self.residual_A <= tol
            and self.residual_B <= tol
        )


def _mode_selector(cycle: int, repeats: int, k: int) -> np.ndarray:
    """I_repeats kron e_cycle(k): picks slots k, k+cycle, ... of a length cycle*repeats block."""
    e = np.zeros((cycle, 1))
    e[k - 1, 0] = 1.0
    return np.kron(np.eye(repeats), e)


@dataclass(frozen=True)
class Lemma1Stack:
    """:class:`Lemma1Report` fields as arrays over a batch of draws."""

    rank_P: np.ndarray
    rank_Q: np.ndarray
    residual_A: np.ndarray
    residual_B: np.ndarray

    def holds(self, alloc: SymbolAllocation, cfg: NetworkConfig, tol: float = 1e-8) -> np.ndarray:
        return (
            (self.rank_P == cfg.l_d * alloc.n_d)
            & (self.rank_Q >= cfg.l_u * alloc.n_u)
            & (self.residual_A <= tol)
            & (self.residual_B <= tol)
        )


def _stack_rank(m: np.ndarray) -> np.ndarray:
    sv = np.linalg.svd(m, compute_uv=False)
    return np.count_nonzero(sv > max(m.shape[-2:]) * sv[..., :1] * np.finfo(np.float64).eps, axis=-1)


def lemma1_stack(cfg: NetworkConfig, h: np.ndarray, f: np.ndarray, alloc: SymbolAllocation) -> Lemma1Stack:
    """Rank claims on P and Q through the column-permutation argument, over a batch.

    ``h`` is T x L_d x M_d and ``f`` is T x K_u x M_u as in :func:`precoder_stack`.
    A is P with its columns regrouped by transmit mode; its (i, k) block is
    h_i(k) A_k with A_k = W3^H (I_Lu kron e_Ld(k)), so
    A diag(A_1^+, ..., A_Ld^+) must equal H kron I_nd where H[i, k] = h_i(k).
    B mirrors this for the transposed leading L_u user blocks of Q, grouped by
    receive mode, against F^T kron I_nu with F[l, j] = f_j(l). Residuals are
    Frobenius norms and are reported raw.
    """
    l_d, l_u = cfg.l_d, cfg.l_u
    n_d, n_u = alloc.n_d, alloc.n_u
    st = precoder_stack(cfg, h, f, alloc)
    W3, W4 = signal_spaces(l_d * l_u, alloc)

    # the block inverses depend on the IDFT split only, not on the draw
    order_a = [k + m * l_d for k in range(l_d) for m in range(l_u)]
    A = st.P[:, :, order_a]
    A_blocks = [W3.conj().T @ _mode_selector(l_d, l_u, k) for k in range(1, l_d + 1)]
    inv_a = block_diag([right_pseudoinverse(a) for a in A_blocks])
    H = h[:, :l_d, :l_d]
    target_a = np.einsum("tik,rs->tirks", H, np.eye(n_d)).reshape(len(h), l_d * n_d, l_d * n_d)
    residual_a = np.linalg.norm(A @ inv_a - target_a, axis=(1, 2))

    Q_sub = st.Q[:, :, : l_u * n_u]
    order_b = [l + m * l_u for l in range(l_u) for m in range(l_d)]
    B = Q_sub.swapaxes(1, 2)[:, :, order_b]
    B_blocks = [W4.T @ _mode_selector(l_u, l_d, l) for l in range(1, l_u + 1)]
    inv_b = block_diag([right_pseudoinverse(b) for b in B_blocks])
    F = f[:, :l_u, :l_u]  # F^T with F[l, j] = f_j(l)
    target_b = np.einsum("tjl,rs->tjrls", F, np.eye(n_u)).reshape(len(h), l_u * n_u, l_u * n_u)
    residual_b = np.linalg.norm(B @ inv_b - target_b, axis=(1, 2))

    return Lemma1Stack(_stack_rank(st.P), _stack_rank(st.Q), residual_a, residual_b)


def verify_lemma1(
    cfg: NetworkConfig, cr: ChannelRealization, alloc: SymbolAllocation
) -> Lemma1Report:
    """:func:`lemma1_stack` on a single realization."""
    if cfg.k_d < 1 or cfg.k_u < 1:
        raise UnsupportedTopologyError("the partial-CSIT scheme needs K_d >= 1 and K_u >= 1")
    if cr.cfg != cfg:
        raise InvalidDimensionError("channel realization does not match the configuration")
    alloc.check(cfg.l_d, cfg.l_u)
    h, f = cr.bs_full_csi()
    st = lemma1_stack(cfg, h[None, : cfg.l_d], f[None], alloc)
    return Lemma1Report(
        int(st.rank_P[0]), int(st.rank_Q[0]), float(st.residual_A[0]), float(st.residual_B[0])
    )
