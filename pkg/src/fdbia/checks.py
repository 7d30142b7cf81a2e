"""Self-checks shared by the ``scheme-check`` and ``verify`` commands."""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from typing import Sequence

import numpy as np

from .dof import (
    SymbolAllocation,
    enumerate_allocations,
    region_feasible,
    sum_dof_no_csit,
    sum_dof_partial_csit,
)
from .linalg import idft_matrix
from .network import (
    STREAM_SCHEDULE,
    ChannelRealization,
    NetworkConfig,
    apply_channel,
    complex_normal,
    sample_channels,
    stream,
)
from .no_csit import build_no_csit, decode_dl_no_csit, decode_ul_no_csit, encode_no_csit
from .partial_csit import (
    build_partial_csit,
    cyclic_schedule,
    decode_dl_partial_csit,
    decode_ul_partial_csit,
    encode_partial_csit,
    precoder_stack,
    signal_spaces,
    verify_lemma1,
)

RECOVERY_TOL = 1e-8
ALIGNMENT_TOL = 1e-12


def _rel(est, true) -> float:
    est, true = np.asarray(est), np.asarray(true)
    return float(np.linalg.norm(est - true) / max(np.linalg.norm(true), 1e-300))


def no_csit_recovery_error(cfg: NetworkConfig, cr: ChannelRealization, rng: np.random.Generator) -> float:
    """Worst relative error over DL user 1 and, when K_u <= L_u, every UL user."""
    p = build_no_csit(cfg)
    s_d = complex_normal(rng, p.n_dl_symbols)
    s_u = complex_normal(rng, cfg.k_u)
    x_d, x_u = encode_no_csit(p, s_d, s_u)
    y_d, y_u = apply_channel(cr, p.schedule, x_d, x_u)
    err = _rel(decode_dl_no_csit(p, cr, y_d[0]), s_d) if p.n_dl_symbols else 0.0
    if cfg.k_u <= cfg.l_u:
        est = decode_ul_no_csit(p, cr, y_u)
        err = max(err, _rel(np.concatenate(est.symbols), s_u))
    return err


def partial_csit_recovery_error(
    cfg: NetworkConfig, cr: ChannelRealization, alloc: SymbolAllocation, rng: np.random.Generator
) -> float:
    """Worst relative error over served DL users and, when K_u <= L_u, every UL user."""
    p = build_partial_csit(cfg, cr, alloc)
    s_d = [complex_normal(rng, alloc.n_d) for _ in range(cfg.l_d)]
    s_u = [complex_normal(rng, alloc.n_u) for _ in range(cfg.k_u)]
    x_d, x_u = encode_partial_csit(p, s_d, s_u)
    y_d, y_u = apply_channel(cr, p.schedule, x_d, x_u)
    err = max(_rel(decode_dl_partial_csit(p, i, y_d[i - 1]), s_d[i - 1]) for i in p.served_dl_users)
    if cfg.k_u <= cfg.l_u:
        est = decode_ul_partial_csit(p, y_u)
        err = max(err, max(_rel(e, s) for e, s in zip(est.symbols, s_u)))
    return err


def partial_csit_estimates(
    cfg: NetworkConfig, alloc: SymbolAllocation, crs: Sequence[ChannelRealization], rng: np.random.Generator
) -> tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray | None, np.ndarray]:
    """Noiseless encode, channel and decode of the partial-CSIT scheme over a batch.

    Precoders come from :func:`precoder_stack`; encoding, the block channel
    and decoding are the per-draw linear maps written over a leading draw
    axis. Symbols are drawn from ``rng`` in the same order as
    :func:`partial_csit_recovery_error` uses for a single draw.

    Returns ``(s_d, est_d, s_u, est_u, usable)`` with shapes (T, L_d, n_d) and
    (T, K_u, n_u); ``est_u`` is None when K_u > L_u. ``usable`` flags draws
    where P has full row rank and Q has rank at least L_u n_u.
    """
    l_d, l_u, k_u = cfg.l_d, cfg.l_u, cfg.k_u
    n_d, n_u = alloc.n_d, alloc.n_u
    alloc.check(l_d, l_u)
    h = np.stack([cr.h[:l_d] for cr in crs])
    f = np.stack([cr.f for cr in crs])
    g = np.stack([cr.g[:l_d] for cr in crs])
    t = len(crs)
    st = precoder_stack(cfg, h, f, alloc)
    sched = cyclic_schedule(l_d, l_u)
    W3, W4 = signal_spaces(l_d * l_u, alloc)
    V = W4 / np.sqrt(n_u)
    s_d = complex_normal(rng, (t, l_d, n_d))
    s_u = complex_normal(rng, (t, k_u, n_u))

    x_d = np.einsum("tnk,tk->tn", st.U_all, s_d.reshape(t, -1))
    x_u = np.einsum("nc,tjc->tjn", V, s_u)
    h_ext = h[..., np.asarray(sched.alpha) - 1]
    f_ext = f[..., np.asarray(sched.beta) - 1]
    y_d = h_ext * x_d[:, None, :] + np.einsum("tij,tjn->tin", g, x_u)
    y_u = np.einsum("tjn,tjn->tn", f_ext, x_u)

    est_d = st.p_dagger_norm[:, None, None] * np.einsum("nr,tin->tir", W3.conj(), y_d)
    usable = st.full_rank.copy()
    est_u = None
    if k_u <= l_u:
        # one SVD gives both the rank (numerical_rank's threshold) and the pseudoinverse solve
        u, sv, vh = np.linalg.svd(st.Q, full_matrices=False)
        keep = sv > max(st.Q.shape[1:]) * sv[:, :1] * np.finfo(np.float64).eps
        usable &= keep.sum(axis=1) >= l_u * n_u
        coef = np.einsum("tnc,tn->tc", u.conj(), y_u) / np.where(keep, sv, np.inf)
        est_u = (np.einsum("tcm,tc->tm", vh.conj(), coef) * np.sqrt(n_u)).reshape(t, k_u, n_u)
    return s_d, est_d, s_u, est_u, usable


def partial_csit_recovery_errors(
    cfg: NetworkConfig, alloc: SymbolAllocation, crs: Sequence[ChannelRealization], rng: np.random.Generator
) -> np.ndarray:
    """Batched :func:`partial_csit_recovery_error`: one worst relative error per draw (inf if unusable)."""
    s_d, est_d, s_u, est_u, usable = partial_csit_estimates(cfg, alloc, crs, rng)
    err = (np.linalg.norm(est_d - s_d, axis=-1) / np.linalg.norm(s_d, axis=-1)).max(axis=1)
    if est_u is not None:
        err_u = (np.linalg.norm(est_u - s_u, axis=-1) / np.linalg.norm(s_u, axis=-1)).max(axis=1)
        err = np.maximum(err, err_u)
    return np.where(usable, err, np.inf)


@dataclass
class CheckResult:
    name: str
    passed: bool
    detail: str


def check_alignment(max_block: int = 36) -> CheckResult:
    worst = 0.0
    for n in range(1, max_block + 1):
        omega = idft_matrix(n)
        # no-CSIT: first n-1 columns against the last; partial: any split n_d + n_u <= n
        worst = max(worst, float(np.abs(omega[:, : n - 1].conj().T @ omega[:, n - 1 :]).max(initial=0.0)))
        gram = omega.conj().T @ omega
        off = gram - np.eye(n)
        worst = max(worst, float(np.abs(off).max()))
    return CheckResult("alignment", worst <= ALIGNMENT_TOL, f"max |W^H W_perp| = {worst:.2e}")


def check_dof(max_k: int = 5) -> CheckResult:
    bad = 0
    for kd in range(0, max_k + 1):
        for ku in range(0, max_k + 1):
            for md in range(1, max_k + 1):
                for mu in range(1, max_k + 1):
                    cfg = NetworkConfig(kd, ku, md, mu)
                    bounds = sum_dof_partial_csit(cfg)
                    if sum_dof_no_csit(cfg) > bounds.upper:
                        bad += 1
                    if kd and ku:
                        bad += sum(dof > bounds.upper for _, dof in enumerate_allocations(cfg))
                        corner = (1 - Fraction(1, cfg.l_u), Fraction(1))
                        if not region_feasible(*corner, cfg) or sum(corner) != sum_dof_no_csit(cfg):
                            bad += 1
    return CheckResult("dof-consistency", bad == 0, f"{bad} violations")


def check_schemes(trials: int, seed: int, max_l: int = 3) -> CheckResult:
    worst, lemma_bad, count = 0.0, 0, 0
    for l_d in range(1, max_l + 1):
        for l_u in range(1, max_l + 1):
            cfg = NetworkConfig(l_d, l_u, l_d, l_u)
            allocs = enumerate_allocations(cfg)
            for t in range(trials):
                cr = sample_channels(cfg, seed, t)
                rng = stream(seed, t, STREAM_SCHEDULE)
                worst = max(worst, no_csit_recovery_error(cfg, cr, rng))
                for alloc, _ in allocs:
                    worst = max(worst, partial_csit_recovery_error(cfg, cr, alloc, rng))
                    lemma_bad += not verify_lemma1(cfg, cr, alloc).holds(alloc, cfg)
                    count += 1
    ok = worst <= RECOVERY_TOL and lemma_bad == 0
    return CheckResult(
        "schemes", ok, f"max relative error {worst:.2e}; rank-claim failures {lemma_bad}/{count}"
    )


def run_all(trials: int = 20, seed: int = 0) -> list[CheckResult]:
    return [check_alignment(), check_dof(), check_schemes(trials, seed)]
