"""Finite-SNR achievable rates for the FD schemes and the HD/TDD baseline.

Rates are Gaussian-input mutual informations in bits per slot. A receiver is
described by a :class:`Link`: its noise covariance, the interference
covariance per unit transmit power P, the desired-signal covariance of each
user per unit P, and a time share (1/N for an N-slot FD block, 1/2 for a TDD
phase). Interference is treated as Gaussian noise. Several users on one link
(the UL multiple-access channel) are split by successive decoding, so
per-user rates add up to the joint-decoding sum rate.

Residual self-interference (``residual_si_power``, linear and relative to the
unit noise) is added to the BS receiver noise whenever the BS transmits in
the same block.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum
from typing import Sequence

import numpy as np

from .dof import enumerate_allocations
from .errors import DegenerateChannelError, InvalidScenarioError
from .network import (
    STREAM_SCHEDULE,
    ChannelRealization,
    NetworkConfig,
    sample_channels,
    stream,
)
from .no_csit import build_no_csit
from .partial_csit import build_partial_csit

LN2 = math.log(2.0)
RETRY_BUDGET = 3


class CsitModel(str, Enum):
    NO_CSIT = "no-csit"
    PARTIAL_CSIT = "partial-csit"


class Duplex(str, Enum):
    FD = "fd-proposed"
    HD = "hd-tdd"


SYSTEMS = ("fd-partial-csit", "fd-no-csit", "hd-partial-csit", "hd-no-csit")


def system_name(model: CsitModel, duplex: Duplex) -> str:
    return f"{'fd' if Duplex(duplex) is Duplex.FD else 'hd'}-{CsitModel(model).value}"


def db_to_linear(db) -> np.ndarray:
    return 10.0 ** (np.asarray(db, dtype=float) / 10.0)


@dataclass
class Link:
    """One receiver: ``noise + P * interference`` plus user signals ``P * signals[k]``."""

    noise: np.ndarray
    interference: np.ndarray
    signals: list[np.ndarray]
    share: float

    @classmethod
    def scalar(cls, gains: Sequence[float], share: float, noise: float = 1.0,
               interference: float = 0.0) -> "Link":
        return cls(
            np.array([[noise]], dtype=complex),
            np.array([[interference]], dtype=complex),
            [np.array([[g]], dtype=complex) for g in gains],
            share,
        )


def outer(v: np.ndarray) -> np.ndarray:
    """v v^H for a vector, or M M^H for a matrix."""
    v = np.asarray(v)
    if v.ndim == 1:
        v = v[:, None]
    return v @ v.conj().T


def _logdet2(stack: np.ndarray) -> np.ndarray:
    sign, logabs = np.linalg.slogdet(stack)
    return logabs / LN2


def link_rates(link: Link, powers, order: Sequence[int] | None = None) -> np.ndarray:
    """Per-user rates on ``link`` at each power in ``powers``.

    Returns an array of shape ``(len(link.signals), len(powers))``. Users are
    decoded in ``order`` (default: index order); the first one decoded sees
    all others as interference.
    """
    p = np.atleast_1d(np.asarray(powers, dtype=float))[:, None, None]
    base = link.noise[None] + p * link.interference[None]
    k = len(link.signals)
    order = list(range(k)) if order is None else list(order)
    rates = np.zeros((k, p.shape[0]))
    if k == 0:
        return rates
    tail = np.zeros_like(link.noise)
    prev = _logdet2(base)
    # walk from the last-decoded user backwards so each step adds one signal
    for idx in reversed(order):
        tail = tail + link.signals[idx]
        cur = _logdet2(base + p * tail[None])
        rates[idx] = link.share * (cur - prev)
        prev = cur
    return np.maximum(rates, 0.0)


# -- scenario and report types -------------------------------------------------------


@dataclass(frozen=True)
class SingleCellScenario:
    cfg: NetworkConfig
    model: CsitModel = CsitModel.PARTIAL_CSIT
    duplex: Duplex = Duplex.FD
    snr_db: float = 20.0
    residual_si_power: float = 1.0
    trials: int = 1000
    seed: int = 0

    def __post_init__(self):
        object.__setattr__(self, "model", CsitModel(self.model))
        object.__setattr__(self, "duplex", Duplex(self.duplex))
        if self.trials < 1:
            raise InvalidScenarioError("trials must be >= 1")
        if self.residual_si_power < 0:
            raise InvalidScenarioError("residual_si_power must be >= 0")

    def echo(self) -> dict:
        return {
            **self.cfg.as_dict(),
            "model": self.model.value,
            "duplex": self.duplex.value,
            "snr_db": self.snr_db,
            "residual_si_power": self.residual_si_power,
            "trials": self.trials,
            "seed": self.seed,
        }


@dataclass(frozen=True)
class RateReport:
    per_dl_rates: tuple[float, ...]
    per_ul_rates: tuple[float, ...]
    sum_rate: float
    metadata: dict = field(default_factory=dict)


# -- per-system link construction ------------------------------------------------------


@dataclass
class SystemLinks:
    """Receivers of one system in one block; ``dl[i]`` is None for an unserved DL user."""

    dl: list[Link | None]
    ul: Link | None
    ul_order: list[int] | None = None


def _single_user_links(cfg: NetworkConfig, cr: ChannelRealization, best_dl: bool) -> SystemLinks:
    """Fallback when a scheme cannot run: UL MAC if there are UL users, else one DL user."""
    dl: list[Link | None] = [None] * cfg.k_d
    if cfg.k_u >= 1:
        f = cr.bs_receive_csi()
        l_star = int(np.argmax((np.abs(f) ** 2).sum(axis=0)))
        return SystemLinks(dl, Link.scalar(np.abs(f[:, l_star]) ** 2, share=1.0))
    if cfg.k_d >= 1:
        if best_dl:
            h, _ = cr.bs_full_csi()
            i, k = np.unravel_index(np.argmax(np.abs(h)), h.shape)
        else:
            i, k = 0, 0
        dl[i] = Link.scalar([abs(cr.h[i, k]) ** 2], share=1.0)
    return SystemLinks(dl, None)


def fd_links_no_csit(cfg: NetworkConfig, cr: ChannelRealization, residual_si_power: float) -> SystemLinks:
    if cfg.k_d == 0 or cfg.k_u == 0:
        return _single_user_links(cfg, cr, best_dl=False)
    p = build_no_csit(cfg)
    n, l_u = p.n, cfg.l_u
    c_u = float(l_u)
    dl: list[Link | None] = [None] * cfg.k_d
    bs_transmits = p.n_dl_symbols > 0
    if bs_transmits:
        c_d = l_u / (l_u - 1)
        F = p.W1.conj().T
        h1 = cr.h[0, np.asarray(p.schedule.alpha) - 1]
        desired = F @ (h1[:, None] * p.W1)
        interference = sum(
            c_u * abs(cr.g[0, j]) ** 2 * outer(F @ p.w2) for j in range(cfg.k_u)
        )
        dl[0] = Link(outer(F), interference, [c_d * outer(desired)], 1.0 / n)
    beta = np.asarray(p.schedule.beta) - 1
    noise = (1.0 + (residual_si_power if bs_transmits else 0.0)) * np.eye(n)
    signals = [c_u * outer(cr.f[j, beta] * p.w2) for j in range(cfg.k_u)]
    ul = Link(noise, np.zeros((n, n), complex), signals, 1.0 / n)
    return SystemLinks(dl, ul)


def fd_links_partial_csit(cfg: NetworkConfig, cr: ChannelRealization, residual_si_power: float) -> SystemLinks:
    if cfg.k_d == 0 or cfg.k_u == 0 or not enumerate_allocations(cfg):
        return _single_user_links(cfg, cr, best_dl=True)
    p = build_partial_csit(cfg, cr)
    n = p.n
    c = float(n)  # per-entry symbol power L_d L_u P for DL and UL alike
    alpha = np.asarray(p.schedule.alpha) - 1
    beta = np.asarray(p.schedule.beta) - 1
    F = p.W3.conj().T
    FV = F @ p.V
    dl: list[Link | None] = [None] * cfg.k_d
    for i in range(cfg.l_d):
        hi = cr.h[i, alpha][:, None]
        eff = [F @ (hi * Uk) for Uk in p.U]
        interference = sum(c * outer(e) for k, e in enumerate(eff) if k != i)
        interference = interference + sum(
            c * abs(cr.g[i, j]) ** 2 * outer(FV) for j in range(cfg.k_u)
        )
        dl[i] = Link(outer(F), interference, [c * outer(eff[i])], 1.0 / n)
    noise = (1.0 + residual_si_power) * np.eye(n)
    signals = [c * outer(cr.f[j, beta][:, None] * p.V) for j in range(cfg.k_u)]
    ul = Link(noise, np.zeros((n, n), complex), signals, 1.0 / n)
    return SystemLinks(dl, ul)


def hd_links(cfg: NetworkConfig, cr: ChannelRealization, model: CsitModel,
             rng: np.random.Generator | None = None) -> SystemLinks:
    """TDD baseline: one DL user in the DL half, all UL users jointly in the UL half.

    Partial CSIT picks the strongest (user, transmit mode); without CSIT the
    pair is uniform at random from ``rng``. The BS always picks the receive
    mode with the largest total UL gain. A side with no users cedes its half.
    """
    dl_share = 0.5 if cfg.k_u else 1.0
    ul_share = 0.5 if cfg.k_d else 1.0
    dl: list[Link | None] = [None] * cfg.k_d
    if cfg.k_d:
        if CsitModel(model) is CsitModel.PARTIAL_CSIT:
            i, k = np.unravel_index(np.argmax(np.abs(cr.h)), cr.h.shape)
        else:
            rng = rng if rng is not None else np.random.default_rng(0)
            i, k = int(rng.integers(cfg.k_d)), int(rng.integers(cfg.m_d))
        dl[i] = Link.scalar([abs(cr.h[i, k]) ** 2], share=dl_share)
    ul = None
    if cfg.k_u:
        f = cr.bs_receive_csi()
        l_star = int(np.argmax((np.abs(f) ** 2).sum(axis=0)))
        ul = Link.scalar(np.abs(f[:, l_star]) ** 2, share=ul_share)
    return SystemLinks(dl, ul)


def system_links(system: str, cfg: NetworkConfig, cr: ChannelRealization,
                 residual_si_power: float, rng: np.random.Generator | None = None) -> SystemLinks:
    if system == "fd-partial-csit":
        return fd_links_partial_csit(cfg, cr, residual_si_power)
    if system == "fd-no-csit":
        return fd_links_no_csit(cfg, cr, residual_si_power)
    if system == "hd-partial-csit":
        return hd_links(cfg, cr, CsitModel.PARTIAL_CSIT)
    if system == "hd-no-csit":
        return hd_links(cfg, cr, CsitModel.NO_CSIT, rng)
    raise InvalidScenarioError(f"unknown system {system!r}")


def evaluate(links: SystemLinks, powers, ul_order: Sequence[int] | None = None) -> tuple[np.ndarray, np.ndarray]:
    """(dl_rates, ul_rates) arrays of shape (users, len(powers))."""
    powers = np.atleast_1d(np.asarray(powers, dtype=float))
    dl = np.zeros((len(links.dl), powers.size))
    for i, link in enumerate(links.dl):
        if link is not None:
            dl[i] = link_rates(link, powers)[0]
    if links.ul is None:
        ul = np.zeros((0, powers.size))
    else:
        ul = link_rates(links.ul, powers, ul_order)
    return dl, ul


def _rotation(k: int, trial: int) -> list[int]:
    """Round-robin decoding order across blocks."""
    if k == 0:
        return []
    s = trial % k
    return list(range(s, k)) + list(range(s))


def _report(scenario: SingleCellScenario, dl: np.ndarray, ul: np.ndarray, trial: int) -> RateReport:
    per_dl = tuple(float(r) for r in dl[:, 0])
    per_ul = tuple(float(r) for r in ul[:, 0])
    meta = {**scenario.echo(), "trial": trial}
    return RateReport(per_dl, per_ul, float(sum(per_dl) + sum(per_ul)), meta)


def fd_rate_single_trial(scenario: SingleCellScenario, cr: ChannelRealization, trial: int = 0) -> RateReport:
    """Rates of the proposed FD scheme for ``scenario.model`` on one realization."""
    if cr.cfg != scenario.cfg:
        raise InvalidScenarioError("realization does not match the scenario topology")
    links = system_links(system_name(scenario.model, Duplex.FD), scenario.cfg, cr,
                         scenario.residual_si_power)
    dl, ul = evaluate(links, db_to_linear(scenario.snr_db), _rotation(scenario.cfg.k_u, trial))
    return _report(scenario, dl, ul, trial)


def hd_rate_single_trial(scenario: SingleCellScenario, cr: ChannelRealization, trial: int = 0) -> RateReport:
    """Rates of the TDD baseline; the no-CSIT random pick uses the trial's schedule stream."""
    if cr.cfg != scenario.cfg:
        raise InvalidScenarioError("realization does not match the scenario topology")
    rng = stream(scenario.seed, trial, STREAM_SCHEDULE)
    links = hd_links(scenario.cfg, cr, scenario.model, rng)
    dl, ul = evaluate(links, db_to_linear(scenario.snr_db), _rotation(scenario.cfg.k_u, trial))
    return _report(scenario, dl, ul, trial)


# -- Monte Carlo sweeps ------------------------------------------------------------------


@dataclass(frozen=True)
class SweepRow:
    """Mean sum rate of one system at one grid point.

    ``gap`` is the mean per-trial difference to the HD baseline of the same
    CSIT model (zero for HD rows) and ``gap_stderr`` its standard error.
    """

    point: float
    system: str
    mean_sum_rate: float
    stderr: float
    gap: float
    gap_stderr: float


def _stderr(samples: np.ndarray, axis: int = 0) -> np.ndarray:
    n = samples.shape[axis]
    if n < 2:
        return np.zeros(np.delete(samples.shape, axis))
    return samples.std(axis=axis, ddof=1) / math.sqrt(n)


def summarize(point_values: Sequence[float], samples: dict[str, np.ndarray]) -> list[SweepRow]:
    """Rows from per-trial sum-rate samples of shape (trials, points) per system."""
    rows = []
    for p_idx, point in enumerate(point_values):
        for system in SYSTEMS:
            s = samples[system][:, p_idx]
            hd = samples["hd-" + system.split("-", 1)[1]][:, p_idx]
            diff = s - hd
            rows.append(SweepRow(
                float(point), system, float(s.mean()), float(_stderr(s)),
                float(diff.mean()), float(_stderr(diff)),
            ))
    return rows


def single_cell_samples(scenario: SingleCellScenario, snr_grid: Sequence[float]) -> dict[str, np.ndarray]:
    """Per-trial sum rates, shape (trials, len(snr_grid)), for every system.

    All systems and SNR points share each trial's channel draw. A draw that
    hits a degenerate channel is redrawn from a fresh sub-stream, at most
    ``RETRY_BUDGET`` times.
    """
    cfg = scenario.cfg
    powers = db_to_linear(snr_grid)
    out = {s: np.zeros((scenario.trials, powers.size)) for s in SYSTEMS}
    for t in range(scenario.trials):
        for attempt in range(RETRY_BUDGET + 1):
            cr = sample_channels(cfg, scenario.seed, t, attempt)
            try:
                per_system = {}
                for system in SYSTEMS:
                    rng = stream(scenario.seed, t, STREAM_SCHEDULE)
                    links = system_links(system, cfg, cr, scenario.residual_si_power, rng)
                    dl, ul = evaluate(links, powers, _rotation(cfg.k_u, t))
                    per_system[system] = dl.sum(axis=0) + ul.sum(axis=0)
                break
            except DegenerateChannelError:
                if attempt == RETRY_BUDGET:
                    raise
        for system, values in per_system.items():
            out[system][t] = values
    return out


def single_cell_sweep(scenario: SingleCellScenario, snr_grid: Sequence[float]) -> list[SweepRow]:
    """Mean sum rate and standard error per (SNR, system); deterministic in the seed."""
    return summarize(snr_grid, single_cell_samples(scenario, snr_grid))


def high_snr_slope(snr_grid: Sequence[float], mean_rates: Sequence[float]) -> float:
    """Least-squares slope of mean sum rate against log2 P."""
    x = np.asarray(snr_grid, dtype=float) / (10.0 * math.log10(2.0))
    return float(np.polyfit(x, np.asarray(mean_rates, dtype=float), 1)[0])
