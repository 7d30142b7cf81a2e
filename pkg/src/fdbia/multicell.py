"""Seven-cell wrap-around sum-rate experiment with user scheduling.

Layout: flat-top hexagons of circumradius 1, the centre cell at the origin
and six neighbours at distance sqrt(3). Wrap-around is a torus: a distance
is the minimum over the seven images of the far end shifted by 0 or by one
of the six cluster translations (length sqrt(21)).

Every link gain is CN(0, 1) fading times d^(-alpha/2), with d floored at
MIN_DISTANCE. Transmit power is P_ref, the SNR at unit distance. Only the
centre cell's rates are reported; the wrap-around makes every cell alike.
Inter-cell interference is treated as Gaussian noise.

Random streams are keyed by ``(drop, kind, cell)`` and not by J. User u's
position and fading are therefore the same for every J > u, so
populations are nested across the J grid and gaps at different J are
paired samples.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum
from typing import Sequence

import numpy as np

from .errors import DegenerateChannelError, InvalidScenarioError
from .network import ChannelRealization, NetworkConfig, complex_normal
from .no_csit import build_no_csit
from .partial_csit import build_partial_csit
from .rates import (
    RETRY_BUDGET,
    SYSTEMS,
    Link,
    _stderr,
    db_to_linear,
    link_rates,
    outer,
)

N_CELLS = 7
MIN_DISTANCE = 0.05
_CANDIDATES = 32  # rejection-sampling candidates per user; 0.25**32 odds of running out

# stream kinds
_DL_POS, _UL_POS, _DL_FADE, _UL_FADE, _CROSS, _BSBS, _MODES, _OVERFLOW = range(8)


class Scheduler(str, Enum):
    ROUND_ROBIN = "round-robin"
    MAX_SNR = "max-snr"


def cell_centers() -> np.ndarray:
    """(7, 2) array: origin, then neighbours at angles 30 + 60k degrees."""
    ang = np.deg2rad(30.0 + 60.0 * np.arange(6))
    ring = math.sqrt(3.0) * np.stack([np.cos(ang), np.sin(ang)], axis=1)
    return np.vstack([np.zeros((1, 2)), ring])


def wrap_shifts() -> np.ndarray:
    """(7, 2) image shifts: zero plus 2 c_k + c_(k+1) for the six neighbour centres."""
    c = cell_centers()[1:]
    shifts = 2.0 * c + np.roll(c, -1, axis=0)
    return np.vstack([np.zeros((1, 2)), shifts])


_CENTERS = cell_centers()
_SHIFTS = wrap_shifts()


def wrap_distance(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Wrap-around distances from points ``a`` (..., 2) to points ``b`` (m, 2), shape (..., m)."""
    diff = np.asarray(a, dtype=float)[..., None, :] - np.asarray(b, dtype=float)
    return np.linalg.norm(diff[..., None, :] + _SHIFTS, axis=-1).min(axis=-1)


def in_hexagon(xy: np.ndarray) -> np.ndarray:
    """Membership in the flat-top unit hexagon centred at the origin."""
    x, y = np.abs(xy[..., 0]), np.abs(xy[..., 1])
    return (y <= math.sqrt(3.0) / 2.0) & (math.sqrt(3.0) * x + y <= math.sqrt(3.0))


def _drop_stream(seed: int, drop: int, kind: int, cell: int = 0) -> np.random.Generator:
    ss = np.random.SeedSequence(int(seed), spawn_key=(int(drop), 7, int(kind), int(cell)))
    return np.random.Generator(np.random.Philox(ss))


def drop_positions(seed: int, drop: int, kind: int, cell: int, count: int) -> np.ndarray:
    """``count`` uniform points in hexagon ``cell``; user u's point does not depend on count."""
    rng = _drop_stream(seed, drop, kind, cell)
    box = np.array([1.0, math.sqrt(3.0) / 2.0])
    cand = (rng.random((count, _CANDIDATES, 2)) * 2.0 - 1.0) * box
    ok = in_hexagon(cand)
    out = np.empty((count, 2))
    overflow = None
    for u in range(count):
        hits = np.flatnonzero(ok[u])
        if hits.size:
            out[u] = cand[u, hits[0]]
            continue
        if overflow is None:
            overflow = _drop_stream(seed, drop, _OVERFLOW + kind, cell)
        while True:
            p = (overflow.random(2) * 2.0 - 1.0) * box
            if in_hexagon(p):
                out[u] = p
                break
    return out + _CENTERS[cell]


@dataclass(frozen=True)
class MulticellScenario:
    cfg: NetworkConfig
    j: int = 2
    alpha_pl: float = 3.0
    p_ref_db: float = 10.0
    scheduler: Scheduler = Scheduler.MAX_SNR
    residual_si_power: float = 1.0
    trials: int = 1000
    seed: int = 0

    def __post_init__(self):
        object.__setattr__(self, "scheduler", Scheduler(self.scheduler))
        if self.alpha_pl <= 0:
            raise InvalidScenarioError("alpha_pl must be positive")
        if self.trials < 1:
            raise InvalidScenarioError("trials must be >= 1")
        if self.residual_si_power < 0:
            raise InvalidScenarioError("residual_si_power must be >= 0")
        self.check_j(self.j)

    def check_j(self, j: int) -> None:
        need = max(self.cfg.k_d, self.cfg.k_u, 2)
        if j < need:
            raise InvalidScenarioError(f"J = {j} < {need}: not enough users to schedule")

    def echo(self) -> dict:
        return {
            **self.cfg.as_dict(),
            "J": self.j,
            "alpha_pl": self.alpha_pl,
            "p_ref_db": self.p_ref_db,
            "scheduler": self.scheduler.value,
            "residual_si_power": self.residual_si_power,
            "trials": self.trials,
            "seed": self.seed,
            "bs_bs_channel": "CN(0,1) with path loss per (tx mode, rx mode) pair",
        }


@dataclass
class Drop:
    """All gains of one drop, path loss included.

    h[b, c, u, k]: BS b transmit mode k to DL user u of cell c.
    f[c, v, b, l]: UL user v of cell c to BS b receive mode l.
    g[u, c, v]: UL user v of cell c to DL user u of the centre cell.
    bb[a, b, k, l]: BS a transmit mode k to BS b receive mode l.
    modes[c]: uniform transmit-mode pick of BS c when it lacks DL CSI.
    """

    h: np.ndarray
    f: np.ndarray
    g: np.ndarray
    bb: np.ndarray
    modes: np.ndarray


def _path_gain(d: np.ndarray, alpha: float) -> np.ndarray:
    return np.maximum(d, MIN_DISTANCE) ** (-alpha / 2.0)


def make_drop(scenario: MulticellScenario, j: int, drop: int) -> Drop:
    cfg, seed, a = scenario.cfg, scenario.seed, scenario.alpha_pl
    dl_pos = np.stack([drop_positions(seed, drop, _DL_POS, c, j) for c in range(N_CELLS)])
    ul_pos = np.stack([drop_positions(seed, drop, _UL_POS, c, j) for c in range(N_CELLS)])

    # fading is drawn per user (leading axis) so it is prefix-stable in J
    h_fade = np.stack([
        complex_normal(_drop_stream(seed, drop, _DL_FADE, c), (j, N_CELLS, cfg.m_d)).transpose(1, 0, 2)
        for c in range(N_CELLS)
    ], axis=1)  # (b, c, u, k)
    d_dl = np.stack([wrap_distance(dl_pos[c], _CENTERS).T for c in range(N_CELLS)], axis=1)  # (b, c, u)
    h = h_fade * _path_gain(d_dl, a)[..., None]

    f_fade = np.stack([
        complex_normal(_drop_stream(seed, drop, _UL_FADE, c), (j, N_CELLS, cfg.m_u))
        for c in range(N_CELLS)
    ])  # (c, v, b, l)
    d_ul = np.stack([wrap_distance(ul_pos[c], _CENTERS) for c in range(N_CELLS)])  # (c, v, b)
    f = f_fade * _path_gain(d_ul, a)[..., None]

    g_fade = complex_normal(_drop_stream(seed, drop, _CROSS), (j, N_CELLS, j))
    d_g = np.stack([wrap_distance(dl_pos[0], ul_pos[c]) for c in range(N_CELLS)], axis=1)  # (u, c, v)
    g = g_fade * _path_gain(d_g, a)

    bb_fade = complex_normal(_drop_stream(seed, drop, _BSBS), (N_CELLS, N_CELLS, cfg.m_d, cfg.m_u))
    d_bb = wrap_distance(_CENTERS, _CENTERS)
    bb = bb_fade * _path_gain(d_bb, a)[..., None, None]

    rng = _drop_stream(seed, drop, _MODES)
    modes = rng.integers(cfg.m_d, size=N_CELLS)
    return Drop(h, f, g, bb, modes)


def schedule(metric: np.ndarray, n: int, scheduler: Scheduler, drop: int) -> np.ndarray:
    """Indices of the ``n`` scheduled users among ``len(metric)``, ascending.

    max-SNR takes the n largest metrics (lower index wins ties); round-robin
    takes (drop * n + k) mod J for k < n.
    """
    j = len(metric)
    if Scheduler(scheduler) is Scheduler.MAX_SNR:
        picked = np.argsort(-metric, kind="stable")[:n]
    else:
        picked = (drop * n + np.arange(n)) % j
    return np.sort(picked)


@dataclass
class _Cell:
    dl: np.ndarray  # scheduled DL user indices
    ul: np.ndarray


def _schedules(scenario: MulticellScenario, d: Drop, drop: int, n_dl: int, scheduler: Scheduler) -> list[_Cell]:
    out = []
    for c in range(N_CELLS):
        dl_metric = (np.abs(d.h[c, c]) ** 2).max(axis=1)
        ul_metric = (np.abs(d.f[c, :, c]) ** 2).max(axis=1)
        out.append(_Cell(
            schedule(dl_metric, n_dl, scheduler, drop),
            schedule(ul_metric, scenario.cfg.k_u, scheduler, drop),
        ))
    return out


def _fd_partial(scenario: MulticellScenario, d: Drop, cells: list[_Cell], p: float, cache: dict):
    cfg = scenario.cfg
    pre = []
    for c, cell in enumerate(cells):
        key = (c, tuple(cell.dl), tuple(cell.ul))
        if key not in cache:
            cr = ChannelRealization(cfg, d.h[c, c][cell.dl], d.f[c][cell.ul][:, c], np.zeros((cfg.k_d, cfg.k_u)))
            cache[key] = build_partial_csit(cfg, cr)
        pre.append(cache[key])
    p0 = pre[0]
    n, pw = p0.n, float(p0.n)
    alpha = np.asarray(p0.schedule.alpha) - 1
    beta = np.asarray(p0.schedule.beta) - 1
    F = p0.W3.conj().T
    FV = F @ p0.V
    u_all = [np.hstack(q.U) for q in pre]

    dl_rates = []
    for i in range(cfg.l_d):
        u = cells[0].dl[i]
        eff = [F @ (d.h[0, 0, u, alpha][:, None] * Uk) for Uk in p0.U]
        interf = sum(pw * outer(e) for k, e in enumerate(eff) if k != i)
        for c in range(1, N_CELLS):
            interf = interf + pw * outer(F @ (d.h[c, 0, u, alpha][:, None] * u_all[c]))
        ul_gain = sum(float(np.sum(np.abs(d.g[u, c, cells[c].ul]) ** 2)) for c in range(N_CELLS))
        interf = interf + pw * ul_gain * outer(FV)
        link = Link(outer(F), interf, [pw * outer(eff[i])], 1.0 / n)
        dl_rates.append(link_rates(link, p)[0])

    signals = [pw * outer(d.f[0, v, 0, beta][:, None] * p0.V) for v in cells[0].ul]
    interf = np.zeros((n, n), complex)
    for c in range(1, N_CELLS):
        for v in cells[c].ul:
            interf = interf + pw * outer(d.f[c, v, 0, beta][:, None] * p0.V)
        interf = interf + pw * outer(d.bb[c, 0, alpha, beta][:, None] * u_all[c])
    noise = (1.0 + scenario.residual_si_power) * np.eye(n)
    ul = link_rates(Link(noise, interf, signals, 1.0 / n), p)
    return float(np.sum(dl_rates) + ul.sum())


def _fd_no_csit(scenario: MulticellScenario, d: Drop, cells: list[_Cell], p: float):
    cfg = scenario.cfg
    pre = build_no_csit(cfg)
    n, l_u = pre.n, cfg.l_u
    beta = np.asarray(pre.schedule.beta) - 1
    c_u = float(l_u)
    total = 0.0
    if pre.n_dl_symbols:
        c_d = l_u / (l_u - 1)
        F = pre.W1.conj().T
        u = cells[0].dl[0]
        # transmit mode 1 throughout, so each BS reaches the user through a scalar
        desired = c_d * abs(d.h[0, 0, u, 0]) ** 2 * outer(F @ pre.W1)
        interf = sum(c_d * abs(d.h[c, 0, u, 0]) ** 2 * outer(F @ pre.W1) for c in range(1, N_CELLS))
        ul_gain = sum(float(np.sum(np.abs(d.g[u, c, cells[c].ul]) ** 2)) for c in range(N_CELLS))
        interf = interf + c_u * ul_gain * outer(F @ pre.w2)
        total += float(link_rates(Link(outer(F), interf, [desired], 1.0 / n), p).sum())
    signals = [c_u * outer(d.f[0, v, 0, beta] * pre.w2) for v in cells[0].ul]
    interf = np.zeros((n, n), complex)
    for c in range(1, N_CELLS):
        for v in cells[c].ul:
            interf = interf + c_u * outer(d.f[c, v, 0, beta] * pre.w2)
        if pre.n_dl_symbols:
            interf = interf + c_d * outer(d.bb[c, 0, 0, beta][:, None] * pre.W1)
    si = scenario.residual_si_power if pre.n_dl_symbols else 0.0
    total += float(link_rates(Link((1.0 + si) * np.eye(n), interf, signals, 1.0 / n), p).sum())
    return total


def _hd(scenario: MulticellScenario, d: Drop, cells: list[_Cell], p: float, partial: bool):
    # DL half: each BS serves its scheduled user on its best (or a random) mode
    tx_mode = []
    for c, cell in enumerate(cells):
        u = cell.dl[0]
        tx_mode.append(int(np.argmax(np.abs(d.h[c, c, u]))) if partial else int(d.modes[c]))
    u0 = cells[0].dl[0]
    sig = abs(d.h[0, 0, u0, tx_mode[0]]) ** 2
    interf = sum(abs(d.h[c, 0, u0, tx_mode[c]]) ** 2 for c in range(1, N_CELLS))
    total = float(link_rates(Link.scalar([sig], 0.5, interference=interf), p).sum())
    # UL half: BS 0 listens on the mode with the largest total gain from its own users
    own = d.f[0][cells[0].ul][:, 0]  # (K_u, M_u)
    l_star = int(np.argmax((np.abs(own) ** 2).sum(axis=0)))
    interf = sum(float(np.sum(np.abs(d.f[c][cells[c].ul][:, 0, l_star]) ** 2)) for c in range(1, N_CELLS))
    total += float(link_rates(Link.scalar(np.abs(own[:, l_star]) ** 2, 0.5, interference=interf), p).sum())
    return total


def drop_sum_rates(
    scenario: MulticellScenario, d: Drop, drop: int, scheduler: Scheduler, cache: dict | None = None
) -> dict[str, float]:
    """Centre-cell sum rate of every system for one drop.

    ``cache`` may carry precoders between calls on the same drop.
    """
    cache = {} if cache is None else cache
    cfg = scenario.cfg
    if cfg.k_d < 1 or cfg.k_u < 1 or cfg.l_d * cfg.l_u < 2:
        raise InvalidScenarioError("the multicell experiment needs K_d, K_u >= 1 and L_d L_u >= 2")
    p = float(db_to_linear(scenario.p_ref_db))
    one = _schedules(scenario, d, drop, 1, scheduler)
    many = _schedules(scenario, d, drop, cfg.k_d, scheduler)
    return {
        "fd-partial-csit": _fd_partial(scenario, d, many, p, cache),
        "fd-no-csit": _fd_no_csit(scenario, d, one, p),
        "hd-partial-csit": _hd(scenario, d, one, p, partial=True),
        "hd-no-csit": _hd(scenario, d, one, p, partial=False),
    }


def multicell_samples(
    scenario: MulticellScenario, j_grid: Sequence[int], schedulers: Sequence[Scheduler] | None = None
) -> dict[tuple[int, str], dict[str, np.ndarray]]:
    """Per-drop centre-cell sum rates keyed by (J, scheduler value), then system."""
    schedulers = [Scheduler(s) for s in (schedulers or [scenario.scheduler])]
    for j in j_grid:
        scenario.check_j(j)
    out = {
        (j, s.value): {name: np.zeros(scenario.trials) for name in SYSTEMS}
        for j in j_grid for s in schedulers
    }
    for j in j_grid:
        for t in range(scenario.trials):
            d = make_drop(scenario, j, t)
            cache: dict = {}
            for s in schedulers:
                for attempt in range(RETRY_BUDGET + 1):
                    try:
                        rates = drop_sum_rates(scenario, d, t, s, cache)
                        break
                    except DegenerateChannelError:
                        if attempt == RETRY_BUDGET:
                            raise
                        d = make_drop(scenario, j, t + (attempt + 1) * 1_000_003)
                        cache = {}
                for name, value in rates.items():
                    out[(j, s.value)][name][t] = value
    return out


@dataclass(frozen=True)
class MulticellRow:
    j: int
    scheduler: str
    system: str
    mean_sum_rate: float
    stderr: float
    gap: float
    gap_stderr: float


def summarize_multicell(samples: dict[tuple[int, str], dict[str, np.ndarray]]) -> list[MulticellRow]:
    rows = []
    for (j, sched), per_system in samples.items():
        for system in SYSTEMS:
            s = per_system[system]
            diff = s - per_system["hd-" + system.split("-", 1)[1]]
            rows.append(MulticellRow(
                j, sched, system, float(s.mean()), float(_stderr(s)),
                float(diff.mean()), float(_stderr(diff)),
            ))
    return rows


def multicell_sweep(scenario: MulticellScenario, j_grid: Sequence[int]) -> list[MulticellRow]:
    return summarize_multicell(multicell_samples(scenario, j_grid))


def gap_step(
    samples: dict[tuple[int, str], dict[str, np.ndarray]], model: str, scheduler: str, j_a: int, j_b: int
) -> tuple[float, float]:
    """Mean and paired standard error of gap(J_b) - gap(J_a) for one CSIT model.

    Drops with the same index share their users across J, so the difference
    is taken drop by drop.
    """
    def gap(j):
        s = samples[(j, scheduler)]
        return s["fd-" + model] - s["hd-" + model]

    diff = gap(j_b) - gap(j_a)
    return float(diff.mean()), float(_stderr(diff))
