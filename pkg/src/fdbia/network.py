"""Topology, random channel draws, BS mode schedules and time-extended channels.

Indexing convention: user indices (``i`` for DL users, ``j`` for UL users) and
preset-mode indices are 1-based at every public entry point, as in the
signal model ``y_di(t) = h_i(alpha(t)) x_d(t) + sum_j g_ij x_uj(t) + z_di(t)``.
Arrays stored on :class:`ChannelRealization` are ordinary 0-based numpy arrays.

Random streams
--------------
Every draw is made from a Philox (counter-based) bit generator keyed by
``SeedSequence(seed, spawn_key=(trial, link))`` where ``link`` is one of the
``STREAM_*`` codes below. Each link type therefore has its own stream: adding
UL users never changes the DL gains drawn for the same ``(seed, trial)``.
Complex Gaussians are produced by Box-Muller from the stream's uniforms, so a
given key yields the same bits on every platform.
"""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .errors import InvalidDimensionError, InvalidRangeError

STREAM_DL = 0
STREAM_UL = 1
STREAM_CROSS = 2
STREAM_SCHEDULE = 3


@dataclass(frozen=True)
class NetworkConfig:
    """Counts defining one FD cell: DL/UL users and BS preset modes."""

    k_d: int
    k_u: int
    m_d: int = 1
    m_u: int = 1

    def __post_init__(self):
        for name in ("k_d", "k_u", "m_d", "m_u"):
            value = getattr(self, name)
            if isinstance(value, bool) or not isinstance(value, (int, np.integer)):
                raise InvalidDimensionError(f"{name} must be an integer, got {value!r}")
        if self.k_d < 0 or self.k_u < 0:
            raise InvalidDimensionError("user counts must be nonnegative")
        if self.m_d < 1 or self.m_u < 1:
            raise InvalidDimensionError("each BS antenna needs at least one preset mode")

    @property
    def l_d(self) -> int:
        return min(self.k_d, self.m_d)

    @property
    def l_u(self) -> int:
        return min(self.k_u, self.m_u)

    def as_dict(self) -> dict:
        return {"k_d": self.k_d, "k_u": self.k_u, "m_d": self.m_d, "m_u": self.m_u}


def _readonly(a: np.ndarray) -> np.ndarray:
    a = np.array(a, dtype=np.complex128)
    a.setflags(write=False)
    return a


@dataclass(frozen=True)
class ChannelRealization:
    """All gains of one coherence block.

    ``h[i, k]`` is BS transmit mode k+1 to DL user i+1, ``f[j, l]`` is UL user
    j+1 to BS receive mode l+1 and ``g[i, j]`` is UL user j+1 to DL user i+1.
    The arrays are read-only.
    """

    cfg: NetworkConfig
    h: np.ndarray
    f: np.ndarray
    g: np.ndarray

    def __post_init__(self):
        cfg = self.cfg
        object.__setattr__(self, "h", _readonly(np.reshape(self.h, (cfg.k_d, cfg.m_d))))
        object.__setattr__(self, "f", _readonly(np.reshape(self.f, (cfg.k_u, cfg.m_u))))
        object.__setattr__(self, "g", _readonly(np.reshape(self.g, (cfg.k_d, cfg.k_u))))
        for name in ("h", "f", "g"):
            if not np.all(np.isfinite(getattr(self, name))):
                raise InvalidDimensionError(f"channel block {name} has non-finite gains")

    # CSI views, one per knowledge model. Schemes ask for the view they are
    # entitled to instead of reading the raw arrays.
    def bs_receive_csi(self) -> np.ndarray:
        """UL gains f only: what the BS knows under the no-CSIT model."""
        return self.f

    def bs_full_csi(self) -> tuple[np.ndarray, np.ndarray]:
        """(h, f): what the BS knows under the partial-CSIT model."""
        return self.h, self.f

    def dl_user_csi(self, i: int) -> np.ndarray:
        """Gains h_i(1..M_d) known to DL user ``i`` (1-based)."""
        _check_index(i, self.cfg.k_d, "DL user")
        return self.h[i - 1]

    def equals(self, other: "ChannelRealization") -> bool:
        return (
            self.cfg == other.cfg
            and np.array_equal(self.h, other.h)
            and np.array_equal(self.f, other.f)
            and np.array_equal(self.g, other.g)
        )


@dataclass(frozen=True)
class ModeSchedule:
    """Per-slot transmit (``alpha``) and receive (``beta``) mode indices, 1-based."""

    alpha: tuple[int, ...]
    beta: tuple[int, ...]

    def __post_init__(self):
        object.__setattr__(self, "alpha", tuple(int(a) for a in self.alpha))
        object.__setattr__(self, "beta", tuple(int(b) for b in self.beta))
        if len(self.alpha) != len(self.beta):
            raise InvalidDimensionError("alpha and beta must have the same length")
        if any(a < 1 for a in self.alpha) or any(b < 1 for b in self.beta):
            raise InvalidRangeError("mode indices are 1-based")

    @property
    def n(self) -> int:
        return len(self.alpha)

    def check(self, cfg: NetworkConfig) -> None:
        if max(self.alpha, default=1) > cfg.m_d or max(self.beta, default=1) > cfg.m_u:
            raise InvalidRangeError(
                f"schedule uses modes beyond (M_d, M_u) = ({cfg.m_d}, {cfg.m_u})"
            )


def _check_index(i: int, count: int, what: str) -> None:
    if not 1 <= i <= count:
        raise InvalidRangeError(f"{what} index {i} outside [1, {count}]")


def stream(seed: int, trial: int, link: int, attempt: int = 0) -> np.random.Generator:
    """Philox generator for one (seed, trial, link) key.

    ``attempt > 0`` selects a redraw sub-stream, used after a degenerate draw.
    """
    key = (int(trial), int(link)) if attempt == 0 else (int(trial), int(link), int(attempt))
    ss = np.random.SeedSequence(int(seed), spawn_key=key)
    return np.random.Generator(np.random.Philox(ss))


def complex_normal(rng: np.random.Generator, shape) -> np.ndarray:
    """CN(0, 1) samples by Box-Muller: sqrt(-ln u1) * exp(2j*pi*u2).

    The uniform pair sits on a trailing axis, so growing the leading
    dimension only appends draws: the first rows are the same for any size.
    """
    shape = tuple(shape) if isinstance(shape, (tuple, list)) else (int(shape),)
    u = rng.random(shape + (2,))
    # 1 - u lies in (0, 1], keeping the log finite
    return np.sqrt(-np.log1p(-u[..., 0])) * np.exp(2j * np.pi * u[..., 1])


def sample_channels(
    cfg: NetworkConfig, seed: int, trial: int = 0, attempt: int = 0
) -> ChannelRealization:
    """Draw every gain i.i.d. CN(0, 1); deterministic in ``(cfg, seed, trial, attempt)``."""
    h = complex_normal(stream(seed, trial, STREAM_DL, attempt), (cfg.k_d, cfg.m_d))
    f = complex_normal(stream(seed, trial, STREAM_UL, attempt), (cfg.k_u, cfg.m_u))
    g = complex_normal(stream(seed, trial, STREAM_CROSS, attempt), (cfg.k_d, cfg.k_u))
    return ChannelRealization(cfg, h, f, g)


def extended_dl_channel(cr: ChannelRealization, i: int, sched: ModeSchedule) -> np.ndarray:
    """diag(h_i(alpha(1)), ..., h_i(alpha(n)))."""
    _check_index(i, cr.cfg.k_d, "DL user")
    sched.check(cr.cfg)
    return np.diag(cr.h[i - 1, np.asarray(sched.alpha, dtype=int) - 1])


def extended_ul_channel(cr: ChannelRealization, j: int, sched: ModeSchedule) -> np.ndarray:
    """diag(f_j(beta(1)), ..., f_j(beta(n)))."""
    _check_index(j, cr.cfg.k_u, "UL user")
    sched.check(cr.cfg)
    return np.diag(cr.f[j - 1, np.asarray(sched.beta, dtype=int) - 1])


def apply_channel(
    cr: ChannelRealization,
    sched: ModeSchedule,
    x_d,
    x_u: Sequence,
    noise_d: Sequence | None = None,
    noise_u=None,
) -> tuple[list[np.ndarray], np.ndarray]:
    """Length-n block input/output relation with perfect SI suppression.

    Returns ``(y_d, y_u)`` where ``y_d[i-1] = H_i x_d + sum_j g_ij x_uj + z_di``
    and ``y_u = sum_j F_j x_uj + z_u``. Missing noise means noiseless.
    """
    cfg, n = cr.cfg, sched.n
    x_d = np.asarray(x_d, dtype=np.complex128)
    x_u = [np.asarray(x, dtype=np.complex128) for x in x_u]
    if x_d.shape != (n,):
        raise InvalidDimensionError(f"x_d must have length {n}, got shape {x_d.shape}")
    if len(x_u) != cfg.k_u or any(x.shape != (n,) for x in x_u):
        raise InvalidDimensionError(f"x_u must be {cfg.k_u} vectors of length {n}")
    if noise_d is None:
        noise_d = [np.zeros(n)] * cfg.k_d
    if noise_u is None:
        noise_u = np.zeros(n)
    noise_d = [np.asarray(z, dtype=np.complex128) for z in noise_d]
    noise_u = np.asarray(noise_u, dtype=np.complex128)
    if len(noise_d) != cfg.k_d or any(z.shape != (n,) for z in noise_d):
        raise InvalidDimensionError(f"noise_d must be {cfg.k_d} vectors of length {n}")
    if noise_u.shape != (n,):
        raise InvalidDimensionError(f"noise_u must have length {n}")
    sched.check(cfg)

    alpha = np.asarray(sched.alpha, dtype=int) - 1
    beta = np.asarray(sched.beta, dtype=int) - 1
    xu = np.array(x_u).reshape(cfg.k_u, n)
    y_d = []
    for i in range(cfg.k_d):
        y = cr.h[i, alpha] * x_d + cr.g[i] @ xu + noise_d[i]
        y_d.append(y)
    y_u = (cr.f[:, beta] * xu).sum(axis=0) + noise_u
    return y_d, y_u


# -- text dump -----------------------------------------------------------------

_HEADER = ("link", "index1", "index2", "real", "imag")


def dump_channels(cr: ChannelRealization) -> str:
    """CSV dump: one row per gain, columns link,index1,index2,real,imag.

    ``link`` is ``h`` (index1 = DL user, index2 = mode), ``f`` (UL user, mode)
    or ``g`` (DL user, UL user); indices are 1-based. A leading comment line
    records the topology. Floats use ``repr`` so the dump round-trips exactly.
    """
    buf = io.StringIO()
    cfg = cr.cfg
    buf.write(f"# k_d={cfg.k_d} k_u={cfg.k_u} m_d={cfg.m_d} m_u={cfg.m_u}\n")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(_HEADER)
    for name, arr in (("h", cr.h), ("f", cr.f), ("g", cr.g)):
        for (a, b), v in np.ndenumerate(arr):
            w.writerow((name, a + 1, b + 1, repr(float(v.real)), repr(float(v.imag))))
    return buf.getvalue()


def load_channels(text: str) -> ChannelRealization:
    lines = text.splitlines()
    if not lines or not lines[0].startswith("#"):
        raise InvalidDimensionError("channel dump is missing its topology comment")
    fields = dict(tok.split("=") for tok in lines[0][1:].split())
    cfg = NetworkConfig(*(int(fields[k]) for k in ("k_d", "k_u", "m_d", "m_u")))
    blocks = {
        "h": np.zeros((cfg.k_d, cfg.m_d), complex),
        "f": np.zeros((cfg.k_u, cfg.m_u), complex),
        "g": np.zeros((cfg.k_d, cfg.k_u), complex),
    }
    reader = csv.reader(lines[1:])
    header = next(reader)
    if tuple(header) != _HEADER:
        raise InvalidDimensionError(f"unexpected channel dump header {header}")
    for link, a, b, re, im in reader:
        blocks[link][int(a) - 1, int(b) - 1] = complex(float(re), float(im))
    return ChannelRealization(cfg, blocks["h"], blocks["f"], blocks["g"])
