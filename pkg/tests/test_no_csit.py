from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from fdbia.dof import sum_dof_no_csit
from fdbia.errors import DegenerateChannelError, InvalidDimensionError, UnsupportedTopologyError
from fdbia.linalg import idft_matrix, numerical_rank
from fdbia.network import ChannelRealization, NetworkConfig, apply_channel, sample_channels
from fdbia.no_csit import (
    build_no_csit,
    decode_dl_no_csit,
    decode_ul_no_csit,
    encode_no_csit,
    ul_matrix,
)


def _cn(rng, *shape):
    return (rng.standard_normal(shape) + 1j * rng.standard_normal(shape)) / np.sqrt(2)


def test_two_mode_precoders_frozen():
    p = build_no_csit(NetworkConfig(1, 2, 1, 2))
    np.testing.assert_allclose(p.W1[:, 0], np.array([1, 1]) / np.sqrt(2), atol=1e-15)
    np.testing.assert_allclose(p.w2, np.array([1, -1]) / np.sqrt(2), atol=1e-15)
    assert p.schedule.alpha == (1, 1) and p.schedule.beta == (1, 2)


def test_single_mode_is_uplink_only():
    p = build_no_csit(NetworkConfig(2, 3, 2, 1))
    assert p.W1.shape == (1, 0) and p.n_dl_symbols == 0
    np.testing.assert_allclose(p.w2, [1.0])


@pytest.mark.parametrize("l_u", range(1, 37))
def test_alignment_and_structure(l_u):
    p = build_no_csit(NetworkConfig(1, l_u, 1, l_u))
    np.testing.assert_array_equal(np.column_stack([p.W1, p.w2]), idft_matrix(l_u))
    assert np.abs(p.W1.conj().T @ p.w2).max(initial=0.0) <= 1e-12
    assert p.schedule.alpha == (1,) * l_u
    assert p.schedule.beta == tuple(range(1, l_u + 1))


def test_requires_both_sides():
    for cfg in (NetworkConfig(0, 2, 1, 2), NetworkConfig(2, 0, 2, 1)):
        with pytest.raises(UnsupportedTopologyError):
            build_no_csit(cfg)


def test_encode_shapes_and_common_precoder():
    p = build_no_csit(NetworkConfig(1, 3, 1, 3))
    x_d, x_u = encode_no_csit(p, [0, 0], [0, 0, 0])
    assert not x_d.any() and not any(x.any() for x in x_u)
    x_d, x_u = encode_no_csit(p, [1, 2j], [1, 2, 3])
    for j, x in enumerate(x_u):
        np.testing.assert_allclose(x / (j + 1), p.w2)
    with pytest.raises(InvalidDimensionError):
        encode_no_csit(p, [1], [1, 2, 3])
    with pytest.raises(InvalidDimensionError):
        encode_no_csit(p, [1, 2], [1])


def test_unit_power_example():
    p = build_no_csit(NetworkConfig(1, 2, 1, 2))
    x_d, x_u = encode_no_csit(p, [np.sqrt(2)], [np.sqrt(2), 0])
    assert np.linalg.norm(x_d) ** 2 == pytest.approx(2.0)
    assert np.linalg.norm(x_u[0]) ** 2 == pytest.approx(2.0)


def test_power_contract_monte_carlo():
    # s_d1 entries of variance L_u P / (L_u - 1), s_uj of variance L_u P, P = 1
    l_u, n = 4, 20_000
    p = build_no_csit(NetworkConfig(1, l_u, 1, l_u))
    rng = np.random.default_rng(5)
    s_d = _cn(rng, n, l_u - 1) * np.sqrt(l_u / (l_u - 1))
    s_u = _cn(rng, n) * np.sqrt(l_u)
    x_d = s_d @ p.W1.T
    x_u = np.outer(s_u, p.w2)
    assert np.mean(np.sum(np.abs(x_d) ** 2, axis=1)) / l_u == pytest.approx(1.0, rel=0.02)
    assert np.mean(np.sum(np.abs(x_u) ** 2, axis=1)) / l_u == pytest.approx(1.0, rel=0.02)


@settings(max_examples=60, deadline=None)
@given(st.integers(1, 4), st.integers(2, 6), st.integers(0, 2**32))
def test_noiseless_round_trip(k_d, l_u, seed):
    cfg = NetworkConfig(k_d, l_u, 1 + seed % 3, l_u)
    cr = sample_channels(cfg, seed)
    rng = np.random.default_rng(seed)
    p = build_no_csit(cfg)
    s_d, s_u = _cn(rng, l_u - 1), _cn(rng, l_u)
    y_d, y_u = apply_channel(cr, p.schedule, *encode_no_csit(p, s_d, s_u))
    np.testing.assert_allclose(decode_dl_no_csit(p, cr, y_d[0]), s_d, atol=1e-10)
    est = decode_ul_no_csit(p, cr, y_u)
    assert est.streams == l_u
    np.testing.assert_allclose(np.concatenate(est.symbols), s_u, rtol=1e-8, atol=1e-10)


def test_dl_estimate_ignores_uplink():
    cfg = NetworkConfig(2, 3, 2, 3)
    cr = sample_channels(cfg, 9)
    p = build_no_csit(cfg)
    rng = np.random.default_rng(1)
    s_d = _cn(rng, 2)
    x_d, x_u = encode_no_csit(p, s_d, _cn(rng, 3))
    base = decode_dl_no_csit(p, cr, apply_channel(cr, p.schedule, x_d, x_u)[0][0])
    other = ChannelRealization(cfg, cr.h, cr.f, _cn(rng, 2, 3))
    x_d2, x_u2 = encode_no_csit(p, s_d, _cn(rng, 3))
    moved = decode_dl_no_csit(p, other, apply_channel(other, p.schedule, x_d2, x_u2)[0][0])
    assert np.abs(base - moved).max() <= 1e-12
    # and silence on the DL gives an exactly zero estimate up to rounding
    _, x_u3 = encode_no_csit(p, [0, 0], _cn(rng, 3))
    y = apply_channel(cr, p.schedule, np.zeros(3), x_u3)[0][0]
    assert np.abs(decode_dl_no_csit(p, cr, y)).max() <= 1e-12


def test_filtered_noise_covariance():
    cfg = NetworkConfig(1, 3, 1, 3)
    cr = sample_channels(cfg, 2)
    p = build_no_csit(cfg)
    # the estimator is linear: y -> W1^H y / h; its covariance on white noise
    a = p.W1.conj().T / cr.h[0, 0]
    np.testing.assert_allclose(a @ a.conj().T, np.eye(2) / abs(cr.h[0, 0]) ** 2, atol=1e-12)


def test_degenerate_dl_gain():
    cfg = NetworkConfig(1, 2, 1, 2)
    cr = ChannelRealization(cfg, [[0.0]], [[1, 2], [3, 4]], [[1, 1]])
    with pytest.raises(DegenerateChannelError):
        decode_dl_no_csit(build_no_csit(cfg), cr, np.zeros(2))


def test_degenerate_ul():
    cfg = NetworkConfig(1, 2, 1, 2)
    cr = ChannelRealization(cfg, [[1.0]], [[1, 1], [2, 2]], [[1, 1]])  # rank(R) = 1
    with pytest.raises(DegenerateChannelError):
        decode_ul_no_csit(build_no_csit(cfg), cr, np.zeros(2))


def test_more_users_than_modes():
    cfg = NetworkConfig(1, 5, 1, 3)
    p = build_no_csit(cfg)
    for trial in range(1000):
        assert numerical_rank(ul_matrix(p, sample_channels(cfg, 4, trial))) == 3
    cr = sample_channels(cfg, 4)
    rng = np.random.default_rng(0)
    _, y_u = apply_channel(cr, p.schedule, *encode_no_csit(p, _cn(rng, 2), _cn(rng, 5)))
    est = decode_ul_no_csit(p, cr, y_u)
    assert est.streams == 3 and len(est.symbols) == 5
    # minimum-norm solution reproduces the observation
    np.testing.assert_allclose(ul_matrix(p, cr) @ np.concatenate(est.symbols), y_u, atol=1e-10)


def test_single_uplink_user_matched_solve():
    cfg = NetworkConfig(1, 1, 1, 4)
    cr = sample_channels(cfg, 8)
    p = build_no_csit(cfg)
    r = ul_matrix(p, cr)[:, 0]
    y = r * (2 - 1j)
    est = decode_ul_no_csit(p, cr, y)
    assert est.symbols[0][0] == pytest.approx(np.vdot(r, y) / np.vdot(r, r))


@pytest.mark.parametrize("l_u", range(1, 7))
def test_dof_accounting(l_u):
    cfg = NetworkConfig(2, l_u, 2, l_u)
    p = build_no_csit(cfg)
    rank = numerical_rank(ul_matrix(p, sample_channels(cfg, 0)))
    assert (p.n_dl_symbols + rank, p.n) == ((2 * l_u - 1), l_u)
    assert Fraction(p.n_dl_symbols + rank, p.n) == sum_dof_no_csit(cfg)
