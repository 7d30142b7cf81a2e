import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from fdbia.errors import InvalidDimensionError, InvalidRangeError
from fdbia.network import (
    STREAM_DL,
    ChannelRealization,
    ModeSchedule,
    NetworkConfig,
    apply_channel,
    complex_normal,
    dump_channels,
    extended_dl_channel,
    extended_ul_channel,
    load_channels,
    sample_channels,
    stream,
)

configs = st.builds(
    NetworkConfig, st.integers(0, 4), st.integers(0, 4), st.integers(1, 4), st.integers(1, 4)
)


def test_config_validation():
    assert NetworkConfig(3, 1, 2, 5).l_d == 2
    assert NetworkConfig(3, 1, 2, 5).l_u == 1
    for bad in ((-1, 1, 1, 1), (1, 1, 0, 1), (1, 1, 1, 0), (1.5, 1, 1, 1), (True, 1, 1, 1)):
        with pytest.raises(InvalidDimensionError):
            NetworkConfig(*bad)


@settings(max_examples=40, deadline=None)
@given(configs, st.integers(0, 2**63 - 1), st.integers(0, 1000))
def test_sampling_is_deterministic_and_shaped(cfg, seed, trial):
    a = sample_channels(cfg, seed, trial)
    b = sample_channels(cfg, seed, trial)
    assert a.equals(b)
    assert a.h.shape == (cfg.k_d, cfg.m_d)
    assert a.f.shape == (cfg.k_u, cfg.m_u)
    assert a.g.shape == (cfg.k_d, cfg.k_u)


def test_streams_are_independent_per_link():
    # adding UL users leaves the DL gains untouched
    small = sample_channels(NetworkConfig(2, 1, 2, 2), 7, 3)
    big = sample_channels(NetworkConfig(2, 5, 2, 2), 7, 3)
    np.testing.assert_array_equal(small.h, big.h)
    np.testing.assert_array_equal(small.f, big.f[:1])
    assert not sample_channels(NetworkConfig(2, 1, 2, 2), 7, 4).equals(small)
    assert not sample_channels(NetworkConfig(2, 1, 2, 2), 7, 3, attempt=1).equals(small)


def test_complex_normal_prefix_stable():
    a = complex_normal(stream(1, 0, STREAM_DL), (3, 2))
    b = complex_normal(stream(1, 0, STREAM_DL), (5, 2))
    np.testing.assert_array_equal(a, b[:3])


def test_complex_normal_statistics():
    z = complex_normal(stream(11, 0, STREAM_DL), 200_000)
    assert abs(np.mean(np.abs(z) ** 2) - 1) < 0.01
    assert abs(np.mean(z)) < 0.01
    assert abs(np.mean(z.real**2) - 0.5) < 0.01
    assert abs(np.mean(z * z)) < 0.01  # circular symmetry


def test_realization_is_readonly():
    cr = sample_channels(NetworkConfig(1, 1), 0)
    with pytest.raises(ValueError):
        cr.h[0, 0] = 1


def test_realization_rejects_nonfinite():
    with pytest.raises(InvalidDimensionError):
        ChannelRealization(NetworkConfig(1, 1), [[np.inf]], [[1]], [[1]])


def test_csi_views():
    cr = sample_channels(NetworkConfig(2, 2, 3, 3), 5)
    np.testing.assert_array_equal(cr.bs_receive_csi(), cr.f)
    h, f = cr.bs_full_csi()
    np.testing.assert_array_equal(h, cr.h)
    np.testing.assert_array_equal(cr.dl_user_csi(2), cr.h[1])
    with pytest.raises(InvalidRangeError):
        cr.dl_user_csi(3)


def test_schedule_validation():
    s = ModeSchedule((1, 2, 1), (1, 1, 2))
    assert s.n == 3
    with pytest.raises(InvalidDimensionError):
        ModeSchedule((1,), (1, 2))
    with pytest.raises(InvalidRangeError):
        ModeSchedule((0,), (1,))
    with pytest.raises(InvalidRangeError):
        s.check(NetworkConfig(1, 1, 1, 2))


def test_extended_channels_are_diagonal():
    cfg = NetworkConfig(2, 2, 2, 3)
    cr = sample_channels(cfg, 1)
    s = ModeSchedule((1, 2, 2), (3, 1, 2))
    np.testing.assert_array_equal(extended_dl_channel(cr, 2, s), np.diag(cr.h[1, [0, 1, 1]]))
    np.testing.assert_array_equal(extended_ul_channel(cr, 1, s), np.diag(cr.f[0, [2, 0, 1]]))


def test_apply_channel_matches_per_slot_model():
    cfg = NetworkConfig(2, 2, 2, 2)
    cr = sample_channels(cfg, 3)
    s = ModeSchedule((1, 2, 1, 2), (1, 1, 2, 2))
    rng = np.random.default_rng(0)
    x_d = rng.standard_normal(4) + 1j
    x_u = [rng.standard_normal(4), rng.standard_normal(4) * 1j]
    y_d, y_u = apply_channel(cr, s, x_d, x_u)
    for t in range(4):
        a, b = s.alpha[t] - 1, s.beta[t] - 1
        for i in range(2):
            expect = cr.h[i, a] * x_d[t] + cr.g[i, 0] * x_u[0][t] + cr.g[i, 1] * x_u[1][t]
            assert abs(y_d[i][t] - expect) < 1e-12
        assert abs(y_u[t] - (cr.f[0, b] * x_u[0][t] + cr.f[1, b] * x_u[1][t])) < 1e-12


def test_apply_channel_shape_errors():
    cfg = NetworkConfig(1, 1)
    cr = sample_channels(cfg, 0)
    s = ModeSchedule((1, 1), (1, 1))
    with pytest.raises(InvalidDimensionError):
        apply_channel(cr, s, np.zeros(3), [np.zeros(2)])
    with pytest.raises(InvalidDimensionError):
        apply_channel(cr, s, np.zeros(2), [])
    with pytest.raises(InvalidDimensionError):
        apply_channel(cr, s, np.zeros(2), [np.zeros(2)], noise_u=np.zeros(3))


@settings(max_examples=25, deadline=None)
@given(configs, st.integers(0, 2**32))
def test_dump_round_trip(cfg, seed):
    cr = sample_channels(cfg, seed)
    text = dump_channels(cr)
    assert load_channels(text).equals(cr)
    assert dump_channels(load_channels(text)) == text


def test_load_rejects_bad_dump():
    with pytest.raises(InvalidDimensionError):
        load_channels("link,index1\n")
    with pytest.raises(InvalidDimensionError):
        load_channels("# k_d=1 k_u=1 m_d=1 m_u=1\nfoo,bar\n")
