import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from fdbia.errors import InvalidScenarioError
from fdbia.network import ChannelRealization, NetworkConfig, sample_channels
from fdbia.rates import (
    SYSTEMS,
    CsitModel,
    Duplex,
    Link,
    SingleCellScenario,
    db_to_linear,
    evaluate,
    fd_rate_single_trial,
    hd_links,
    hd_rate_single_trial,
    high_snr_slope,
    link_rates,
    single_cell_samples,
    single_cell_sweep,
    system_links,
    system_name,
)


def test_scalar_link_matches_closed_form():
    link = Link.scalar([2.0], share=0.5, interference=3.0)
    p = np.array([0.1, 1.0, 10.0])
    expected = 0.5 * np.log2(1 + 2 * p / (1 + 3 * p))
    np.testing.assert_allclose(link_rates(link, p)[0], expected, rtol=1e-12)


def test_successive_decoding_splits_mac_sum():
    g = [1.0, 4.0, 0.5]
    link = Link.scalar(g, share=1.0)
    r = link_rates(link, [10.0], order=[2, 0, 1])[:, 0]
    assert r.sum() == pytest.approx(math.log2(1 + 10 * sum(g)))
    # user 1 decoded last sees no interference
    assert r[1] == pytest.approx(math.log2(1 + 40))
    # user 2 decoded first sees both others
    assert r[2] == pytest.approx(math.log2(1 + 5 / (1 + 50)))


def test_matrix_link_logdet():
    rng = np.random.default_rng(0)
    a = rng.standard_normal((3, 2)) + 1j * rng.standard_normal((3, 2))
    link = Link(np.eye(3, dtype=complex), np.zeros((3, 3), complex), [a @ a.conj().T], 0.25)
    expected = 0.25 * math.log2(np.linalg.det(np.eye(3) + 5 * a @ a.conj().T).real)
    assert link_rates(link, [5.0])[0, 0] == pytest.approx(expected, rel=1e-12)


def test_empty_link():
    assert link_rates(Link.scalar([], 1.0), [1.0, 2.0]).shape == (0, 2)


def test_db_to_linear():
    np.testing.assert_allclose(db_to_linear([0, 10, 30]), [1, 10, 1000])


def _scenario(cfg, **kw):
    return SingleCellScenario(cfg, **kw)


@pytest.mark.parametrize("model", list(CsitModel))
def test_rates_vanish_at_low_power(model):
    cfg = NetworkConfig(2, 2, 2, 2)
    cr = sample_channels(cfg, 1)
    for duplex in Duplex:
        links = system_links(system_name(model, duplex), cfg, cr, 1.0)
        dl, ul = evaluate(links, [1e-12])
        assert dl.sum() + ul.sum() < 1e-9


@pytest.mark.parametrize("model", list(CsitModel))
def test_residual_si_only_hurts_uplink(model):
    cfg = NetworkConfig(2, 2, 2, 2)
    cr = sample_channels(cfg, 2)
    s = f"fd-{model.value}"
    dl0, ul0 = evaluate(system_links(s, cfg, cr, 0.0), [100.0])
    dl1, ul1 = evaluate(system_links(s, cfg, cr, 10.0), [100.0])
    np.testing.assert_array_equal(dl0, dl1)
    assert ul1.sum() < ul0.sum()


def test_hd_single_user_closed_form():
    cfg = NetworkConfig(1, 1, 1, 1)
    cr = ChannelRealization(cfg, [[0.6 + 0.8j]], [[2.0]], [[5.0]])
    sc = _scenario(cfg, duplex=Duplex.HD, snr_db=10.0)
    rep = hd_rate_single_trial(sc, cr)
    expected = 0.5 * math.log2(1 + 10) + 0.5 * math.log2(1 + 40)
    assert rep.sum_rate == pytest.approx(expected, rel=1e-12)
    assert rep.metadata["snr_db"] == 10.0


def test_partial_hd_picks_best_downlink():
    cfg = NetworkConfig(3, 2, 3, 2)
    for t in range(50):
        cr = sample_channels(cfg, 4, t)
        part, _ = evaluate(hd_links(cfg, cr, CsitModel.PARTIAL_CSIT), [10.0])
        blind, _ = evaluate(hd_links(cfg, cr, CsitModel.NO_CSIT, np.random.default_rng(t)), [10.0])
        assert part.sum() >= blind.sum() - 1e-12


def test_hd_empty_side_cedes_its_half():
    cfg = NetworkConfig(0, 1, 1, 1)
    cr = ChannelRealization(cfg, np.zeros((0, 1)), [[1.0]], np.zeros((0, 1)))
    dl, ul = evaluate(hd_links(cfg, cr, CsitModel.PARTIAL_CSIT), [3.0])
    assert dl.shape == (0, 1)
    assert ul[0, 0] == pytest.approx(2.0)


@settings(max_examples=20, deadline=None)
@given(st.integers(1, 3), st.integers(1, 3), st.integers(1, 3), st.integers(1, 3), st.integers(0, 2**32))
def test_monotone_in_power_and_sum_consistent(k_d, k_u, m_d, m_u, seed):
    cfg = NetworkConfig(k_d, k_u, m_d, m_u)
    cr = sample_channels(cfg, seed)
    powers = db_to_linear([0, 10, 20, 30])
    for system in SYSTEMS:
        dl, ul = evaluate(system_links(system, cfg, cr, 1.0, np.random.default_rng(0)), powers)
        total = dl.sum(axis=0) + ul.sum(axis=0)
        assert np.all(np.diff(total) >= -1e-9)
        assert np.all(dl >= 0) and np.all(ul >= 0)
    sc = _scenario(cfg, snr_db=20.0)
    rep = fd_rate_single_trial(sc, cr)
    assert rep.sum_rate == pytest.approx(sum(rep.per_dl_rates) + sum(rep.per_ul_rates))


def test_downlink_unaffected_by_uplink_interference():
    # the aligned UL leaves zero residue after DL zero-forcing, so wiping g changes nothing
    for cfg in (NetworkConfig(2, 2, 2, 2), NetworkConfig(2, 3, 2, 3), NetworkConfig(1, 3, 2, 3)):
        for model in CsitModel:
            cr = sample_channels(cfg, 5)
            quiet = ChannelRealization(cfg, cr.h, cr.f, np.zeros_like(cr.g))
            s = f"fd-{model.value}"
            powers = db_to_linear([10, 30, 50])
            a, _ = evaluate(system_links(s, cfg, cr, 1.0), powers)
            b, _ = evaluate(system_links(s, cfg, quiet, 1.0), powers)
            np.testing.assert_allclose(a, b, atol=1e-9)


def test_fallbacks_without_one_side():
    cr = sample_channels(NetworkConfig(0, 2, 1, 2), 0)
    for system in SYSTEMS:
        dl, ul = evaluate(system_links(system, cr.cfg, cr, 1.0), [10.0])
        assert dl.shape[0] == 0 and ul.sum() > 0
    cr = sample_channels(NetworkConfig(2, 0, 2, 1), 0)
    for system in SYSTEMS:
        dl, ul = evaluate(system_links(system, cr.cfg, cr, 1.0), [10.0])
        assert ul.shape[0] == 0 and dl.sum() > 0 and np.count_nonzero(dl) == 1


def test_single_mode_partial_falls_back():
    cfg = NetworkConfig(1, 1, 1, 1)
    cr = sample_channels(cfg, 0)
    dl, ul = evaluate(system_links("fd-partial-csit", cfg, cr, 1.0), [10.0])
    assert not dl.any() and ul.sum() > 0


def test_scenario_validation():
    cfg = NetworkConfig(1, 1)
    with pytest.raises(InvalidScenarioError):
        SingleCellScenario(cfg, trials=0)
    with pytest.raises(InvalidScenarioError):
        SingleCellScenario(cfg, residual_si_power=-1)
    with pytest.raises(ValueError):
        SingleCellScenario(cfg, model="full")
    with pytest.raises(InvalidScenarioError):
        fd_rate_single_trial(SingleCellScenario(cfg), sample_channels(NetworkConfig(1, 2), 0))
    with pytest.raises(InvalidScenarioError):
        system_links("fd-magic", cfg, sample_channels(cfg, 0), 1.0)


def test_sweep_deterministic_and_shaped():
    sc = _scenario(NetworkConfig(2, 2, 2, 2), trials=30, seed=9)
    grid = [0.0, 20.0]
    a = single_cell_sweep(sc, grid)
    b = single_cell_sweep(sc, grid)
    assert a == b
    assert len(a) == len(grid) * len(SYSTEMS)
    for row in a:
        if row.system.startswith("hd"):
            assert row.gap == 0.0 and row.gap_stderr == 0.0
        assert row.stderr > 0
    samples = single_cell_samples(sc, grid)
    assert samples["fd-partial-csit"].shape == (30, 2)


def test_single_trial_matches_sweep_column():
    cfg = NetworkConfig(2, 2, 2, 2)
    sc = _scenario(cfg, trials=3, seed=4, snr_db=20.0)
    samples = single_cell_samples(sc, [20.0])
    for t in range(3):
        cr = sample_channels(cfg, 4, t)
        assert fd_rate_single_trial(sc, cr, t).sum_rate == pytest.approx(samples["fd-partial-csit"][t, 0])
        hd = hd_rate_single_trial(SingleCellScenario(cfg, CsitModel.NO_CSIT, Duplex.HD, 20.0, seed=4), cr, t)
        assert hd.sum_rate == pytest.approx(samples["hd-no-csit"][t, 0])


def test_high_snr_slope():
    grid = [40.0, 50.0, 60.0]
    rates = [1.5 * g / (10 * math.log10(2)) + 3 for g in grid]
    assert high_snr_slope(grid, rates) == pytest.approx(1.5)
