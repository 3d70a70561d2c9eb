import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from irs_noma import model
from irs_noma.channel import ChannelRealization, generate
from irs_noma.model import (CENTER, EDGE, BeamformingSolution, ReflectionCase, SystemConfig,
                            audit)

from conftest import crandn


def random_instance(rng, K=2, N=2, M=2):
    ch = ChannelRealization(crandn(rng, M, N), crandn(rng, K, 2, M), crandn(rng, K, 2, N))
    phi = np.exp(1j * rng.uniform(0, 2 * np.pi, M))
    w = crandn(rng, K, 2, N)
    return ch, phi, w


def test_reflection_case_validation():
    with pytest.raises(ValueError):
        ReflectionCase.discrete(1)
    with pytest.raises(ValueError):
        ReflectionCase("unit", 4)
    assert ReflectionCase.parse("III", 4) == ReflectionCase.discrete(4)
    assert ReflectionCase.parse("i").kind == "box"


@pytest.mark.parametrize("kwargs", [dict(N=0), dict(noise_power=0.0), dict(rate_center=-1.0),
                                    dict(rate_edge=(1.0, 2.0))])
def test_config_validation(kwargs):
    with pytest.raises(ValueError):
        SystemConfig(**kwargs)


def test_thresholds():
    cfg = SystemConfig(K=2, rate_center=(0.0, 4.0), rate_edge=1.0)
    np.testing.assert_array_equal(cfg.tau_center, [0.0, 15.0])
    np.testing.assert_array_equal(cfg.tau_edge, [1.0, 1.0])


def test_effective_channel_trivial_cases(rng):
    ch, phi, _ = random_instance(rng)
    h = ch.h[0, 0]
    np.testing.assert_array_equal(model.effective_channel(np.zeros(2), ch.H, ch.g[0, 0], h), h)
    np.testing.assert_array_equal(model.effective_channel(phi, ch.H, np.zeros(2), h), h)
    np.testing.assert_array_equal(model.effective_channel(phi, ch.H, ch.g[0, 0], h, False), h)


def test_effective_channel_matches_diagonal_expansion(rng):
    ch, phi, _ = random_instance(rng)
    for k in range(2):
        for i in range(2):
            row = phi @ np.diag(ch.g[k, i].conj()) @ ch.H + ch.h[k, i].conj()
            got = model.effective_channel(phi, ch.H, ch.g[k, i], ch.h[k, i])
            np.testing.assert_allclose(got.conj(), row, atol=1e-13)
            np.testing.assert_allclose(model.effective_channels(phi, ch)[k, i], got, atol=1e-13)


def test_effective_channel_dimension_error(rng):
    ch, _, _ = random_instance(rng)
    with pytest.raises(ValueError):
        model.effective_channel(np.ones(3), ch.H, ch.g[0, 0], ch.h[0, 0])


def test_zeta_trivial(rng):
    _, _, w = random_instance(rng, K=1)
    hh = crandn(rng, 1, 2, 2)
    assert model.interference_zeta(w, hh, 0, 0) == 0.0
    assert model.interference_zeta(np.zeros((2, 2, 2)), crandn(rng, 2, 2, 2), 0, 1) == 0.0


def test_zeta_scalar_hand_expansion():
    # K=2, N=1, M=1: hhat* = conj(g) phi H + conj(h)
    H = np.array([[0.5 - 0.2j]])
    g = np.array([[[1 + 1j], [0.3j]], [[-0.4], [2 - 1j]]])
    h = np.array([[[0.1], [0.7 + 0.1j]], [[1j], [-0.2]]])
    ch = ChannelRealization(H, g, h)
    phi = np.array([np.exp(0.3j)])
    w = np.array([[[1.0], [0.5j]], [[-0.3 + 0.2j], [0.8]]])
    hh = model.effective_channels(phi, ch)
    hhat_conj = lambda k, i: np.conj(g[k, i, 0]) * phi[0] * H[0, 0] + np.conj(h[k, i, 0])
    expect = abs(hhat_conj(0, 1) * w[1, 0, 0]) ** 2 + abs(hhat_conj(0, 1) * w[1, 1, 0]) ** 2
    assert math.isclose(model.interference_zeta(w, hh, 0, EDGE), expect, rel_tol=1e-12)


def test_sinr_interference_free_reduction(rng):
    hh = crandn(rng, 1, 2, 3)
    w = crandn(rng, 1, 2, 3)
    w[0, CENTER] = 0
    expect = abs(np.vdot(hh[0, EDGE], w[0, EDGE])) ** 2 / 0.5
    assert math.isclose(model.sinr_edge(w, hh, 0, 0.5), expect, rel_tol=1e-12)


def test_all_zero_beams_give_zero_sinr(rng):
    hh = crandn(rng, 2, 2, 3)
    for g in model.sinrs(np.zeros((2, 2, 3)), hh, 1.0):
        np.testing.assert_array_equal(g, 0.0)


def test_vectorized_sinrs_match_scalar_forms(rng):
    ch, phi, w = random_instance(rng)
    hh = model.effective_channels(phi, ch)
    g_c, g_e, g_ce = model.sinrs(w, hh, 0.3)
    for k in range(2):
        # brute force from the definitions
        a = lambda i, j, l: abs(np.vdot(hh[k, i], w[j, l])) ** 2
        zeta = lambda i: sum(a(i, j, l) for j in range(2) if j != k for l in range(2))
        assert math.isclose(g_c[k], a(0, k, 0) / (0.3 + zeta(0)), rel_tol=1e-12)
        assert math.isclose(g_e[k], a(1, k, 1) / (0.3 + a(1, k, 0) + zeta(1)), rel_tol=1e-12)
        assert math.isclose(g_ce[k], a(0, k, 1) / (0.3 + a(0, k, 0) + zeta(0)), rel_tol=1e-12)
        assert math.isclose(g_c[k], model.sinr_center(w, hh, k, 0.3), rel_tol=1e-12)
        assert math.isclose(g_e[k], model.sinr_edge(w, hh, k, 0.3), rel_tol=1e-12)
        assert math.isclose(g_ce[k], model.sinr_center_decoding_edge(w, hh, k, 0.3),
                            rel_tol=1e-12)


def test_edge_rate_uses_the_sic_minimum(rng):
    ch, phi, w = random_instance(rng)
    hh = model.effective_channels(phi, ch)
    _, g_e, g_ce = model.sinrs(w, hh, 1.0)
    _, re = model.achieved_rates(w, hh, 1.0)
    np.testing.assert_allclose(re, np.log2(1 + np.minimum(g_e, g_ce)))


@settings(max_examples=50, deadline=None)
@given(st.integers(0, 2**32), st.floats(1.01, 10.0))
def test_scaling_beams_never_hurts_center_user(seed, t):
    rng = np.random.default_rng(seed)
    ch, phi, w = random_instance(rng)
    hh = model.effective_channels(phi, ch)
    before = model.sinrs(w, hh, 1.0)[0]
    after = model.sinrs(t * w, hh, 1.0)[0]
    assert np.all(after >= before * (1 - 1e-12))
    assert math.isclose(model.total_power(t * w), t * t * model.total_power(w), rel_tol=1e-12)


def test_no_irs_quantities_ignore_phi(rng):
    ch, phi, w = random_instance(rng)
    cfg = SystemConfig(K=2, N=2, M=2, irs_enabled=False, noise_power=1.0)
    a = BeamformingSolution.evaluate(w, phi, cfg, ch)
    b = BeamformingSolution.evaluate(w, 3 * phi, cfg, ch)
    np.testing.assert_array_equal(a.rates_center, b.rates_center)
    np.testing.assert_array_equal(a.rates_edge, b.rates_edge)


def test_audit_zero_rates_feasible(rng):
    ch, phi, w = random_instance(rng)
    cfg = SystemConfig(K=2, N=2, M=2, rate_center=0.0, rate_edge=0.0)
    assert audit(BeamformingSolution.evaluate(0 * w, phi, cfg, ch), cfg, ch).feasible


def test_audit_reports_rate_shortfall(rng):
    ch, phi, w = random_instance(rng)
    cfg = SystemConfig(K=2, N=2, M=2, rate_center=2.5, rate_edge=1.0)
    rep = audit(BeamformingSolution.evaluate(0 * w, phi, cfg, ch), cfg, ch)
    assert not rep.feasible
    np.testing.assert_allclose(rep.center_slack, -2.5)
    np.testing.assert_allclose(rep.edge_slack, -1.0)


def test_audit_modulus_membership(rng):
    ch, _, w = random_instance(rng)
    cfg = SystemConfig(K=2, N=2, M=2, rate_center=0.0, rate_edge=0.0)
    phi = np.array([1.0, 0.5j])
    assert audit(BeamformingSolution.evaluate(w, phi, cfg.with_(reflection=ReflectionCase.box()),
                                              ch), cfg.with_(reflection=ReflectionCase.box()),
                 ch).feasible
    rep = audit(BeamformingSolution.evaluate(w, phi, cfg, ch), cfg, ch)
    assert not rep.feasible and math.isclose(rep.min_modulus_slack, -0.5)
    disc = cfg.with_(reflection=ReflectionCase.discrete(4))
    assert audit(BeamformingSolution.evaluate(w, np.array([1j, -1.0]), disc, ch), disc,
                 ch).feasible
    assert not audit(BeamformingSolution.evaluate(w, np.exp(0.3j) * np.ones(2), disc, ch),
                     disc, ch).feasible


def test_normalization_preserves_sinrs():
    cfg = SystemConfig(K=2, N=3, M=4)
    ch = generate(cfg, 0)
    cfg_n, ch_n, scale = model.normalize(cfg, ch)
    assert cfg_n.noise_power == 1.0
    rng = np.random.default_rng(0)
    phi = np.exp(1j * rng.uniform(0, 6, 4))
    w_n = crandn(rng, 2, 2, 3)
    a = model.sinrs(w_n, model.effective_channels(phi, ch_n), 1.0)
    b = model.sinrs(scale * w_n, model.effective_channels(phi, ch), cfg.noise_power)
    for x, y in zip(a, b):
        np.testing.assert_allclose(x, y, rtol=1e-9)


def test_dbm_round_trip():
    assert math.isclose(model.dbm_to_watt(-80.0), 1e-11)
    assert math.isclose(model.watt_to_dbm(1.0), 30.0)
