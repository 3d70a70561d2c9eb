import math
from dataclasses import replace

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from irs_noma import channel
from irs_noma.channel import (ChannelParams, ChannelRealization, PathLossSpec,
                              correlated_gaussian_pair, generate, pathloss_gain)
from irs_noma.model import SystemConfig


def test_pathloss_identity_distance():
    assert pathloss_gain(PathLossSpec(1.0, 1.0, 2.5)) == 1.0


@pytest.mark.parametrize("d, alpha", [(30.0, 2.5), (80.0, 3.5)])
def test_pathloss_reference_values(d, alpha):
    assert math.isclose(pathloss_gain(PathLossSpec(1e-3, d, alpha)), 1e-3 * d ** (-alpha),
                        rel_tol=1e-14)


@pytest.mark.parametrize("kwargs", [dict(distance=0.0), dict(distance=-1.0),
                                    dict(exponent=0.0), dict(reference_gain=0.0)])
def test_pathloss_domain_errors(kwargs):
    base = dict(reference_gain=1e-3, distance=10.0, exponent=2.0)
    base.update(kwargs)
    with pytest.raises(ValueError):
        PathLossSpec(**base)


def test_pair_rho_one_identical(rng):
    a, b = correlated_gaussian_pair(50, 1.0, rng)
    np.testing.assert_array_equal(a, b)


@pytest.mark.parametrize("rho", [-0.1, 1.5])
def test_pair_rejects_bad_rho(rng, rho):
    with pytest.raises(ValueError):
        correlated_gaussian_pair(3, rho, rng)


@pytest.mark.parametrize("rho", [0.0, 0.9])
def test_pair_sample_correlation(rho):
    a, b = correlated_gaussian_pair(100_000, rho, np.random.default_rng(1))
    corr = np.vdot(a, b).real / np.sqrt(np.vdot(a, a).real * np.vdot(b, b).real)
    assert abs(corr - rho) < 0.01
    assert abs(np.mean(np.abs(b) ** 2) - 1.0) < 0.02


def test_generate_is_deterministic():
    cfg = SystemConfig(K=3, N=8, M=30)
    a, b = generate(cfg, 7), generate(cfg, 7)
    for x, y in ((a.H, b.H), (a.g, b.g), (a.h, b.h)):
        np.testing.assert_array_equal(x, y)
    assert not np.array_equal(a.H, generate(cfg, 8).H)


def test_adding_clusters_and_elements_keeps_draws():
    small = generate(SystemConfig(K=2, N=4, M=5), 3)
    big = generate(SystemConfig(K=3, N=4, M=9), 3)
    np.testing.assert_array_equal(big.g[:2, :, :5], small.g)
    np.testing.assert_array_equal(big.h[:2], small.h)
    np.testing.assert_array_equal(big.H[:5], small.H)


def _moments(params, draws=4000, size=25):
    # entries are i.i.d. within a draw, so each draw contributes ``size`` samples per link
    cfg = SystemConfig(K=2, N=size, M=size)
    H, g, h = [], [], []
    for s in range(draws):
        ch = generate(cfg, s, params)
        H.append(ch.H[:, 0])
        g.append(ch.g)
        h.append(ch.h)
    H = np.concatenate(H)
    g = np.concatenate(g, axis=-1)   # (K, 2, draws * size)
    h = np.concatenate(h, axis=-1)
    return H, g, h


@pytest.fixture(scope="module")
def moment_draws():
    return _moments(ChannelParams())


def test_second_moments_match_squared_prefactor(moment_draws):
    p = ChannelParams()
    H, g, h = moment_draws
    # amplitude mode: E|entry|^2 = (C0 d^-alpha)^2
    expect_h = [pathloss_gain(p.bs_user(i)) ** 2 for i in (0, 1)]
    expect_g = [pathloss_gain(p.irs_user(i)) ** 2 for i in (0, 1)]
    assert abs(np.mean(np.abs(H) ** 2) / pathloss_gain(p.bs_irs) ** 2 - 1) < 0.02
    for i in (0, 1):
        assert abs(np.mean(np.abs(h[0, i]) ** 2) / expect_h[i] - 1) < 0.02
        assert abs(np.mean(np.abs(g[0, i]) ** 2) / expect_g[i] - 1) < 0.02
    # the center-user direct link at 50 m
    assert math.isclose(expect_h[0], 1e-6 * 50.0 ** -7, rel_tol=1e-12)


def _corr(a, b):
    return abs(np.vdot(a, b)) / np.sqrt(np.vdot(a, a).real * np.vdot(b, b).real)


def test_correlation_structure(moment_draws):
    _, g, h = moment_draws
    assert abs(_corr(h[0, 0], h[0, 1]) - 0.9) < 0.01
    assert abs(_corr(g[0, 0], g[0, 1]) - 0.9) < 0.01
    assert _corr(h[0, 0], h[1, 0]) < 0.01
    assert _corr(g[0, 1], g[1, 1]) < 0.01
    assert _corr(h[0, 0], g[0, 0]) < 0.01


def test_power_gain_mode_scales_by_square_root():
    cfg = SystemConfig(K=1, N=2, M=3)
    a = generate(cfg, 4)
    b = generate(cfg, 4, replace(ChannelParams(), gain_mode="power"))
    p = ChannelParams()
    ratio = math.sqrt(pathloss_gain(p.bs_user(0))) / pathloss_gain(p.bs_user(0))
    np.testing.assert_allclose(b.h[0, 0], a.h[0, 0] * ratio, rtol=1e-12)


def test_realization_rejects_bad_shapes():
    with pytest.raises(ValueError):
        ChannelRealization(np.zeros((3, 2)), np.zeros((1, 2, 4)), np.zeros((1, 2, 2)))
    with pytest.raises(ValueError):
        ChannelRealization(np.full((1, 1), np.nan), np.zeros((1, 2, 1)), np.zeros((1, 2, 1)))


def test_check_against_config():
    ch = generate(SystemConfig(K=1, N=2, M=3), 0)
    ch.check(SystemConfig(K=1, N=2, M=3))
    with pytest.raises(ValueError):
        ch.check(SystemConfig(K=1, N=2, M=4))


@settings(max_examples=20, deadline=None)
@given(K=st.integers(1, 3), N=st.integers(1, 4), M=st.integers(1, 5), seed=st.integers(0, 2**32))
def test_text_round_trip_is_exact(K, N, M, seed, tmp_path_factory):
    ch = generate(SystemConfig(K=K, N=N, M=M), seed)
    path = tmp_path_factory.mktemp("ch") / "c.txt"
    channel.write_channels(ch, path)
    back = channel.read_channels(path)
    for x, y in ((ch.H, back.H), (ch.g, back.g), (ch.h, back.h)):
        np.testing.assert_array_equal(x, y)


def test_text_format_cells(tmp_path):
    ch = ChannelRealization(np.array([[1 + 2j]]), np.array([[[0.5 - 1j], [0j]]]),
                            np.array([[[-1 + 0j], [3j]]]))
    path = tmp_path / "c.txt"
    channel.write_channels(ch, path)
    text = path.read_text().splitlines()
    assert text[0] == "# channels N=1 M=1 K=1"
    assert text[1] == "[H]" and text[2] == "1+2j"
    assert complex(text[2]) == 1 + 2j
