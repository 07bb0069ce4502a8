import itertools
import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from gbsval import gaussian as gc
from gbsval import torontonian as tor
from gbsval.errors import InputError, NumericError
from gbsval.instances import desk_instance
from gbsval.torontonian import PrecisionMode, click_probability, husimi_from_covariance

import oracles


def dft_instance():
    M = 4
    j = np.arange(M)
    T = math.sqrt(0.7) * np.exp(2j * np.pi * np.outer(j, j) / M) / math.sqrt(M)
    return gc.build_hypothesis("SQUE", [0.6, 0.4], T)


# 40-digit inclusion-exclusion values for the DFT instance above
FROZEN = {
    (0, 0, 0, 0): 0.63330759826417557,
    (1, 0, 0, 0): 0.073927317733450596,
    (1, 1, 0, 0): 0.011621282753831352,
    (1, 0, 1, 0): 0.0086296900941062225,
    (1, 1, 1, 1): 0.00027631974504905929,
}


@pytest.mark.parametrize("s", list(FROZEN))
@pytest.mark.parametrize("precision", ["double", "extended"])
def test_frozen_dft_probabilities(s, precision):
    h = husimi_from_covariance(dft_instance())
    assert click_probability(h, s, precision) == pytest.approx(FROZEN[s], rel=1e-12)


def test_husimi_closed_form_matches_definition(rng):
    spec, T = desk_instance(5, [0.7, 0.3], 0.6, seed=4, K=4)
    for kind in ("SQUE", "SQUA"):
        s = gc.build_hypothesis(kind, spec, T)
        np.testing.assert_allclose(husimi_from_covariance(s).sigma_q, oracles.husimi(s), atol=1e-14)


@pytest.mark.parametrize("nbar,expected", [(0.1, 0.08712907082472315), (2.0, 0.5527864045000421)])
def test_squashed_single_mode(nbar, expected):
    s = gc.squashed_mode_covariance([math.asinh(math.sqrt(nbar))])
    assert click_probability(husimi_from_covariance(s), [1]) == pytest.approx(expected, abs=1e-15)


@pytest.mark.parametrize("r,expected", [(0.5, 0.8868188839700739), (2.0, 0.2658022288340797)])
def test_squeezed_vacuum_probability(r, expected):
    h = husimi_from_covariance(gc.squeezed_vacuum_covariance([r]))
    assert click_probability(h, [0]) == pytest.approx(expected, abs=1e-15)
    assert click_probability(h, [1]) == pytest.approx(1 - expected, abs=1e-13)


def test_thermal_half():
    h = husimi_from_covariance(gc.thermal_covariance([1.0]))
    assert click_probability(h, [1]) == 0.5
    assert click_probability(h, [0]) == 0.5


@pytest.mark.parametrize("r", [0.3, 1.0])
def test_tmss_clicks_are_perfectly_correlated(r):
    h = husimi_from_covariance(oracles.tmss_covariance(r))
    assert click_probability(h, [1, 0]) == pytest.approx(0, abs=1e-15)
    assert click_probability(h, [1, 1]) == pytest.approx(math.tanh(r) ** 2, rel=1e-13)


@pytest.mark.parametrize("seed", range(4))
@pytest.mark.parametrize("kind", ["SQUE", "SQUA"])
def test_table_matches_inclusion_exclusion(seed, kind):
    spec, T = desk_instance(5, [0.9, 0.4], 0.5 + 0.1 * seed, seed=seed, K=4)
    s = gc.build_hypothesis(kind, spec, T)
    ref = oracles.full_table(s)
    np.testing.assert_allclose(tor.exact_distribution(s), ref, atol=1e-13)
    np.testing.assert_allclose(tor.exact_distribution(s, method="vacuum"), ref, atol=1e-13)


@pytest.mark.parametrize("seed", range(3))
def test_normalization(seed):
    spec, T = desk_instance(7, 1.0, 0.7, seed=seed, K=6)
    table = tor.exact_distribution(gc.build_hypothesis("SQUE", spec, T))
    assert math.fsum(table) == pytest.approx(1.0, abs=1e-12)
    assert table.min() >= 0


@given(st.integers(0, 2**31 - 1), st.sampled_from([1.0, 2.0]))
@settings(max_examples=15)
def test_hbar_invariance(seed, hbar):
    spec, T = desk_instance(4, 0.8, 0.6, seed=seed)
    s2 = gc.build_hypothesis("SQUE", spec, T)
    sh = gc.build_hypothesis("SQUE", spec, T, hbar=hbar)
    h2 = husimi_from_covariance(s2)
    hh = husimi_from_covariance(sh, hbar=hbar)
    for m in range(16):
        p = tor.pattern_from_mask(m, 4)
        assert click_probability(hh, p) == pytest.approx(click_probability(h2, p), abs=1e-13)


@given(st.integers(0, 2**31 - 1))
@settings(max_examples=15)
def test_permutation_invariance(seed):
    spec, T = desk_instance(5, 0.7, 0.8, seed=seed, K=4)
    perm = np.random.default_rng(seed).permutation(5)
    s = gc.build_hypothesis("SQUA", spec, T)
    sp = gc.build_hypothesis("SQUA", spec, T[perm])
    h, hp = husimi_from_covariance(s), husimi_from_covariance(sp)
    for m in (3, 7, 21, 31):
        pat = tor.pattern_from_mask(m, 5)
        orig = np.empty_like(pat)
        orig[perm] = pat
        assert click_probability(hp, pat) == pytest.approx(click_probability(h, orig), abs=1e-14)


@given(st.integers(0, 2**31 - 1), st.integers(1, 6))
@settings(max_examples=20)
def test_fast_matches_naive(seed, N):
    spec, T = desk_instance(N + 1, 0.9, 0.7, seed=seed, K=2 * ((N + 1) // 2))
    h = husimi_from_covariance(gc.build_hypothesis("SQUE", spec, T))
    idx = h.keep(np.arange(N))
    A = np.eye(2 * N) - h.sigma_q_inv[np.ix_(idx, idx)]
    ref = tor.torontonian_naive(A)
    assert tor.torontonian(A) == pytest.approx(ref, rel=1e-10, abs=1e-14)
    assert tor.torontonian(A, "extended") == pytest.approx(ref, rel=1e-10, abs=1e-14)


def test_threads_do_not_change_result():
    spec, T = desk_instance(14, 1.0, 0.6, seed=1)
    h = husimi_from_covariance(gc.build_hypothesis("SQUE", spec, T))
    s = np.ones(14, dtype=np.uint8)
    s[[2, 5]] = 0
    vals = {click_probability(h, s, threads=t) for t in (1, 2, 4)}
    assert len(vals) == 1


def test_double_extended_agree_small():
    spec, T = desk_instance(12, 1.0, 0.5, seed=2)
    h = husimi_from_covariance(gc.build_hypothesis("SQUE", spec, T))
    s = np.array([1, 1, 0, 1, 0, 1, 1, 0, 0, 1, 0, 1])
    d = click_probability(h, s, "double")
    e = click_probability(h, s, "extended")
    assert d == pytest.approx(e, rel=1e-9)


def test_empty_torontonian():
    assert tor.torontonian(np.zeros((0, 0))) == 1.0


def test_torontonian_input_checks():
    with pytest.raises(InputError):
        tor.torontonian(np.eye(3))
    with pytest.raises(InputError):
        tor.torontonian(np.array([[0, 1j], [0, 0]]))
    with pytest.raises(InputError, match="cap"):
        tor.torontonian(np.zeros((8, 8)), max_size=3)


def test_pattern_validation():
    h = husimi_from_covariance(gc.vacuum_covariance(3))
    with pytest.raises(InputError):
        click_probability(h, [1, 0])
    with pytest.raises(InputError):
        click_probability(h, [1, 2, 0])
    assert click_probability(h, "000") == 1.0
    assert click_probability(h, [0, 1, 0]) == 0.0


def test_log_probability_of_impossible_pattern():
    h = husimi_from_covariance(gc.vacuum_covariance(2))
    with pytest.raises(NumericError):
        tor.log_click_probability(h, [1, 0])


def test_log_probability_matches():
    h = husimi_from_covariance(dft_instance())
    assert tor.log_click_probability(h, (1, 1, 1, 1)) == pytest.approx(math.log(FROZEN[(1, 1, 1, 1)]), rel=1e-12)


def test_marginals_against_table():
    s = dft_instance()
    table = oracles.full_table(s)
    for modes in [(0,), (1, 3), (0, 2, 3), (0, 1, 2, 3)]:
        ref = oracles.moment_from_table(table, 4, modes)
        assert tor.marginal_probability(s, modes) == pytest.approx(ref, abs=1e-14)
    got = tor.batch_marginals(s, [(0,), (1, 3), (0, 2, 3)])
    np.testing.assert_allclose(got, [oracles.moment_from_table(table, 4, m) for m in [(0,), (1, 3), (0, 2, 3)]], atol=1e-14)
    assert tor.marginal_probability(s, ()) == 1.0
    with pytest.raises(InputError):
        tor.marginal_probability(s, (0, 0))
    with pytest.raises(InputError):
        tor.marginal_probability(s, (4,))


def test_click_count_moments_against_table():
    s = dft_instance()
    table = oracles.full_table(s)
    C = tor.popcounts(4)
    mean = float(table @ C)
    std = math.sqrt(float(table @ C**2) - mean**2)
    m, sd = tor.click_count_mean_std(s)
    assert m == pytest.approx(mean, abs=1e-13)
    assert sd == pytest.approx(std, abs=1e-12)


def test_sector_probabilities():
    table = tor.exact_distribution(dft_instance())
    pc = tor.sector_probabilities(table)
    assert pc[0] == pytest.approx(FROZEN[(0, 0, 0, 0)], rel=1e-12)
    assert pc[4] == pytest.approx(FROZEN[(1, 1, 1, 1)], rel=1e-12)
    assert math.fsum(pc) == pytest.approx(1, abs=1e-13)


def test_mask_pattern_roundtrip():
    for m in range(32):
        assert tor.mask_from_pattern(tor.pattern_from_mask(m, 5)) == m


def test_table_cap():
    with pytest.raises(InputError):
        tor.exact_distribution(gc.vacuum_covariance(13))


def test_precision_parse():
    assert PrecisionMode.parse("Extended") is PrecisionMode.EXTENDED
    with pytest.raises(InputError):
        PrecisionMode.parse("quad")


def test_husimi_vacuum():
    h = husimi_from_covariance(gc.vacuum_covariance(3))
    np.testing.assert_array_equal(h.sigma_q, np.eye(6))
    np.testing.assert_allclose(np.eye(6) - h.sigma_q_inv, 0, atol=1e-15)
    assert h.sqrt_det == pytest.approx(1.0)


@pytest.mark.parametrize("n", [0.5, 1.0, 3.0])
def test_husimi_thermal(n):
    h = husimi_from_covariance(gc.thermal_covariance([n]))
    np.testing.assert_allclose(h.sigma_q, (1 + n) * np.eye(2), atol=1e-15)
    np.testing.assert_allclose(np.eye(2) - h.sigma_q_inv, n / (1 + n) * np.eye(2), atol=1e-15)


@pytest.mark.parametrize("n", [0.1, 0.5, 2.0])
def test_husimi_squashed_determinant(n):
    h = husimi_from_covariance(gc.squashed_mode_covariance([math.asinh(math.sqrt(n))]))
    assert np.linalg.det(h.sigma_q).real == pytest.approx(1 + 2 * n, rel=1e-13)
    assert abs(h.sigma_q[0, 1]) == pytest.approx(n, rel=1e-13)


@pytest.mark.parametrize("N", [1, 2, 5])
def test_torontonian_of_zero(N):
    assert tor.torontonian(np.zeros((2 * N, 2 * N))) == 0.0


def test_torontonian_thermal():
    assert tor.torontonian(0.5 * np.eye(2)) == pytest.approx(1.0, abs=1e-15)


@pytest.mark.parametrize("n,p", [(0.1, 0.08712907082472315), (0.5, 0.2928932188134524), (2.0, 0.5527864045000421)])
def test_independent_squashed_click_statistics(n, p):
    M = 4
    z = math.asinh(math.sqrt(n))
    s = gc.squashed_mode_covariance([z] * M)
    m, sd = tor.click_count_mean_std(s)
    assert m == pytest.approx(M * p, rel=1e-13)
    assert sd == pytest.approx(math.sqrt(M * p * (1 - p)), rel=1e-11)


def test_vacuum_statistics():
    assert tor.click_count_mean_std(gc.vacuum_covariance(4)) == (0.0, 0.0)
    assert tor.marginal_probability(gc.vacuum_covariance(4), [2]) == 0.0


@given(st.integers(0, 2**31 - 1), st.sampled_from(["SQUE", "SQUA"]))
@settings(max_examples=10)
def test_marginal_of_five_mode_instance(seed, kind):
    spec, T = desk_instance(5, 0.9, 0.6, seed=seed, K=4)
    s = gc.build_hypothesis(kind, spec, T)
    table = tor.exact_distribution(s, method="vacuum")
    ref = oracles.moment_from_table(table, 5, (1, 3))
    assert tor.marginal_probability(s, (1, 3)) == pytest.approx(ref, abs=1e-12)
