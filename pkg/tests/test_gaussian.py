import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from gbsval import gaussian as gc
from gbsval.errors import InputError
from gbsval.instances import desk_instance, haar_transmission, r_for_density

from oracles import haar_unitary, tmss_covariance


def test_smss_zero_squeezing_is_vacuum():
    assert np.array_equal(gc.smss_covariance([0.0, 0.0]), np.eye(8))


def test_smss_ln2_variances():
    s = gc.smss_covariance([math.log(2)])
    # first mode of the pair: x stretched, p squeezed; second mode reversed
    np.testing.assert_allclose(np.diag(s), [4, 0.25, 0.25, 4], rtol=1e-15)


@given(st.lists(st.floats(0, 2), min_size=1, max_size=4))
def test_smss_saturates_uncertainty(r):
    s = gc.smss_covariance(r)
    K = 2 * len(r)
    np.testing.assert_allclose(np.diag(s)[:K] * np.diag(s)[K:], 1.0, rtol=1e-12)


def test_beamsplitter_matrix():
    H = gc.beamsplitter_modes(2)
    np.testing.assert_array_equal(H * math.sqrt(2), [[1, -1], [1, 1]])
    B = gc.pairwise_beamsplitter(4)
    np.testing.assert_allclose(B @ B.T, np.eye(8), atol=1e-15)
    assert np.allclose(B @ gc.symplectic_form(4) @ B.T, gc.symplectic_form(4))


@pytest.mark.parametrize("r", [0.3, 1.0])
def test_beamsplitter_produces_tmss(r):
    # lossless identity channel leaves the two-mode squeezed state after the beamsplitter
    s = gc.build_hypothesis("SQUE", [r], np.eye(2))
    np.testing.assert_allclose(s, tmss_covariance(r), atol=1e-12)


def test_tmss_mean_photons():
    s = gc.build_hypothesis("SQUE", [1.0], np.eye(2))
    assert gc.mean_photon_number(s) == pytest.approx(2 * 1.3810978455418157, rel=1e-13)


def test_squashed_single_mode_variances():
    s = gc.squashed_mode_covariance([0.0])
    assert np.array_equal(s, np.eye(2))
    z = math.asinh(math.sqrt(0.5))  # nbar = 0.5
    s = gc.squashed_mode_covariance([z])
    np.testing.assert_allclose(sorted(np.diag(s)), [1.0, 3.0], rtol=1e-13)
    assert min(np.linalg.eigvalsh(s)) == pytest.approx(1.0)


@given(st.lists(st.floats(0, 1.5), min_size=1, max_size=3))
def test_squashed_matches_squeezed_photon_number(r):
    a = gc.build_hypothesis("SQUE", r, np.eye(2 * len(r)))
    b = gc.build_hypothesis("SQUA", r, np.eye(2 * len(r)))
    assert gc.mean_photon_number(a) == pytest.approx(gc.mean_photon_number(b), rel=1e-12, abs=1e-14)


def test_squashed_state_is_classical():
    s = gc.build_hypothesis("SQUA", [0.8, 0.3], haar_transmission(4, 4, 0.7, seed=3))
    # P-representable: covariance dominates vacuum
    assert gc.min_excess_eigenvalue(s) > -1e-12
    sq = gc.build_hypothesis("SQUE", [0.8, 0.3], haar_transmission(4, 4, 0.7, seed=3))
    assert gc.min_excess_eigenvalue(sq) < -0.1


def test_channel_matches_textbook_form(rng):
    U = haar_unitary(5, rng)
    T = math.sqrt(0.6) * U[:, :4]
    sin = gc.smss_covariance([0.7, 0.2])
    V = gc.transmission_to_symplectic(T)
    ref = np.eye(10) - V @ V.T + V @ sin @ V.T
    np.testing.assert_allclose(gc.apply_channel(T, sin), ref, atol=1e-13)


def test_channel_on_vacuum_is_exact(rng):
    T = 0.5 * haar_unitary(6, rng)[:, :4]
    assert np.array_equal(gc.apply_channel(T, np.eye(8)), np.eye(12))


@pytest.mark.parametrize("kind", ["SQUE", "SQUA"])
def test_output_is_physical(kind):
    spec, T = desk_instance(7, 0.9, 0.5, seed=11, K=6)
    s = gc.build_hypothesis(kind, spec, T)
    gc.validate_covariance(s)
    assert s.shape == (14, 14)


@given(st.floats(0.05, 1.0), st.floats(0.1, 1.0))
def test_r_for_density_roundtrip(nu, eta):
    M, K = 8, 6
    r = r_for_density(nu, eta, M, K)
    assert eta * K * math.sinh(r) ** 2 / M == pytest.approx(nu, rel=1e-12)


def test_hbar_scaling():
    spec, T = desk_instance(4, 0.5, 0.8, seed=2)
    a = gc.build_hypothesis("SQUE", spec, T, hbar=2.0)
    b = gc.build_hypothesis("SQUE", spec, T, hbar=1.0)
    np.testing.assert_allclose(a, 2 * b, atol=1e-14)
    assert gc.mean_photon_number(b, hbar=1.0) == pytest.approx(gc.mean_photon_number(a))


def test_ordering_roundtrip(rng):
    A = rng.standard_normal((6, 6))
    A = A + A.T
    np.testing.assert_array_equal(gc.xpxp_to_xxpp(gc.xxpp_to_xpxp(A)), A)
    B = gc.xxpp_to_xpxp(A)
    assert B[0, 1] == A[0, 3]


def test_reduced_covariance():
    s = gc.build_hypothesis("SQUE", [0.4, 0.9], np.eye(4))
    r = gc.reduced_covariance(s, [2, 3])
    np.testing.assert_allclose(r, tmss_covariance(0.9), atol=1e-13)


@pytest.mark.parametrize(
    "T",
    [np.array([[1.2, 0], [0, 0.5]]), np.array([[np.nan, 0], [0, 1]]), np.ones(3)],
)
def test_bad_transmission_rejected(T):
    with pytest.raises(InputError):
        gc.check_transmission(T)


def test_unphysical_singular_value_message():
    with pytest.raises(InputError, match="1.2"):
        gc.apply_channel(np.diag([1.2, 0.5]), np.eye(4))


def test_dimension_mismatch():
    with pytest.raises(InputError, match="columns"):
        gc.build_hypothesis("SQUE", [0.5], np.eye(4))


@pytest.mark.parametrize("bad", [[-0.1], [np.inf], [[0.1, 0.2]]])
def test_bad_squeezing(bad):
    with pytest.raises(InputError):
        gc.SqueezeSpec(np.array(bad))


def test_unknown_hypothesis():
    with pytest.raises(InputError):
        gc.HypothesisKind.parse("COHERENT")
    assert gc.HypothesisKind.parse("squa") is gc.HypothesisKind.SQUA


def test_validate_covariance_rejects_unphysical():
    with pytest.raises(InputError):
        gc.validate_covariance(0.5 * np.eye(2))
    with pytest.raises(InputError):
        gc.validate_covariance(np.array([[1.0, 0.3], [0.0, 1.0]]))


def test_identity_channel_keeps_state():
    s = gc.smss_covariance([0.4, 1.1])
    np.testing.assert_allclose(gc.apply_channel(np.eye(4), s), s, atol=1e-15)


@pytest.mark.parametrize("eta", [0.0, 0.3, 1.0])
def test_uniform_loss_single_mode(eta):
    s = gc.squeezed_vacuum_covariance([0.9])
    out = gc.apply_channel(math.sqrt(eta) * np.eye(1), s)
    np.testing.assert_allclose(out, (1 - eta) * np.eye(2) + eta * s, atol=1e-14)
    np.testing.assert_array_equal(gc.apply_channel(math.sqrt(eta) * np.eye(1), np.eye(2)), np.eye(2))


def test_zero_squeezing_gives_vacuum_for_both_hypotheses():
    T = haar_transmission(5, 4, 0.6, seed=1)
    a = gc.build_hypothesis("SQUE", [0.0, 0.0], T)
    b = gc.build_hypothesis("SQUA", [0.0, 0.0], T)
    np.testing.assert_allclose(a, np.eye(10), atol=1e-15)
    np.testing.assert_array_equal(a, b)


def test_photon_numbers():
    assert gc.mean_photon_number(gc.vacuum_covariance(3)) == 0
    assert gc.mean_photon_number(gc.squeezed_vacuum_covariance([1.0])) == pytest.approx(1.3810978455418157, rel=1e-14)
    assert gc.mean_photon_number(gc.squashed_mode_covariance([1.0])) == pytest.approx(1.3810978455418157, rel=1e-14)


@given(st.floats(0.01, 3.0))
def test_click_photon_relation_exact_for_thermal(n):
    s = gc.thermal_covariance([n])
    assert gc.click_photon_relation_check(s, n / (1 + n)) == pytest.approx(0, abs=1e-12)


def test_click_photon_relation_single_squeezed_mode():
    # lossless squeezed mode: mean clicks 1 - 1/cosh r, far from the thermal relation
    c = 1 - 0.6480542736638854
    dev = gc.click_photon_relation_check(gc.squeezed_vacuum_covariance([1.0]), c)
    assert dev == pytest.approx(0.39322386648296371, rel=1e-12)


def _relation(kind, r):
    from gbsval.torontonian import click_count_mean_std

    spec, T = desk_instance(8, r, 0.6, seed=0)
    s = gc.build_hypothesis(kind, spec, T)
    return gc.click_photon_relation_check(s, click_count_mean_std(s)[0])


def test_click_photon_relation_low_density():
    # thermal-like squashed light: deviation vanishes with the density
    assert _relation("SQUA", 0.01) < 1e-5
    assert _relation("SQUA", 0.001) < 1e-7
    # squeezed light emits photon pairs that can share a detector, so the
    # deviation tends to a density-independent constant instead
    a, b = _relation("SQUE", 0.01), _relation("SQUE", 0.001)
    assert a == pytest.approx(b, rel=1e-3)
    assert 0 < b < 0.15


def test_click_photon_relation_zero():
    from gbsval.errors import NumericError

    with pytest.raises(NumericError):
        gc.click_photon_relation_check(gc.vacuum_covariance(2), 0.0)
