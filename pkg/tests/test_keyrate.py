import math

import pytest
from hypothesis import assume, given, settings
from hypothesis import strategies as st

from mdiqkd_coexist.errors import DomainError
from mdiqkd_coexist.keyrate import (
    PAIRS,
    DecoyParams,
    DetectorSpec,
    GainErrorSet,
    LinkParameters,
    PairGains,
    binary_entropy,
    decoy_bounds,
    effective_efficiency,
    evaluate,
    gains_and_errors,
    pair_gains,
    secret_key_rate,
)
from mdiqkd_coexist.protocol import true_single_photon_stats


def noise_only_gain(p):
    # exactly one early click on one detector and one late click on the other, nothing else
    return 2 * p**2 * (1 - p) ** 2


# -- binary entropy ------------------------------------------------------

def test_binary_entropy_examples():
    assert binary_entropy(0.5) == 1.0
    assert binary_entropy(0.0) == 0.0
    assert binary_entropy(1.0) == 0.0
    assert binary_entropy(0.25) == pytest.approx(0.8112781245, abs=1e-10)


@pytest.mark.parametrize("x", [-1e-9, 1.0000001, math.nan])
def test_binary_entropy_domain(x):
    with pytest.raises(DomainError):
        binary_entropy(x)


@given(st.floats(0, 1), st.floats(0, 1))
def test_binary_entropy_concave(a, b):
    assert binary_entropy((a + b) / 2) >= (binary_entropy(a) + binary_entropy(b)) / 2 - 1e-12


# -- gains ---------------------------------------------------------------

def test_vacuum_inputs_give_zero_gain():
    g = pair_gains(0.0, 0.0, 0.0)
    assert (g.q_z, g.q_x) == (0.0, 0.0)


@pytest.mark.parametrize("p", [1e-8, 1e-4, 0.05, 0.3])
def test_noise_only_gain_closed_form(p):
    g = pair_gains(0.0, 0.0, p)
    assert g.q_z == pytest.approx(noise_only_gain(p), rel=1e-12)
    assert g.q_x == pytest.approx(noise_only_gain(p), rel=1e-12)
    assert g.e_z == pytest.approx(0.5) and g.e_x == pytest.approx(0.5)


def test_noise_p_must_be_below_one():
    with pytest.raises(DomainError):
        LinkParameters(noise_p=1.0)


def test_decoy_params_validation():
    with pytest.raises(DomainError):
        DecoyParams(mu=0.1, nu=0.2)
    with pytest.raises(DomainError):
        DecoyParams(e_d=0.6)
    with pytest.raises(DomainError):
        DecoyParams(p_mu=0.5, p_nu=0.5, p_omega=0.5)
    with pytest.raises(DomainError):
        DetectorSpec(efficiency=1.5)


def test_dead_time_reduces_efficiency():
    link = LinkParameters(noise_p=1e-3, detector=DetectorSpec(dead_time_ns=1000.0))
    assert effective_efficiency(link) < link.detector.efficiency
    assert effective_efficiency(LinkParameters()) == link.detector.efficiency


link_strategy = st.builds(
    lambda mu, r1, r2, la, lb, p, e_d: LinkParameters(
        DecoyParams(mu, mu * r1, mu * r1 * r2, e_d=e_d), la, lb, p
    ),
    st.floats(0.05, 1.0),
    st.floats(0.05, 0.8),
    st.floats(0.0, 0.5),
    st.floats(0.0, 40.0),
    st.floats(0.0, 40.0),
    st.floats(0.0, 1e-2),
    st.floats(0.0, 0.2),
)


@settings(max_examples=60, deadline=None)
@given(link_strategy)
def test_gains_and_errors_in_range(link):
    for pg in gains_and_errors(link).pairs.values():
        assert 0 <= pg.q_z <= 1 and 0 <= pg.q_x <= 1
        assert 0 <= pg.e_z <= 0.5 + 1e-12 and 0 <= pg.e_x <= 0.5 + 1e-12


@settings(max_examples=60, deadline=None)
@given(st.floats(0.0, 1.0), st.floats(0.0, 1.0), st.floats(0.0, 1.0), st.floats(0, 1e-3))
def test_gain_monotone_in_intensity(x1, x2, xb, p):
    lo, hi = sorted((x1, x2))
    a, b = pair_gains(lo, xb, p), pair_gains(hi, xb, p)
    assert a.q_z <= b.q_z * (1 + 1e-12) + 1e-300
    assert a.q_x <= b.q_x * (1 + 1e-12) + 1e-300


# -- decoy bounds --------------------------------------------------------

def test_all_zero_gains_clamp():
    decoy = DecoyParams()
    zero = GainErrorSet(decoy.intensities, {k: PairGains(0.0, 0.0, 0.0, 0.0) for k in PAIRS})
    b = decoy_bounds(zero, decoy)
    assert b.q11_z_lower == 0.0
    assert b.clamped


@pytest.mark.parametrize("mu", [0.05, 0.01])
def test_bound_tight_in_single_photon_limit(mu):
    decoy = DecoyParams(mu, mu / 4, 0.0, e_d=0.0)
    link = LinkParameters(decoy)
    truth = true_single_photon_stats(link)
    b = decoy_bounds(gains_and_errors(link), decoy)
    assert b.q11_z_lower == pytest.approx(truth["q11_z"], rel=0.05)
    assert b.q11_z_lower <= truth["q11_z"]


@settings(max_examples=80, deadline=None)
@given(link_strategy)
def test_bounds_hold_against_exact_single_photon_truth(link):
    truth = true_single_photon_stats(link)
    b = decoy_bounds(gains_and_errors(link), link.decoy)
    assert b.q11_z_lower <= truth["q11_z"] * (1 + 1e-9) + 1e-300
    if not b.clamped:
        assert b.e11_x_upper >= truth["e11_x"] * (1 - 1e-9)


# -- key rate ------------------------------------------------------------

def test_key_rate_examples():
    assert secret_key_rate(1e-4, 0.0, 1e-3, 0.0) == 1e-4
    assert secret_key_rate(1e-4, 0.5, 1e-3, 0.02, 1.14) == pytest.approx(-1e-3 * 1.14 * binary_entropy(0.02))
    assert secret_key_rate(1e-4, 0.5, 1e-3, 0.02) <= 0


def test_key_rate_range_checks():
    with pytest.raises(DomainError):
        secret_key_rate(-1e-4, 0.1, 1e-3, 0.01)
    with pytest.raises(DomainError):
        secret_key_rate(1e-4, 0.1, 1e-3, 0.01, f=0.9)


def test_report_consistent_with_rate_formula():
    rep = evaluate(LinkParameters(loss_a_db=10, loss_b_db=12, noise_p=1e-6))
    sig = rep.gains.signal()
    expect = secret_key_rate(rep.q11_lower, rep.e11x_upper, sig.q_z, sig.e_z, 1.14)
    assert rep.r_inf_raw == pytest.approx(expect, rel=1e-12)
    assert rep.r_positive == (rep.r_inf > 0)
    assert rep.r_inf_bps == pytest.approx(rep.r_inf * 20e6)


@settings(max_examples=40, deadline=None)
@given(link_strategy)
def test_rate_symmetric_under_arm_swap(link):
    a = evaluate(link).r_inf_raw
    b = evaluate(link.swapped()).r_inf_raw
    assert a == pytest.approx(b, rel=1e-9, abs=1e-18)


@settings(max_examples=40, deadline=None)
@given(st.floats(0, 30), st.floats(1e-9, 1e-4), st.floats(1.5, 10))
def test_rate_decreases_with_noise(loss, p, factor):
    lo = evaluate(LinkParameters(loss_a_db=loss, loss_b_db=loss, noise_p=p)).r_inf_raw
    hi = evaluate(LinkParameters(loss_a_db=loss, loss_b_db=loss, noise_p=min(p * factor, 0.5))).r_inf_raw
    assume(abs(lo) > 1e-15)
    assert hi <= lo


def test_pairs_cover_all_intensity_combinations():
    assert len(PAIRS) == 9
    assert set(gains_and_errors(LinkParameters()).pairs) == set(PAIRS)
