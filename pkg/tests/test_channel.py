import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.integrate import quad

from mdiqkd_coexist.channel import (
    PLANCK,
    SPEED_OF_LIGHT,
    ClassicalChannel,
    Direction,
    FibreSpec,
    QuantumChannelSpec,
    attenuate,
    db_to_natural,
    power_to_photon_rate,
    raman_bidirectional,
    raman_co,
    raman_counter,
)
from mdiqkd_coexist.errors import DomainError

LENGTHS = (1.0, 10.0, 20.0, 40.0, 100.0)
ALPHAS = (0.05, 0.06, 0.07, 0.08)


def quad_co(p, beta, aq, ac, length):
    val, _ = quad(lambda z: p * math.exp(-ac * z) * beta * math.exp(-aq * (length - z)), 0, length,
                  epsabs=0, epsrel=1e-13, limit=200)
    return val


def quad_counter(p, beta, aq, ac, length):
    val, _ = quad(lambda z: p * math.exp(-ac * z) * beta * math.exp(-aq * z), 0, length,
                  epsabs=0, epsrel=1e-13, limit=200)
    return val


# -- quadrature oracle ---------------------------------------------------

@pytest.mark.parametrize("length", LENGTHS)
@pytest.mark.parametrize("aq", ALPHAS)
@pytest.mark.parametrize("ac", ALPHAS)
def test_closed_forms_match_quadrature(length, aq, ac):
    p, beta = 8e-6, 3e-9
    assert raman_co(p, beta, aq, ac, length) == pytest.approx(quad_co(p, beta, aq, ac, length), rel=1e-9)
    assert raman_counter(p, beta, aq, ac, length) == pytest.approx(quad_counter(p, beta, aq, ac, length), rel=1e-9)


def test_reference_point_against_quadrature():
    args = (8e-6, 3e-9, 0.053, 0.069, 20.0)
    assert raman_co(*args) == pytest.approx(quad_co(*args), rel=1e-9)
    assert raman_counter(*args) == pytest.approx(quad_counter(*args), rel=1e-9)


# -- examples ------------------------------------------------------------

def test_attenuate_examples():
    assert attenuate(8e-6, 0.30, 20) == pytest.approx(2.0e-6, rel=0.01)
    assert attenuate(20e-6, 0.25, 40) == pytest.approx(2.0e-6, rel=1e-12)
    assert attenuate(3.3e-3, 0.0, 123.0) == 3.3e-3


def test_attenuate_rejects_negative():
    with pytest.raises(DomainError):
        attenuate(-1.0, 0.2, 1.0)
    with pytest.raises(DomainError):
        attenuate(1.0, 0.2, -1.0)


def test_raman_zero_length():
    assert raman_co(1e-3, 1e-9, 0.05, 0.07, 0.0) == 0.0
    assert raman_counter(1e-3, 1e-9, 0.05, 0.07, 0.0) == 0.0


def test_raman_co_degenerate_limit():
    p, beta, a, length = 8e-6, 3e-9, 0.06, 25.0
    assert raman_co(p, beta, a, a, length) == pytest.approx(p * beta * length * math.exp(-a * length), rel=1e-15)
    # just outside the switch-over the closed form must agree with the limit
    near = raman_co(p, beta, a, a + 2e-9, length)
    assert near == pytest.approx(quad_co(p, beta, a, a + 2e-9, length), rel=1e-9)


def test_raman_counter_saturates():
    p, beta, aq, ac = 8e-6, 3e-9, 0.05, 0.07
    assert raman_counter(p, beta, aq, ac, 1e4) == pytest.approx(p * beta / (aq + ac), rel=1e-6)


def test_raman_counter_zero_attenuation_limit():
    assert raman_counter(2.0, 3.0, 0.0, 0.0, 5.0) == 30.0


def test_bidirectional_sums_directions():
    fibre = FibreSpec(20.0, 0.2, 0.3)
    aq, ac = fibre.alpha_q_nat, fibre.alpha_c_nat
    assert raman_bidirectional([], fibre, 1e-9) == 0.0
    plan = [ClassicalChannel(1548, 8e-6, Direction.CO), ClassicalChannel(1548, 8e-6, Direction.COUNTER)]
    expect = raman_co(8e-6, 1e-9, aq, ac, 20.0) + raman_counter(8e-6, 1e-9, aq, ac, 20.0)
    assert raman_bidirectional(plan, fibre, 1e-9) == pytest.approx(expect, rel=1e-15)
    doubled = [ClassicalChannel(c.wavelength_nm, 2 * c.launch_power_w, c.direction) for c in plan]
    assert raman_bidirectional(doubled, fibre, 1e-9) == pytest.approx(2 * expect, rel=1e-15)


def test_photon_rate_examples():
    lam = 1532.0
    assert power_to_photon_rate(PLANCK * SPEED_OF_LIGHT / (lam * 1e-9), lam) == pytest.approx(1.0, rel=1e-12)
    assert power_to_photon_rate(1e-12, 1532.0) == pytest.approx(7.712e6, rel=1e-3)
    assert power_to_photon_rate(0.0, 1310.0) == 0.0


def test_db_conversion():
    assert db_to_natural(10 / math.log(10)) == pytest.approx(1.0)
    assert FibreSpec(1.0, 0.2).alpha_q_nat == pytest.approx(0.2 * math.log(10) / 10)


def test_domain_checks():
    with pytest.raises(DomainError):
        ClassicalChannel(1700.0, 1e-3, Direction.CO)
    with pytest.raises(DomainError):
        ClassicalChannel(1548.0, -1e-3, Direction.CO)
    with pytest.raises(DomainError):
        FibreSpec(-1.0)
    with pytest.raises(DomainError):
        FibreSpec(10.0, alpha_q=0.0)
    with pytest.raises(DomainError):
        raman_co(1e-3, -1.0, 0.05, 0.05, 1.0)


def test_quantum_bandwidth_representations():
    spec = QuantumChannelSpec(1532.68)
    assert spec.bandwidth_ghz == 6.0
    nm = 6e9 * (1532.68e-9) ** 2 / SPEED_OF_LIGHT * 1e9
    assert QuantumChannelSpec(1532.68, bandwidth_ghz=6.0, bandwidth_nm=nm).bandwidth_ghz == 6.0
    with pytest.raises(DomainError):
        QuantumChannelSpec(1532.68, bandwidth_ghz=6.0, bandwidth_nm=nm * 1.01)


# -- properties ----------------------------------------------------------

alpha = st.floats(1e-4, 0.5)
length = st.floats(0.0, 200.0)
power = st.floats(0.0, 1e-2)


@given(power, alpha, alpha, length)
def test_co_symmetric_in_attenuations(p, aq, ac, length):
    a = raman_co(p, 1e-9, aq, ac, length)
    b = raman_co(p, 1e-9, ac, aq, length)
    assert a == pytest.approx(b, rel=1e-9, abs=1e-300)


@given(power, alpha, alpha, st.floats(1e-3, 200.0))
def test_co_never_exceeds_counter(p, a1, a2, length):
    aq, ac = min(a1, a2), max(a1, a2)
    assert raman_co(p, 1e-9, aq, ac, length) <= raman_counter(p, 1e-9, aq, ac, length) * (1 + 1e-12)


@given(power, st.floats(0.0, 1.0), length, length)
def test_attenuate_composes(p, a, l1, l2):
    assert attenuate(attenuate(p, a, l1), a, l2) == pytest.approx(attenuate(p, a, l1 + l2), rel=1e-12, abs=1e-300)


@given(st.floats(0.0, 1.0), st.floats(0.0, 1.0), st.floats(1260, 1625))
def test_photon_rate_linear(p1, p2, lam):
    assert power_to_photon_rate(p1 + p2, lam) == pytest.approx(
        power_to_photon_rate(p1, lam) + power_to_photon_rate(p2, lam), rel=1e-12, abs=1e-300
    )


@settings(max_examples=50)
@given(alpha, alpha, st.floats(0.5, 150.0))
def test_random_points_match_quadrature(aq, ac, length):
    p, beta = 1e-3, 1e-9
    assert raman_co(p, beta, aq, ac, length) == pytest.approx(quad_co(p, beta, aq, ac, length), rel=1e-9)
    assert raman_counter(p, beta, aq, ac, length) == pytest.approx(quad_counter(p, beta, aq, ac, length), rel=1e-9)


def test_vectorised_grid_is_finite():
    grid = [raman_co(1e-3, 1e-9, a, b, l) for a in ALPHAS for b in ALPHAS for l in LENGTHS]
    assert np.all(np.isfinite(grid)) and min(grid) > 0
