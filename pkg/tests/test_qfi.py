import dataclasses
import math

import numpy as np
import pytest

from optoqfi.coupling import Constant, CosModulated, CouplingSpec, ProbeState, SineModulated, Theta, Zero
from optoqfi.errors import UnboundedVariance, UnsupportedCombination, ValidationError
from optoqfi.fcoeffs import ClosedForm, FCoefficients, FDerivatives, FiniteDiff
from optoqfi.oracle import build_space, qfi_oracle
from optoqfi.qfi import (
    TERM_NAMES,
    QfiCoefficients,
    assemble_coefficients,
    closed_form_qfi,
    cramer_rao,
    d2_const_coefficients,
    d2_res_coefficients,
    qfi_d1_const,
    qfi_d1_general,
    qfi_d1_res,
    qfi_d2_const_app,
    qfi_d2_res_app,
    qfi_g0_general,
    qfi_g0_res,
    qfi_g0_res_asymptotic,
    qfi_general,
    qfi_pipeline,
)

TABLE_PROBE = ProbeState(1000.0, 2.56)


def rel(a, b):
    return abs(a - b) / abs(b)


def g0_spec(g0, eps, omega):
    return CouplingSpec(SineModulated(g0, eps, omega), theta=Theta.G0)


def d1_spec(g0, d1, omega):
    form = CosModulated(d1, omega) if omega else Constant(d1)
    return CouplingSpec(Constant(g0), form, theta=Theta.D1)


# --------------------------------------------------------- coefficients


def test_zero_derivatives_give_zero_coefficients():
    F = FCoefficients(0.3, -1.2, 0.4, 0.1, -0.7, 0.9)
    c = assemble_coefficients(F, FDerivatives(), (0.1, -0.2, 0.5), 3.0)
    assert all(v == 0.0 for v in dataclasses.astuple(c))


def test_example_i_coefficient_pattern():
    F = FCoefficients(f_na2=-2.0, f_nabp=0.3, f_nabm=-1.1)
    dF = FDerivatives(f_na2=0.7, f_nabp=0.2, f_nabm=-0.4)
    c = assemble_coefficients(F, dF, (0.0, 0.0, 1.0), 2.0)
    assert c.a == -0.7 - 2.0 * (-1.1) * 0.2
    assert (c.c_na_plus, c.c_na_minus) == (-0.2, 0.4)
    assert (c.b, c.c_plus, c.c_minus, c.e, c.f_big, c.g_big) == (0.0,) * 6


def test_example_ii_coefficient_pattern():
    F = FCoefficients(f_na2=-2.0, f_bp=0.5, f_bm=0.6, f_nabp=0.3, f_nabm=-1.1)
    dF = FDerivatives(f_na=0.25, f_bp=0.8, f_bm=-0.3)
    c = assemble_coefficients(F, dF, (0.0, 0.0, 1.0), 2.0)
    assert c.b == -0.25 - 2.0 * (-1.1) * 0.8
    assert (c.c_plus, c.c_minus) == (-0.8, 0.3)
    assert (c.a, c.c_na_plus, c.c_na_minus, c.f_big, c.g_big) == (0.0,) * 5


def test_zero_J_derivatives_leave_no_squeezing_coefficients():
    F = FCoefficients(0.3, -1.2, 0.4, 0.1, -0.7, 0.9)
    dF = FDerivatives(0.1, 0.2, 0.3, 0.4, 0.5, 0.6)
    c = assemble_coefficients(F, dF, (0.2, 0.1, 0.5), 3.0)
    assert (c.e, c.f_big, c.g_big, c.r0, c.r_plus, c.r_minus) == (0.0,) * 6


# ------------------------------------------------------- general formula


def test_all_zero_coefficients():
    res = qfi_general(QfiCoefficients(), ProbeState(2.0, 0.4))
    assert res.value == 0.0
    assert set(res.terms) == set(TERM_NAMES)


def test_value_is_sum_of_terms():
    c = QfiCoefficients(a=0.3, b=-0.2, c_plus=0.1, c_na_minus=0.4, f_big=0.05, g_big=-0.3)
    res = qfi_general(c, ProbeState(1.5, 0.7))
    assert res.value == math.fsum(res.terms.values())


def test_e_and_k_are_ignored_bitwise():
    base = QfiCoefficients(a=0.3, b=-0.2, c_plus=0.1, c_minus=0.2, c_na_plus=-0.6, c_na_minus=0.4, f_big=0.05, g_big=-0.3)
    probe = ProbeState(1.7, 0.9)
    ref = qfi_general(base, probe).value
    for e, k in [(1.0, 0.0), (0.0, -3.0), (1e8, 1e-8)]:
        assert qfi_general(dataclasses.replace(base, e=e, k=k), probe).value == ref


STRUCTURAL = {
    "i": ("a", "c_na_plus", "c_na_minus"),
    "ii": ("b", "c_plus", "c_minus"),
    "iii": ("a", "b", "c_plus", "c_minus", "c_na_plus", "c_na_minus", "f_big", "g_big"),
}


@pytest.mark.parametrize("example", sorted(STRUCTURAL))
def test_nonnegative_on_random_coefficients(example):
    rng = np.random.default_rng(11)
    for _ in range(10_000):
        fields = {name: float(x) for name, x in zip(STRUCTURAL[example], rng.normal(0, 10, 8))}
        probe = ProbeState(complex(*rng.normal(0, 3, 2)), float(rng.uniform(0, 4)))
        assert qfi_general(QfiCoefficients(**fields), probe).value >= 0.0


# ------------------------------------------------- coupling estimation


def test_vanishes_without_photons():
    probe = ProbeState(0.0, 0.5)
    assert qfi_g0_res(1.0, 0.5, 7.0, probe).value == 0.0
    assert qfi_g0_general(1.0, 0.5, 0.8, 7.0, probe).value == 0.0
    assert qfi_pipeline(g0_spec(1.0, 0.5, 0.8), 7.0, probe).value == 0.0


def test_zero_coupling_keeps_displacement_information():
    # d/dg0 of the photon-dependent displacement does not depend on g0, so
    # only the A block vanishes at g0 = 0; the oracle confirms the remainder
    probe = ProbeState(1.0, 0.3)
    res = qfi_g0_res(0.0, 0.0, 2.0, probe)
    assert res.terms["A"] == 0.0 and res.value > 0.0
    oracle = qfi_oracle(build_space(12, 16), CouplingSpec(Constant(0.0), theta=Theta.G0), probe, 2.0)
    assert rel(oracle, res.value) < 1e-6


def test_g0_table_value():
    assert qfi_g0_res(100.0, 0.5, 2 * math.pi, TABLE_PROBE).value == pytest.approx(3.02e25, rel=0.01)


def test_g0_general_at_0_8_matches_pipeline():
    probe = ProbeState(1.0, 0.0)
    closed = qfi_g0_general(1.0, 0.5, 0.8, 10.0, probe)
    pipe = qfi_pipeline(g0_spec(1.0, 0.5, 0.8), 10.0, probe)
    assert closed.meta["branch"] == "general"
    assert rel(pipe.value, closed.value) < 1e-6


def test_g0_resonance_matches_pipeline():
    probe = ProbeState(1.3, 0.4)
    closed = qfi_g0_res(0.7, 0.3, 6.0, probe)
    pipe = qfi_pipeline(g0_spec(0.7, 0.3, 1.0), 6.0, probe)
    assert rel(pipe.value, closed.value) < 1e-10


def test_g0_general_rejects_zero_frequency():
    with pytest.raises(ValidationError):
        qfi_g0_general(1.0, 0.5, 0.0, 1.0, ProbeState(1.0))


def test_g0_pipeline_vs_closed_form_random():
    rng = np.random.default_rng(3)
    worst = 0.0
    for _ in range(50):
        g0, eps, tau = rng.uniform(0.1, 2), rng.uniform(0, 1), rng.uniform(0.5, 20)
        omega = rng.choice([rng.uniform(0.2, 0.95), rng.uniform(1.05, 3)])
        probe = ProbeState(rng.uniform(0.2, 3), rng.uniform(0, 2))
        closed = qfi_g0_general(g0, eps, omega, tau, probe).value
        pipe = qfi_pipeline(g0_spec(g0, eps, omega), tau, probe).value
        worst = max(worst, rel(pipe, closed))
    assert worst < 1e-6


def test_asymptotic_against_resonant_expression():
    probe = ProbeState(1.0, 0.0)
    tau = 100 * math.pi
    full = qfi_g0_res(1.0, 0.01, tau, probe).value
    approx = qfi_g0_res_asymptotic(1.0, 0.01, tau, probe).value
    assert rel(approx, full) < 0.1


def test_asymptotic_requires_vacuum_mechanics():
    with pytest.raises(ValidationError):
        qfi_g0_res_asymptotic(1.0, 0.01, 10.0, ProbeState(1.0, 0.1))


# ---------------------------------------------- displacement estimation


def test_d1_mechanics_only():
    assert qfi_d1_const(0.0, 1.0, math.pi, ProbeState(1.0, 0.0)).value == pytest.approx(16.0, rel=1e-15)


def test_d1_table_value():
    assert qfi_d1_res(100.0, 1.0, 2 * math.pi, TABLE_PROBE).value == pytest.approx(1.58e12, rel=0.01)


def test_d1_general_limits():
    probe = ProbeState(1.4, 0.6)
    assert qfi_d1_general(0.8, 1.0, 0.0, 5.0, probe).value == pytest.approx(
        qfi_d1_const(0.8, 1.0, 5.0, probe).value, rel=1e-13
    )
    assert qfi_d1_general(0.8, 1.0, 1.0, 5.0, probe).value == qfi_d1_res(0.8, 1.0, 5.0, probe).value
    with pytest.raises(ValidationError):
        qfi_d1_general(0.8, 1.0, -0.1, 5.0, probe)


def test_d1_pipeline_vs_closed_form_random():
    rng = np.random.default_rng(5)
    worst = 0.0
    for _ in range(50):
        g0, d1, tau = rng.uniform(0.1, 2), rng.uniform(0.1, 2), rng.uniform(0.5, 20)
        omega = rng.choice([0.0, rng.uniform(0.05, 0.95), rng.uniform(1.05, 3)])
        probe = ProbeState(rng.uniform(0.2, 3), rng.uniform(0, 2))
        closed = qfi_d1_general(g0, d1, omega, tau, probe).value
        pipe = qfi_pipeline(d1_spec(g0, d1, omega), tau, probe).value
        worst = max(worst, rel(pipe, closed))
    assert worst < 1e-6


def test_d1_resonance_matches_pipeline():
    probe = ProbeState(0.9, 0.2)
    assert rel(qfi_pipeline(d1_spec(0.6, 1.0, 1.0), 8.0, probe).value, qfi_d1_res(0.6, 1.0, 8.0, probe).value) < 1e-10


def test_d1_const_over_res_ratio():
    probe = ProbeState(10.0, 0.0)
    ratio = qfi_d1_const(1.0, 1.0, 200.0, probe).value / qfi_d1_res(1.0, 1.0, 200.0, probe).value
    assert ratio == pytest.approx(4.0, rel=0.05)


def test_d1_decreasing_in_temperature():
    vals = [qfi_d1_const(0.5, 1.0, 3.0, ProbeState(1.0, r)).value for r in np.linspace(0.2, 5, 40)]
    assert all(b < a for a, b in zip(vals, vals[1:]))


# ------------------------------------------------- squeezing estimation


def test_d2_table_value():
    assert qfi_d2_res_app(100.0, 2 * math.pi, TABLE_PROBE).value == pytest.approx(6.32e28, rel=0.01)


def test_d2_const_reference_value():
    assert qfi_d2_const_app(100.0, 2 * math.pi, TABLE_PROBE).value == pytest.approx(7.59e16, rel=0.02)


@pytest.mark.parametrize("r_T", [0.0, 0.7, 2.56])
def test_d2_closed_forms_equal_their_coefficient_lists(r_T):
    probe = ProbeState(3.0, r_T)
    res = qfi_general(d2_res_coefficients(1.5, 4.0), probe).value
    assert rel(res, qfi_d2_res_app(1.5, 4.0, probe).value) < 1e-14
    const = qfi_general(d2_const_coefficients(1.5, 4.0), probe).value
    assert rel(const, qfi_d2_const_app(1.5, 4.0, probe).value) < 1e-14


def test_d2_res_over_const_ratio():
    probe = ProbeState(30.0, 0.0)
    ratio = qfi_d2_res_app(2.0, 10.0, probe).value / qfi_d2_const_app(2.0, 10.0, probe).value
    assert ratio == pytest.approx(4.0 * 900.0, rel=0.05)


def test_d2_const_increasing_in_temperature():
    vals = [qfi_d2_const_app(0.5, 3.0, ProbeState(1.0, r)).value for r in np.linspace(0.2, 5, 40)]
    assert all(b > a for a, b in zip(vals, vals[1:]))


def test_exact_constant_squeezing_matches_oracle():
    spec = CouplingSpec(Constant(0.1), Zero(), Constant(0.001), theta=Theta.D2)
    probe = ProbeState(1.0, 0.0)
    exact = qfi_pipeline(spec, 4.0, probe, FiniteDiff()).value
    oracle = qfi_oracle(build_space(12, 16), spec, probe, 4.0)
    assert rel(exact, oracle) < 1e-4
    # the weak-squeezing closed form keeps only C_Na,+ and lands far below
    assert qfi_d2_const_app(0.1, 4.0, probe).value < 0.5 * exact


# ----------------------------------------------------------- dispatch


def test_closed_form_dispatch():
    probe = ProbeState(1.0, 0.3)
    assert closed_form_qfi(g0_spec(1.0, 0.5, 0.8), 5.0, probe) == qfi_g0_general(1.0, 0.5, 0.8, 5.0, probe)
    assert closed_form_qfi(d1_spec(1.0, 1.0, 0.0), 5.0, probe) == qfi_d1_const(1.0, 1.0, 5.0, probe)
    spec = CouplingSpec(Constant(1.0), Zero(), CosModulated(0.01, 2.0), theta=Theta.D2)
    assert closed_form_qfi(spec, 5.0, probe) == qfi_d2_res_app(1.0, 5.0, probe)
    with pytest.raises(UnsupportedCombination):
        closed_form_qfi(CouplingSpec(SineModulated(1.0, 0.5, 0.8), theta=Theta.OMEGA_G), 5.0, probe)


def test_closed_form_method_default():
    probe = ProbeState(1.0)
    spec = g0_spec(1.0, 0.5, 0.8)
    assert qfi_pipeline(spec, 3.0, probe).value == qfi_pipeline(spec, 3.0, probe, ClosedForm()).value


# -------------------------------------------------------------- oracle


def test_small_instance_against_oracle():
    spec = CouplingSpec(Constant(0.1), theta=Theta.G0)
    probe = ProbeState(1.0, 0.3)
    analytic = qfi_pipeline(spec, 1.0, probe).value
    oracle = qfi_oracle(build_space(12, 16), spec, probe, 1.0)
    assert rel(oracle, analytic) < 1e-4


# ------------------------------------------------------------ Cramer-Rao


def test_cramer_rao_reference_values():
    assert cramer_rao(3.02e25) == pytest.approx(1.82e-13, rel=0.02)
    assert cramer_rao(1.58e12) == pytest.approx(7.96e-7, rel=0.02)


def test_cramer_rao_repetitions():
    assert cramer_rao(2.5, M=4) == pytest.approx(cramer_rao(2.5) / 2.0, rel=1e-15)


def test_cramer_rao_errors():
    with pytest.raises(UnboundedVariance):
        cramer_rao(0.0)
    for bad in [(-1.0, 1), (math.inf, 1), (1.0, 0), (1.0, 1.5)]:
        with pytest.raises(ValidationError):
            cramer_rao(*bad)
