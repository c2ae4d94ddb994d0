"""Generator coefficients, the general QFI formula and its closed forms.

The generator ``H_theta = -i U^dagger d_theta U`` is a quadratic polynomial in
the algebra elements with coefficients A, B, C+-, C_Na+-, E, F, G, K.  For
the probe ``|mu_c> (x) rho_th(r_T)`` its QFI is

    I = 4 [ (4m^3 + 6m^2 + m) A^2 + 2 (2m^2 + m) A B + m B^2
            + cosh(2 r_T) m sum_s C_Na,s^2
            + sum_s (C_s + C_Na,s m)^2 / cosh(2 r_T)
            + 4 cosh^2(2 r_T) / (cosh^2(2 r_T) + 1) (F^2 + G^2) ]

with ``m = |mu_c|^2``.  E and K drop out.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

from .errors import UnboundedVariance, ValidationError
from .fcoeffs import (
    ClosedForm,
    FiniteDiff,
    RESONANCE_SWITCH,
    closed_form_F,
    derivatives_wrt_theta,
    quadrature_F,
)

TERM_NAMES = ("A", "AB", "B", "C", "FG")


@dataclass(frozen=True)
class QfiCoefficients:
    a: float = 0.0
    b: float = 0.0
    c_plus: float = 0.0
    c_minus: float = 0.0
    c_na_plus: float = 0.0
    c_na_minus: float = 0.0
    e: float = 0.0
    f_big: float = 0.0
    g_big: float = 0.0
    k: float = 0.0
    r0: float = 0.0
    r_plus: float = 0.0
    r_minus: float = 0.0


@dataclass(frozen=True)
class QfiResult:
    value: float
    terms: dict = field(default_factory=dict)
    meta: dict = field(default_factory=dict)


def _result(terms, **meta):
    full = {name: float(terms.get(name, 0.0)) for name in TERM_NAMES}
    value = math.fsum(full.values())
    if value < 0.0:
        # only rounding can make a sum of variances negative
        scale = math.fsum(abs(v) for v in full.values())
        if value < -1e-12 * scale:
            raise ArithmeticError(f"negative QFI {value} beyond rounding")
        value = 0.0
    return QfiResult(value, full, dict(meta))


def assemble_coefficients(F, dF, J, tau, d_omega_c=0.0):
    """Generator coefficients from F, their derivatives and the J triple.

    ``d_omega_c`` is the derivative of the cavity frequency with respect to
    theta.  Frequency estimation is out of scope, so it defaults to 0.
    """
    j_plus, j_minus, _ = J
    r0 = 2.0 * dF.dj_minus - math.sinh(4.0 * j_plus) * dF.dj_b
    rp = 2.0 * dF.dj_plus - math.cosh(4.0 * j_plus) * dF.dj_b
    rm = 2.0 * dF.dj_plus + math.cosh(4.0 * j_plus) * dF.dj_b
    ep, em = math.exp(4.0 * j_minus), math.exp(-4.0 * j_minus)

    a = (
        -dF.f_na2
        - 2.0 * F.f_nabm * dF.f_nabp
        + 2.0 * F.f_nabm * F.f_nabp * r0
        + em * F.f_nabp**2 * rp
        - ep * F.f_nabm**2 * rm
    )
    b = (
        -tau * d_omega_c
        - dF.f_na
        - 2.0 * F.f_bm * dF.f_nabp
        - 2.0 * F.f_nabm * dF.f_bp
        + 2.0 * (F.f_bp * F.f_nabm + F.f_bm * F.f_nabp) * r0
        + 2.0 * em * F.f_bp * F.f_nabp * rp
        - 2.0 * ep * F.f_bm * F.f_nabm * rm
    )
    c_plus = -dF.f_bp + F.f_bp * r0 - ep * F.f_bm * rm
    c_minus = -dF.f_bm - F.f_bm * r0 - em * F.f_bp * rp
    c_na_plus = -dF.f_nabp + F.f_nabp * r0 - ep * F.f_nabm * rm
    c_na_minus = -dF.f_nabm - F.f_nabm * r0 - em * F.f_nabp * rp
    e = -(ep * rm - em * rp) / 2.0
    f_big = -(ep * rm + em * rp) / 4.0
    g_big = -r0 / 2.0
    k = (
        -2.0 * F.f_bm * dF.f_bp
        + 2.0 * F.f_bm * F.f_bp * r0
        + em * F.f_bp**2 * rp
        - ep * F.f_bm**2 * rm
        + dF.dj_b / 2.0
        + e / 2.0
    )
    return QfiCoefficients(a, b, c_plus, c_minus, c_na_plus, c_na_minus, e, f_big, g_big, k, r0, rp, rm)


def _mu_weights(probe):
    m = probe.mu2
    return m, math.cosh(2.0 * probe.r_T)


def qfi_general(c, probe):
    """QFI of the generator with coefficients ``c`` for the given probe."""
    m, ch = _mu_weights(probe)
    terms = {
        "A": 4.0 * (4.0 * m**3 + 6.0 * m**2 + m) * c.a**2,
        "AB": 8.0 * (2.0 * m**2 + m) * c.a * c.b,
        "B": 4.0 * m * c.b**2,
        "C": 4.0
        * math.fsum(
            [
                ch * m * c.c_na_plus**2,
                ch * m * c.c_na_minus**2,
                (c.c_plus + c.c_na_plus * m) ** 2 / ch,
                (c.c_minus + c.c_na_minus * m) ** 2 / ch,
            ]
        ),
        "FG": 16.0 * ch**2 / (ch**2 + 1.0) * (c.f_big**2 + c.g_big**2),
    }
    return _result(terms, branch="coefficients")


def qfi_pipeline(spec, tau, probe, method=None):
    """QFI for ``spec.theta`` through F, derivatives, coefficients and the general formula.

    ``method`` is :class:`ClosedForm` (default, needs a supported family) or
    :class:`FiniteDiff` (quadrature for any spec).
    """
    method = ClosedForm() if method is None else method
    if isinstance(method, ClosedForm):
        F, J = closed_form_F(spec, tau)
    else:
        F, J = quadrature_F(spec, tau, method.tol, method.method)
    dF = derivatives_wrt_theta(spec, tau, method)
    coeffs = assemble_coefficients(F, dF, J, tau)
    res = qfi_general(coeffs, probe)
    return QfiResult(res.value, res.terms, {"branch": dF.branch or F.branch, "coefficients": coeffs})


# ------------------------------------------------------- coupling estimation


def qfi_g0_res(g0, eps, tau, probe):
    """QFI for the coupling strength with the modulation at mechanical resonance."""
    m, ch = _mu_weights(probe)
    s, c = math.sin, math.cos
    poly = (
        4.0 * tau * eps**2
        - 3.0 * eps**2 * s(2 * tau)
        - 8.0 * tau * eps * s(tau)
        - 32.0 * eps * c(tau)
        + 2.0 * eps * (tau * eps + 2.0) * c(2 * tau)
        + 16.0 * tau
        - 16.0 * s(tau)
        + 28.0 * eps
    )
    a_block = m / 16.0 * g0**2 * (4.0 * m**2 + 6.0 * m + 1.0) * poly**2
    mech = s(tau) ** 2 * (eps * s(tau) + 2.0) ** 2 + (tau * eps - c(tau) * (eps * s(tau) + 2.0) + 2.0) ** 2
    c_block = m * ch * (m / ch**2 + 1.0) * mech
    return _result({"A": a_block, "C": c_block}, branch="resonant")


def qfi_g0_general(g0, eps, omega_g, tau, probe):
    """QFI for the coupling strength at a general modulation frequency."""
    if omega_g <= 0:
        raise ValidationError("general-frequency expression needs omega_g > 0")
    if abs(omega_g - 1.0) < RESONANCE_SWITCH:
        res = qfi_g0_res(g0, eps, tau, probe)
        return QfiResult(res.value, res.terms, {"branch": "resonant" if omega_g == 1.0 else "resonance_limit"})
    m, ch = _mu_weights(probe)
    s, c = math.sin, math.cos
    w, e, t = omega_g, eps, tau
    inner = (
        2 * t * w**5
        - 4 * t * w**3
        + 2 * t * w
        - t * w**3 * e**2
        + 0.5 * w**2 * e**2 * s(2 * w * t)
        + 2 * w**2 * e**2 * c(t) * s(w * t)
        + t * w * e**2
        - 4 * w**4 * e * c(t) * s(w * t / 2) ** 2
        - 2 * (w**2 - 1) * w * s(t) * (w**2 - e * s(w * t) - 1)
        + 4 * w**2 * e * c(t) * s(w * t / 2) ** 2
        - e * c(w * t) * (2 * w**3 * e * s(t) + e * s(w * t) + 2 * w**4 - 6 * w**2 + 4)
        + 2 * w**4 * e
        - 6 * w**2 * e
        + 4 * e
    )
    a_block = 4.0 * g0**2 / (w**2 * (w**2 - 1.0) ** 4) * m * (4.0 * m**2 + 6.0 * m + 1.0) * inner**2
    x = 1.0 - c(t) - e * (w * c(w * t) * s(t) - c(t) * s(w * t)) / (w**2 - 1.0)
    y = s(t) + e * (w * (1.0 - c(t) * c(w * t)) - s(t) * s(w * t)) / (w**2 - 1.0)
    c_block = 4.0 * m * ch * (1.0 + m / ch**2) * (x * x + y * y)
    return _result({"A": a_block, "C": c_block}, branch="general")


def qfi_g0_res_asymptotic(g0, eps, tau, probe):
    """Leading large-time form at resonance, ``16 g0^2 tau^2 m (4m^2 + 6m + 1)(1 - eps sin tau)``.

    Valid for a vacuum mechanical state, ``tau >> 1``, ``eps << 1`` and
    ``g0 >> eps``.
    """
    if probe.r_T != 0.0:
        raise ValidationError("asymptotic expression assumes r_T = 0")
    m = probe.mu2
    val = 16.0 * g0**2 * tau**2 * m * (4.0 * m**2 + 6.0 * m + 1.0) * (1.0 - eps * math.sin(tau))
    return _result({"A": val}, branch="asymptotic")


# --------------------------------------------------- displacement estimation


def qfi_d1_const(g0, d1, tau, probe):
    """QFI for a constant displacement drive."""
    m, ch = _mu_weights(probe)
    return _result(
        {
            "B": 16.0 * g0**2 * m * (tau - math.sin(tau)) ** 2,
            "C": 16.0 * math.sin(tau / 2.0) ** 2 / ch,
        },
        branch="constant",
    )


def qfi_d1_res(g0, d1, tau, probe):
    """QFI for a displacement drive at mechanical resonance."""
    m, ch = _mu_weights(probe)
    s, c = math.sin, math.cos
    return _result(
        {
            "B": 4.0 * g0**2 * m * (tau + s(tau) * (c(tau) - 2.0)) ** 2,
            "C": (tau**2 + 2.0 * tau * s(tau) * c(tau) + s(tau) ** 2) / ch,
        },
        branch="resonant",
    )


def qfi_d1_general(g0, d1, omega_d1, tau, probe):
    """QFI for a cosine displacement drive; regular at ``omega_d1 = 0``."""
    if omega_d1 < 0:
        raise ValidationError("omega_d1 must be >= 0")
    if abs(omega_d1 - 1.0) < RESONANCE_SWITCH:
        res = qfi_d1_res(g0, d1, tau, probe)
        return QfiResult(res.value, res.terms, {"branch": "resonant" if omega_d1 == 1.0 else "resonance_limit"})
    m, ch = _mu_weights(probe)
    s, c = math.sin, math.cos
    w, t = omega_d1, tau
    sw = t * float(_sinc(w * t))
    pref = 4.0 / (1.0 - w * w) ** 2
    b = sw * (w * w * (1.0 - c(t)) - 1.0) + s(t) * c(w * t)
    mech = 2.0 + (w * w - 1.0) * s(w * t) ** 2 - 2.0 * w * s(t) * s(w * t) - 2.0 * c(t) * c(w * t)
    return _result(
        {"B": pref * 4.0 * g0**2 * m * b * b, "C": pref * mech / ch},
        branch="constant" if w == 0.0 else "general",
    )


def _sinc(x):
    return math.sin(x) / x if x != 0.0 else 1.0


# ------------------------------------------------------ squeezing estimation


def d2_const_coefficients(g0, tau):
    """Coefficients for weak constant squeezing: only ``C_Na,+ = 2 g0 tau``."""
    return QfiCoefficients(c_na_plus=2.0 * g0 * tau)


def d2_res_coefficients(g0, tau):
    """Coefficients for weak resonant squeezing: ``A = -g0^2 tau``, ``C_Na,+ = g0 tau``, ``F = -tau/2``."""
    return QfiCoefficients(a=-g0 * g0 * tau, c_na_plus=g0 * tau, f_big=-tau / 2.0)


def qfi_d2_const_app(g0, tau, probe):
    """Approximate QFI for a weak constant squeezing strength."""
    m, ch = _mu_weights(probe)
    return _result({"C": 16.0 * g0**2 * tau**2 * m * (m + ch**2) / ch}, branch="approx_const")


def qfi_d2_res_app(g0, tau, probe):
    """Approximate QFI for weak squeezing modulated at parametric resonance."""
    m, ch = _mu_weights(probe)
    return _result(
        {
            "A": 4.0 * tau**2 * g0**4 * (4.0 * m**3 + 6.0 * m**2 + m),
            "C": 4.0 * tau**2 * g0**2 * m * (m + ch**2) / ch,
            "FG": 4.0 * tau**2 * ch**2 / (ch**2 + 1.0),
        },
        branch="approx_res",
    )


# ------------------------------------------------------------ Cramer-Rao


def cramer_rao(qfi, M=1):
    """Standard-deviation bound ``1 / sqrt(M qfi)`` for ``M`` repetitions."""
    if M < 1 or int(M) != M:
        raise ValidationError("M must be a positive integer")
    if qfi < 0 or not math.isfinite(qfi):
        raise ValidationError("qfi must be finite and >= 0")
    if qfi == 0:
        raise UnboundedVariance("zero Fisher information: the variance bound is unbounded")
    return 1.0 / math.sqrt(M * qfi)


def closed_form_qfi(spec, tau, probe):
    """Dispatch to the printed closed-form QFI for a supported family and parameter."""
    from .coupling import CosModulated, SineModulated, Theta
    from .errors import UnsupportedCombination
    from .fcoeffs import identify_example

    kind = identify_example(spec)
    g = spec.g_form
    if kind == "i" and spec.theta is Theta.G0:
        if isinstance(g, SineModulated) and g.epsilon != 0.0 and g.omega != 0.0:
            return qfi_g0_general(g.amplitude, g.epsilon, g.omega, tau, probe)
        # constant coupling: the general expression at eps = 0, any frequency
        return qfi_g0_general(g.amplitude, 0.0, 0.5, tau, probe)
    if kind == "ii" and spec.theta is Theta.D1:
        d1 = spec.d1_form
        omega = d1.omega if isinstance(d1, CosModulated) else 0.0
        if omega == 0.0:
            return qfi_d1_const(g.amplitude, d1.amplitude, tau, probe)
        return qfi_d1_general(g.amplitude, d1.amplitude, omega, tau, probe)
    if kind == "iii-const" and spec.theta is Theta.D2:
        return qfi_d2_const_app(g.amplitude, tau, probe)
    if kind == "iii-res" and spec.theta is Theta.D2:
        return qfi_d2_res_app(g.amplitude, tau, probe)
    raise UnsupportedCombination("no printed closed-form QFI for this parameter and coupling")
