"""Decoupling functions F and their derivatives with respect to the estimation parameter.

With ``Re xi = P11`` and ``Im xi = -I_P22`` the six functions are

    F_B+    =  int D1 Re xi            F_NaB+ = -int G Re xi
    F_B-    = -int D1 Im xi            F_NaB- =  int G Im xi
    F_Na2   =  2 int G Im xi (-F_NaB+)
    F_Na    = -2 int D1 Im xi (-F_NaB+) - 2 int G Im xi F_B+

The nested integrals are obtained by integrating the running inner integrals
alongside the mechanics, so a single adaptive solve yields all six.  Closed
forms are provided for three families of couplings:

* (i)   ``G = g0 (1 + eps sin(Omega tau))``, ``D1 = D2 = 0``;
* (ii)  ``G = g0``, ``D1 = d1 cos(Omega tau)``, ``D2 = 0``;
* (iii) ``G = g0``, ``D1 = 0``, weak constant or parametrically resonant
  ``D2`` (approximate expressions, valid for ``d2 << 1``).
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, fields

import numpy as np
from scipy.integrate import solve_ivp

from .coupling import Constant, CosModulated, SineModulated, Theta, Zero, eval_D1, eval_D2, eval_G
from .errors import IntegrationError, OutOfRange, UnsupportedCombination, ValidationError
from .mechanics import bogoliubov_from_xi, extract_J

RESONANCE_SWITCH = 1e-6
FD_TOL = 1e-13


@dataclass(frozen=True)
class FCoefficients:
    f_na: float = 0.0
    f_na2: float = 0.0
    f_bp: float = 0.0
    f_bm: float = 0.0
    f_nabp: float = 0.0
    f_nabm: float = 0.0
    branch: str = "quadrature"

    def as_array(self):
        return np.array([self.f_na, self.f_na2, self.f_bp, self.f_bm, self.f_nabp, self.f_nabm])


F_NAMES = ("f_na", "f_na2", "f_bp", "f_bm", "f_nabp", "f_nabm")


@dataclass(frozen=True)
class FDerivatives:
    f_na: float = 0.0
    f_na2: float = 0.0
    f_bp: float = 0.0
    f_bm: float = 0.0
    f_nabp: float = 0.0
    f_nabm: float = 0.0
    dj_plus: float = 0.0
    dj_minus: float = 0.0
    dj_b: float = 0.0
    branch: str = ""

    def as_array(self):
        return np.array([getattr(self, f.name) for f in fields(self) if f.name != "branch"])


# ---------------------------------------------------------------- quadrature


def augmented_rhs(spec):
    """Right-hand side for ``[P11, P11', I, I', F_B+, F_B-, F_NaB+, F_NaB-, F_Na, F_Na2]``."""

    def rhs(tau, y):
        p11, p11d, ip, ipd, fbp, _, fnbp, _, _, _ = y
        k = 1.0 + 4.0 * float(eval_D2(spec, tau))
        g = float(eval_G(spec, tau))
        d = float(eval_D1(spec, tau))
        re, im = p11, -ip
        return [
            p11d,
            -k * p11,
            ipd,
            -k * ip,
            d * re,
            -d * im,
            -g * re,
            g * im,
            2.0 * d * im * fnbp - 2.0 * g * im * fbp,
            -2.0 * g * im * fnbp,
        ]

    return rhs


_Y0 = [1.0, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0]


def _state_to_F(y, branch="quadrature"):
    return FCoefficients(
        f_na=float(y[8]),
        f_na2=float(y[9]),
        f_bp=float(y[4]),
        f_bm=float(y[5]),
        f_nabp=float(y[6]),
        f_nabm=float(y[7]),
        branch=branch,
    )


def _state_to_J(y):
    xi = y[0] - 1j * y[2]
    xi_dot = y[1] - 1j * y[3]
    alpha, beta = bogoliubov_from_xi(xi, xi_dot)
    return extract_J(alpha, beta)


def _integrate(spec, taus, tol, method):
    taus = np.atleast_1d(np.asarray(taus, dtype=float))
    if np.any(taus < 0):
        raise ValidationError("tau must be >= 0")
    tau_end = float(taus.max())
    if tau_end == 0.0:
        return np.tile(np.array(_Y0)[:, None], (1, taus.size))
    sol = solve_ivp(
        augmented_rhs(spec),
        (0.0, tau_end),
        _Y0,
        method=method,
        dense_output=True,
        rtol=tol,
        atol=tol * 1e-2,
    )
    if sol.status != 0:
        reached = float(sol.t[-1]) if sol.t.size else 0.0
        raise IntegrationError(f"F quadrature failed at tau={reached}: {sol.message}", reached)
    out = sol.sol(taus)
    out[:, taus == 0.0] = np.array(_Y0)[:, None]
    # the endpoint is exact output of the integrator, not interpolated
    out[:, taus == tau_end] = sol.y[:, -1][:, None]
    return out


def quadrature_F(spec, tau, tol=1e-10, method="RK45"):
    """F coefficients and J triple at ``tau`` from one augmented solve."""
    y = _integrate(spec, [tau], tol, method)[:, 0]
    if tau == 0:
        return FCoefficients(), (0.0, 0.0, 0.0)
    return _state_to_F(y), _state_to_J(y)


def compute_F(spec, mech, tau):
    """F coefficients at ``tau`` for the coupling ``spec``.

    Parameters
    ----------
    spec : CouplingSpec
    mech : MechanicsSolution
        Supplies the covered range and the integrator settings.  Must have
        been computed for the same squeezing drive as ``spec``.
    tau : float
        Evaluation time, ``0 <= tau <= mech.tau_max``.
    """
    if tau < 0 or tau > mech.tau_max * (1 + 1e-12):
        raise OutOfRange(f"tau={tau} outside the mechanics solution range [0, {mech.tau_max}]")
    if mech.spec is not None and mech.spec.d2_form != spec.d2_form:
        raise ValidationError("mechanics solution was computed for a different squeezing drive")
    if tau == 0:
        return FCoefficients()
    return quadrature_F(spec, tau, mech.tol, mech.method)[0]


def compute_F_series(spec, taus, tol=1e-10, method="RK45"):
    """F coefficients on many times from a single dense-output solve; shape ``(6, n)``."""
    y = _integrate(spec, taus, tol, method)
    return np.array([y[8], y[9], y[4], y[5], y[6], y[7]])


# ------------------------------------------------------------ example (i)


def _near_resonance(omega, target=1.0, threshold=RESONANCE_SWITCH):
    if omega == target:
        return "resonant"
    if abs(omega - target) < threshold:
        return "resonance_limit"
    return None


def f_na2_example_i_terms(g0, eps, omega, tau):
    """The seven summands of the general-frequency ``F_Na2`` for example (i)."""
    s, c = np.sin, np.cos
    g2 = g0 * g0
    w = omega
    return (
        -g2 * (tau - s(tau) * c(tau)),
        2.0 * eps * g2 / w * (s(tau) ** 2 * c(w * tau) - 2.0 * s(tau / 2.0) ** 2),
        -eps * g2 / (w * (1.0 + w)) * s(2.0 * tau) * s(w * tau),
        -eps * 4.0 * g2 / (w * (1.0 - w * w)) * c(tau) * s((1.0 - w) * tau / 2.0) ** 2,
        eps**2 * g2 / (4.0 * w * (1.0 + w))
        * (2.0 * tau - 4.0 * s(tau) * c(w * tau) * (c(tau) * c(w * tau) - 2.0)),
        eps**2 * g2 / (4.0 * w * (1.0 - w * w))
        * (
            4.0 * s(tau) * c(w * tau) * (c(tau) * c(w * tau) - 2.0)
            + 8.0 * c(tau) * s(w * tau)
            + (1.0 - 2.0 * c(2.0 * tau)) * s(2.0 * w * tau)
            - 2.0 * tau
        ),
        eps**2 * g2 / (2.0 * w * (1.0 - w * w) ** 2)
        * (
            4.0 * w * s(tau) * c(w * tau)
            - w * s(2.0 * tau) * c(2.0 * w * tau)
            - 4.0 * c(tau) * s(w * tau)
            + c(2.0 * tau) * s(2.0 * w * tau)
        ),
    )


def _example_i_orders(omega, tau):
    """Unit-coupling coefficients split by powers of eps.

    Returns ``(na2, nabp, nabm, branch)`` where ``na2 = (c0, c1, c2)`` gives
    ``F_Na2 = g0^2 (c0 + c1 eps + c2 eps^2)`` and ``nabp = (a0, a1)`` gives
    ``F_NaB+ = g0 (a0 + a1 eps)``.
    """
    s, c = math.sin, math.cos
    branch = _near_resonance(omega)
    if branch is not None:
        na2 = (
            -(16.0 * tau - 8.0 * s(2 * tau)) / 16.0,
            -(32.0 - 36.0 * c(tau) + 4.0 * c(3 * tau)) / 16.0,
            -(6.0 * tau - 4.0 * s(2 * tau) + s(2 * tau) * c(2 * tau)) / 16.0,
        )
        nabp = (-s(tau), -0.5 * s(tau) ** 2)
        nabm = (-2.0 * s(tau / 2) ** 2, 0.25 * (s(2 * tau) - 2.0 * tau))
        return na2, nabp, nabm, branch
    c0 = -(tau - s(tau) * c(tau))
    a0p = -s(tau)
    a0m = -2.0 * s(tau / 2) ** 2
    if omega == 0.0:
        # sin(0 * tau) = 0: the coupling is constant
        return (c0, 0.0, 0.0), (a0p, 0.0), (a0m, 0.0), "constant"
    t = f_na2_example_i_terms(1.0, 1.0, omega, tau)
    w = omega
    a1p = -s(tau) * s(w * tau) / (1.0 + w) + 2.0 * w / (1.0 - w * w) * s((1.0 - w) * tau / 2) ** 2
    a1m = -s(tau) * c(w * tau) / (1.0 - w) + s((1.0 + w) * tau) / (1.0 - w * w)
    return (c0, t[1] + t[2] + t[3], t[4] + t[5] + t[6]), (a0p, a1p), (a0m, a1m), "general"


def closed_form_F_example_i(g0, eps, omega_g, tau):
    """Closed-form F for a sinusoidally modulated coupling without drives.

    Exactly at ``omega_g = 1`` the resonance expressions are used; within
    ``RESONANCE_SWITCH`` of it they are used as a limit and the result is
    tagged ``"resonance_limit"``.  ``omega_g = 0`` (or ``eps = 0``) gives
    the constant-coupling values.
    """
    if omega_g < 0:
        raise ValidationError("omega_g must be >= 0")
    (c0, c1, c2), (a0p, a1p), (a0m, a1m), branch = _example_i_orders(omega_g, tau)
    if eps == 0.0 and branch == "general":
        branch = "constant"
    return FCoefficients(
        f_na2=g0 * g0 * (c0 + eps * (c1 + eps * c2)),
        f_nabp=g0 * (a0p + eps * a1p),
        f_nabm=g0 * (a0m + eps * a1m),
        branch=branch,
    )


# ----------------------------------------------------------- example (ii)


def _example_ii_units(omega, tau):
    """Unit-amplitude shapes ``(na, na2, bp, bm, nabp, nabm, branch)``.

    ``F_Na = g0 d1 na``, ``F_Na2 = g0^2 na2``, ``F_B = d1 b``, ``F_NaB = g0 nab``.
    """
    s, c = math.sin, math.cos
    na2 = 0.5 * (s(2 * tau) - 2.0 * tau)
    nabp = -s(tau)
    nabm = c(tau) - 1.0
    branch = _near_resonance(omega)
    if branch is not None:
        na = -0.25 * (s(3 * tau) - 7.0 * s(tau) + 4.0 * tau * c(tau))
        bp = 0.5 * (tau + s(tau) * c(tau))
        bm = 0.5 * s(tau) ** 2
        return na, na2, bp, bm, nabp, nabm, branch
    w = omega
    # sin(w tau) / w, regular at w = 0
    sw = tau * float(np.sinc(w * tau / math.pi))
    na = -(
        2.0 * w * w * c(tau) ** 2 * sw
        + sw * (w * w * c(2 * tau) - 3.0 * w * w + 4.0)
        - 4.0 * s(tau) * c(tau) * c(w * tau)
    ) / (2.0 * (w * w - 1.0))
    bp = -(w * c(tau) * s(w * tau) - s(tau) * c(w * tau)) / (1.0 - w * w)
    bm = -(w * s(tau) * s(w * tau) + c(tau) * c(w * tau) - 1.0) / (1.0 - w * w)
    return na, na2, bp, bm, nabp, nabm, ("constant" if w == 0.0 else "general")


def closed_form_F_example_ii(g0, d1, omega_d1, tau):
    """Closed-form F for constant coupling and a cosine displacement drive."""
    if omega_d1 < 0:
        raise ValidationError("omega_d1 must be >= 0")
    na, na2, bp, bm, nabp, nabm, branch = _example_ii_units(omega_d1, tau)
    return FCoefficients(
        f_na=g0 * d1 * na,
        f_na2=g0 * g0 * na2,
        f_bp=d1 * bp,
        f_bm=d1 * bm,
        f_nabp=g0 * nabp,
        f_nabm=g0 * nabm,
        branch=branch,
    )


# ---------------------------------------------------------- example (iii)

SQUEEZE_CONST = "const"
SQUEEZE_RES = "res"


def _check_weak_squeezing(d2):
    if not (0.0 <= d2 < 0.2):
        raise ValidationError("approximate squeezing expressions need 0 <= d2 < 0.2")
    if d2 > 0.05:
        warnings.warn("d2 > 0.05: approximate squeezing expressions lose accuracy", RuntimeWarning, stacklevel=3)


def _parse_mode(mode, omega_d2):
    mode = str(mode).lower()
    if mode not in (SQUEEZE_CONST, SQUEEZE_RES):
        raise ValidationError(f"unknown squeezing mode {mode!r}")
    if mode == SQUEEZE_RES and omega_d2 is not None and omega_d2 != 2.0:
        raise ValidationError("resonant squeezing expressions hold only at omega_d2 = 2")
    if mode == SQUEEZE_CONST and omega_d2 not in (None, 0.0):
        raise ValidationError("constant squeezing expressions need omega_d2 = 0")
    return mode


def closed_form_F_example_iii(g0, d2, mode, tau, omega_d2=None):
    """Approximate F and J for weak constant (``"const"``) or resonant (``"res"``) squeezing.

    Returns
    -------
    FCoefficients, (j_plus, j_minus, j_b)
    """
    mode = _parse_mode(mode, omega_d2)
    _check_weak_squeezing(d2)
    s, c = math.sin, math.cos
    if mode == SQUEEZE_CONST:
        k = 1.0 + 2.0 * d2
        F = FCoefficients(
            f_na2=-g0 * g0 * (2.0 * k * tau - s(2.0 * k * tau)) / 2.0,
            f_nabp=-g0 * s(k * tau),
            f_nabm=-g0 * (1.0 - c(k * tau)),
            branch="approx_const",
        )
        return F, (0.0, 0.0, k * tau)
    x = d2 * tau
    F = FCoefficients(
        f_na2=g0 * g0 * (math.cosh(2 * x) * s(2 * tau) + math.sinh(2 * x) - 2.0 * tau) / 2.0,
        f_nabp=-g0 * (math.cosh(x) * s(tau) + math.sinh(x) * c(tau)),
        f_nabm=g0 * (math.cosh(x) * c(tau) + math.sinh(x) * s(tau) - 1.0),
        branch="approx_res",
    )
    return F, (0.5 * x, 0.0, tau)


def _example_iii_d2_derivatives(g0, d2, mode, tau):
    s, c = math.sin, math.cos
    if mode == SQUEEZE_CONST:
        k = 1.0 + 2.0 * d2
        return FDerivatives(
            f_na2=-2.0 * g0 * g0 * tau * (1.0 - c(2.0 * k * tau)),
            f_nabp=-2.0 * g0 * tau * c(k * tau),
            f_nabm=-2.0 * g0 * tau * s(k * tau),
            dj_b=2.0 * tau,
            branch="approx_const",
        )
    x = d2 * tau
    return FDerivatives(
        f_na2=g0 * g0 * tau * (math.sinh(2 * x) * s(2 * tau) + math.cosh(2 * x)),
        f_nabp=-g0 * tau * (math.sinh(x) * s(tau) + math.cosh(x) * c(tau)),
        f_nabm=g0 * tau * (math.sinh(x) * c(tau) + math.cosh(x) * s(tau)),
        dj_plus=0.5 * tau,
        branch="approx_res",
    )


# ------------------------------------------------------------- dispatch


def identify_example(spec):
    """Classify a spec into one of the closed-form families.

    Returns ``"i"``, ``"ii"``, ``"iii-const"``, ``"iii-res"`` or ``None``.
    """
    g, d1, d2 = spec.g_form, spec.d1_form, spec.d2_form
    if isinstance(d2, Zero):
        if isinstance(d1, Zero):
            return "i"
        if isinstance(g, Constant):
            return "ii"
        return None
    if isinstance(d1, Zero) and isinstance(g, Constant):
        if isinstance(d2, Constant):
            return "iii-const"
        if isinstance(d2, CosModulated) and d2.omega == 2.0:
            return "iii-res"
    return None


def _g_params(spec):
    g = spec.g_form
    if isinstance(g, SineModulated):
        return g.amplitude, g.epsilon, g.omega
    return g.amplitude, 0.0, 0.0


def _d1_params(spec):
    d1 = spec.d1_form
    if isinstance(d1, CosModulated):
        return d1.amplitude, d1.omega
    if isinstance(d1, Constant):
        return d1.amplitude, 0.0
    return 0.0, 0.0


def closed_form_F(spec, tau):
    """Closed-form F and J for any spec belonging to a supported family."""
    kind = identify_example(spec)
    if kind == "i":
        g0, eps, omega = _g_params(spec)
        return closed_form_F_example_i(g0, eps, omega, tau), (0.0, 0.0, tau)
    if kind == "ii":
        d1, omega = _d1_params(spec)
        return closed_form_F_example_ii(spec.g_form.amplitude, d1, omega, tau), (0.0, 0.0, tau)
    if kind in ("iii-const", "iii-res"):
        mode = SQUEEZE_CONST if kind == "iii-const" else SQUEEZE_RES
        return closed_form_F_example_iii(spec.g_form.amplitude, spec.d2_form.amplitude, mode, tau)
    raise UnsupportedCombination("no closed form for this combination of coupling forms")


@dataclass(frozen=True)
class ClosedForm:
    """Analytic derivatives of the example-specific closed forms."""


@dataclass(frozen=True)
class FiniteDiff:
    """Central differences of the quadrature pipeline with one Richardson step.

    ``h`` defaults to ``1e-6 * max(1, |theta|)``.
    """

    h: float | None = None
    richardson: bool = True
    tol: float = FD_TOL
    method: str = "DOP853"


def _closed_form_derivatives(spec, tau):
    kind = identify_example(spec)
    theta = spec.theta
    if kind == "i" and theta in (Theta.G0, Theta.EPSILON):
        g0, eps, omega = _g_params(spec)
        (c0, c1, c2), (a0p, a1p), (a0m, a1m), branch = _example_i_orders(omega, tau)
        if theta is Theta.G0:
            return FDerivatives(
                f_na2=2.0 * g0 * (c0 + eps * (c1 + eps * c2)),
                f_nabp=a0p + eps * a1p,
                f_nabm=a0m + eps * a1m,
                branch=branch,
            )
        return FDerivatives(
            f_na2=g0 * g0 * (c1 + 2.0 * eps * c2),
            f_nabp=g0 * a1p,
            f_nabm=g0 * a1m,
            branch=branch,
        )
    if kind == "ii" and theta in (Theta.G0, Theta.D1):
        g0 = spec.g_form.amplitude
        d1, omega = _d1_params(spec)
        na, na2, bp, bm, nabp, nabm, branch = _example_ii_units(omega, tau)
        if theta is Theta.G0:
            return FDerivatives(f_na=d1 * na, f_na2=2.0 * g0 * na2, f_nabp=nabp, f_nabm=nabm, branch=branch)
        return FDerivatives(f_na=g0 * na, f_bp=bp, f_bm=bm, branch=branch)
    if kind in ("iii-const", "iii-res") and theta in (Theta.G0, Theta.D2):
        mode = SQUEEZE_CONST if kind == "iii-const" else SQUEEZE_RES
        g0, d2 = spec.g_form.amplitude, spec.d2_form.amplitude
        if theta is Theta.D2:
            _check_weak_squeezing(d2)
            return _example_iii_d2_derivatives(g0, d2, mode, tau)
        F, _ = closed_form_F_example_iii(1.0, d2, mode, tau)
        return FDerivatives(
            f_na2=2.0 * g0 * F.f_na2, f_nabp=F.f_nabp, f_nabm=F.f_nabm, branch=F.branch
        )
    raise UnsupportedCombination(
        f"no closed-form derivative for parameter {theta.value} with these coupling forms"
    )


def _wrap(x):
    return math.remainder(x, 2.0 * math.pi)


def _central_difference(spec, tau, h, tol, method):
    theta = spec.theta_value()
    Fp, Jp = quadrature_F(spec.with_theta(theta + h), tau, tol, method)
    Fm, Jm = quadrature_F(spec.with_theta(theta - h), tau, tol, method)
    dF = (Fp.as_array() - Fm.as_array()) / (2.0 * h)
    dJ = np.array([Jp[0] - Jm[0], Jp[1] - Jm[1], _wrap(Jp[2] - Jm[2])]) / (2.0 * h)
    return np.concatenate([dF, dJ])


def derivatives_wrt_theta(spec, tau, method=None):
    """Derivatives of the F functions and of the J triple with respect to theta.

    Parameters
    ----------
    spec : CouplingSpec
        ``spec.theta`` selects the parameter.
    tau : float
    method : ClosedForm or FiniteDiff, optional
        Defaults to :class:`ClosedForm`.  Closed forms exist only for the
        supported families; other combinations raise
        :class:`UnsupportedCombination` and callers should fall back to
        :class:`FiniteDiff`.
    """
    method = ClosedForm() if method is None else method
    if isinstance(method, ClosedForm):
        return _closed_form_derivatives(spec, tau)
    if not isinstance(method, FiniteDiff):
        raise ValidationError("method must be ClosedForm or FiniteDiff")
    if tau == 0:
        return FDerivatives(branch="finite_difference")
    h = method.h if method.h is not None else 1e-6 * max(1.0, abs(spec.theta_value()))
    d = _central_difference(spec, tau, h, method.tol, method.method)
    if method.richardson:
        d_half = _central_difference(spec, tau, h / 2.0, method.tol, method.method)
        d = (4.0 * d_half - d) / 3.0
    return FDerivatives(*map(float, d), branch="finite_difference")
