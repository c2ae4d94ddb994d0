"""Mechanical subsystem: Mathieu-type equations, Bogoliubov pair, squeezing algebra.

With ``xi = P11 - i I_P22`` both real functions obey

    P'' + (1 + 4 D2(tau)) P = 0,   P11(0) = 1, P11'(0) = 0, I(0) = 0, I'(0) = 1,

and the Bogoliubov coefficients follow as ``alpha = (xi + i xi')/2`` and
``beta = (conj(xi) + i conj(xi'))/2``.  The propagator of the squeezing part is
decomposed as ``exp(-i J_b N_b) exp(-i J_+ B_+^(2)) exp(-i J_- B_-^(2))``.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np
from scipy.integrate import solve_ivp

from .coupling import eval_D2
from .errors import IntegrationError, InconsistentBogoliubov, ValidationError

DEFAULT_TOL = 1e-10
ARCOSH_WINDOW = 1e-9
NORM_TOL = 1e-6


class TurningPointWarning(RuntimeWarning):
    """``1 + 4 D2`` changes sign on the integration interval."""


def _frozen(a):
    a = np.array(a)
    a.setflags(write=False)
    return a


def uniform_grid(tau_max, omega_max=0.0):
    """Uniform sampling grid with spacing ``<= min(0.01, 2 pi / (50 omega_max))``."""
    step = 0.01
    if omega_max > 0:
        step = min(step, 2.0 * math.pi / (50.0 * omega_max))
    n = max(1, math.ceil(tau_max / step - 1e-9))
    return np.linspace(0.0, tau_max, n + 1)


@dataclass(frozen=True)
class MechanicsSolution:
    grid: np.ndarray
    p11: np.ndarray
    p11_dot: np.ndarray
    ip22: np.ndarray
    ip22_dot: np.ndarray
    xi: np.ndarray
    alpha: np.ndarray
    beta: np.ndarray
    j_plus: np.ndarray
    j_minus: np.ndarray
    j_b: np.ndarray
    spec: object = None
    tol: float = DEFAULT_TOL
    method: str = "RK45"

    @property
    def tau_max(self):
        return float(self.grid[-1])

    @property
    def wronskian(self):
        return self.p11 * self.ip22_dot - self.p11_dot * self.ip22

    @property
    def normalization(self):
        return np.abs(self.alpha) ** 2 - np.abs(self.beta) ** 2


def _check_turning_point(spec, tau_max):
    form = spec.d2_form
    amp = getattr(form, "amplitude", 0.0)
    omega = getattr(form, "omega", 0.0)
    if omega == 0.0 or omega * tau_max >= math.pi:
        crossing = 1.0 + 4.0 * amp <= 0.0 if omega == 0.0 else 4.0 * abs(amp) >= 1.0
    else:
        # partial period: check the sampled range
        vals = 1.0 + 4.0 * eval_D2(spec, np.linspace(0.0, tau_max, 257))
        crossing = vals.min() <= 0.0
    if crossing:
        warnings.warn(
            "1 + 4 D2(tau) reaches zero: the mechanics passes a turning point; "
            "integration continues on the regular form",
            TurningPointWarning,
            stacklevel=3,
        )


def mechanics_rhs(spec):
    def rhs(tau, y):
        k = 1.0 + 4.0 * float(eval_D2(spec, tau))
        return [y[1], -k * y[0], y[3], -k * y[2]]

    return rhs


def bogoliubov_from_xi(xi, xi_dot):
    alpha = 0.5 * (xi + 1j * xi_dot)
    beta = 0.5 * (np.conj(xi) + 1j * np.conj(xi_dot))
    return alpha, beta


def solve_mechanics(spec, tau_max, tol=DEFAULT_TOL, method="RK45"):
    """Integrate the mechanical equations on ``[0, tau_max]``.

    Parameters
    ----------
    spec : CouplingSpec
        Only ``spec.d2_form`` enters the mechanics.
    tau_max : float
        End of the integration interval (> 0).
    tol : float
        Relative tolerance of the embedded Runge-Kutta pair; the absolute
        tolerance is ``tol / 100``.
    method : {"RK45", "DOP853"}
        ``RK45`` is the default 5(4) pair; ``DOP853`` is offered for the
        tight tolerances needed by finite-difference derivatives.

    Returns
    -------
    MechanicsSolution
        Dense output sampled on :func:`uniform_grid`, including the J
        decomposition with ``J_b`` unwrapped to be continuous.
    """
    if not (tau_max > 0 and math.isfinite(tau_max)):
        raise ValidationError("tau_max must be a positive finite number")
    if not tol > 0:
        raise ValidationError("tol must be > 0")
    _check_turning_point(spec, tau_max)
    grid = uniform_grid(tau_max, spec.max_frequency)
    sol = solve_ivp(
        mechanics_rhs(spec),
        (0.0, tau_max),
        [1.0, 0.0, 0.0, 1.0],
        method=method,
        t_eval=grid,
        rtol=tol,
        atol=tol * 1e-2,
    )
    if sol.status != 0:
        reached = float(sol.t[-1]) if sol.t.size else 0.0
        raise IntegrationError(f"mechanics integration failed at tau={reached}: {sol.message}", reached)
    p11, p11_dot, ip22, ip22_dot = sol.y
    xi = p11 - 1j * ip22
    alpha, beta = bogoliubov_from_xi(xi, p11_dot - 1j * ip22_dot)
    j_plus, j_minus, j_b = extract_J(alpha, beta)
    j_b = np.unwrap(np.atleast_1d(j_b), period=2.0 * math.pi)
    return MechanicsSolution(
        grid=_frozen(grid),
        p11=_frozen(p11),
        p11_dot=_frozen(p11_dot),
        ip22=_frozen(ip22),
        ip22_dot=_frozen(ip22_dot),
        xi=_frozen(xi),
        alpha=_frozen(alpha),
        beta=_frozen(beta),
        j_plus=_frozen(j_plus),
        j_minus=_frozen(j_minus),
        j_b=_frozen(j_b),
        spec=spec,
        tol=tol,
        method=method,
    )


def _principal_angle(z):
    ang = np.angle(z)
    return np.where(ang <= -math.pi, ang + 2.0 * math.pi, ang)


def extract_J(alpha, beta):
    """Invert the element formulas for ``(J_+, J_-, J_b)``.

    The magnitudes agree with the arcosh relations ``|J_+| =
    arcosh|alpha^2 - beta^2| / 4`` and ``|J_-| = arcosh((2|alpha|^2 - 1) /
    |alpha^2 - beta^2|) / 4``, which are checked for consistency.  Signs are
    recovered from ``Im(alpha conj(beta)) = sinh(4 J_+) / 2`` and
    ``Re(alpha beta u*) = sinh(4 J_-) / 2`` with ``u = e^{-2 i J_b}``; the
    branch of ``J_b`` in ``(-pi, pi]`` is fixed by requiring
    ``Re(alpha e^{i J_b}) > 0``.
    """
    alpha = np.asarray(alpha, dtype=complex)
    beta = np.asarray(beta, dtype=complex)
    norm = np.abs(alpha) ** 2 - np.abs(beta) ** 2
    if np.any(~np.isfinite(norm)) or np.any(np.abs(norm - 1.0) > NORM_TOL):
        worst = float(np.max(np.abs(norm - 1.0)))
        raise InconsistentBogoliubov(f"|alpha|^2 - |beta|^2 deviates from 1 by {worst:.3e}")
    scale = 1.0 / np.sqrt(norm)
    a = alpha * scale
    b = beta * scale

    w = a * a - b * b
    mod_w = np.abs(w)
    arg_plus = mod_w
    arg_minus = (2.0 * np.abs(a) ** 2 - 1.0) / mod_w
    for label, arg in (("J_+", arg_plus), ("J_-", arg_minus)):
        if np.any(arg < 1.0 - ARCOSH_WINDOW):
            raise InconsistentBogoliubov(
                f"arcosh argument for {label} below 1 by {float(1.0 - np.min(arg)):.3e}"
            )

    u = w / mod_w
    j_plus = np.arcsinh(2.0 * np.imag(a * np.conj(b))) / 4.0
    j_minus = np.arcsinh(2.0 * np.real(a * b * np.conj(u))) / 4.0
    j_b = -_principal_angle(u) / 2.0
    flip = np.real(a * np.exp(1j * j_b)) < 0.0
    j_b = np.where(flip, j_b + math.pi, j_b)
    j_b = np.where(j_b > math.pi, j_b - 2.0 * math.pi, j_b)
    if j_plus.ndim == 0:
        return float(j_plus), float(j_minus), float(j_b)
    return j_plus, j_minus, j_b


def bogoliubov_from_J(j_plus, j_minus, j_b):
    """Element formulas: the Bogoliubov pair generated by a J triple."""
    cp, sp = np.cosh(2.0 * np.asarray(j_plus)), np.sinh(2.0 * np.asarray(j_plus))
    cm, sm = np.cosh(2.0 * np.asarray(j_minus)), np.sinh(2.0 * np.asarray(j_minus))
    phase = np.exp(-1j * np.asarray(j_b))
    alpha = phase * (cp * cm - 1j * sp * sm)
    beta = phase * (cp * sm - 1j * sp * cm)
    return alpha, beta


@dataclass(frozen=True)
class JSolution:
    grid: np.ndarray
    j_plus: np.ndarray
    j_minus: np.ndarray
    j_b: np.ndarray


def solve_J_odes(spec, tau_max, tol=DEFAULT_TOL, method="RK45"):
    """Integrate the first-order equations for the J triple from ``J(0) = 0``.

    ``J_b' = 1 + 2 D2 (1 - sin(2 J_b) tanh(4 J_+))``,
    ``J_+' = D2 cos(2 J_b)``, ``J_-' = D2 sin(2 J_b) / cosh(4 J_+)``.
    """
    if not (tau_max > 0 and math.isfinite(tau_max)):
        raise ValidationError("tau_max must be a positive finite number")
    if not tol > 0:
        raise ValidationError("tol must be > 0")

    def rhs(tau, y):
        jb, jp, _ = y
        d2 = float(eval_D2(spec, tau))
        return [
            1.0 + 2.0 * d2 * (1.0 - math.sin(2.0 * jb) * math.tanh(4.0 * jp)),
            d2 * math.cos(2.0 * jb),
            d2 * math.sin(2.0 * jb) / math.cosh(4.0 * jp),
        ]

    grid = uniform_grid(tau_max, spec.max_frequency)
    sol = solve_ivp(rhs, (0.0, tau_max), [0.0, 0.0, 0.0], method=method, t_eval=grid, rtol=tol, atol=tol * 1e-2)
    if sol.status != 0:
        reached = float(sol.t[-1]) if sol.t.size else 0.0
        raise IntegrationError(f"J integration failed at tau={reached}: {sol.message}", reached)
    j_b, j_plus, j_minus = sol.y
    return JSolution(_frozen(grid), _frozen(j_plus), _frozen(j_minus), _frozen(j_b))


def rwa_xi(d2, tau):
    """Rotating-wave ``xi`` at parametric resonance: ``e^{-i tau} cosh(d2 tau) + i e^{i tau} sinh(d2 tau)``."""
    if d2 < 0:
        raise ValidationError("d2 must be >= 0")
    tau = np.asarray(tau, dtype=float)
    return np.exp(-1j * tau) * np.cosh(d2 * tau) + 1j * np.exp(1j * tau) * np.sinh(d2 * tau)


@dataclass(frozen=True)
class SqueezeParams:
    """Squeeze magnitude ``r >= 0`` and phase ``theta`` in ``(-pi, pi]``."""

    r: float
    theta: float = 0.0

    def __post_init__(self):
        if not (math.isfinite(self.r) and math.isfinite(self.theta)):
            raise ValidationError("squeeze parameters must be finite")
        if self.r < 0:
            raise ValidationError("r must be >= 0")
        th = math.remainder(self.theta, 2.0 * math.pi)
        if th <= -math.pi:
            th += 2.0 * math.pi
        object.__setattr__(self, "theta", th)

    @property
    def t(self):
        return math.tanh(self.r) * complex(math.cos(self.theta), math.sin(self.theta))

    @classmethod
    def from_t(cls, t):
        t = complex(t)
        theta = math.atan2(t.imag, t.real) if t != 0 else 0.0
        return cls(math.atanh(abs(t)), theta)


def squeeze_matrix(s):
    """Action of ``S(r e^{i theta})`` on ``(b, b^dagger)`` in the Heisenberg picture."""
    ch, sh = math.cosh(s.r), math.sinh(s.r)
    ph = complex(math.cos(s.theta), math.sin(s.theta))
    return np.array([[ch, -ph * sh], [-ph.conjugate() * sh, ch]], dtype=complex)


def rotation_matrix(a):
    """Action of ``exp(-i a N_b)`` on ``(b, b^dagger)``."""
    return np.diag([np.exp(-1j * a), np.exp(1j * a)])


def squeeze_compose(s1, s2):
    """Write ``S(z1) S(z2)`` as ``exp(-i a N_b) S(z3)`` up to a global phase.

    Returns
    -------
    a : float
        Rotation angle.
    s3 : SqueezeParams
        Composite squeeze with ``t3 = (t1 + t2) / (1 + t1 conj(t2))``.
    """
    t1, t2 = s1.t, s2.t
    num = 1.0 + t1 * t2.conjugate()
    t3 = (t1 + t2) / num
    a = -math.atan2((num / num.conjugate()).imag, (num / num.conjugate()).real) / 2.0
    return a, SqueezeParams.from_t(t3)


def compact_squeeze_params(j_plus, j_minus):
    """Rotation ``phi_J`` and squeeze ``zeta_J`` equivalent to ``S(2 i J_+) S(-2 J_-)``.

    ``zeta_J`` is returned in tanh form (``|zeta_J| < 1``).
    """
    tp, tm = math.tanh(2.0 * j_plus), math.tanh(2.0 * j_minus)
    phi = math.atan(tp * tm)
    zeta = (1j * tp - tm) / (1.0 - 1j * tp * tm)
    return phi, complex(zeta)
