"""Brute-force reference: truncated two-mode Fock space, time-ordered evolution, direct QFI.

Because the Hamiltonian commutes with the photon number, the evolution is
block diagonal in the cavity Fock basis.  The fast path evolves one
``n_mech x n_mech`` block per photon number; a dense tensor-product path is
kept for small spaces and for cross-checking the block path.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import cached_property

import numpy as np
from scipy.special import gammaln

from .coupling import eval_D1, eval_D2, eval_G
from .errors import ConvergenceError, TruncationLeakage, ValidationError

THERMAL_CUTOFF = 1e-12


def ladder(n):
    """Annihilation operator on ``n`` levels: ``<k-1|a|k> = sqrt(k)``."""
    return np.diag(np.sqrt(np.arange(1.0, n)), 1)


@dataclass(frozen=True)
class TruncatedSpace:
    n_cav: int
    n_mech: int

    def __post_init__(self):
        if int(self.n_cav) != self.n_cav or int(self.n_mech) != self.n_mech:
            raise ValidationError("dimensions must be integers")
        if self.n_cav < 2 or self.n_mech < 2:
            raise ValidationError("truncation dimensions must be >= 2")

    @property
    def dim(self):
        return self.n_cav * self.n_mech

    # single-mode pieces
    @cached_property
    def a_cav(self):
        return ladder(self.n_cav)

    @cached_property
    def b_mech(self):
        return ladder(self.n_mech)

    @cached_property
    def mech(self):
        """Mechanical operators used by the block path."""
        b = self.b_mech
        bd = b.T
        nb = bd @ b
        bp = bd + b
        return {
            "Nb": nb,
            "Bp": bp,
            "Bm": 1j * (bd - b),
            "Bp2": bd @ bd + b @ b,
            "Bm2": 1j * (bd @ bd - b @ b),
            # (b^dagger + b)^2 written as B_+^(2) + 2 N_b + 1
            "Q": bd @ bd + b @ b + 2.0 * nb + np.eye(self.n_mech),
        }

    # two-mode operators
    @cached_property
    def a(self):
        return np.kron(self.a_cav, np.eye(self.n_mech))

    @cached_property
    def b(self):
        return np.kron(np.eye(self.n_cav), self.b_mech)

    @cached_property
    def generators(self):
        """The nine Hermitian algebra generators on the tensor-product space."""
        ic, im = np.eye(self.n_cav), np.eye(self.n_mech)
        na1 = np.diag(np.arange(self.n_cav, dtype=float))
        m = self.mech
        na = np.kron(na1, im)
        return {
            "Na": na,
            "Na2": np.kron(na1 @ na1, im),
            "Nb": np.kron(ic, m["Nb"]),
            "Bp": np.kron(ic, m["Bp"]),
            "Bm": np.kron(ic, m["Bm"]),
            "Bp2": np.kron(ic, m["Bp2"]),
            "Bm2": np.kron(ic, m["Bm2"]),
            "NaBp": np.kron(na1, m["Bp"]),
            "NaBm": np.kron(na1, m["Bm"]),
        }


def build_space(n_cav, n_mech):
    return TruncatedSpace(int(n_cav), int(n_mech))


@dataclass(frozen=True)
class OracleConfig:
    """Stepping and truncation controls.

    ``step`` is the initial midpoint step, halved until two successive
    Richardson-extrapolated propagators differ by less than ``convergence``
    (max-norm over the checked block) or ``max_halvings`` is exhausted.
    """

    step: float = 0.5
    convergence: float = 1e-9
    max_halvings: int = 8
    edge_margin: int = 2
    leakage_tol: float = 1e-8
    richardson: bool = True

    def __post_init__(self):
        if not self.step > 0:
            raise ValidationError("step must be > 0")
        if not self.convergence > 0:
            raise ValidationError("convergence must be > 0")
        if self.max_halvings < 1:
            raise ValidationError("max_halvings must be >= 1")


def _override(spec, theta_override):
    return spec if theta_override is None else spec.with_theta(theta_override)


def hamiltonian_matrix(space, spec, tau, theta_override=None):
    """Dense Hamiltonian (in units of the mechanical frequency) on the tensor-product space."""
    spec = _override(spec, theta_override)
    gens = space.generators
    ic = np.eye(space.n_cav)
    q = np.kron(ic, space.mech["Q"])
    g, d1, d2 = float(eval_G(spec, tau)), float(eval_D1(spec, tau)), float(eval_D2(spec, tau))
    return (
        spec.omega_c * gens["Na"]
        + gens["Nb"]
        - g * gens["NaBp"]
        + d1 * gens["Bp"]
        + d2 * q
    ).astype(complex)


def hamiltonian_blocks(space, specs, tau):
    """Per-photon-number blocks, shape ``(len(specs), n_cav, n_mech, n_mech)``."""
    m = space.mech
    n = np.arange(space.n_cav, dtype=float)
    g = np.array([float(eval_G(s, tau)) for s in specs])
    d1 = np.array([float(eval_D1(s, tau)) for s in specs])
    d2 = np.array([float(eval_D2(s, tau)) for s in specs])
    oc = np.array([s.omega_c for s in specs])
    lin = d1[:, None] - g[:, None] * n[None, :]
    diag = oc[:, None] * n[None, :]
    h = (
        m["Nb"][None, None]
        + lin[:, :, None, None] * m["Bp"][None, None]
        + d2[:, None, None, None] * m["Q"][None, None]
        + diag[:, :, None, None] * np.eye(space.n_mech)[None, None]
    )
    return h.astype(complex)


def _midpoint_product(hfunc, tau, n_steps):
    dt = tau / n_steps
    u = None
    for k in range(n_steps):
        h = hfunc((k + 0.5) * dt)
        w, v = np.linalg.eigh(h)
        step = (v * np.exp(-1j * dt * w)[..., None, :]) @ np.conj(np.swapaxes(v, -1, -2))
        u = step if u is None else step @ u
    return u


def _converged_product(hfunc, tau, cfg, check):
    """Midpoint products with step halving and Romberg extrapolation.

    The exponential midpoint rule is symmetric, so its global error is a
    series in even powers of the step.  Each halving adds a row to the
    tableau ``R[j][k] = R[j][k-1] + (R[j][k-1] - R[j-1][k-1]) / (4^k - 1)``;
    successive diagonal entries are compared through ``check``.
    """
    n = max(1, math.ceil(tau / cfg.step - 1e-12))
    row = [_midpoint_product(hfunc, tau, n)]
    diff = math.inf
    for _ in range(cfg.max_halvings):
        n *= 2
        new = [_midpoint_product(hfunc, tau, n)]
        if cfg.richardson:
            for k, prev in enumerate(row, start=1):
                new.append(new[k - 1] + (new[k - 1] - prev) / (4.0**k - 1.0))
        diff = float(np.max(np.abs(check(new[-1]) - check(row[-1]))))
        if diff < cfg.convergence:
            return new[-1], n
        row = new
    raise ConvergenceError(
        f"time stepping not converged after {cfg.max_halvings} halvings "
        f"(last change {diff:.3e} > {cfg.convergence:.1e}, {n} steps)"
    )


def _interior(space, cfg):
    return slice(0, max(1, space.n_mech - cfg.edge_margin))


def evolve_blocks(space, specs, tau_final, cfg=None, amplitudes=None, columns=None):
    """Block propagators for several specs on a common step sequence.

    Returns ``(U, n_steps)`` with ``U`` of shape ``(len(specs), n_cav, n_mech, n_mech)``.
    Using one step sequence for all specs keeps finite differences across
    them free of step-selection noise.

    Convergence is judged on the interior rows.  ``amplitudes`` (per photon
    number) scales each block and ``columns`` restricts the initial
    mechanical states, so that only the part of ``U`` acting on a given
    probe has to meet the tolerance.
    """
    cfg = OracleConfig() if cfg is None else cfg
    if not tau_final > 0:
        raise ValidationError("tau_final must be > 0")
    inner = _interior(space, cfg)
    cols = inner if columns is None else slice(0, columns)
    scale = np.ones(space.n_cav) if amplitudes is None else np.abs(np.asarray(amplitudes, dtype=complex))
    scale = scale[:, None, None]
    return _converged_product(
        lambda t: hamiltonian_blocks(space, specs, t), tau_final, cfg, lambda u: scale * u[..., inner, cols]
    )


def blocks_to_dense(blocks):
    n_cav, d = blocks.shape[0], blocks.shape[1]
    out = np.zeros((n_cav * d, n_cav * d), dtype=complex)
    for n in range(n_cav):
        out[n * d : (n + 1) * d, n * d : (n + 1) * d] = blocks[n]
    return out


def evolve(space, spec, tau_final, cfg=None, theta_override=None, dense=False):
    """Time-ordered propagator on the truncated space.

    The default uses the photon-number block structure and assembles the
    dense matrix; ``dense=True`` steps the full tensor-product Hamiltonian.
    """
    cfg = OracleConfig() if cfg is None else cfg
    spec = _override(spec, theta_override)
    if not tau_final > 0:
        raise ValidationError("tau_final must be > 0")
    if dense:
        keep = np.concatenate(
            [np.arange(n * space.n_mech, n * space.n_mech + _interior(space, cfg).stop) for n in range(space.n_cav)]
        )
        u, _ = _converged_product(
            lambda t: hamiltonian_matrix(space, spec, t), tau_final, cfg, lambda x: x[np.ix_(keep, keep)]
        )
        return u
    u, _ = evolve_blocks(space, [spec], tau_final, cfg)
    return blocks_to_dense(u[0])


def unitarity_defect(u, space, cfg=None):
    """``max |U^dagger U - 1|`` over the non-edge block of each photon-number sector."""
    cfg = OracleConfig() if cfg is None else cfg
    inner = _interior(space, cfg)
    keep = np.concatenate([np.arange(n * space.n_mech, n * space.n_mech + inner.stop) for n in range(space.n_cav)])
    g = np.conj(u.T) @ u
    sub = g[np.ix_(keep, keep)]
    return float(np.max(np.abs(sub - np.eye(len(keep)))))


def coherent_weights(mu, n):
    """Poisson weights ``|<k|mu>|^2`` for ``k < n``."""
    m = abs(mu) ** 2
    k = np.arange(n)
    if m == 0:
        w = np.zeros(n)
        w[0] = 1.0
        return w
    return np.exp(k * math.log(m) - m - gammaln(k + 1.0))


def coherent_amplitudes(mu, n):
    mu = complex(mu)
    k = np.arange(n)
    if mu == 0:
        c = np.zeros(n, dtype=complex)
        c[0] = 1.0
        return c
    return np.exp(-abs(mu) ** 2 / 2.0 + k * np.log(mu) - gammaln(k + 1.0) / 2.0)


def thermal_weights(r_T, cutoff=THERMAL_CUTOFF):
    """Thermal eigenvalues ``tanh(r)^(2k) / cosh(r)^2`` down to ``cutoff``."""
    if r_T == 0:
        return np.array([1.0])
    t2 = math.tanh(r_T) ** 2
    lam0 = 1.0 / math.cosh(r_T) ** 2
    kmax = int(math.floor(math.log(cutoff / lam0) / math.log(t2)))
    return lam0 * t2 ** np.arange(kmax + 1)


def suggested_dims(probe, displacement=0.0):
    """Truncation heuristic: Poisson tail of the cavity, thermal tail plus displacement allowance."""
    mu = abs(probe.mu_c)
    n_cav = math.ceil(mu * mu + 6.0 * mu + 10.0)
    k = len(thermal_weights(probe.r_T))
    n_mech = k + 10 + math.ceil(4.0 * displacement)
    return n_cav, n_mech


def _eq7(lam, h_kk, h2_kk, h_km):
    """Mixed-state QFI from thermal eigenvalues and generator matrix elements."""
    first = 4.0 * math.fsum(lam * (h2_kk - np.abs(h_kk) ** 2))
    if lam.size == 1:
        return first
    lk, lm = lam[:, None], lam[None, :]
    wgt = lk * lm / (lk + lm)
    mask = ~np.eye(lam.size, dtype=bool)
    second = 8.0 * math.fsum((wgt * np.abs(h_km) ** 2)[mask])
    return first - second


def _check_truncation(space, probe, lam, cfg):
    tail = 1.0 - float(np.sum(coherent_weights(probe.mu_c, space.n_cav)))
    if tail > cfg.leakage_tol:
        raise TruncationLeakage(f"cavity truncation {space.n_cav} loses {tail:.2e} of the coherent state")
    if lam.size > space.n_mech - cfg.edge_margin:
        raise TruncationLeakage(
            f"thermal state needs {lam.size} mechanical levels, only "
            f"{space.n_mech - cfg.edge_margin} interior levels available"
        )


def _edge_population(u0, w, lam, space, cfg):
    k = lam.size
    edge = np.abs(u0[:, space.n_mech - cfg.edge_margin :, :k]) ** 2
    return float(np.sum(w[:, None] * lam[None, :] * edge.sum(axis=1)))


def qfi_oracle(space, spec, probe, tau, h_fd=None, cfg=None, dense=False):
    """Direct QFI on the truncated space.

    The generator ``-i U^dagger dU/dtheta`` is obtained from central
    differences at ``theta +- h`` and ``theta +- h/2`` combined by one
    Richardson step.  All five propagators share one step sequence, whose
    convergence is measured on the probe-weighted blocks.

    Raises
    ------
    TruncationLeakage
        Coherent-state tail, thermal tail or weighted edge population of the
        evolved states exceeds the configured bounds.
    """
    cfg = OracleConfig() if cfg is None else cfg
    if not tau > 0:
        raise ValidationError("tau must be > 0")
    lam = thermal_weights(probe.r_T)
    _check_truncation(space, probe, lam, cfg)
    theta = spec.theta_value()
    h = h_fd if h_fd is not None else 1e-5 * max(1.0, abs(theta))
    specs = [spec.with_theta(theta + dt) for dt in (0.0, h, -h, h / 2.0, -h / 2.0)]
    if dense:
        return _qfi_dense(space, specs, probe, tau, h, lam, cfg)
    w = coherent_weights(probe.mu_c, space.n_cav)
    u, _ = evolve_blocks(space, specs, tau, cfg, amplitudes=np.sqrt(w), columns=lam.size)
    leak = _edge_population(u[0], w, lam, space, cfg)
    if leak > cfg.leakage_tol:
        raise TruncationLeakage(f"weighted population {leak:.2e} at the mechanical truncation edge")
    du = (8.0 * (u[3] - u[4]) - (u[1] - u[2])) / (6.0 * h)
    gen = -1j * np.conj(np.swapaxes(u[0], -1, -2)) @ du
    gen = 0.5 * (gen + np.conj(np.swapaxes(gen, -1, -2)))
    k = lam.size
    h_km = np.tensordot(w, gen[:, :k, :k], axes=1)
    h2 = np.einsum("njk,njk->nk", np.conj(gen[:, :, :k]), gen[:, :, :k]).real
    h2_kk = w @ h2
    return max(0.0, _eq7(lam, np.real(np.diag(h_km)), h2_kk, h_km))


def _qfi_dense(space, specs, probe, tau, h, lam, cfg):
    inner = _interior(space, cfg).stop
    keep = np.concatenate([np.arange(n * space.n_mech, n * space.n_mech + inner) for n in range(space.n_cav)])
    us, _ = _converged_product(
        lambda t: np.stack([hamiltonian_matrix(space, s, t) for s in specs]),
        tau,
        cfg,
        lambda x: x[:, keep][:, :, keep],
    )
    du = (8.0 * (us[3] - us[4]) - (us[1] - us[2])) / (6.0 * h)
    gen = -1j * np.conj(us[0].T) @ du
    gen = 0.5 * (gen + np.conj(gen.T))
    c = coherent_amplitudes(probe.mu_c, space.n_cav)
    k = lam.size
    psi = np.zeros((space.dim, k), dtype=complex)
    for j in range(k):
        e = np.zeros(space.n_mech)
        e[j] = 1.0
        psi[:, j] = np.kron(c, e)
    hpsi = gen @ psi
    h_km = np.conj(psi.T) @ hpsi
    h2_kk = np.sum(np.abs(hpsi) ** 2, axis=0)
    return max(0.0, _eq7(lam, np.real(np.diag(h_km)), h2_kk, h_km))


# ------------------------------------------------------------ check suites


@dataclass(frozen=True)
class OracleInstance:
    label: str
    example: str
    spec: object
    probe: object
    tau: float
    dims: tuple


def _suite_default():
    from .coupling import Constant, CosModulated, CouplingSpec, ProbeState, SineModulated, Theta

    def g0(label, g, eps, om, mu, r, tau, dims):
        spec = CouplingSpec(SineModulated(g, eps, om), theta=Theta.G0)
        return OracleInstance(label, "i", spec, ProbeState(mu, r), tau, dims)

    def d1(label, g, d, om, mu, r, tau, dims):
        form = CosModulated(d, om) if om else Constant(d)
        spec = CouplingSpec(Constant(g), form, theta=Theta.D1)
        return OracleInstance(label, "ii", spec, ProbeState(mu, r), tau, dims)

    return [
        g0("i-res-thermal", 0.1, 0.3, 1.0, 1.0, 0.3, 2.0, (12, 16)),
        g0("i-general-0.8", 0.1, 0.5, 0.8, 1.5, 0.0, 4.0, (22, 32)),
        g0("i-res-strong", 0.2, 0.5, 1.0, 1.0, 0.0, 4.0, (17, 32)),
        g0("i-fast-hot", 0.05, 0.2, 2.0, 2.0, 0.5, 3.0, (24, 32)),
        g0("i-slow", 0.3, 0.5, 0.5, 0.5, 0.2, 2.5, (14, 32)),
        g0("i-general-1.3", 0.15, 0.4, 1.3, 1.2, 0.1, 3.5, (20, 32)),
        g0("i-phase", 0.1, 0.3, 0.7, 1.0j, 0.4, 1.0, (17, 32)),
        d1("ii-mech-only", 0.0, 1.0, 0.0, 0.0, 0.0, math.pi, (2, 24)),
        d1("ii-const", 0.1, 0.5, 0.0, 1.0, 0.0, math.pi, (17, 32)),
        d1("ii-res-thermal", 0.1, 0.3, 1.0, 1.0, 0.3, 4.0, (17, 32)),
        d1("ii-general-0.6", 0.2, 0.2, 0.6, 1.0, 0.2, 3.0, (17, 32)),
        d1("ii-fast-hot", 0.05, 0.5, 1.5, 1.5, 0.5, 2.0, (22, 32)),
        d1("ii-slow", 0.3, 0.3, 0.37, 0.5, 0.0, 4.0, (14, 32)),
        d1("ii-fast", 0.1, 0.4, 2.5, 2.0, 0.1, 1.5, (24, 32)),
    ]


def _suite_quick():
    return [s for s in _suite_default() if s.label in ("i-res-thermal", "ii-mech-only")]


def _suite_control():
    from .coupling import Constant, CosModulated, CouplingSpec, ProbeState, Theta

    # d1 = 0 makes the drive frequency irrelevant to the dynamics
    spec = CouplingSpec(Constant(0.1), CosModulated(0.0, 0.7), theta=Theta.OMEGA_D1)
    return [OracleInstance("control-theta-free", "control", spec, ProbeState(1.0, 0.2), 2.0, (17, 24))]


SUITES = {"default": _suite_default, "quick": _suite_quick, "control": _suite_control}


def oracle_suite(name="default"):
    try:
        return SUITES[name]()
    except KeyError:
        raise ValidationError(f"unknown oracle preset {name!r}; choose from {sorted(SUITES)}") from None


def analytic_reference(inst):
    from .qfi import closed_form_qfi

    if inst.example == "control":
        return 0.0
    return closed_form_qfi(inst.spec, inst.tau, inst.probe).value


def run_instance(inst, cfg=None):
    """Return ``(analytic, oracle, relative_error)`` for one suite instance."""
    analytic = analytic_reference(inst)
    value = qfi_oracle(build_space(*inst.dims), inst.spec, inst.probe, inst.tau, cfg=cfg)
    if analytic == 0.0:
        rel = abs(value)
    else:
        rel = abs(value - analytic) / abs(analytic)
    return analytic, value, rel
