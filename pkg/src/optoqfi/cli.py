"""Command-line entry point.

Subcommands::

    optoqfi sweep CONFIG [--output PATH]
    optoqfi table1 [--sensitivity] [--mu2 VALUE]
    optoqfi oracle-check [--preset NAME] [--dt STEP] [--max-halvings N]
    optoqfi mechanics dump CONFIG [--output PATH]

Exit codes: 0 success, 2 invalid input, 3 numerical failure, 4 a computed
value deviates from its reference by more than the allowed tolerance.

Config files are INI style (``configparser``)::

    [couplings]
    g_form = sine          ; sine | constant
    g0 = 1.0
    epsilon = 0.5          ; sine only
    omega_g = 1.0          ; sine only
    d1_form = zero         ; zero | constant | cos
    d1 = 0.0
    omega_d1 = 0.0         ; cos only
    d2_form = zero         ; zero | constant | cos
    d2 = 0.0
    omega_d2 = 0.0         ; cos only

    [probe]
    mu_c = 1.0             ; any Python complex literal, e.g. 1+0.5j
    r_T = 0.0

    [units]                ; optional
    omega_m = 628.3185307179587   ; rad/s
    temperature = 2e-7            ; K, sets r_T (do not also give probe r_T)

    [sweep]
    scenario = G0          ; G0 | D1 | D2Const | D2Res
    axis = frequency       ; time | frequency
    start = 0.1
    stop = 2.0
    count = 20
    tau = 94.24777960769379       ; fixed time for frequency sweeps
    method = closed        ; closed | pipeline | quadrature
    output = sweep.csv     ; optional, stdout otherwise

    [mechanics]            ; used by ``mechanics dump``
    tau_max = 62.83185307179586
    tol = 1e-10
    method = RK45

The scenario fixes the estimation parameter: G0 estimates ``g0``, D1
estimates ``d1``, D2Const and D2Res estimate ``d2``.  A frequency axis
varies the modulation frequency of the form carrying that parameter.  The
environment variable ``OPTOQFI_THREADS`` sets the worker count of the sweep
map (default 1).
"""

from __future__ import annotations

import argparse
import configparser
import enum
import io
import math
import os
import sys
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, replace

import numpy as np

from .coupling import (
    Constant,
    CosModulated,
    CouplingSpec,
    PhysicalUnits,
    ProbeState,
    SineModulated,
    Theta,
    Zero,
    dimensionful_rescale,
    r_T_from_temperature,
)
from .errors import NumericalError, UnboundedVariance, ValidationError
from .fcoeffs import ClosedForm, FiniteDiff, identify_example
from .qfi import (
    TERM_NAMES,
    closed_form_qfi,
    cramer_rao,
    qfi_d1_res,
    qfi_d2_const_app,
    qfi_d2_res_app,
    qfi_g0_res,
    qfi_pipeline,
)

EXIT_OK, EXIT_VALIDATION, EXIT_NUMERICAL, EXIT_DEVIATION = 0, 2, 3, 4
THREADS_ENV = "OPTOQFI_THREADS"

SWEEP_HEADER = "axis_value,qfi,term_A,term_AB,term_B,term_C,term_FG,branch"
MECHANICS_HEADER = (
    "tau,p11,p11_dot,ip22,ip22_dot,re_xi,im_xi,re_alpha,im_alpha,re_beta,im_beta,j_plus,j_minus,j_b"
)
ORACLE_HEADER = "label,example,analytic,oracle,rel_error"
TABLE1_HEADER = "quantity,computed,reference,rel_deviation"


def fmt(x):
    """Shortest round-trip decimal form of a float."""
    return repr(float(x))


class Scenario(enum.Enum):
    G0 = "G0"
    D1 = "D1"
    D2_CONST = "D2Const"
    D2_RES = "D2Res"


class Axis(enum.Enum):
    TIME = "time"
    FREQUENCY = "frequency"


_SCENARIO_THETA = {
    Scenario.G0: Theta.G0,
    Scenario.D1: Theta.D1,
    Scenario.D2_CONST: Theta.D2,
    Scenario.D2_RES: Theta.D2,
}
_SCENARIO_FAMILY = {
    Scenario.G0: "i",
    Scenario.D1: "ii",
    Scenario.D2_CONST: "iii-const",
    Scenario.D2_RES: "iii-res",
}
_SCENARIO_FREQUENCY = {Scenario.G0: Theta.OMEGA_G, Scenario.D1: Theta.OMEGA_D1}


def _parse_enum(cls, text, what):
    key = str(text).strip().lower()
    for member in cls:
        if member.value.lower() == key or member.name.lower() == key:
            return member
    raise ValidationError(f"unknown {what} {text!r}; choose from {[m.value for m in cls]}")


@dataclass(frozen=True)
class SweepRequest:
    """An immutable sweep description; ``tau`` is the fixed time of frequency sweeps."""

    scenario: Scenario
    axis: Axis
    start: float
    stop: float
    count: int
    spec: CouplingSpec
    probe: ProbeState
    tau: float | None = None
    method: str = "closed"
    units: PhysicalUnits | None = None
    output: str | None = None

    def __post_init__(self):
        if self.count < 2:
            raise ValidationError("count must be >= 2")
        if not self.start < self.stop:
            raise ValidationError("start must be < stop")
        if self.axis is Axis.TIME and self.start < 0:
            raise ValidationError("time axis must start at tau >= 0")
        if self.method not in ("closed", "pipeline", "quadrature"):
            raise ValidationError(f"unknown method {self.method!r}")
        if self.spec.theta is not _SCENARIO_THETA[self.scenario]:
            raise ValidationError(f"scenario {self.scenario.value} estimates {_SCENARIO_THETA[self.scenario].value}")
        if self.axis is Axis.FREQUENCY:
            if self.scenario not in _SCENARIO_FREQUENCY:
                raise ValidationError(f"scenario {self.scenario.value} has no frequency axis")
            if self.tau is None or not self.tau > 0:
                raise ValidationError("frequency sweeps need a fixed tau > 0")
            if self.start < 0:
                raise ValidationError("frequencies must be >= 0")
            # the swept frequency must be a field of the chosen form
            replace(self.spec, theta=_SCENARIO_FREQUENCY[self.scenario])
        if self.method != "quadrature" and identify_example(self.spec) != _SCENARIO_FAMILY[self.scenario]:
            raise ValidationError(
                f"couplings do not form the closed-form family of scenario {self.scenario.value}; "
                "use method = quadrature"
            )

    def axis_values(self):
        return np.linspace(self.start, self.stop, self.count)


# ------------------------------------------------------------ config parsing


def _get_float(section, key, default=None):
    if key not in section:
        if default is None:
            raise ValidationError(f"missing key {key!r} in [{section.name}]")
        return default
    try:
        return float(section[key])
    except ValueError:
        raise ValidationError(f"[{section.name}] {key} = {section[key]!r} is not a number") from None


def _form(section, kind_key, amp_key, omega_key, allowed):
    kind = section.get(kind_key, "zero").strip().lower()
    if kind not in allowed:
        raise ValidationError(f"{kind_key} must be one of {allowed}, got {kind!r}")
    if kind == "zero":
        return Zero()
    if kind == "constant":
        return Constant(_get_float(section, amp_key))
    if kind == "cos":
        return CosModulated(_get_float(section, amp_key), _get_float(section, omega_key))
    return SineModulated(_get_float(section, amp_key), _get_float(section, "epsilon"), _get_float(section, omega_key))


def read_config(path):
    parser = configparser.ConfigParser(inline_comment_prefixes=(";", "#"))
    parser.optionxform = str
    try:
        with open(path, encoding="utf-8") as fh:
            parser.read_file(fh)
    except OSError as exc:
        raise ValidationError(f"cannot read config {path}: {exc}") from None
    except configparser.Error as exc:
        raise ValidationError(f"malformed config {path}: {exc}") from None
    return parser


def spec_from_config(parser, theta=Theta.G0):
    if "couplings" not in parser:
        raise ValidationError("config needs a [couplings] section")
    c = parser["couplings"]
    g = _form(c, "g_form", "g0", "omega_g", ("constant", "sine"))
    d1 = _form(c, "d1_form", "d1", "omega_d1", ("zero", "constant", "cos"))
    d2 = _form(c, "d2_form", "d2", "omega_d2", ("zero", "constant", "cos"))
    if "theta" in c:
        given = Theta.parse(c["theta"])
        if given is not theta:
            raise ValidationError(f"[couplings] theta = {given.value} conflicts with the scenario ({theta.value})")
    return CouplingSpec(g, d1, d2, theta=theta)


def units_from_config(parser):
    if "units" not in parser:
        return None
    u = parser["units"]
    temperature = _get_float(u, "temperature") if "temperature" in u else None
    mass = _get_float(u, "mass") if "mass" in u else None
    return PhysicalUnits(_get_float(u, "omega_m"), mass, temperature)


def probe_from_config(parser, units=None):
    if "probe" not in parser:
        raise ValidationError("config needs a [probe] section")
    p = parser["probe"]
    try:
        mu = complex(p.get("mu_c", "0").replace(" ", ""))
    except ValueError:
        raise ValidationError(f"[probe] mu_c = {p['mu_c']!r} is not a complex number") from None
    if units is not None and units.temperature is not None:
        if "r_T" in p:
            raise ValidationError("give either [probe] r_T or [units] temperature, not both")
        return ProbeState(mu, units.r_T())
    return ProbeState(mu, _get_float(p, "r_T", 0.0))


def sweep_request_from_config(path):
    parser = read_config(path)
    if "sweep" not in parser:
        raise ValidationError("config needs a [sweep] section")
    s = parser["sweep"]
    scenario = _parse_enum(Scenario, s.get("scenario", ""), "scenario")
    axis = _parse_enum(Axis, s.get("axis", ""), "axis")
    units = units_from_config(parser)
    count = _get_float(s, "count")
    if count != int(count):
        raise ValidationError("count must be an integer")
    return SweepRequest(
        scenario=scenario,
        axis=axis,
        start=_get_float(s, "start"),
        stop=_get_float(s, "stop"),
        count=int(count),
        spec=spec_from_config(parser, _SCENARIO_THETA[scenario]),
        probe=probe_from_config(parser, units),
        tau=_get_float(s, "tau") if "tau" in s else None,
        method=s.get("method", "closed").strip().lower(),
        units=units,
        output=s.get("output"),
    )


# ------------------------------------------------------------------- sweep


def _point(req, x):
    if req.axis is Axis.TIME:
        spec, tau = req.spec, float(x)
    else:
        freq_spec = replace(req.spec, theta=_SCENARIO_FREQUENCY[req.scenario]).with_theta(float(x))
        spec, tau = replace(freq_spec, theta=req.spec.theta), req.tau
    if req.method == "closed":
        res = closed_form_qfi(spec, tau, req.probe)
    elif req.method == "pipeline":
        res = qfi_pipeline(spec, tau, req.probe, ClosedForm())
    else:
        res = qfi_pipeline(spec, tau, req.probe, FiniteDiff())
    return res


def sweep_rows(req):
    """QFI results in axis order; points are mapped over a thread pool."""
    xs = req.axis_values()
    workers = _thread_count()
    if workers == 1:
        results = [_point(req, x) for x in xs]
    else:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(lambda x: _point(req, x), xs))
    return list(zip(xs, results))


def run_sweep(req, stream=None):
    """Write the sweep CSV to ``req.output`` (or ``stream``) and return the rows."""
    rows = sweep_rows(req)
    buf = io.StringIO()
    buf.write(SWEEP_HEADER + "\n")
    for x, res in rows:
        terms = ",".join(fmt(res.terms[name]) for name in TERM_NAMES)
        buf.write(f"{fmt(x)},{fmt(res.value)},{terms},{res.meta.get('branch', '')}\n")
    _emit(buf.getvalue(), req.output, stream)
    return rows


def _thread_count():
    raw = os.environ.get(THREADS_ENV, "1")
    try:
        n = int(raw)
    except ValueError:
        raise ValidationError(f"{THREADS_ENV}={raw!r} is not an integer") from None
    if n < 1:
        raise ValidationError(f"{THREADS_ENV} must be >= 1")
    return n


def _emit(text, path, stream):
    if path:
        try:
            with open(path, "w", encoding="utf-8", newline="") as fh:
                fh.write(text)
        except OSError as exc:
            raise ValidationError(f"cannot write {path}: {exc}") from None
    else:
        (stream or sys.stdout).write(text)


# ------------------------------------------------------------------ table 1

TABLE1_TAU = 2.0 * math.pi
TABLE1_G0 = 100.0
TABLE1_MU2 = 1e6
TABLE1_EPS = 0.5
TABLE1_D1 = 1.0
TABLE1_D2 = 0.1
TABLE1_OMEGA_M = 2.0 * math.pi * 100.0
TABLE1_TEMPERATURE = 200e-9

TABLE1_REFERENCE = {
    "r_T": 2.56,
    "qfi_g0_res": 3.02e25,
    "qfi_d1_res": 1.58e12,
    "qfi_d2_res_app": 6.32e28,
}
TABLE1_TOLERANCE = {"r_T": 0.01 / 2.56, "qfi_g0_res": 0.01, "qfi_d1_res": 0.01, "qfi_d2_res_app": 0.01}

SENSITIVITY_REFERENCE = {
    "delta_g0": 1.82e-13,
    "delta_d1": 7.96e-7,
    "delta_omega_m_const": 2.27e-6,
    "delta_omega_m_res": 2.50e-12,
    "qfi_omega_m_const": 1.93e11,
    "qfi_omega_m_res": 1.60e23,
}
SENSITIVITY_TOLERANCE = 0.02


@dataclass(frozen=True)
class ReportRow:
    quantity: str
    computed: float
    reference: float
    tolerance: float

    @property
    def deviation(self):
        if self.reference == 0.0:
            return abs(self.computed)
        return abs(self.computed - self.reference) / abs(self.reference)

    @property
    def ok(self):
        return self.deviation <= self.tolerance


def compute_table1(mu2=TABLE1_MU2, sensitivity=False):
    """Rows of the headline table, optionally followed by the derived sensitivities.

    The squeezing rows also give the QFI and bound for a shift of the
    mechanical frequency, ``d2 = delta_omega_m / omega_m`` up to the
    dimensionless convention, so the chain-rule factor is ``1 / omega_m``.
    """
    r_t = r_T_from_temperature(TABLE1_TEMPERATURE, TABLE1_OMEGA_M)
    probe = ProbeState(math.sqrt(mu2), r_t)
    i_g0 = qfi_g0_res(TABLE1_G0, TABLE1_EPS, TABLE1_TAU, probe).value
    i_d1 = qfi_d1_res(TABLE1_G0, TABLE1_D1, TABLE1_TAU, probe).value
    i_d2 = qfi_d2_res_app(TABLE1_G0, TABLE1_TAU, probe).value
    rows = [
        ReportRow("r_T", r_t, TABLE1_REFERENCE["r_T"], TABLE1_TOLERANCE["r_T"]),
        ReportRow("qfi_g0_res", i_g0, TABLE1_REFERENCE["qfi_g0_res"], TABLE1_TOLERANCE["qfi_g0_res"]),
        ReportRow("qfi_d1_res", i_d1, TABLE1_REFERENCE["qfi_d1_res"], TABLE1_TOLERANCE["qfi_d1_res"]),
        ReportRow("qfi_d2_res_app", i_d2, TABLE1_REFERENCE["qfi_d2_res_app"], TABLE1_TOLERANCE["qfi_d2_res_app"]),
    ]
    if sensitivity:
        chain = 1.0 / TABLE1_OMEGA_M
        i_w_const = dimensionful_rescale(qfi_d2_const_app(TABLE1_G0, TABLE1_TAU, probe).value, chain)
        i_w_res = dimensionful_rescale(i_d2, chain)
        computed = {
            "delta_g0": _bound(i_g0),
            "delta_d1": _bound(i_d1),
            "delta_omega_m_const": _bound(i_w_const),
            "delta_omega_m_res": _bound(i_w_res),
            "qfi_omega_m_const": i_w_const,
            "qfi_omega_m_res": i_w_res,
        }
        rows += [ReportRow(k, computed[k], SENSITIVITY_REFERENCE[k], SENSITIVITY_TOLERANCE) for k in computed]
    return rows


def _bound(qfi):
    try:
        return cramer_rao(qfi)
    except UnboundedVariance:
        return math.inf


def _report_csv(rows):
    lines = [TABLE1_HEADER]
    lines += [f"{r.quantity},{fmt(r.computed)},{fmt(r.reference)},{fmt(r.deviation)}" for r in rows]
    return "\n".join(lines) + "\n"


# ------------------------------------------------------------ mechanics dump


def mechanics_csv(mech):
    buf = io.StringIO()
    buf.write(MECHANICS_HEADER + "\n")
    cols = (
        mech.grid,
        mech.p11,
        mech.p11_dot,
        mech.ip22,
        mech.ip22_dot,
        mech.xi.real,
        mech.xi.imag,
        mech.alpha.real,
        mech.alpha.imag,
        mech.beta.real,
        mech.beta.imag,
        mech.j_plus,
        mech.j_minus,
        mech.j_b,
    )
    for row in zip(*cols):
        buf.write(",".join(fmt(v) for v in row) + "\n")
    return buf.getvalue()


def mechanics_from_config(path):
    from .mechanics import DEFAULT_TOL, solve_mechanics

    parser = read_config(path)
    spec = spec_from_config(parser, _theta_for_dump(parser))
    if "mechanics" not in parser:
        raise ValidationError("config needs a [mechanics] section with tau_max")
    m = parser["mechanics"]
    return solve_mechanics(
        spec, _get_float(m, "tau_max"), _get_float(m, "tol", DEFAULT_TOL), m.get("method", "RK45").strip()
    )


def _theta_for_dump(parser):
    # the mechanics do not depend on the estimation parameter; honour an explicit tag
    c = parser["couplings"] if "couplings" in parser else {}
    return Theta.parse(c["theta"]) if "theta" in c else Theta.G0


# ---------------------------------------------------------------- commands


def _cmd_sweep(args, out):
    req = sweep_request_from_config(args.config)
    if args.output:
        req = replace(req, output=args.output)
    run_sweep(req, out)
    return EXIT_OK


def _cmd_table1(args, out):
    rows = compute_table1(mu2=args.mu2, sensitivity=args.sensitivity)
    out.write(_report_csv(rows))
    bad = [r.quantity for r in rows if not r.ok]
    if bad:
        print(f"deviation above tolerance: {', '.join(bad)}", file=sys.stderr)
        return EXIT_DEVIATION
    return EXIT_OK


def _cmd_oracle_check(args, out):
    from .oracle import OracleConfig, oracle_suite, run_instance

    cfg = OracleConfig()
    if args.dt is not None:
        cfg = replace(cfg, step=args.dt)
    if args.max_halvings is not None:
        cfg = replace(cfg, max_halvings=args.max_halvings)
    if not cfg.step > 0 or cfg.max_halvings < 1:
        raise ValidationError("--dt must be > 0 and --max-halvings >= 1")
    worst = 0.0
    out.write(ORACLE_HEADER + "\n")
    for inst in oracle_suite(args.preset):
        analytic, value, rel = run_instance(inst, cfg)
        worst = max(worst, rel)
        out.write(f"{inst.label},{inst.example},{fmt(analytic)},{fmt(value)},{fmt(rel)}\n")
        out.flush()
    verdict = "PASS" if worst < 1e-3 else "FAIL"
    print(f"{verdict} max relative error {worst:.3e}", file=sys.stderr)
    return EXIT_OK if worst < 1e-3 else EXIT_DEVIATION


def _cmd_mechanics(args, out):
    mech = mechanics_from_config(args.config)
    _emit(mechanics_csv(mech), args.output, out)
    return EXIT_OK


def build_parser():
    parser = argparse.ArgumentParser(prog="optoqfi", description="QFI of a driven nonlinear optomechanical system.")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("sweep", help="time or frequency sweep from a config file")
    p.add_argument("config")
    p.add_argument("--output", help="CSV path (overrides [sweep] output)")
    p.set_defaults(func=_cmd_sweep)

    p = sub.add_parser("table1", help="headline QFI values against their references")
    p.add_argument("--sensitivity", action="store_true", help="append Cramer-Rao bounds")
    p.add_argument("--mu2", type=float, default=TABLE1_MU2, help="override |mu_c|^2")
    p.set_defaults(func=_cmd_table1)

    p = sub.add_parser("oracle-check", help="analytic QFI against the truncated-space oracle")
    p.add_argument("--preset", default="default")
    p.add_argument("--dt", type=float, default=None, help="initial time step")
    p.add_argument("--max-halvings", type=int, default=None)
    p.set_defaults(func=_cmd_oracle_check)

    p = sub.add_parser("mechanics", help="mechanical-mode solution")
    msub = p.add_subparsers(dest="action", required=True)
    d = msub.add_parser("dump", help="CSV of the mechanical solution on its grid")
    d.add_argument("config")
    d.add_argument("--output")
    d.set_defaults(func=_cmd_mechanics)
    return parser


def main(argv=None, out=None):
    out = sys.stdout if out is None else out
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_OK if exc.code == 0 else EXIT_VALIDATION
    try:
        return args.func(args, out)
    except ValidationError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    except (NumericalError, UnboundedVariance, ArithmeticError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL


if __name__ == "__main__":
    sys.exit(main())
