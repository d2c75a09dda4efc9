"""Command-line front end: JSON descriptor in, JSON report out.

Exit codes: 0 success, 2 malformed or schema-violating input, 3 module error.
"""

import argparse
import hashlib
import json
import math
import sys
from fractions import Fraction

import numpy as np

from . import __version__
from .convexbody import (
    capacity_hat,
    capacity_hat0,
    mollify,
    pb_lower_bound,
    positive_regime_sweep,
    spec_window_report,
)
from .czindex import cz_index, half_str, max_cz_index
from .descriptors import (
    SCHEMA_VERSION,
    SchemaError,
    parse_body,
    parse_hamiltonian,
    parse_lagrangian,
    parse_model,
    parse_path,
    parse_profile,
    parse_rational,
    validate,
)
from .errors import InvalidInput, SymIndexError
from .hamflow import action, action_correction, flow, linearized_path
from .maslov import maslov_report
from .toric import loop_cz, rotation_lemma_gap, special_fiber_point, tilde_action

TOL_PROFILES = {
    "default": {"grid": 256, "eps": 1e-4, "samples": 4096, "steps": 1000, "crossing_threshold": 1e-8},
    "strict": {"grid": 512, "eps": 5e-5, "samples": 16384, "steps": 4000, "crossing_threshold": 1e-8},
}


def _digest(doc):
    canon = json.dumps(doc, sort_keys=True, separators=(",", ":"), ensure_ascii=False)
    return hashlib.sha256(canon.encode("utf-8")).hexdigest()


def _float(x, precision):
    return {"value": float(x), "precision": float(precision)}


def _crossings(reports):
    return [{"t": float(c.t), "dim": int(c.form.dim), "signature": int(c.inertia.sign),
             "contribution": half_str(Fraction(c.twice_contribution, 2))} for c in reports]


# ---------------------------------------------------------------------------
# commands; each returns (results, certificates)
# ---------------------------------------------------------------------------

def cmd_index(doc, tol):
    d = doc.get("path", doc)
    path = parse_path(d, tol["steps"])
    grid = doc.get("grid", tol["grid"]) if "path" in doc else tol["grid"]
    eps = doc.get("eps", tol["eps"]) if "path" in doc else tol["eps"]
    res = cz_index(path, grid, eps)
    mx = max_cz_index(path, eps, grid)
    return ({"cz": half_str(res.value), "kernel_dim": res.kernel_dim, "max_cz": half_str(mx),
             "crossings": _crossings(res.crossings)},
            {"perturbation": res.perturbation_used, "rotation_check_eps": [eps, eps / 2]})


def cmd_maslov(doc, tol):
    path, L0 = parse_lagrangian(doc["lagrangian"], tol["steps"])
    rep = maslov_report(path, L0, grid=doc.get("grid", tol["grid"]),
                        auto_perturb=doc.get("auto_perturb", False))
    return ({"maslov": half_str(rep.value), "crossings": _crossings(rep.crossings)},
            {"perturbation": rep.perturbation,
             "frame_independent": all(c.frame_independent for c in rep.crossings)})


def cmd_hamiltonian(doc, tol):
    H = parse_hamiltonian(doc["hamiltonian"])
    x0 = np.asarray(doc["x0"], dtype=float)
    if x0.shape != (H.dim,):
        raise InvalidInput(f"x0 must have length {H.dim}")
    T = float(doc.get("T", 1.0))
    steps = tol["steps"]
    traj = flow(H, x0, T, steps)
    gap = float(np.linalg.norm(traj.points[-1] - x0))
    lin = linearized_path(H, x0, T, steps)
    res = cz_index(lin, tol["grid"], tol["eps"])
    mx = max_cz_index(lin, tol["eps"], tol["grid"])
    out = {"endpoint": traj.points[-1].tolist(), "period_gap": gap, "periodic": gap < 1e-8,
           "H": H.value(x0), "cz": half_str(res.value), "kernel_dim": res.kernel_dim, "max_cz": half_str(mx)}
    if T == 1.0:
        A = action(H, x0, steps)
        out["action"] = _float(A, 1e-8)
        kappa = doc.get("kappa")
        if kappa is not None and kappa != 0:
            out["action_hat"] = _float(A + action_correction(H.n, mx, kappa), 1e-8)
    return out, {"kind": H.kind, **{k: v for k, v in H.meta.items() if isinstance(v, (int, float, str, bool))}}


def cmd_capacity(doc, tol):
    body = parse_body(doc["body"])
    samples = doc.get("samples", tol["samples"])
    c = capacity_hat(body, samples)
    c0 = capacity_hat0(body, samples)
    prec = 1e-12 if body.kind == "ellipsoid" else None
    certs = {"C_hat": _jsonable(c.certificate), "C_hat0": _jsonable(c0.certificate)}
    out = {"C_hat": _float(c.value, prec if prec else c.value * c.certificate["mesh"] / max(c.a, 1e-300)),
           "C_hat0": _float(c0.value, prec if prec else c0.value * c0.certificate["mesh"] / max(c0.a, 1e-300)),
           "C_hat_over_pi": c.value / math.pi, "C_hat0_over_pi": c0.value / math.pi,
           "a": c.a, "a0": c0.a}
    if "delta" in doc:
        mg = mollify(body, doc["delta"])
        certs["mollified"] = _jsonable(mg.certificate)
    return out, certs


def cmd_spec(doc, tol):
    body = parse_body(doc["body"])
    profile = parse_profile(doc["profile"], body)
    kappa = float(doc["kappa"])
    rep = spec_window_report(body, profile, kappa, float(doc["delta"]), doc.get("levels"),
                             grid=tol["grid"])
    entries = [{"level": e.level, "block": e.block, "label": e.label, "periodic": e.periodic,
                "inside": e.inside, "H": e.H, "action": e.action, "cz": half_str(e.cz),
                "kernel_dim": e.kernel_dim, "max_cz": half_str(e.max_cz),
                "action_hat": e.action_hat, "flag": e.flag} for e in rep.entries]
    out = {"ok": rep.ok, "regime": rep.regime, "threshold": rep.threshold, "entries": entries,
           "outside_pairs": [[a, half_str(m), k] for a, m, k in rep.outside_pairs()]}
    if kappa > 0:
        _, _, holds = positive_regime_sweep(rep.constants["a"], body.n, kappa)
        out["positive_regime_sweep"] = holds
    return out, _jsonable(rep.constants)


def cmd_pb(doc, tol):
    exact = parse_rational(doc["cap_over_pi"]) if "cap_over_pi" in doc else None
    r = pb_lower_bound(doc["d"], doc.get("cap"), doc.get("regime", "kappa_nonpos_or_small_c0"), exact)
    return {"pb_lower_bound": _float(r.value, 1e-15 * r.value), "exact": r.exact, "regime": r.regime}, {}


def cmd_toric(doc, tol):
    command = doc["command"]
    if command == "rotation_lemma":
        for key in ("y", "m", "N"):
            if key not in doc:
                raise InvalidInput(f"rotation_lemma needs {key!r}")
        lhs, rhs, holds = rotation_lemma_gap(doc["y"], int(doc["m"]), doc["N"])
        return {"lhs": lhs, "rhs": rhs, "holds": holds}, {"guard": 1e-12}
    if "model" not in doc:
        raise InvalidInput(f"{command} needs a model")
    model = parse_model(doc["model"])
    if command == "special_fiber":
        sf = special_fiber_point(model)
        return {"p_star": sf.point.tolist(), "residual": sf.residual}, {"kappa": model.kappa, **_jsonable(model.meta)}
    m = doc.get("m")
    if not isinstance(m, list):
        raise InvalidInput(f"{command} needs an integer vector 'm'")
    if command == "loop_cz":
        return {"loop_cz": loop_cz(model, doc.get("fixed_point", 0), m)}, {}
    value = tilde_action(model, doc.get("c", 0.0), m, doc.get("N", 1), doc.get("fixed_point", 0), doc.get("r"))
    sf = special_fiber_point(model)
    expected = doc.get("c", 0.0) + float(sf.point @ np.asarray(m, dtype=float)) / doc.get("N", 1) + model.n / model.kappa
    return {"tilde_action": _float(value, 1e-12), "expected": expected,
            "matches": abs(value - expected) <= 1e-12 * max(1.0, abs(expected))}, {}


COMMAND_FUNCS = {"index": cmd_index, "maslov": cmd_maslov, "hamiltonian": cmd_hamiltonian,
                 "capacity": cmd_capacity, "spec": cmd_spec, "pb": cmd_pb, "toric": cmd_toric}


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _jsonable(obj.tolist())
    if isinstance(obj, (np.bool_, bool)):
        return bool(obj)
    if isinstance(obj, (np.integer, int)):
        return int(obj)
    if isinstance(obj, (np.floating, float)):
        return float(obj)
    if isinstance(obj, Fraction):
        return half_str(obj) if obj.denominator <= 2 else f"{obj.numerator}/{obj.denominator}"
    return obj


def run(command, doc, tol_profile="default", steps=None):
    """Run one command on a parsed document; returns ``(report, exit_code)``."""
    tol = dict(TOL_PROFILES[tol_profile])
    if steps is not None:
        tol["steps"] = int(steps)
    report = {"schema": SCHEMA_VERSION, "command": command, "version": __version__,
              "input_digest": _digest(doc), "tol_profile": tol_profile, "tolerances": tol}
    try:
        validate(doc, command)
    except SchemaError as err:
        return {**report, "ok": False, "error": {"code": "schema", "message": str(err)}}, 2
    try:
        results, certs = COMMAND_FUNCS[command](doc, tol)
    except SymIndexError as err:
        return {**report, "ok": False, "error": _jsonable(err.payload())}, 3
    return {**report, "ok": True, "results": _jsonable(results), "certificates": _jsonable(certs)}, 0


def dumps(report):
    return json.dumps(report, sort_keys=True, indent=2, ensure_ascii=False, allow_nan=False) + "\n"


def build_parser():
    parser = argparse.ArgumentParser(prog="symindex", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)
    for name in COMMAND_FUNCS:
        p = sub.add_parser(name, help=(COMMAND_FUNCS[name].__doc__ or name))
        p.add_argument("--input", "-i", default="-", help="descriptor file (default: stdin)")
        p.add_argument("--output", "-o", default="-", help="report file (default: stdout)")
        p.add_argument("--tol-profile", choices=sorted(TOL_PROFILES), default="default")
        p.add_argument("--steps", type=int, default=None, help="integration steps for flows")
    return parser


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        if args.input == "-":
            text = sys.stdin.read()
        else:
            with open(args.input, encoding="utf-8") as f:
                text = f.read()
        doc = json.loads(text)
    except (OSError, json.JSONDecodeError) as err:
        report = {"schema": SCHEMA_VERSION, "command": args.command, "version": __version__,
                  "input_digest": hashlib.sha256(b"").hexdigest(), "ok": False,
                  "error": {"code": "schema", "message": f"cannot read input: {err}"}}
        code = 2
    else:
        report, code = run(args.command, doc, args.tol_profile, args.steps)
    text = dumps(report)
    if args.output == "-":
        sys.stdout.write(text)
    else:
        with open(args.output, "w", encoding="utf-8") as f:
            f.write(text)
    return code


if __name__ == "__main__":
    sys.exit(main())
