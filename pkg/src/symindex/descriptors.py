"""JSON descriptors: schema validation and conversion to library objects."""

import json
from fractions import Fraction
from importlib import resources

import jsonschema
import numpy as np
from scipy.interpolate import CubicSpline

from .convexbody import Ellipsoid, GaugeBody, LevelSetBody, ProfileChi, mollify
from .errors import InvalidInput
from .hamflow import HamiltonianModel
from .maslov import LagrangianPath
from .poly import Polynomial
from .symcore import (
    LagrangianFrame,
    SymmetricPath,
    SymplecticPath,
    diagonal,
    horizontal,
    integrate_fundamental,
    standard_Omega,
    vertical,
)
from .toric import TorusActionModel, projective_space

SCHEMA_VERSION = "symindex/1"
COMMANDS = ("index", "maslov", "hamiltonian", "capacity", "spec", "pb", "toric")


class SchemaError(ValueError):
    """Input does not match the shipped JSON schema."""


def load_schema(name):
    text = resources.files("symindex").joinpath("schemas", f"{name}.json").read_text("utf-8")
    return json.loads(text)


def validate(doc, name):
    schema = load_schema(name)
    validator = jsonschema.Draft202012Validator(schema)
    err = jsonschema.exceptions.best_match(validator.iter_errors(doc))
    if err is not None:
        where = "/".join(str(p) for p in err.absolute_path) or "<root>"
        raise SchemaError(f"{where}: {err.message}")
    return doc


# ---------------------------------------------------------------------------
# symplectic paths
# ---------------------------------------------------------------------------

def parse_path(d, steps=1000):
    kind = d["kind"]
    if kind == "rotation":
        return SymplecticPath.rotation(d["freqs"])
    if kind == "constant_S":
        return SymplecticPath.from_constant_S(d["S"])
    if kind == "samples":
        return SymplecticPath.from_samples(d["times"], d["matrices"])
    if kind == "polynomial_S":
        return integrate_fundamental(SymmetricPath.polynomial(d["coeffs"]), steps=d.get("steps", steps))
    raise InvalidInput(f"unknown path kind {kind!r}")


def parse_frame(d, n=None):
    if isinstance(d, str):
        if n is None:
            raise InvalidInput("named frames need the dimension from the path")
        return {"horizontal": horizontal, "vertical": vertical}[d](n)
    Z = np.asarray(d, dtype=float)
    return LagrangianFrame(Z, standard_Omega(Z.shape[1]))


def parse_lagrangian(d, steps=1000):
    """Returns ``(path, L0)``."""
    kind = d["kind"]
    if kind == "graph":
        path = parse_path(d["path"], steps)
        return LagrangianPath.graph(path), diagonal(path.n)
    if kind == "orbit":
        path = parse_path(d["path"], steps)
        return LagrangianPath.orbit(path, parse_frame(d["L"], path.n)), parse_frame(d["L0"], path.n)
    if kind == "samples":
        times = np.asarray(d["times"], dtype=float)
        frames = np.asarray(d["frames"], dtype=float)
        if times[0] != 0.0 or times[-1] != 1.0 or np.any(np.diff(times) <= 0):
            raise InvalidInput("sample times must increase from 0 to 1")
        if frames.ndim != 3 or frames.shape[0] != times.size or frames.shape[1] != 2 * frames.shape[2]:
            raise InvalidInput("frames must be a list of 2n x n matrices")
        spline = CubicSpline(times, frames, axis=0)
        n = frames.shape[2]
        return LagrangianPath(spline, standard_Omega(n), spline.derivative()), parse_frame(d["L0"], n)
    raise InvalidInput(f"unknown Lagrangian path kind {kind!r}")


# ---------------------------------------------------------------------------
# bodies, profiles, Hamiltonians
# ---------------------------------------------------------------------------

def parse_body(d):
    kind = d["kind"]
    if kind == "ellipsoid":
        return Ellipsoid(tuple(d["radii"]))
    if kind == "general":
        F = d["F"]
        poly = Polynomial(F["exponents"], F["coefficients"])
        if poly.d % 2:
            raise InvalidInput("defining polynomial must live in even dimension")
        return LevelSetBody.from_polynomial(poly, poly.d // 2)
    if kind == "cube":
        return GaugeBody.cube(int(d["n"]), float(d.get("half_width", 1.0)))
    raise InvalidInput(f"unknown body kind {kind!r}")


def parse_profile(d, body=None):
    a = d.get("a")
    if a is None:
        if not isinstance(body, Ellipsoid):
            raise InvalidInput("profile needs 'a' unless the body is an ellipsoid")
        a = 2.0 / max(body.radii) ** 2
    return ProfileChi(float(a), float(d["eps"]), d.get("eps_prime"), float(d.get("s", 0.0)))


def parse_hamiltonian(d):
    kind = d["kind"]
    if kind == "quadratic":
        return HamiltonianModel.quadratic(d["Q"])
    if kind == "profile":
        body = parse_body(d["body"])
        chi = parse_profile(d["chi"], body)
        mg = mollify(body, float(d.get("delta", 1e-3)), certify=False)
        return HamiltonianModel.profile(mg.value, mg.grad, mg.hess, chi, body.n, mg.quadratic_data)
    if kind == "samples":
        return HamiltonianModel.from_samples(d["points"], d["values"], int(d.get("degree", 2)))
    raise InvalidInput(f"unknown Hamiltonian kind {kind!r}")


def parse_model(d):
    if "preset" in d:
        if d["preset"] != "CPn":
            raise InvalidInput(f"unknown preset {d['preset']!r}")
        return projective_space(int(d["n"]), float(d.get("ell", 1.0)))
    return TorusActionModel.from_dict(d)


def parse_rational(x):
    """Rational from an int, a decimal string or ``"p/q"``; floats are rejected."""
    if isinstance(x, bool) or isinstance(x, float):
        raise InvalidInput("exact quantities must be integers or strings")
    return Fraction(x)
