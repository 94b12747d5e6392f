"""Scenario runner: body specs in, descriptor files and verification reports out."""

import json
import logging
import os
import zlib
from dataclasses import asdict, dataclass
from math import gamma as gamma_fn
from math import pi, sqrt

import numpy as np

from . import bodies as B
from .descriptors import (
    DescriptorConfig,
    direction_measure,
    direction_space_measure,
    flag_measure,
    grassmann_measure,
    projection_average_measure,
    projection_generating_measure,
    projection_weighted_haar,
    tilde_gamma,
)
from .errors import SchemaError, UnsupportedBodyError
from .geometry import (
    Subspace,
    c_const,
    complement_frames,
    haar_frames,
    rho,
    uniform_sphere,
)
from .measures import (
    Carrier,
    EmpiricalMeasure,
    compare,
    compare_values,
    grassmann_battery,
    integrate,
    push_forward,
    sphere_battery,
    summary,
)
from .streams import chunked, substream
from .transforms import (
    bracket_to,
    constant,
    cosine_measure_values,
    projected_span_measures,
    radon_measure,
    sphere_radon_measure,
)
from .valuations import crofton_valuation, intrinsic_valuation, valuation_chain_sides, verify_klain_cosine

log = logging.getLogger("glab")

BUILTIN_BODIES = ("cube", "ball", "box", "random-zonotope", "segment")
IDENTITIES = (
    "thm-1-1",
    "thm-3-1",
    "thm-5-1",
    "thm-6-1",
    "cor-6-2",
    "prop-4-1",
    "prop-6-3",
    "thm-7-1",
    "identity-proj-span",
    "eq-2-5",
    "discrimination",
)
DESCRIPTORS = ("flag", "gamma", "tilde-gamma", "rho_j", "direction", "proj-avg")


@dataclass(frozen=True)
class Scenario:
    body: str
    d: int
    j: int
    k: int = None
    samples: int = 20000
    seed: int = 0
    z: float = 3.0
    probes: int = 10
    per_atom: int = 1
    ball_pairs: int = 1
    body2: str = None

    def config(self, tag=0):
        return DescriptorConfig(self.j, self.samples, _mix(self.seed, tag), self.ball_pairs)

    def echo(self):
        return {k: v for k, v in asdict(self).items() if v is not None}


def _mix(seed, tag):
    """Independent root seed for one side of a comparison."""
    return int(np.random.SeedSequence(seed, spawn_key=(_tag(tag),)).generate_state(1)[0])


def _tag(tag):
    return tag if isinstance(tag, int) else zlib.crc32(str(tag).encode())


# --- bodies -------------------------------------------------------------------


def builtin_body(name, d):
    if name == "cube":
        return B.cube(d)
    if name == "ball":
        return B.Ball(1.0, d)
    if name == "box":
        return B.box([2.0] + [1.0] * (d - 1))
    if name == "random-zonotope":
        return B.random_zonotope(d, 7, substream(0, "random-zonotope", d))
    if name == "segment":
        return B.segment(np.eye(d)[0])
    raise SchemaError(f"unknown built-in body {name!r}", "body")


def parse_body(doc, path="$"):
    """Body from a JSON document with fields type/generators/radius/dim/vertices."""
    if not isinstance(doc, dict):
        raise SchemaError("body spec must be an object", path)
    kind = doc.get("type")
    if kind not in ("zonotope", "ball", "polytope"):
        raise SchemaError(f"type must be zonotope, ball or polytope, got {kind!r}", f"{path}.type")
    if kind == "ball":
        r, dim = doc.get("radius"), doc.get("dim")
        if not _is_num(r) or r <= 0:
            raise SchemaError("radius must be a positive number", f"{path}.radius")
        if not isinstance(dim, int) or isinstance(dim, bool) or dim < 2:
            raise SchemaError("dim must be an integer >= 2", f"{path}.dim")
        return B.Ball(float(r), dim)
    key = "generators" if kind == "zonotope" else "vertices"
    rows = doc.get(key)
    if not isinstance(rows, list) or not rows:
        raise SchemaError(f"{key} must be a non-empty array of arrays", f"{path}.{key}")
    width = None
    for i, row in enumerate(rows):
        if not isinstance(row, list) or not row or not all(_is_num(x) for x in row):
            raise SchemaError("expected an array of numbers", f"{path}.{key}[{i}]")
        if width is not None and len(row) != width:
            raise SchemaError("all rows must have the same length", f"{path}.{key}[{i}]")
        width = len(row)
    arr = np.array(rows, dtype=float)
    try:
        return B.Zonotope(arr) if kind == "zonotope" else B.Polytope(arr)
    except ValueError as exc:
        raise SchemaError(str(exc), f"{path}.{key}") from exc


def _is_num(x):
    return isinstance(x, (int, float)) and not isinstance(x, bool) and np.isfinite(x)


def load_body(ref, d):
    """Body from a JSON file path or a built-in name (optionally prefixed ``builtin:``)."""
    name = ref[len("builtin:") :] if ref.startswith("builtin:") else ref
    if not os.path.exists(ref) and name in BUILTIN_BODIES:
        return builtin_body(name, d)
    try:
        with open(ref, encoding="utf-8") as fh:
            doc = json.load(fh)
    except FileNotFoundError as exc:
        raise SchemaError("no such body file or built-in name", ref) from exc
    except json.JSONDecodeError as exc:
        raise SchemaError(f"invalid JSON: {exc.msg}", ref) from exc
    K = parse_body(doc)
    if K.dim != d:
        raise SchemaError(f"body lives in R^{K.dim} but d={d}", "$")
    return K


# --- compute ------------------------------------------------------------------


def compute(name, sc):
    """Descriptor measure for a scenario."""
    K = load_body(sc.body, sc.d)
    cfg = sc.config("compute")
    if name == "flag":
        return flag_measure(K, cfg)
    if name == "gamma":
        return grassmann_measure(K, cfg)
    if name == "tilde-gamma":
        return tilde_gamma(K, cfg)
    if name == "rho_j":
        if not isinstance(K, B.Zonotope):
            raise UnsupportedBodyError("rho_j is implemented for zonotopes")
        return projection_generating_measure(K, sc.j)
    if name == "direction":
        return direction_measure(K, cfg)
    if name == "proj-avg":
        return projection_average_measure(K, sc.j, sc.k or sc.j + 1, cfg)
    raise SchemaError(f"unknown descriptor {name!r}", "descriptor")


def sidecar(name, sc, mu):
    return {
        "descriptor": name,
        "scenario": sc.echo(),
        "carrier": mu.carrier.tag(),
        **summary(mu),
    }


# --- verify -------------------------------------------------------------------


def _verdict(rep, extra=True):
    ok = rep.shape_match and any(c["within_rel_tol"] for c in rep.candidates) and extra
    return "PASS" if ok else "FAIL"


def _matching(rep):
    return [c["name"] for c in rep.candidates if c["within_rel_tol"] and c["max_abs_z"] <= rep.z_threshold]


def _side(mu):
    s = summary(mu)
    return {"mass": s["mass"], "mass_se": s["mass_se"], "samples": s["samples"]}


def _report(identity, sc, rep, sides, verdict=None, **extra):
    out = {
        "identity": identity,
        "scenario": sc.echo(),
        "sides": sides,
        "comparison": rep.to_dict() if rep is not None else None,
        "verdict": verdict if verdict is not None else _verdict(rep),
    }
    if rep is not None:
        out["matching_candidates"] = _matching(rep)
    out.update(extra)
    return out


def verify(identity, sc):
    """Run one identity check and return its report as a plain dict."""
    try:
        runner = _RUNNERS[identity]
    except KeyError:
        raise SchemaError(f"unknown identity {identity!r}", "identity") from None
    return runner(sc)


def _thm_1_1(sc):
    K = load_body(sc.body, sc.d)
    g = grassmann_measure(K, sc.config("gamma"))
    w = projection_weighted_haar(K, sc.config("weighted-haar"))
    bat = grassmann_battery(sc.d, sc.j, sc.probes, _mix(sc.seed, "battery"))
    rep = compare(g, w, bat, sc.z, {"rho": rho(sc.d, sc.j)})
    return _report("thm-1-1", sc, rep, {"gamma": _side(g), "weighted_haar": _side(w)})


def _crofton_battery(sc, count=3, n_inner=256):
    vals = [intrinsic_valuation(sc.j)]
    M = haar_frames(substream(sc.seed, "crofton-probes", sc.d, sc.j), count, sc.d, sc.j)
    for i in range(count):
        phi = crofton_valuation(bracket_to(Subspace(M[i])), n_inner, _mix(sc.seed, f"crofton-{i}"))
        phi.label = f"crofton[bracket M{i}]"
        vals.append(phi)
    return vals


def _thm_3_1(sc):
    K = load_body(sc.body, sc.d)
    vals = _crofton_battery(sc)
    a, sa, b, sb = valuation_chain_sides(vals, K, sc.config("gamma"), sc.samples, _mix(sc.seed, "rhs"))
    rep = compare_values([v.label for v in vals], a, sa, b, sb, sc.z, {"rho": rho(sc.d, sc.j)})
    return _report("thm-3-1", sc, rep, {"lhs_V_j": a[0], "rhs_V_j": b[0]})


def _thm_5_1(sc):
    probes = [Subspace(f) for f in haar_frames(substream(sc.seed, "klain-probes", sc.d, sc.j), sc.probes, sc.d, sc.j)]
    M0 = Subspace(haar_frames(substream(sc.seed, "klain-M0", sc.d, sc.j), 1, sc.d, sc.j)[0])
    fs = {"const": constant(sc.d, sc.j), "bracket_M0": bracket_to(M0)}
    reps = {}
    for name, f in fs.items():
        reps[name] = verify_klain_cosine(
            f, probes, sc.config(f"klain-{name}"), sc.samples, _mix(sc.seed, f"cos-{name}"), sc.z
        )
    r1, r2 = reps["const"], reps["bracket_M0"]
    z_f = (r1.fitted - r2.fitted) / sqrt(r1.fitted_se**2 + r2.fitted_se**2)
    f_indep = abs(z_f) <= sc.z
    verdict = "PASS" if all(_verdict(r) == "PASS" for r in reps.values()) and f_indep else "FAIL"
    return _report(
        "thm-5-1",
        sc,
        r1,
        {"klain_const_mean": float(np.mean(r1.lhs)), "cosine_const_mean": float(np.mean(r1.rhs))},
        verdict,
        by_function={k: r.to_dict() for k, r in reps.items()},
        f_independence={"z": z_f, "pass": bool(f_indep)},
    )


def _complement_push(mu):
    d, k = mu.carrier.d, mu.carrier.k
    return push_forward(mu, complement_frames, Carrier.grassmann(d, d - k))


def _thm_6_1(sc):
    K = load_body(sc.body, sc.d)
    lhs = projection_average_measure(K, sc.j, sc.j + 1, sc.config("proj-avg"))
    g = grassmann_measure(K, sc.config("gamma"))
    rhs = sphere_radon_measure(_complement_push(g), sc.per_atom, _mix(sc.seed, "sphere-radon"))
    rep = compare(lhs, rhs, sphere_battery(sc.d, sc.probes, _mix(sc.seed, "battery")), sc.z, {"rho": rho(sc.d, sc.j)})
    return _report("thm-6-1", sc, rep, {"projection_average": _side(lhs), "radon_gamma_perp": _side(rhs)})


def _hyperplane_measure(K, sc):
    """``A -> ∫_A V_j(K|u^perp) omega(du)`` as a sampled sphere measure."""
    d, n = sc.d, sc.samples

    def job(rng, start, count):
        u = uniform_sphere(rng, count, d)
        return u, B.projection_values(K, complement_frames(u[:, :, None]), sc.j), np.arange(start, start + count)

    parts = chunked(n, _mix(sc.seed, "hyperplane"), ("hyperplane", d, sc.j), job)
    return EmpiricalMeasure.replicated(
        Carrier.sphere(d),
        np.concatenate([p[0] for p in parts]),
        np.concatenate([p[1] for p in parts]) / n,
        np.concatenate([p[2] for p in parts]),
        n,
        {"label": "hyperplane-projection"},
    )


def _cor_6_2(sc):
    K = load_body(sc.body, sc.d)
    k = sc.k or sc.j + 1
    c = c_const(k - 1, sc.d - k, sc.d - 1, 0)
    lhs = projection_average_measure(K, sc.j, k, sc.config("proj-avg"))
    rhs = _hyperplane_measure(K, sc)
    rep = compare(
        lhs,
        rhs,
        sphere_battery(sc.d, sc.probes, _mix(sc.seed, "battery")),
        sc.z,
        {"stated_c": c, "stated_c_times_rho": c * rho(sc.d, sc.j)},
    )
    sides = {
        "projection_average": _side(lhs),
        "hyperplane_integral": _side(rhs),
        "pair": [lhs.total_mass(), c * rhs.total_mass()],
    }
    return _report("cor-6-2", sc, rep, sides, stated_constant=c)


def _prop_4_1(sc):
    K = load_body(sc.body, sc.d)
    if not isinstance(K, B.Zonotope):
        raise UnsupportedBodyError("this identity needs a projection generating measure (zonotopes)")
    g = grassmann_measure(K, sc.config("gamma"))
    pg = projection_generating_measure(K, sc.j)
    bat = grassmann_battery(sc.d, sc.j, sc.probes, _mix(sc.seed, "battery"))
    a, sa = integrate(g, bat)

    def job(rng, start, count):
        N = haar_frames(rng, count, sc.d, sc.j)
        return bat(N) * cosine_measure_values(pg, N)[:, None]

    vals = np.concatenate(chunked(sc.samples, _mix(sc.seed, "cosine-restricted"), ("prop41", sc.d, sc.j), job))
    b, sb = vals.mean(axis=0), vals.std(axis=0, ddof=1) / sqrt(len(vals))
    rep = compare_values(bat.names, a, sa, b, sb, sc.z, {"rho": rho(sc.d, sc.j)})
    return _report("prop-4-1", sc, rep, {"gamma": _side(g), "rho_j_mass": pg.total_mass()})


def mean_abs_cos(d):
    """``E|<u, e>|`` for u uniform on the unit sphere of R^d."""
    return gamma_fn(d / 2) / (sqrt(pi) * gamma_fn((d + 1) / 2))


def area_measure_sample(K, j, n, seed):
    """Sampled area measure: atoms exact, each subsphere represented by n antipodal pairs."""
    A = B.area_measure(K, j)
    d = A.dim
    rng = substream(seed, "area-sample", d, j)
    pts, w, strata, groups, sizes = [], [], [], [], []
    s = 0
    for x, wt in zip(A.atom_dirs, A.atom_weights):
        pts.append(x[None])
        w.append([wt])
        strata.append([s])
        groups.append([0])
        sizes.append(1)
        s += 1
    for f, wt in A.subspheres:
        z = rng.standard_normal((n, f.shape[1]))
        u = (z / np.linalg.norm(z, axis=1, keepdims=True)) @ f.T
        pts.append(np.concatenate([u, -u]))
        w.append(np.full(2 * n, wt / (2 * n)))
        strata.append(np.full(2 * n, s))
        groups.append(np.tile(np.arange(n), 2))
        sizes.append(n)
        s += 1
    if not pts:
        return EmpiricalMeasure.empty(Carrier.sphere(d))
    return EmpiricalMeasure(
        Carrier.sphere(d),
        np.concatenate(w),
        np.concatenate(pts),
        np.concatenate(strata),
        np.concatenate(groups),
        np.array(sizes),
        {"label": "area-measure"},
    )


def _prop_6_3(sc):
    K = load_body(sc.body, sc.d)
    d, j = sc.d, sc.j
    k = sc.k or j + 1
    m = mean_abs_cos(d)
    rhs = area_measure_sample(K, j, sc.samples, _mix(sc.seed, "area"))
    rhs = rhs.scaled(m)
    bat = sphere_battery(d, sc.probes, _mix(sc.seed, "battery"))
    schneider = c_const(k, d - j, d, k - j) / m
    reps = {}
    for variant, intrinsic in (("embedded", False), ("intrinsic", True)):
        lhs = projection_average_measure(K, j, k, sc.config(f"proj-avg-{variant}"), intrinsic=intrinsic)
        reps[variant] = (compare(lhs, rhs, bat, sc.z, {"projection_formula": schneider}), lhs)
    verdicts = {v: _verdict(r) for v, (r, _) in reps.items()}
    out = _report(
        "prop-6-3",
        sc,
        reps["intrinsic"][0],
        {"rhs": _side(rhs), **{f"lhs_{v}": _side(mu) for v, (_, mu) in reps.items()}},
        "PASS" if "PASS" in verdicts.values() else "FAIL",
        variants={
            v: {"comparison": r.to_dict(), "verdict": verdicts[v], "matching_candidates": _matching(r)}
            for v, (r, _) in reps.items()
        },
        mean_abs_cos=m,
    )
    out["matching_candidates"] = [f"{v}:{c}" for v, (r, _) in reps.items() for c in _matching(r)]
    return out


def _thm_7_1(sc):
    K = load_body(sc.body, sc.d)
    lhs = direction_space_measure(K, sc.config("direction"))
    g = grassmann_measure(K, sc.config("gamma"))
    rhs = radon_measure(g, sc.j + 1, sc.per_atom, _mix(sc.seed, "radon")).scaled(2.0)
    bat = grassmann_battery(sc.d, sc.j + 1, sc.probes, _mix(sc.seed, "battery"))
    rep = compare(lhs, rhs, bat, sc.z, {"rho": rho(sc.d, sc.j)})
    return _report("thm-7-1", sc, rep, {"direction_perp": _side(lhs), "twice_radon_gamma": _side(rhs)})


def _proj_span(sc):
    M = Subspace.coordinate(sc.d, list(range(sc.j)))
    left, right = projected_span_measures(M, sc.samples, _mix(sc.seed, "proj-span"))
    bat = grassmann_battery(sc.d, sc.j, sc.probes, _mix(sc.seed, "battery"))
    rep = compare(left, right, bat, sc.z, {"rho": rho(sc.d, sc.j)})
    return _report("identity-proj-span", sc, rep, {"projected": _side(left), "direct": _side(right)})


def _eq_2_5(sc):
    K = load_body(sc.body, sc.d)
    if not isinstance(K, B.Zonotope):
        raise UnsupportedBodyError("the generating-measure identity is implemented for zonotopes")
    pg = projection_generating_measure(K, sc.j)
    L = haar_frames(substream(sc.seed, "eq25", sc.d, sc.j), sc.samples, sc.d, sc.j)
    a = cosine_measure_values(pg, L)
    b = B.projection_values(K, L)
    diff = float(np.max(np.abs(a - b)))
    verdict = "PASS" if diff <= 1e-10 else "FAIL"
    return _report(
        "eq-2-5",
        sc,
        None,
        {"rho_j_mass": pg.total_mass(), "atoms": len(pg)},
        verdict,
        max_abs_diff=diff,
        tolerance=1e-10,
        subspaces=sc.samples,
    )


def matched_box(K, j, d):
    """Box with half-sides (2, 1, ..., 1), scaled so that its V_j equals V_j(K)."""
    box = B.box([2.0] + [1.0] * (d - 1))
    return box.scaled((B.intrinsic_volume(K, j) / B.intrinsic_volume(box, j)) ** (1.0 / j))


def _discrimination(sc):
    d, j = sc.d, sc.j
    K = load_body(sc.body, d)
    K2 = load_body(sc.body2, d) if sc.body2 else matched_box(K, j, d)
    results, sides = {}, {}
    descs = (
        ("gamma", lambda X, c: grassmann_measure(X, c), grassmann_battery(d, j, sc.probes, _mix(sc.seed, "bat-g"))),
        (
            "projection_average",
            lambda X, c: projection_average_measure(X, j, sc.k or j + 1, c),
            sphere_battery(d, sc.probes, _mix(sc.seed, "bat-p")),
        ),
        (
            "direction",
            lambda X, c: direction_measure(X, c),
            grassmann_battery(d, d - j - 1, sc.probes, _mix(sc.seed, "bat-d")),
        ),
    )
    separated = {}
    for name, build, bat in descs:
        mu = build(K, sc.config(f"{name}-1"))
        nu = build(K2, sc.config(f"{name}-2"))
        rep = compare(mu, nu, bat, sc.z)
        results[name] = rep.to_dict()
        separated[name] = rep.max_z_raw > 5.0
        sides[name] = {"first": _side(mu), "second": _side(nu), "max_abs_z": rep.max_z_raw}
    verdict = "PASS" if all(separated.values()) else "FAIL"
    return _report(
        "discrimination",
        sc,
        None,
        sides,
        verdict,
        separation_threshold=5.0,
        separated=separated,
        comparisons=results,
        second_body="matched-box" if not sc.body2 else sc.body2,
    )


_RUNNERS = {
    "thm-1-1": _thm_1_1,
    "thm-3-1": _thm_3_1,
    "thm-5-1": _thm_5_1,
    "thm-6-1": _thm_6_1,
    "cor-6-2": _cor_6_2,
    "prop-4-1": _prop_4_1,
    "prop-6-3": _prop_6_3,
    "thm-7-1": _thm_7_1,
    "identity-proj-span": _proj_span,
    "eq-2-5": _eq_2_5,
    "discrimination": _discrimination,
}


# --- serialization -----------------------------------------------------------------


def _clean(x):
    if isinstance(x, dict):
        return {str(k): _clean(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_clean(v) for v in x]
    if isinstance(x, (bool, np.bool_)):
        return bool(x)
    if isinstance(x, (int, np.integer)):
        return int(x)
    if isinstance(x, (float, np.floating)):
        x = float(x)
        if np.isfinite(x):
            return x
        return None if np.isnan(x) else ("inf" if x > 0 else "-inf")
    if isinstance(x, np.ndarray):
        return _clean(x.tolist())
    return x


def dumps(doc):
    """Stable JSON text: sorted keys, two-space indent, trailing newline."""
    return json.dumps(_clean(doc), sort_keys=True, indent=2, ensure_ascii=False, allow_nan=False) + "\n"


def write_text(path, text):
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write(text)


def bundle(directory):
    """Collect verification reports (``*.json`` with an ``identity`` key) into summary rows."""
    rows, warnings = [], []
    names = sorted(os.listdir(directory)) if os.path.isdir(directory) else []
    if not os.path.isdir(directory):
        warnings.append(f"{directory}: not a directory")
    for name in names:
        if not name.endswith(".json"):
            continue
        path = os.path.join(directory, name)
        try:
            with open(path, encoding="utf-8") as fh:
                doc = json.load(fh)
        except (OSError, json.JSONDecodeError) as exc:
            warnings.append(f"{name}: skipped ({exc})")
            continue
        if not isinstance(doc, dict) or "identity" not in doc:
            warnings.append(f"{name}: skipped (not a verification report)")
            continue
        sc = doc.get("scenario", {})
        comp = doc.get("comparison") or {}
        fit = comp.get("fitted_constant") or {}
        rows.append(
            {
                "file": name,
                "identity": doc["identity"],
                "body": sc.get("body"),
                "d": sc.get("d"),
                "j": sc.get("j"),
                "k": sc.get("k"),
                "fitted": fit.get("value"),
                "fitted_se": fit.get("se"),
                "matching": ";".join(doc.get("matching_candidates", [])),
                "verdict": doc.get("verdict"),
            }
        )
    if not rows:
        warnings.append("no reports found")
    return rows, warnings


BUNDLE_COLUMNS = ("file", "identity", "body", "d", "j", "k", "fitted", "fitted_se", "matching", "verdict")


def bundle_csv(rows):
    def cell(v):
        if v is None:
            return ""
        if isinstance(v, float):
            return repr(v)
        return str(v)

    lines = [",".join(BUNDLE_COLUMNS)]
    lines += [",".join(cell(r[c]) for c in BUNDLE_COLUMNS) for r in rows]
    return "\n".join(lines) + "\n"


__all__ = [
    "BUILTIN_BODIES",
    "DESCRIPTORS",
    "IDENTITIES",
    "Scenario",
    "bundle",
    "bundle_csv",
    "compute",
    "dumps",
    "load_body",
    "parse_body",
    "sidecar",
    "verify",
]
