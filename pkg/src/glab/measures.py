"""Weighted empirical measures on spheres, Grassmannians and flag spaces.

Monte Carlo error bars come from a stratified design.  Every sample carries a
stratum id and a group id; groups are independent replicates within their
stratum, and ``stratum_sizes[s]`` counts all groups of stratum ``s`` including
those that produced no sample.  An exact atomic measure puts every atom in a
stratum of size one and so has zero standard error.
"""

import io
from dataclasses import dataclass, field
from math import fsum, isfinite

import numpy as np

from .errors import CarrierViolationError, InvalidDimensionError, NoFitError, SchemaError
from .geometry import FLAG_TOL, haar_frames, plucker, uniform_sphere
from .streams import substream

SPHERE, GRASSMANN, FLAG = "sphere", "grassmann", "flag"


@dataclass(frozen=True)
class Carrier:
    """``sphere`` (k unused, stored as 1), ``grassmann`` G(d,k) or ``flag`` F(d,k).

    Points are stored as ``(n, d)`` unit vectors, ``(n, d, k)`` frames, or
    ``(n, d, k+1)`` arrays whose first column is the direction and the rest a
    frame of the subspace.
    """

    kind: str
    d: int
    k: int = 1

    def __post_init__(self):
        if self.kind not in (SPHERE, GRASSMANN, FLAG):
            raise InvalidDimensionError(f"unknown carrier kind {self.kind!r}")
        if self.d < 1 or not 1 <= self.k <= self.d:
            raise InvalidDimensionError(f"bad carrier dimensions d={self.d}, k={self.k}")

    @classmethod
    def sphere(cls, d):
        return cls(SPHERE, d, 1)

    @classmethod
    def grassmann(cls, d, k):
        return cls(GRASSMANN, d, k)

    @classmethod
    def flag(cls, d, k):
        return cls(FLAG, d, k)

    @property
    def point_shape(self):
        if self.kind == SPHERE:
            return (self.d,)
        if self.kind == GRASSMANN:
            return (self.d, self.k)
        return (self.d, self.k + 1)

    @property
    def width(self):
        return int(np.prod(self.point_shape))

    def tag(self):
        return f"{self.kind}:{self.d}:{self.k}"

    def violations(self, points, tol=FLAG_TOL):
        """Boolean mask of points breaking the carrier invariants."""
        p = np.asarray(points, dtype=float)
        if p.shape[1:] != self.point_shape:
            raise CarrierViolationError(
                f"points of shape {p.shape[1:]} do not fit carrier {self.tag()}", 0
            )
        if self.kind == SPHERE:
            return ~(np.abs(np.linalg.norm(p, axis=1) - 1.0) <= tol)
        frames = p if self.kind == GRASSMANN else p[:, :, 1:]
        gram = np.swapaxes(frames, 1, 2) @ frames
        bad = ~(np.abs(gram - np.eye(self.k)).max(axis=(1, 2)) <= tol)
        if self.kind == FLAG:
            u = p[:, :, 0]
            resid = u - np.einsum("ndk,nk->nd", frames, np.einsum("ndk,nd->nk", frames, u))
            bad |= ~(np.abs(np.linalg.norm(u, axis=1) - 1.0) <= tol)
            bad |= ~(np.linalg.norm(resid, axis=1) <= tol)
        return bad

    def check(self, points, tol=FLAG_TOL):
        bad = self.violations(points, tol)
        if bad.any():
            raise CarrierViolationError(f"point violates carrier {self.tag()}", int(np.argmax(bad)))


@dataclass(eq=False)
class EmpiricalMeasure:
    carrier: Carrier
    weights: np.ndarray
    points: np.ndarray
    strata: np.ndarray
    groups: np.ndarray
    stratum_sizes: np.ndarray
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        n = len(self.weights)
        self.weights = np.asarray(self.weights, dtype=float)
        self.points = np.asarray(self.points, dtype=float).reshape((n,) + self.carrier.point_shape)
        self.strata = np.asarray(self.strata, dtype=np.int64)
        self.groups = np.asarray(self.groups, dtype=np.int64)
        self.stratum_sizes = np.asarray(self.stratum_sizes, dtype=np.int64)
        if np.any(self.weights < 0) or not np.all(np.isfinite(self.weights)):
            raise ValueError("weights must be finite and nonnegative")

    def __len__(self):
        return len(self.weights)

    @classmethod
    def atoms(cls, carrier, points, weights, meta=None):
        """Exact atomic measure: one stratum per atom, zero standard error."""
        n = len(weights)
        return cls(carrier, weights, points, np.arange(n), np.zeros(n, dtype=np.int64), np.ones(n), dict(meta or {}))

    @classmethod
    def replicated(cls, carrier, points, weights, draws, n_draws, meta=None):
        """Random measure built from ``n_draws`` i.i.d. replicates; ``draws`` names each sample's replicate."""
        n = len(weights)
        return cls(carrier, weights, points, np.zeros(n, dtype=np.int64), draws, np.array([n_draws]), dict(meta or {}))

    @classmethod
    def empty(cls, carrier, meta=None):
        shape = (0,) + carrier.point_shape
        return cls(carrier, np.zeros(0), np.zeros(shape), np.zeros(0), np.zeros(0), np.zeros(0), dict(meta or {}))

    def total_mass(self):
        return fsum(self.weights.tolist())

    def scaled(self, alpha):
        return EmpiricalMeasure(
            self.carrier, alpha * self.weights, self.points, self.strata, self.groups,
            self.stratum_sizes, dict(self.meta),
        )

    def with_meta(self, **kw):
        return EmpiricalMeasure(
            self.carrier, self.weights, self.points, self.strata, self.groups,
            self.stratum_sizes, {**self.meta, **kw},
        )


def integrate(mu, f):
    """Integrate ``f`` against ``mu``: returns ``(value, se)``.

    ``f`` maps the stacked points to ``(n,)`` or ``(n, p)`` values; for the
    latter both outputs are arrays of length p.
    """
    vals = np.asarray(f(mu.points), dtype=float) if len(mu) else None
    return integrate_values(mu, vals)


def integrate_values(mu, vals):
    """Like :func:`integrate` for precomputed per-sample values."""
    if len(mu) == 0:
        return 0.0, 0.0
    vals = np.asarray(vals, dtype=float)
    scalar = vals.ndim == 1
    v = vals.reshape(len(mu), -1)
    wv = mu.weights[:, None] * v
    total = wv.sum(axis=0)
    se = np.sqrt(_stratified_variance(mu, wv))
    if scalar:
        return float(total[0]), float(se[0])
    return total, se


def _stratified_variance(mu, wv):
    ns = len(mu.stratum_sizes)
    sizes = mu.stratum_sizes
    # sum within (stratum, group) cells
    key = mu.strata * (int(mu.groups.max()) + 1 if len(mu.groups) else 1) + mu.groups
    cells, inv = np.unique(key, return_inverse=True)
    cell_sum = np.zeros((len(cells), wv.shape[1]))
    np.add.at(cell_sum, inv, wv)
    cell_stratum = mu.strata[np.unique(inv, return_index=True)[1]]
    present = np.bincount(cell_stratum, minlength=ns)
    s_total = np.zeros((ns, wv.shape[1]))
    np.add.at(s_total, cell_stratum, cell_sum)
    mean = s_total / np.maximum(sizes, 1)[:, None]
    dev = cell_sum - mean[cell_stratum]
    ss = np.zeros((ns, wv.shape[1]))
    np.add.at(ss, cell_stratum, dev**2)
    ss += (sizes - present)[:, None] * mean**2
    factor = np.where(sizes > 1, sizes / np.maximum(sizes - 1, 1), 0.0)
    return (factor[:, None] * ss).sum(axis=0)


def push_forward(mu, fn, target, tol=FLAG_TOL):
    """Image measure under the batched map ``fn``; weights and error design are untouched."""
    pts = np.asarray(fn(mu.points), dtype=float) if len(mu) else np.zeros((0,) + target.point_shape)
    if len(mu):
        target.check(pts, tol)
    return EmpiricalMeasure(target, mu.weights, pts, mu.strata, mu.groups, mu.stratum_sizes, dict(mu.meta))


def concat(*measures):
    """Disjoint union (``⊎``); strata are relabelled so designs stay independent."""
    carrier = measures[0].carrier
    if any(m.carrier != carrier for m in measures):
        raise CarrierViolationError("cannot concatenate measures on different carriers")
    offsets = np.cumsum([0] + [len(m.stratum_sizes) for m in measures])
    return EmpiricalMeasure(
        carrier,
        np.concatenate([m.weights for m in measures]),
        np.concatenate([m.points for m in measures]),
        np.concatenate([m.strata + o for m, o in zip(measures, offsets)]),
        np.concatenate([m.groups for m in measures]),
        np.concatenate([m.stratum_sizes for m in measures]),
        dict(measures[0].meta),
    )


# --- probe batteries ----------------------------------------------------------


@dataclass(eq=False)
class ProbeBattery:
    """Named test functions, evaluated together as ``fn(points) -> (n, p)``."""

    carrier: Carrier
    names: list
    fn: object

    def __len__(self):
        return len(self.names)

    def __call__(self, points):
        return self.fn(points)

    def transported(self, rotation):
        """Battery of ``x -> f(R^T x)`` for a rotation R."""
        R = np.asarray(rotation)
        return ProbeBattery(self.carrier, self.names, lambda pts: self.fn(np.einsum("ed,ne...->nd...", R, pts)))


def grassmann_battery(d, k, p=10, seed=0):
    """``L -> <L, M_i>`` and ``<L, M_i>^2`` for p Haar probes M_i."""
    probes = haar_frames(substream(seed, "battery", "grassmann", d, k), p, d, k)
    pm = plucker(probes)

    def fn(pts):
        b = np.minimum(np.abs(plucker(pts) @ pm.T), 1.0)
        return np.concatenate([b, b**2], axis=1)

    names = [f"bracket[{i}]" for i in range(p)] + [f"bracket_sq[{i}]" for i in range(p)]
    return ProbeBattery(Carrier.grassmann(d, k), names, fn)


def sphere_battery(d, p=10, seed=0, odd=False):
    """``u -> |<u, v_i>|`` and ``<u, v_i>^2``; with ``odd`` the odd pair ``<u, v_i>``, ``<u, v_i>^3``."""
    v = uniform_sphere(substream(seed, "battery", "sphere", d), p, d)

    def fn(pts):
        c = pts @ v.T
        if odd:
            return np.concatenate([c, c**3], axis=1)
        return np.concatenate([np.abs(c), c**2], axis=1)

    if odd:
        names = [f"dot[{i}]" for i in range(p)] + [f"dot_cube[{i}]" for i in range(p)]
    else:
        names = [f"abs_dot[{i}]" for i in range(p)] + [f"dot_sq[{i}]" for i in range(p)]
    return ProbeBattery(Carrier.sphere(d), names, fn)


def flag_battery(d, k, p=10, seed=0):
    """``(u, L) -> <u, v_i>^2 <L, M_i>`` and ``|<u, v_i>|``."""
    v = uniform_sphere(substream(seed, "battery", "flag-u", d), p, d)
    pm = plucker(haar_frames(substream(seed, "battery", "flag-L", d, k), p, d, k))

    def fn(pts):
        c = pts[:, :, 0] @ v.T
        b = np.minimum(np.abs(plucker(pts[:, :, 1:]) @ pm.T), 1.0)
        return np.concatenate([c**2 * b, np.abs(c)], axis=1)

    names = [f"dot_sq_bracket[{i}]" for i in range(p)] + [f"abs_dot[{i}]" for i in range(p)]
    return ProbeBattery(Carrier.flag(d, k), names, fn)


def default_battery(carrier, p=10, seed=0):
    if carrier.kind == SPHERE:
        return sphere_battery(carrier.d, p, seed)
    if carrier.kind == GRASSMANN:
        return grassmann_battery(carrier.d, carrier.k, p, seed)
    return flag_battery(carrier.d, carrier.k, p, seed)


# --- comparison ------------------------------------------------------------------


@dataclass
class ComparisonReport:
    names: list
    lhs: np.ndarray
    lhs_se: np.ndarray
    rhs: np.ndarray
    rhs_se: np.ndarray
    z_raw: np.ndarray
    z_fit: np.ndarray
    fitted: float
    fitted_se: float
    z_threshold: float
    rel_tol: float
    candidates: list

    @property
    def max_z_raw(self):
        return float(np.max(np.abs(self.z_raw))) if len(self.z_raw) else 0.0

    @property
    def max_z_fit(self):
        return float(np.max(np.abs(self.z_fit))) if len(self.z_fit) else 0.0

    @property
    def shape_match(self):
        return self.max_z_fit <= self.z_threshold

    def candidate(self, name):
        for c in self.candidates:
            if c["name"] == name:
                return c
        raise KeyError(name)

    def to_dict(self):
        probes = [
            {
                "name": n,
                "lhs": _num(a),
                "lhs_se": _num(sa),
                "rhs": _num(b),
                "rhs_se": _num(sb),
                "z_at_1": _num(z),
                "z_fit": _num(zf),
            }
            for n, a, sa, b, sb, z, zf in zip(
                self.names, self.lhs, self.lhs_se, self.rhs, self.rhs_se, self.z_raw, self.z_fit
            )
        ]
        half = 1.959963984540054 * self.fitted_se
        return {
            "probes": probes,
            "fitted_constant": {
                "value": _num(self.fitted),
                "se": _num(self.fitted_se),
                "ci95": [_num(self.fitted - half), _num(self.fitted + half)],
            },
            "max_abs_z_at_1": _num(self.max_z_raw),
            "max_abs_z_fit": _num(self.max_z_fit),
            "shape_match": bool(self.shape_match),
            "z_threshold": self.z_threshold,
            "rel_tol": self.rel_tol,
            "candidates": [{k: _num(v) if isinstance(v, float) else v for k, v in c.items()} for c in self.candidates],
        }


def _num(x):
    x = float(x)
    if isfinite(x):
        return x
    return None if x != x else ("inf" if x > 0 else "-inf")


ROUNDOFF = 1e-12


def _variance(a, sa, b, sb, alpha):
    """Combined variance of ``a - alpha b``, floored at relative round-off level."""
    scale = np.maximum(np.abs(a), np.abs(alpha * b))
    return sa**2 + alpha**2 * sb**2 + (ROUNDOFF * scale) ** 2


def _z(a, sa, b, sb, alpha):
    diff = a - alpha * b
    var = _variance(a, sa, b, sb, alpha)
    with np.errstate(divide="ignore", invalid="ignore"):
        z = diff / np.sqrt(var)
        return np.where(var > 0, z, np.where(diff == 0, 0.0, np.sign(diff) * np.inf))


def fit_constant(a, sa, b, sb, iters=100):
    """Weighted least-squares ``alpha`` with ``a ≈ alpha b``, weights from both sides' SEs."""
    a, sa, b, sb = (np.asarray(x, dtype=float) for x in (a, sa, b, sb))
    bb = float(b @ b)
    if bb == 0:
        if np.any(a != 0):
            raise NoFitError("reference side vanishes on every probe")
        return float("nan"), float("nan")
    alpha = float(a @ b) / bb
    if not np.any(sa > 0) and not np.any(sb > 0):
        return alpha, 0.0
    for _ in range(iters):
        w = 1.0 / np.maximum(_variance(a, sa, b, sb, alpha), 1e-300)
        new = float(np.sum(w * a * b) / np.sum(w * b * b))
        done = abs(new - alpha) <= 1e-14 * max(abs(alpha), 1e-300)
        alpha = new
        if done:
            break
    w = 1.0 / np.maximum(_variance(a, sa, b, sb, alpha), 1e-300)
    return alpha, float(1.0 / np.sqrt(np.sum(w * b * b)))


def compare_values(names, a, sa, b, sb, z_threshold=3.0, candidates=None, rel_tol=0.02):
    """Build a :class:`ComparisonReport` from probe integrals of both sides.

    ``candidates`` maps names to constants to audit; ``"1"`` is always included.
    """
    a, sa, b, sb = (np.atleast_1d(np.asarray(x, dtype=float)) for x in (a, sa, b, sb))
    alpha, alpha_se = fit_constant(a, sa, b, sb)
    z_raw = _z(a, sa, b, sb, 1.0)
    z_fit = np.zeros_like(a) if alpha != alpha else _z(a, sa, b, sb, alpha)
    cands = {"1": 1.0}
    cands.update(candidates or {})
    rows = []
    for name, c in cands.items():
        c = float(c)
        zc = _z(a, sa, b, sb, c)
        rel = abs(alpha - c) / abs(c) if alpha == alpha else float("nan")
        if alpha != alpha:
            z_const = 0.0
        elif alpha_se > 0:
            z_const = (alpha - c) / alpha_se
        else:
            z_const = 0.0 if rel <= 1e-12 else float("inf")
        within = bool(alpha != alpha or rel <= rel_tol)
        max_zc = float(np.max(np.abs(zc))) if len(zc) else 0.0
        rows.append(
            {
                "name": name,
                "value": c,
                "rel_dev": rel,
                "z_constant": z_const,
                "max_abs_z": max_zc,
                "within_rel_tol": within,
                "verdict": "PASS" if within and max_zc <= z_threshold else "FAIL",
            }
        )
    return ComparisonReport(list(names), a, sa, b, sb, z_raw, z_fit, alpha, alpha_se, z_threshold, rel_tol, rows)


def compare(mu, nu, battery, z_threshold=3.0, candidates=None, rel_tol=0.02):
    if mu.carrier != nu.carrier or mu.carrier != battery.carrier:
        raise CarrierViolationError("compared measures and battery must share a carrier")
    a, sa = integrate(mu, battery)
    b, sb = integrate(nu, battery)
    return compare_values(battery.names, a, sa, b, sb, z_threshold, candidates, rel_tol)


# --- CSV -------------------------------------------------------------------------


def to_csv(mu):
    """CSV text: ``weight`` then point coordinates (frames flattened column-major)."""
    c = mu.carrier
    head = ["weight"] + [f"{c.tag()}:{i}" for i in range(c.width)]
    pts = mu.points if c.kind == SPHERE else np.swapaxes(mu.points, 1, 2)
    table = np.column_stack([mu.weights, pts.reshape(len(mu), -1)]) if len(mu) else np.zeros((0, c.width + 1))
    buf = io.StringIO(newline="")
    buf.write(",".join(head) + "\n")
    np.savetxt(buf, table, fmt="%.17g", delimiter=",", newline="\n")
    return buf.getvalue()


def write_csv(mu, path):
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write(to_csv(mu))


def read_csv(path):
    """Read a measure written by :func:`write_csv` (as an exact atomic measure)."""
    with open(path, encoding="utf-8") as fh:
        header = fh.readline().strip().split(",")
        if not header or header[0] != "weight" or len(header) < 2:
            raise SchemaError("missing weight/coordinate header", path)
        try:
            kind, d, k, _ = header[1].split(":")
            carrier = Carrier(kind, int(d), int(k))
        except (ValueError, InvalidDimensionError) as exc:
            raise SchemaError(f"bad carrier tag {header[1]!r}", path) from exc
        if len(header) != carrier.width + 1:
            raise SchemaError("column count does not match carrier", path)
        data = np.loadtxt(fh, delimiter=",", ndmin=2).reshape(-1, carrier.width + 1)
    pts = data[:, 1:]
    if carrier.kind != SPHERE:
        shp = carrier.point_shape
        pts = np.swapaxes(pts.reshape(len(pts), shp[1], shp[0]), 1, 2)
    return EmpiricalMeasure.atoms(carrier, pts, data[:, 0])


def summary(mu):
    """Mass and its standard error, for sidecar metadata."""
    mass, se = integrate_values(mu, np.ones(len(mu)))
    return {"mass": fsum(mu.weights.tolist()), "mass_se": se, "samples": len(mu)}


__all__ = [
    "summary",
    "Carrier",
    "ComparisonReport",
    "EmpiricalMeasure",
    "ProbeBattery",
    "compare",
    "compare_values",
    "concat",
    "default_battery",
    "fit_constant",
    "flag_battery",
    "grassmann_battery",
    "integrate",
    "integrate_values",
    "push_forward",
    "read_csv",
    "sphere_battery",
    "to_csv",
    "write_csv",
]
