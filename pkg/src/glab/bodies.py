"""Convex bodies and their exact functionals.

Area measures use the normalization ``Psi_j(K, S^{d-1}) = V_j(K)``.  A
zonotope is the Minkowski sum of centred segments ``[-g_i, g_i]``; its
j-faces parallel to ``lin(g_S)`` have normal cones tiling ``lin(g_S)^perp``,
so ``Psi_j`` is a mixture of uniform measures on great subspheres.  That
formula is used verbatim for lower-dimensional zonotopes as well.
"""

from dataclasses import dataclass, field
from functools import lru_cache
from itertools import combinations
from math import fsum

import numpy as np
from scipy.spatial import ConvexHull, QhullError

from .errors import InvalidDimensionError, UnsupportedBodyError
from .geometry import (
    Subspace,
    ball_intrinsic_volume,
    gram_volume,
    kappa,
    normals_from_rows,
    orthonormalize,
    plucker,
)

RANK_TOL = 1e-10
MAX_GENERATORS = 14


@dataclass(frozen=True, eq=False)
class Zonotope:
    """Minkowski sum of the segments ``[-g_i, g_i]`` (rows of ``generators``)."""

    generators: np.ndarray
    max_generators: int = MAX_GENERATORS

    def __post_init__(self):
        g = np.atleast_2d(np.asarray(self.generators, dtype=float))
        if g.shape[0] < 1:
            raise InvalidDimensionError("a zonotope needs at least one generator")
        if g.shape[0] > self.max_generators:
            raise InvalidDimensionError(
                f"{g.shape[0]} generators exceed the configured limit {self.max_generators}"
            )
        object.__setattr__(self, "generators", g)

    @property
    def dim(self):
        return self.generators.shape[1]

    def scaled(self, alpha):
        return Zonotope(alpha * self.generators, self.max_generators)

    def rotated(self, rotation):
        return Zonotope(self.generators @ np.asarray(rotation).T, self.max_generators)

    def rank(self):
        return _rank(self.generators)


@dataclass(frozen=True, eq=False)
class Ball:
    """Ball of the given radius, optionally flat: the unit ball of ``span`` scaled by radius."""

    radius: float
    dim: int
    span: np.ndarray = field(default=None)

    def __post_init__(self):
        if not self.radius > 0:
            raise InvalidDimensionError("ball radius must be positive")
        if self.span is not None:
            s = Subspace(self.span).frame
            if s.shape[0] != self.dim:
                raise InvalidDimensionError("ball span frame does not match ambient dimension")
            object.__setattr__(self, "span", None if s.shape[1] == self.dim else s)

    @property
    def flat_dim(self):
        return self.dim if self.span is None else self.span.shape[1]

    def scaled(self, alpha):
        return Ball(alpha * self.radius, self.dim, self.span)

    def rotated(self, rotation):
        span = None if self.span is None else np.asarray(rotation) @ self.span
        return Ball(self.radius, self.dim, span)

    def rank(self):
        return self.flat_dim


@dataclass(frozen=True, eq=False)
class Polytope:
    """Convex hull of a vertex list; functionals need hull computations in dimension <= 3."""

    vertices: np.ndarray

    def __post_init__(self):
        v = np.atleast_2d(np.asarray(self.vertices, dtype=float))
        if v.shape[0] < 1:
            raise InvalidDimensionError("a polytope needs at least one vertex")
        keep = []
        for i, x in enumerate(v):
            if all(np.linalg.norm(x - v[k]) > 1e-10 for k in keep):
                keep.append(i)
        object.__setattr__(self, "vertices", v[keep])

    @property
    def dim(self):
        return self.vertices.shape[1]

    def scaled(self, alpha):
        return Polytope(alpha * self.vertices)

    def rotated(self, rotation):
        return Polytope(self.vertices @ np.asarray(rotation).T)

    def rank(self):
        return _rank(self.vertices - self.vertices.mean(axis=0))


@dataclass(frozen=True, eq=False)
class AreaMeasure:
    """A measure on the unit sphere: point atoms plus weighted uniform subspheres.

    ``subspheres`` holds ``(frame, weight)`` pairs, meaning ``weight`` times the
    uniform probability measure on the unit sphere of ``span(frame)``.
    """

    dim: int
    atom_dirs: np.ndarray
    atom_weights: np.ndarray
    subspheres: tuple = ()

    def total_mass(self):
        return fsum(list(self.atom_weights) + [w for _, w in self.subspheres])

    def is_atomic(self):
        return all(f.shape[1] == 1 for f, _ in self.subspheres)

    def atoms(self):
        """All point masses, expanding 0-spheres ``{±v}`` into two half-weight atoms."""
        dirs = [self.atom_dirs]
        ws = [self.atom_weights]
        for f, w in self.subspheres:
            if f.shape[1] != 1:
                raise UnsupportedBodyError("measure has positive-dimensional subspheres")
            dirs.append(np.stack([f[:, 0], -f[:, 0]]))
            ws.append(np.array([w / 2, w / 2]))
        return np.concatenate(dirs).reshape(-1, self.dim), np.concatenate(ws)

    def sample(self, rng, per_component=64):
        """Unbiased symmetric sample: ``(dirs, weights)``.

        Atoms are kept exactly; each subsphere contributes ``per_component``
        antipodal pairs of uniform points.
        """
        dirs = [self.atom_dirs.reshape(-1, self.dim)]
        ws = [self.atom_weights]
        for f, w in self.subspheres:
            if f.shape[1] == 1:
                x = np.stack([f[:, 0], -f[:, 0]])
                dirs.append(x)
                ws.append(np.full(2, w / 2))
                continue
            z = rng.standard_normal((per_component, f.shape[1]))
            z /= np.linalg.norm(z, axis=1, keepdims=True)
            x = z @ f.T
            dirs.append(np.concatenate([x, -x]))
            ws.append(np.full(2 * per_component, w / (2 * per_component)))
        return np.concatenate(dirs), np.concatenate(ws)


# --- construction helpers ----------------------------------------------------


def cube(d, half_side=1.0):
    return Zonotope(half_side * np.eye(d))


def box(half_sides):
    return Zonotope(np.diag(np.asarray(half_sides, dtype=float)))


def segment(v):
    return Zonotope(np.atleast_2d(np.asarray(v, dtype=float)))


def random_zonotope(d, n, rng):
    return Zonotope(rng.standard_normal((n, d)))


def unit_cube_in(L):
    """Cube spanned by the frame of ``L`` with unit j-volume."""
    return Zonotope(0.5 * L.frame.T)


def _rank(a):
    s = np.linalg.svd(np.atleast_2d(a), compute_uv=False)
    if s.size == 0 or s[0] == 0:
        return 0
    return int(np.sum(s > RANK_TOL * s[0]))


@lru_cache(maxsize=None)
def subsets(n, j):
    """Lexicographic j-subsets of ``range(n)`` as an ``(s, j)`` index array."""
    return np.array(list(combinations(range(n), j)), dtype=int).reshape(-1, j)


# --- support and projection functions ----------------------------------------


def support(K, u):
    """Support function ``h(K, u)``."""
    u = np.asarray(u, dtype=float)
    if isinstance(K, Zonotope):
        return float(np.sum(np.abs(K.generators @ u)))
    if isinstance(K, Ball):
        if K.span is None:
            return float(K.radius * np.linalg.norm(u))
        return float(K.radius * np.linalg.norm(K.span.T @ u))
    if isinstance(K, Polytope):
        return float(np.max(K.vertices @ u))
    raise UnsupportedBodyError(f"unknown body {type(K).__name__}")


def projection_function(K, L):
    """``V_j(K|L)`` with ``j = dim L`` (the shadow formula for zonotopes)."""
    j = L.sub_dim
    if not 1 <= j <= L.ambient_dim - 1:
        raise InvalidDimensionError(f"projection dimension {j} outside 1..d-1")
    _check_dim(K, L.ambient_dim)
    return float(projection_values(K, L.frame[None])[0])


def projection_values(K, frames, j=None):
    """``V_j(K|L)`` for stacked frames ``(n, d, m)``; ``j`` defaults to ``m``."""
    frames = np.asarray(frames, dtype=float)
    n, d, m = frames.shape
    j = m if j is None else j
    if not 0 <= j <= m:
        raise InvalidDimensionError(f"V_{j} of a projection onto a {m}-space")
    _check_dim(K, d)
    if j == 0:
        return np.ones(n)
    if isinstance(K, Zonotope):
        return _zonotope_projection_values(K, frames, j)
    if isinstance(K, Ball):
        return _ball_projection_values(K, frames, j)
    if isinstance(K, Polytope):
        return np.array([_polytope_intrinsic(K.vertices @ f, j) for f in frames])
    raise UnsupportedBodyError(f"unknown body {type(K).__name__}")


def _zonotope_projection_values(Z, frames, j, block=4096):
    n, d, m = frames.shape
    idx = subsets(Z.generators.shape[0], j)
    out = np.empty(n)
    for s in range(0, n, block):
        c = np.einsum("ndm,gd->ngm", frames[s : s + block], Z.generators)
        a = c[:, idx, :]
        if j == m:
            vol = np.abs(np.linalg.det(a)) if j > 1 else np.abs(a[..., 0, 0])
        else:
            vol = gram_volume(a)
        out[s : s + block] = 2.0**j * vol.sum(axis=1)
    return out


def _ball_projection_values(B, frames, j):
    n, d, m = frames.shape
    r = B.radius
    if B.span is None:
        return np.full(n, ball_intrinsic_volume(m, j, r))
    k = B.span.shape[1]
    t = np.swapaxes(frames, 1, 2) @ B.span
    if j == m and m <= k:
        g = t @ np.swapaxes(t, 1, 2)
    elif j == k and k <= m:
        g = np.swapaxes(t, 1, 2) @ t
    elif j > min(m, k):
        return np.zeros(n)
    else:
        raise UnsupportedBodyError("intrinsic volumes of projected ellipsoids are not implemented")
    return kappa(j) * r**j * np.sqrt(np.maximum(np.linalg.det(g), 0.0))


def _affine_coords(points):
    c = points - points.mean(axis=0)
    if len(points) == 1:
        return c[:, :0]
    u, s, vt = np.linalg.svd(c, full_matrices=False)
    r = int(np.sum(s > RANK_TOL * max(s[0], 1e-300))) if s[0] > 0 else 0
    return c @ vt[:r].T


def _polytope_intrinsic(points, j):
    """``V_j`` of conv(points) for affine dimension <= 3 and ``j >= dim - 1``."""
    x = _affine_coords(points)
    r = x.shape[1]
    if j > r:
        return 0.0
    if r > 3 or j < r - 1:
        raise UnsupportedBodyError(f"polytope V_{j} in affine dimension {r} is not supported")
    if r == 1:
        length = float(x.max() - x.min())
        return length if j == 1 else 1.0
    hull = ConvexHull(x)
    if j == r:
        return float(hull.volume)
    return float(hull.area) / 2.0


def intrinsic_volume(K, j):
    """``V_j(K)``."""
    if isinstance(K, Zonotope):
        idx = subsets(K.generators.shape[0], j)
        return float(2.0**j * gram_volume(K.generators[idx]).sum())
    if isinstance(K, Ball):
        return ball_intrinsic_volume(K.flat_dim, j, K.radius)
    if isinstance(K, Polytope):
        return _polytope_intrinsic(K.vertices, j)
    raise UnsupportedBodyError(f"unknown body {type(K).__name__}")


def project(K, L):
    """The body ``K|L`` in ambient coordinates."""
    P = L.projector()
    if isinstance(K, Zonotope):
        return Zonotope(K.generators @ P, K.max_generators)
    if isinstance(K, Polytope):
        return Polytope(K.vertices @ P)
    if isinstance(K, Ball) and K.span is None:
        return Ball(K.radius, K.dim, L.frame)
    raise UnsupportedBodyError("projection of a flat ball is an ellipsoid")


def _check_dim(K, d):
    if K.dim != d:
        raise InvalidDimensionError(f"body lives in R^{K.dim}, subspace in R^{d}")


# --- area measures -----------------------------------------------------------


def area_measure_zonotope(Z, j):
    """Exact ``Psi_j(Z, .)`` as a mixture of uniform subspheres.

    Each j-subset S with ``det_j(g_S) > 0`` contributes weight
    ``2^j det_j(g_S)`` spread uniformly on the unit sphere of ``lin(g_S)^perp``.
    Returns an empty measure when ``rank(Z) < j``.
    """
    d = Z.dim
    if not 1 <= j <= d - 1:
        raise InvalidDimensionError(f"area measure order {j} outside 1..d-1")
    gens = Z.generators
    scale = np.linalg.norm(gens, axis=1)
    parts = []
    for S in subsets(gens.shape[0], j):
        v = gens[S]
        vol = float(gram_volume(v))
        if vol <= RANK_TOL * np.prod(scale[S]):
            continue
        q, _ = np.linalg.qr(v.T, mode="complete")
        parts.append((q[:, j:], 2.0**j * vol))
    return AreaMeasure(d, np.zeros((0, d)), np.zeros(0), tuple(parts))


def area_measure_ball(B, j):
    """Uniform measure on the sphere with total ``V_j(B)``."""
    if not 1 <= j <= B.dim - 1:
        raise InvalidDimensionError(f"area measure order {j} outside 1..d-1")
    if B.span is not None:
        raise UnsupportedBodyError("area measures of flat balls are not implemented")
    mass = ball_intrinsic_volume(B.dim, j, B.radius)
    return AreaMeasure(B.dim, np.zeros((0, B.dim)), np.zeros(0), ((np.eye(B.dim), mass),))


def area_measure(K, j):
    if isinstance(K, Zonotope):
        return area_measure_zonotope(K, j)
    if isinstance(K, Ball):
        return area_measure_ball(K, j)
    raise UnsupportedBodyError("area measures below top order need external angles")


def top_area_measure_in_subspace(K, L):
    """Top-order area measure of ``K|L`` computed inside ``L`` (``dim L = j + 1``)."""
    m = L.sub_dim
    if m < 2:
        raise InvalidDimensionError("subspace must have dimension j + 1 >= 2")
    _check_dim(K, L.ambient_dim)
    d = L.ambient_dim
    if isinstance(K, Ball) and K.span is None:
        mass = ball_intrinsic_volume(m, m - 1, K.radius)
        return AreaMeasure(d, np.zeros((0, d)), np.zeros(0), ((L.frame, mass),))
    atoms = top_area_atoms(K, L.frame[None], None)
    dirs = atoms.dirs @ L.frame.T
    w = atoms.weights
    if atoms.paired:
        dirs = np.concatenate([dirs, -dirs])
        w = np.concatenate([w, w])
    return AreaMeasure(d, dirs, w)


@dataclass
class TopAtoms:
    """Atoms of ``Psi'_j(K|E, .)`` for a stack of subspaces E, in E-coordinates.

    With ``paired`` set, each row stands for two atoms ``±dirs`` of the same weight.
    """

    draw: np.ndarray
    dirs: np.ndarray
    weights: np.ndarray
    paired: bool


def top_area_atoms(K, frames, rng, ball_pairs=1):
    """Top-order area atoms of the projections ``K|E`` for stacked frames ``(n, d, j+1)``.

    Exact for zonotopes, flat balls and polytopes; a full ball contributes
    ``ball_pairs`` random antipodal pairs per subspace (unbiased).
    """
    frames = np.asarray(frames, dtype=float)
    n, d, m = frames.shape
    _check_dim(K, d)
    if isinstance(K, Zonotope):
        return _zonotope_top_atoms(K, frames)
    if isinstance(K, Ball):
        if K.span is None:
            mass = ball_intrinsic_volume(m, m - 1, K.radius)
            z = rng.standard_normal((n, ball_pairs, m))
            z /= np.linalg.norm(z, axis=2, keepdims=True)
            return TopAtoms(
                np.repeat(np.arange(n), ball_pairs),
                z.reshape(-1, m),
                np.full(n * ball_pairs, mass / (2 * ball_pairs)),
                True,
            )
        if K.span.shape[1] != m - 1:
            raise UnsupportedBodyError("projections of flat balls are ellipsoids")
        t = np.swapaxes(frames, 1, 2) @ K.span
        nv = normals_from_rows(np.swapaxes(t, 1, 2))
        vol = np.linalg.norm(nv, axis=1)
        keep = vol > RANK_TOL
        w = kappa(m - 1) * K.radius ** (m - 1) * vol[keep] / 2
        return TopAtoms(np.flatnonzero(keep), nv[keep] / vol[keep, None], w, True)
    if isinstance(K, Polytope):
        if m > 3:
            raise UnsupportedBodyError("polytope hulls are supported in dimension <= 3 only")
        draws, dirs, ws = [], [], []
        for i, f in enumerate(frames):
            dd, ww = _polytope_top_atoms(K.vertices @ f, m)
            draws.append(np.full(len(ww), i))
            dirs.append(dd)
            ws.append(ww)
        return TopAtoms(np.concatenate(draws), np.concatenate(dirs).reshape(-1, m), np.concatenate(ws), False)
    raise UnsupportedBodyError(f"unknown body {type(K).__name__}")


def _zonotope_top_atoms(Z, frames):
    n, d, m = frames.shape
    j = m - 1
    gens = Z.generators
    idx = subsets(gens.shape[0], j)
    scale = np.prod(np.linalg.norm(gens, axis=1)[idx], axis=1)
    c = np.einsum("ndm,gd->ngm", frames, gens)
    nv = normals_from_rows(c[:, idx, :])
    vol = np.linalg.norm(nv, axis=2)
    keep = vol > RANK_TOL * scale[None, :]
    draw = np.broadcast_to(np.arange(n)[:, None], keep.shape)[keep]
    dirs = nv[keep] / vol[keep][:, None]
    return TopAtoms(draw, dirs, 2.0 ** (j - 1) * vol[keep], True)


def _polytope_top_atoms(x, m):
    """Facet atoms (outward normal, half facet volume) of conv(x) in R^m."""
    r = _rank(x - x.mean(axis=0))
    if r < m - 1:
        return np.zeros((0, m)), np.zeros(0)
    if r == m - 1:
        # flat projection: two normals, each with half the j-volume
        c = x - x.mean(axis=0)
        _, _, vt = np.linalg.svd(c)
        normal = vt[-1]
        vol = _polytope_intrinsic(x, m - 1)
        return np.stack([normal, -normal]), np.array([vol / 2, vol / 2])
    try:
        hull = ConvexHull(x)
    except QhullError:
        return np.zeros((0, m)), np.zeros(0)
    normals = hull.equations[:, :m]
    pts = x[hull.simplices]
    if m == 2:
        areas = np.linalg.norm(pts[:, 1] - pts[:, 0], axis=1)
    else:
        areas = 0.5 * np.linalg.norm(np.cross(pts[:, 1] - pts[:, 0], pts[:, 2] - pts[:, 0]), axis=1)
    return normals, areas / 2


@dataclass
class SphereSamples:
    draw: np.ndarray
    dirs: np.ndarray
    weights: np.ndarray


def projected_area_samples(K, frames, j, rng, pairs=1, intrinsic=False):
    """Random symmetric sample of ``Psi_j(K|L, .)`` for each stacked frame L.

    ``Psi_j`` of the projection is taken as a body in R^d (its support lies on
    the whole sphere); with ``intrinsic`` it is computed inside L instead, so
    all directions lie in L.  Exact weights per draw, random positions.
    """
    frames = np.asarray(frames, dtype=float)
    n, d, k = frames.shape
    if not 1 <= j < k:
        raise InvalidDimensionError(f"need 1 <= j < k, got j={j}, k={k}")
    _check_dim(K, d)
    if isinstance(K, Zonotope):
        return _zonotope_projected_samples(K, frames, j, rng, pairs, intrinsic)
    if isinstance(K, Ball) and K.span is None:
        mass = ball_intrinsic_volume(k, j, K.radius)
        a = np.einsum("ndk,npk->npd", frames, _unit(rng.standard_normal((n, pairs, k))))
        if intrinsic or k == d:
            u = a
        else:
            comp = _complement_stack(frames)
            b = np.einsum("ndk,npk->npd", comp, _unit(rng.standard_normal((n, pairs, d - k))))
            g1 = np.linalg.norm(rng.standard_normal((n, pairs, k - j)), axis=2)
            g2 = np.linalg.norm(rng.standard_normal((n, pairs, d - k)), axis=2)
            r = np.hypot(g1, g2)
            u = (g1 / r)[..., None] * a + (g2 / r)[..., None] * b
        w = np.full(n * pairs, mass / (2 * pairs))
        draw = np.repeat(np.arange(n), pairs)
        u = u.reshape(-1, d)
        return SphereSamples(np.concatenate([draw, draw]), np.concatenate([u, -u]), np.concatenate([w, w]))
    raise UnsupportedBodyError("projection averages need zonotopes or full balls")


def _unit(x):
    return x / np.linalg.norm(x, axis=-1, keepdims=True)


def _complement_stack(frames):
    q, _ = np.linalg.qr(frames, mode="complete")
    return q[:, :, frames.shape[2] :]


def _zonotope_projected_samples(Z, frames, j, rng, pairs, intrinsic):
    n, d, k = frames.shape
    gens = Z.generators
    idx = subsets(gens.shape[0], j)
    scale = np.prod(np.linalg.norm(gens, axis=1)[idx], axis=1)
    pg = np.einsum("ndk,nek,ge->ngd", frames, frames, gens)
    v = pg[:, idx, :]  # (n, s, j, d)
    vol = gram_volume(v)
    keep = vol > RANK_TOL * scale[None, :]
    s = idx.shape[0]
    q = orthonormalize(np.swapaxes(v, 2, 3))  # (n, s, d, j)
    if intrinsic:
        z = np.einsum("ndk,nspk->nspd", frames, rng.standard_normal((n, s, pairs, k)))
    else:
        z = rng.standard_normal((n, s, pairs, d))
    z = z - np.einsum("nsdj,nsej,nspe->nspd", q, q, z)
    u = _unit(z)
    w = 2.0**j * vol[:, :, None] / (2 * pairs)
    draw = np.broadcast_to(np.arange(n)[:, None, None], (n, s, pairs))
    mask = np.broadcast_to(keep[:, :, None], (n, s, pairs))
    u = u[mask]
    w = np.broadcast_to(w, (n, s, pairs))[mask]
    draw = draw[mask]
    return SphereSamples(np.concatenate([draw, draw]), np.concatenate([u, -u]), np.concatenate([w, w]))


def nested_projection_values(K, frames_l, frames_n, block=512):
    """``V_j((K|L)|N)`` for every pair of stacked L ``(a, d, k)`` and N ``(b, d, j)``.

    Returns an ``(a, b)`` array.  Supported for zonotopes and full balls.
    """
    fl = np.asarray(frames_l, dtype=float)
    fn = np.asarray(frames_n, dtype=float)
    a, d, k = fl.shape
    j = fn.shape[2]
    _check_dim(K, d)
    if j > k:
        return np.zeros((a, len(fn)))
    out = np.empty((a, len(fn)))
    if isinstance(K, Zonotope):
        idx = subsets(K.generators.shape[0], j)
        pn = plucker(fn)
        for s in range(0, a, block):
            f = fl[s : s + block]
            pg = np.einsum("ndk,nek,ge->ngd", f, f, K.generators)
            wedge = plucker(np.swapaxes(pg[:, idx, :], 2, 3))
            out[s : s + block] = 2.0**j * np.abs(wedge @ pn.T).sum(axis=1)
        return out
    if isinstance(K, Ball) and K.span is None:
        c = kappa(j) * K.radius**j
        for s in range(0, a, block):
            t = np.einsum("bdj,ndk->nbjk", fn, fl[s : s + block])
            g = t @ np.swapaxes(t, 2, 3)
            out[s : s + block] = c * np.sqrt(np.maximum(np.linalg.det(g), 0.0))
        return out
    raise UnsupportedBodyError("nested projections need zonotopes or full balls")
