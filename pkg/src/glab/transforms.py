"""Cosine and Radon transforms on Grassmannians, for functions and measures."""

import logging
from dataclasses import dataclass
from math import fsum

import numpy as np

from .errors import InvalidDimensionError, InvalidTransformError
from .geometry import (
    brackets,
    extend_frames,
    haar_frames,
    haar_inside,
    orthonormalize,
    plucker,
)
from .measures import Carrier, EmpiricalMeasure, GRASSMANN
from .streams import chunked

log = logging.getLogger("glab")


@dataclass(eq=False)
class GrassmannFunction:
    """A bounded function on G(d, k), evaluated on stacked frames ``(n, d, k)``."""

    fn: object
    d: int
    k: int
    label: str = "f"
    cost: float = 1.0

    def __call__(self, frames):
        return np.asarray(self.fn(np.asarray(frames, dtype=float)), dtype=float)

    def __add__(self, other):
        return GrassmannFunction(lambda x: self(x) + other(x), self.d, self.k, f"{self.label}+{other.label}")

    def scaled(self, c):
        return GrassmannFunction(lambda x: c * self(x), self.d, self.k, f"{c}*{self.label}")


def constant(d, k, c=1.0):
    return GrassmannFunction(lambda x: np.full(len(x), float(c)), d, k, f"const({c})")


def bracket_to(M):
    pm = plucker(M.frame)
    return GrassmannFunction(
        lambda x: np.minimum(np.abs(plucker(x) @ pm), 1.0), M.ambient_dim, M.sub_dim, "bracket"
    )


def bracket_sq_to(M):
    f = bracket_to(M)
    return GrassmannFunction(lambda x: f(x) ** 2, M.ambient_dim, M.sub_dim, "bracket_sq")


def _mean_se(v):
    v = np.asarray(v, dtype=float)
    if len(v) < 2:
        return float(v.mean()) if len(v) else 0.0, 0.0
    return float(v.mean()), float(v.std(ddof=1) / np.sqrt(len(v)))


# --- function level ------------------------------------------------------------


def cosine_fn(f, L, n, rng):
    """Monte Carlo ``C_j f(L) = ∫ f(M) <L, M> nu_j(dM)``: returns ``(value, se)``."""
    if L.sub_dim != f.k or L.ambient_dim != f.d:
        raise InvalidDimensionError("cosine transform needs dim L equal to the degree of f")
    M = haar_frames(rng, n, f.d, f.k)
    return _mean_se(f(M) * brackets(np.broadcast_to(L.frame, M.shape), M))


def radon_fn(f, k, E, n, rng):
    """``R_{jk} f(E)``: mean of f over j-spaces containing E (j > k) or inside E (j < k)."""
    j = f.k
    _check_radon(f.d, j, k)
    if E.sub_dim != k:
        raise InvalidDimensionError(f"E has dimension {E.sub_dim}, expected {k}")
    base = np.broadcast_to(E.frame, (n,) + E.frame.shape)
    frames = extend_frames(rng, base, j) if j > k else haar_inside(rng, base, j)
    return _mean_se(f(frames))


def sphere_radon_fn(f, u, n, rng):
    """``R_{k,1} f(u) = 1/2 ∫ f dnu_k^u`` over k-spaces containing u."""
    if not 2 <= f.k <= f.d - 1:
        raise InvalidDimensionError("spherical Radon transform needs 2 <= k <= d-1")
    u = np.asarray(u, dtype=float)
    base = np.broadcast_to((u / np.linalg.norm(u))[:, None], (n, f.d, 1))
    v, se = _mean_se(f(extend_frames(rng, base, f.k)))
    return 0.5 * v, 0.5 * se


def _check_radon(d, j, k):
    if j == k:
        raise InvalidTransformError("Radon transform between equal Grassmannians")
    if not (1 <= j <= d - 1 and 1 <= k <= d - 1):
        raise InvalidDimensionError(f"Radon transform needs 1 <= j, k <= d-1 (d={d}, j={j}, k={k})")


# --- measure level ------------------------------------------------------------


def cosine_measure(mu, L):
    """Exact ``Σ w_i <L, M_i>`` over the samples of a Grassmann measure."""
    if mu.carrier != Carrier.grassmann(L.ambient_dim, L.sub_dim):
        raise InvalidDimensionError("carrier does not match the subspace")
    if len(mu) == 0:
        return 0.0
    b = brackets(np.broadcast_to(L.frame, mu.points.shape), mu.points)
    return fsum((mu.weights * b).tolist())


def cosine_measure_values(mu, frames):
    """Vectorized :func:`cosine_measure` over stacked subspaces ``(n, d, j)``."""
    if len(mu) == 0:
        return np.zeros(len(frames))
    b = np.minimum(np.abs(plucker(frames) @ plucker(mu.points).T), 1.0)
    return b @ mu.weights


def _expand(mu, per_atom, seed, keys, draw, target):
    """Replace every sample by ``per_atom`` random images from ``draw(rng, points)``.

    Samples in singleton strata (exact atoms) get the replicate index as their
    group; samples from random measures keep their design.
    """
    n = len(mu)
    if n == 0:
        return EmpiricalMeasure.empty(target, mu.meta)

    def job(rng, start, count):
        pts = np.repeat(mu.points[start : start + count], per_atom, axis=0)
        return draw(rng, pts)

    out = chunked(n, seed, keys, job, chunk=max(1, 8192 // per_atom))
    pts = np.concatenate([o[0] for o in out])
    reps = out[0][1] if out else 1
    weights = np.repeat(mu.weights / (per_atom * reps), per_atom * reps)
    strata = np.repeat(mu.strata, per_atom * reps)
    exact = mu.stratum_sizes[mu.strata] == 1
    rep_idx = np.tile(np.repeat(np.arange(per_atom), reps), n)
    groups = np.where(np.repeat(exact, per_atom * reps), rep_idx, np.repeat(mu.groups, per_atom * reps))
    sizes = mu.stratum_sizes.copy()
    sizes[np.unique(mu.strata[exact])] = per_atom
    return EmpiricalMeasure(target, weights, pts, strata, groups, sizes, dict(mu.meta))


def radon_measure(rho, k, per_atom=1, seed=0):
    """``R_{jk} rho``: each atom spread over random k-spaces containing it (or inside it)."""
    c = rho.carrier
    if c.kind != GRASSMANN:
        raise InvalidDimensionError("Radon transform of a non-Grassmann measure")
    j = c.k
    _check_radon(c.d, j, k)

    def draw(rng, pts):
        return (extend_frames(rng, pts, k) if k > j else haar_inside(rng, pts, k)), 1

    return _expand(rho, per_atom, seed, ("radon", c.d, j, k), draw, Carrier.grassmann(c.d, k))


def sphere_radon_measure(rho, per_atom=1, seed=0):
    """Even sphere measure: each atom L spread uniformly over the unit sphere of L.

    Mass preserving; every random direction appears with both signs at half weight.
    """
    c = rho.carrier
    if c.kind != GRASSMANN or not 2 <= c.k <= c.d - 1:
        raise InvalidDimensionError("spherical Radon transform needs a measure on G(d,k), 2 <= k <= d-1")

    def draw(rng, pts):
        z = rng.standard_normal(pts.shape[:1] + (c.k,))
        z /= np.linalg.norm(z, axis=1, keepdims=True)
        u = np.einsum("ndk,nk->nd", pts, z)
        return np.stack([u, -u], axis=1).reshape(-1, c.d), 2

    return _expand(rho, per_atom, seed, ("sphere-radon", c.d, c.k), draw, Carrier.sphere(c.d))


# --- projected spans -----------------------------------------------------------


def projected_span(M, frames, tol=1e-10):
    """Frames of ``M|L`` (image of M under projection onto each L) and a validity mask.

    Samples where the projection loses rank are flagged invalid and logged.
    """
    frames = np.asarray(frames, dtype=float)
    P = frames @ (np.swapaxes(frames, 1, 2) @ M.frame)
    sv = np.linalg.svd(P, compute_uv=False)
    ok = sv[:, -1] > tol
    lost = int(np.sum(~ok))
    if lost:
        log.info("projected span: discarded %d rank-deficient samples", lost)
    Q = orthonormalize(np.where(ok[:, None, None], P, M.frame))
    return Q, ok


def projected_span_measures(M, n, seed):
    """The two sides of the projected-span identity for a fixed j-space M.

    Left: ``A -> ∫ 1{M|L ∈ A} <M, M|L> nu_{j+1}(dL)``.  Right:
    ``A -> ∫ 1{N ∈ A} <M, N> nu_j(dN)``.  Both as Grassmann measures on G(d,j).
    """
    d, j = M.ambient_dim, M.sub_dim
    if j > d - 1:
        raise InvalidDimensionError("projected span needs j <= d-1")

    def left(rng, start, count):
        L = haar_frames(rng, count, d, j + 1)
        Q, ok = projected_span(M, L)
        w = brackets(np.broadcast_to(M.frame, Q.shape), Q) * ok
        return Q[ok], w[ok], np.arange(start, start + count)[ok]

    def right(rng, start, count):
        N = haar_frames(rng, count, d, j)
        return N, brackets(np.broadcast_to(M.frame, N.shape), N), np.arange(start, start + count)

    car = Carrier.grassmann(d, j)
    out = []
    for name, fn in (("left", left), ("right", right)):
        parts = chunked(n, seed, ("proj-span", name, d, j), fn)
        out.append(
            EmpiricalMeasure.replicated(
                car,
                np.concatenate([p[0] for p in parts]),
                np.concatenate([p[1] for p in parts]) / n,
                np.concatenate([p[2] for p in parts]),
                n,
                {"seed": seed, "draws": n, "label": f"projected-span-{name}"},
            )
        )
    return tuple(out)
