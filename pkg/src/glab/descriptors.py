"""Body descriptors on flag spaces, Grassmannians and the sphere.

Everything is built from the defining projection mean: Haar draws of
subspaces E with the exact area measure of ``K|E`` computed inside E.  None
of the descriptors is derived from an identity that the harness later tests.
"""

import logging
from dataclasses import dataclass

import numpy as np

from .bodies import (
    RANK_TOL,
    Zonotope,
    projected_area_samples,
    projection_values,
    subsets,
    top_area_atoms,
)
from .errors import InvalidDimensionError
from .geometry import complement_frames, gram_volume, haar_frames, orthonormalize, slice_frames
from .measures import Carrier, EmpiricalMeasure
from .streams import chunked

log = logging.getLogger("glab")


@dataclass(frozen=True)
class DescriptorConfig:
    """Degree ``j``, number of outer Haar draws, root seed.

    ``ball_pairs`` is the number of random antipodal pairs used per draw when
    the inner area measure is a uniform (ball) measure.
    """

    j: int
    n_outer: int
    seed: int = 0
    ball_pairs: int = 1

    def __post_init__(self):
        if self.j < 1:
            raise InvalidDimensionError("degree j must be at least 1")
        if self.n_outer < 1:
            raise InvalidDimensionError("need at least one outer draw")
        if self.ball_pairs < 1:
            raise InvalidDimensionError("need at least one pair per draw")

    def check(self, d, top=None):
        top = d - 1 if top is None else top
        if d < 2 or not 1 <= self.j <= top:
            raise InvalidDimensionError(f"degree j={self.j} outside 1..{top} for d={d}")


def _top_atom_chunks(K, cfg, tag):
    """Per chunk: (E frames, TopAtoms, first draw index)."""
    d, m = K.dim, cfg.j + 1

    def job(rng, start, count):
        E = haar_frames(rng, count, d, m)
        return E, top_area_atoms(K, E, rng, cfg.ball_pairs), start

    return chunked(cfg.n_outer, cfg.seed, ("flag", tag, d, cfg.j), job)


def _assemble(carrier, parts, cfg, label):
    if not parts or sum(len(p[1]) for p in parts) == 0:
        return EmpiricalMeasure.empty(carrier, _meta(cfg, label))
    pts = np.concatenate([p[0] for p in parts])
    w = np.concatenate([p[1] for p in parts]) / cfg.n_outer
    draws = np.concatenate([p[2] for p in parts])
    return EmpiricalMeasure.replicated(carrier, pts, w, draws, cfg.n_outer, _meta(cfg, label))


def _meta(cfg, label):
    return {"label": label, "seed": cfg.seed, "draws": cfg.n_outer, "j": cfg.j}


def flag_measure(K, cfg):
    """Flag measure on F(d, j+1): flags (u, E) weighted by the area measure of K|E in E."""
    d = K.dim
    cfg.check(d)
    parts = []
    for E, at, start in _top_atom_chunks(K, cfg, "flag"):
        Ed = E[at.draw]
        u = np.einsum("ndm,nm->nd", Ed, at.dirs)
        w = at.weights
        draw = at.draw + start
        if at.paired:
            u, Ed = np.concatenate([u, -u]), np.concatenate([Ed, Ed])
            w, draw = np.concatenate([w, w]), np.concatenate([draw, draw])
        parts.append((np.concatenate([u[:, :, None], Ed], axis=2), w, draw))
    return _assemble(Carrier.flag(d, cfg.j + 1), parts, cfg, "flag")


def flag_to_slice(points):
    """The map ``(u, E) -> u^perp ∩ E`` on stacked flag points."""
    return slice_frames(points[:, :, 0], points[:, :, 1:])


def flag_to_space(points):
    return points[:, :, 1:].copy()


def flag_to_direction(points):
    return points[:, :, 0].copy()


def grassmann_measure(K, cfg):
    """Grassmann measure on G(d, j): image of the flag measure under the slice map.

    Antipodal atom pairs have the same slice and are merged into one sample of
    double weight, so the total mass equals the flag-measure mass.
    """
    d = K.dim
    cfg.check(d)
    parts = []
    for E, at, start in _top_atom_chunks(K, cfg, "flag"):
        Ed = E[at.draw]
        u = np.einsum("ndm,nm->nd", Ed, at.dirs)
        w = 2 * at.weights if at.paired else at.weights
        parts.append((slice_frames(u, Ed), w, at.draw + start))
    return _assemble(Carrier.grassmann(d, cfg.j), parts, cfg, "gamma")


def tilde_gamma(K, cfg):
    """Image of the flag measure under ``(u, E) -> E`` (one merged sample per draw)."""
    d = K.dim
    cfg.check(d)
    parts = []
    for E, at, start in _top_atom_chunks(K, cfg, "flag"):
        w = 2 * at.weights if at.paired else at.weights
        tot = np.bincount(at.draw, weights=w, minlength=len(E))
        keep = tot > 0
        parts.append((E[keep], tot[keep], np.flatnonzero(keep) + start))
    return _assemble(Carrier.grassmann(d, cfg.j + 1), parts, cfg, "tilde-gamma")


def projection_generating_measure(Z, j):
    """Exact atoms ``2^j det_j(g_S)`` at ``lin(g_S)`` over the j-subsets of generators."""
    if not isinstance(Z, Zonotope):
        raise InvalidDimensionError("projection generating measures are implemented for zonotopes")
    d = Z.dim
    if not 1 <= j <= d:
        raise InvalidDimensionError(f"degree j={j} outside 1..{d}")
    g = Z.generators
    idx = subsets(g.shape[0], j)
    v = g[idx]
    vol = gram_volume(v)
    scale = np.prod(np.linalg.norm(g, axis=1)[idx], axis=1)
    keep = vol > RANK_TOL * scale
    frames = orthonormalize(np.swapaxes(v[keep], 1, 2))
    return EmpiricalMeasure.atoms(
        Carrier.grassmann(d, j), frames, 2.0**j * vol[keep], {"label": "rho_j", "j": j}
    )


def direction_measure(K, cfg):
    """Direction measure on G(d, d-j-1): weight ``2 V_j(K|L)`` at ``L^perp``, L Haar in G(d, j+1)."""
    d = K.dim
    cfg.check(d, d - 2)

    def job(rng, start, count):
        L = haar_frames(rng, count, d, cfg.j + 1)
        return complement_frames(L), 2 * projection_values(K, L, cfg.j), np.arange(start, start + count)

    parts = chunked(cfg.n_outer, cfg.seed, ("direction", d, cfg.j), job)
    return _assemble(Carrier.grassmann(d, d - cfg.j - 1), parts, cfg, "direction")


def direction_space_measure(K, cfg):
    """The direction measure pushed through the complement map: weight ``2 V_j(K|L)`` at L."""
    d = K.dim
    cfg.check(d, d - 2)

    def job(rng, start, count):
        L = haar_frames(rng, count, d, cfg.j + 1)
        return L, 2 * projection_values(K, L, cfg.j), np.arange(start, start + count)

    parts = chunked(cfg.n_outer, cfg.seed, ("direction", d, cfg.j), job)
    return _assemble(Carrier.grassmann(d, cfg.j + 1), parts, cfg, "direction-perp")


def projection_weighted_haar(K, cfg):
    """Haar measure on G(d, j) with density ``V_j(K|L)``."""
    d = K.dim
    cfg.check(d)

    def job(rng, start, count):
        L = haar_frames(rng, count, d, cfg.j)
        return L, projection_values(K, L), np.arange(start, start + count)

    parts = chunked(cfg.n_outer, cfg.seed, ("weighted-haar", d, cfg.j), job)
    return _assemble(Carrier.grassmann(d, cfg.j), parts, cfg, "weighted-haar")


def projection_average_measure(K, j, k, cfg, intrinsic=False):
    """Projection mean ``∫ Psi_j(K|L, .) nu_k(dL)`` as a sphere measure.

    By default the area measure of the flat body ``K|L`` is taken in R^d; with
    ``intrinsic`` it is computed inside L.
    """
    d = K.dim
    if not 1 <= j < k <= d - 1 and not (intrinsic and 1 <= j < k <= d):
        raise InvalidDimensionError(f"need 1 <= j < k <= d-1, got j={j}, k={k}, d={d}")

    def job(rng, start, count):
        L = haar_frames(rng, count, d, k)
        s = projected_area_samples(K, L, j, rng, cfg.ball_pairs, intrinsic)
        return s.dirs, s.weights, s.draw + start

    tag = "proj-avg-in" if intrinsic else "proj-avg"
    parts = chunked(cfg.n_outer, cfg.seed, (tag, d, j, k), job)
    return _assemble(Carrier.sphere(d), parts, cfg, tag)
