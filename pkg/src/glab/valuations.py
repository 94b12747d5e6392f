"""Even translation-invariant valuations and their Klain functions."""

from dataclasses import dataclass
from math import fsum

import numpy as np

from .bodies import (
    Ball,
    intrinsic_volume,
    nested_projection_values,
    projection_values,
    unit_cube_in,
)
from .descriptors import grassmann_measure
from .errors import InvalidDimensionError, UnsupportedBodyError
from .geometry import Subspace, haar_frames, kappa, plucker, rho
from .measures import compare_values, integrate
from .streams import chunked, substream
from .transforms import cosine_fn


@dataclass(eq=False)
class Valuation:
    """A j-homogeneous even valuation.

    ``evaluate(K)`` returns ``(value, se)``.  ``klain_fn`` (if known in closed
    form) maps stacked frames of G(d, j) to Klain values, and
    ``projected_fn(K, frames)`` evaluates the valuation on the projections
    ``K|L`` for stacked frames L.
    """

    evaluate: object
    degree: int
    label: str
    klain_fn: object = None
    projected_fn: object = None
    even: bool = True

    def __call__(self, K):
        return self.evaluate(K)

    def klain_values(self, frames):
        if self.klain_fn is not None:
            return np.asarray(self.klain_fn(frames), dtype=float)
        return np.array([self(unit_cube_in(Subspace(f)))[0] for f in frames])

    def projected_values(self, K, frames):
        if self.projected_fn is None:
            raise UnsupportedBodyError(f"valuation {self.label} cannot be evaluated on projections")
        return self.projected_fn(K, frames)


def intrinsic_valuation(j):
    """The intrinsic volume ``V_j``; exact for zonotopes, balls and small polytopes."""
    if j < 1:
        raise InvalidDimensionError("intrinsic valuation degree must be at least 1")
    return Valuation(
        lambda K: (intrinsic_volume(K, j), 0.0),
        j,
        f"V_{j}",
        klain_fn=lambda frames: np.ones(len(frames)),
        projected_fn=lambda K, frames: projection_values(K, frames, j),
    )


def crofton_valuation(f, n_inner=256, seed=0):
    """``K -> ∫ V_j(K|N) f(N) nu_j(dN)`` with the integral over a fixed Haar sample.

    The fixed inner sample makes the Crofton measure an explicit atomic
    measure, so the Klain function ``Σ c_t <L, N_t>`` is exact and the
    valuation can be evaluated on projections without further sampling.
    """
    d, j = f.d, f.k
    N = haar_frames(substream(seed, "crofton", d, j), n_inner, d, j)
    fvals = f(N)
    c = fvals / n_inner
    pn = plucker(N)

    def evaluate(K):
        v = fvals * projection_values(K, N)
        if len(v) < 2:
            return float(v.mean()), 0.0
        return float(v.mean()), float(v.std(ddof=1) / np.sqrt(len(v)))

    def klain_fn(frames):
        return np.minimum(np.abs(plucker(frames) @ pn.T), 1.0) @ c

    def projected_fn(K, frames):
        return nested_projection_values(K, frames, N) @ c

    val = Valuation(evaluate, j, f"crofton[{f.label}]", klain_fn, projected_fn)
    val.inner_frames = N
    val.inner_weights = c
    return val


def gamma_valuation(f, cfg):
    """``K -> ∫ f dgamma_j(K)`` using the sampled Grassmann measure."""
    if f.k != cfg.j:
        raise InvalidDimensionError("function degree must match the descriptor degree")
    return Valuation(lambda K: integrate(grassmann_measure(K, cfg), f), cfg.j, f"gamma[{f.label}]")


def klain(phi, L, body="cube"):
    """Klain function value: ``phi`` on a j-body in L with ``V_j = 1``.

    ``body`` selects the unit cube spanned by the frame (default) or the
    j-ball of unit volume in L.  Returns ``(value, se)``.
    """
    if L.sub_dim != phi.degree:
        raise InvalidDimensionError(f"Klain function of degree {phi.degree} at a {L.sub_dim}-space")
    if body == "cube":
        K = unit_cube_in(L)
    elif body == "ball":
        j = L.sub_dim
        K = Ball(kappa(j) ** (-1.0 / j), L.ambient_dim, L.frame)
    else:
        raise ValueError(f"unknown Klain body {body!r}")
    out = phi(K)
    return out if isinstance(out, tuple) else (float(out), 0.0)


def klain_reconstruct(phi, rho_measure):
    """Klain reconstruction ``∫ K_j phi dρ_(j)`` against a projection generating measure."""
    if len(rho_measure) == 0:
        return 0.0
    return fsum((rho_measure.weights * phi.klain_values(rho_measure.points)).tolist())


def verify_klain_cosine(f, probes, cfg, n_cosine, seed=0, z_threshold=3.0, body="cube"):
    """Compare ``K_j phi(L')`` with ``C_j f(L')`` for ``phi = gamma_valuation(f)`` over probe spaces.

    ``probes`` is a sequence of Subspaces.  Candidates audited: 1 and rho(d, j).
    """
    phi = gamma_valuation(f, cfg)
    lhs, lhs_se, rhs, rhs_se = [], [], [], []
    for i, L in enumerate(probes):
        v, s = klain(phi, L, body)
        c, cs = cosine_fn(f, L, n_cosine, substream(seed, "cosine", i))
        lhs.append(v)
        lhs_se.append(s)
        rhs.append(c)
        rhs_se.append(cs)
    names = [f"L'[{i}]" for i in range(len(probes))]
    return compare_values(names, lhs, lhs_se, rhs, rhs_se, z_threshold, {"rho": rho(f.d, f.k)})


def valuation_chain_sides(valuations, K, cfg, n_rhs, seed=0):
    """Both sides of ``∫ K_j phi dgamma_j(K) = ∫ phi(K|L) nu_{j+1}(dL)`` for each valuation.

    Returns ``(lhs, lhs_se, rhs, rhs_se)`` arrays indexed by valuation.
    """
    d = K.dim
    g = grassmann_measure(K, cfg)
    klains = np.column_stack([phi.klain_values(g.points) for phi in valuations]) if len(g) else None
    lhs, lhs_se = integrate(g, lambda _: klains) if len(g) else (np.zeros(len(valuations)),) * 2

    def job(rng, start, count):
        L = haar_frames(rng, count, d, cfg.j + 1)
        return np.column_stack([phi.projected_values(K, L) for phi in valuations])

    vals = np.concatenate(chunked(n_rhs, seed, ("thm31-rhs", d, cfg.j), job))
    rhs = vals.mean(axis=0)
    rhs_se = vals.std(axis=0, ddof=1) / np.sqrt(n_rhs) if n_rhs > 1 else np.zeros(len(valuations))
    return np.atleast_1d(lhs), np.atleast_1d(lhs_se), rhs, rhs_se


def verify_valuation_chain(valuations, K, cfg, n_rhs, seed=0, z_threshold=3.0):
    if not isinstance(valuations, (list, tuple)):
        valuations = [valuations]
    a, sa, b, sb = valuation_chain_sides(valuations, K, cfg, n_rhs, seed)
    names = [phi.label for phi in valuations]
    return compare_values(names, a, sa, b, sb, z_threshold, {"rho": rho(K.dim, cfg.j)})


__all__ = [
    "Valuation",
    "crofton_valuation",
    "gamma_valuation",
    "intrinsic_valuation",
    "klain",
    "klain_reconstruct",
    "valuation_chain_sides",
    "verify_klain_cosine",
    "verify_valuation_chain",
]
