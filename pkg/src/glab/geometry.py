"""Linear subspaces as orthonormal frames, Haar sampling and dimensional constants.

Batched routines take frames stacked as ``(n, d, k)`` arrays; the scalar
API (:class:`Subspace`, :func:`bracket`, ...) wraps them for single
subspaces.  No routine ever compares frames entrywise: two frames spanning
the same space are interchangeable everywhere.
"""

from dataclasses import dataclass
from functools import lru_cache
from itertools import combinations
from math import comb, factorial, gamma, pi

import numpy as np

from .errors import InconsistentFlagError, InvalidDimensionError

ORTHO_TOL = 1e-10
FLAG_TOL = 1e-8


@dataclass(frozen=True, eq=False)
class Subspace:
    """A linear subspace of R^d stored as a ``d x k`` orthonormal frame."""

    frame: np.ndarray

    def __post_init__(self):
        f = np.asarray(self.frame, dtype=float)
        if f.ndim != 2:
            raise InvalidDimensionError(f"frame must be 2-D, got shape {f.shape}")
        d, k = f.shape
        if d < 1 or k > d:
            raise InvalidDimensionError(f"invalid frame shape {f.shape}")
        if k and np.max(np.abs(f.T @ f - np.eye(k))) > ORTHO_TOL:
            raise InvalidDimensionError("frame columns are not orthonormal")
        object.__setattr__(self, "frame", f)

    @property
    def ambient_dim(self):
        return self.frame.shape[0]

    @property
    def sub_dim(self):
        return self.frame.shape[1]

    @classmethod
    def span(cls, *vectors):
        """Subspace spanned by the given vectors (assumed independent)."""
        a = np.column_stack([np.asarray(v, dtype=float) for v in vectors])
        return cls(orthonormalize(a))

    @classmethod
    def coordinate(cls, d, axes):
        return cls(np.eye(d)[:, list(axes)])

    def projector(self):
        return self.frame @ self.frame.T

    def project(self, x):
        return self.frame @ (self.frame.T @ np.asarray(x, dtype=float))

    def contains(self, x, tol=FLAG_TOL):
        x = np.asarray(x, dtype=float)
        return float(np.linalg.norm(x - self.project(x))) <= tol

    def same_as(self, other, tol=1e-10):
        """Basis-free equality test."""
        if self.frame.shape != other.frame.shape:
            return False
        if self.sub_dim == 0:
            return True
        return abs(bracket(self, other) - 1.0) <= tol

    def rotated(self, rotation):
        return Subspace(np.asarray(rotation) @ self.frame)

    def __repr__(self):
        return f"Subspace(d={self.ambient_dim}, k={self.sub_dim})"


@dataclass(frozen=True, eq=False)
class FlagElement:
    """A pair ``(u, L)`` with ``u`` a unit vector in the subspace ``L``."""

    direction: np.ndarray
    space: Subspace

    def __post_init__(self):
        u = np.asarray(self.direction, dtype=float)
        if abs(np.linalg.norm(u) - 1.0) > 1e-12:
            raise InconsistentFlagError("flag direction is not a unit vector")
        if not self.space.contains(u, tol=ORTHO_TOL):
            raise InconsistentFlagError("flag direction does not lie in its subspace")
        object.__setattr__(self, "direction", u)


# --- batched frame algebra -------------------------------------------------


def orthonormalize(a):
    """QR-orthonormalize the columns of ``a`` (shape ``(..., d, k)``).

    The triangular factor is normalized to a nonnegative diagonal, which makes
    the map from Gaussian arrays to frames equivariant and hence Haar.
    """
    a = np.asarray(a, dtype=float)
    q, r = np.linalg.qr(a)
    s = np.sign(np.diagonal(r, axis1=-2, axis2=-1))
    s = np.where(s == 0, 1.0, s)
    return q * s[..., None, :]


def haar_frames(rng, n, d, k):
    """``n`` independent Haar-distributed frames of G(d, k), shape ``(n, d, k)``."""
    _check_dims(d, k)
    return orthonormalize(rng.standard_normal((n, d, k)))


def haar_subspace(d, k, rng):
    """One Haar-distributed element of G(d, k)."""
    return Subspace(haar_frames(rng, 1, d, k)[0])


def uniform_sphere(rng, n, d):
    x = rng.standard_normal((n, d))
    return x / np.linalg.norm(x, axis=1, keepdims=True)


def random_rotation(d, rng):
    """Haar-distributed element of SO(d)."""
    q = orthonormalize(rng.standard_normal((d, d)))
    if np.linalg.det(q) < 0:
        q[:, 0] = -q[:, 0]
    return q


def complement_frames(frames):
    """Orthogonal complements of stacked frames, ``(n, d, k) -> (n, d, d-k)``."""
    frames = np.asarray(frames, dtype=float)
    d, k = frames.shape[-2:]
    if k == 0:
        return np.broadcast_to(np.eye(d), frames.shape[:-2] + (d, d)).copy()
    q, _ = np.linalg.qr(frames, mode="complete")
    return q[..., :, k:]


def slice_frames(u, frames, tol=FLAG_TOL):
    """Frames of ``u^perp ∩ L`` for stacked flags, ``(n, d, k) -> (n, d, k-1)``.

    Raises :class:`InconsistentFlagError` if some ``u`` is not in its ``L``.
    """
    u = np.asarray(u, dtype=float)
    frames = np.asarray(frames, dtype=float)
    c = np.einsum("...dk,...d->...k", frames, u)
    resid = np.linalg.norm(u - np.einsum("...dk,...k->...d", frames, c), axis=-1)
    if np.any(resid > tol):
        bad = int(np.argmax(np.ravel(resid > tol)))
        raise InconsistentFlagError(f"direction not contained in subspace (sample {bad})")
    c = c / np.linalg.norm(c, axis=-1, keepdims=True)
    return frames @ _householder_complement(c)


def _householder_complement(c):
    """Orthonormal basis of ``c^perp`` in R^k for unit vectors ``c`` (``(..., k)``)."""
    k = c.shape[-1]
    s = np.where(c[..., :1] >= 0, 1.0, -1.0)
    v = c.copy()
    v[..., :1] += s
    h = np.eye(k) - 2.0 * v[..., :, None] * v[..., None, :] / np.sum(v * v, axis=-1)[..., None, None]
    return h[..., :, 1:]


def extend_frames(rng, frames, k):
    """Append Haar directions from ``M^perp`` to reach dimension ``k``."""
    frames = np.asarray(frames, dtype=float)
    n, d, m = frames.shape
    if not m <= k <= d:
        raise InvalidDimensionError(f"cannot extend a {m}-space to dimension {k} in R^{d}")
    if k == m:
        return frames.copy()
    g = rng.standard_normal((n, d, k - m))
    g = g - frames @ (np.swapaxes(frames, 1, 2) @ g)
    return np.concatenate([frames, orthonormalize(g)], axis=2)


def haar_inside(rng, frames, j):
    """Haar j-subspaces of each stacked k-space, returned as ambient frames."""
    frames = np.asarray(frames, dtype=float)
    n, d, k = frames.shape
    if not 1 <= j <= k:
        raise InvalidDimensionError(f"cannot pick a {j}-subspace inside a {k}-space")
    return frames @ orthonormalize(rng.standard_normal((n, k, j)))


def uniform_in(rng, frames):
    """One uniform unit vector in each stacked subspace, ``(n, d)``."""
    frames = np.asarray(frames, dtype=float)
    n, d, k = frames.shape
    x = rng.standard_normal((n, k))
    x /= np.linalg.norm(x, axis=1, keepdims=True)
    return np.einsum("ndk,nk->nd", frames, x)


def brackets(frames_a, frames_b):
    """Aligned brackets ``|det(A^T B)|`` for stacked frames of equal dimension."""
    a = np.asarray(frames_a, dtype=float)
    b = np.asarray(frames_b, dtype=float)
    if a.shape[-2:] != b.shape[-2:]:
        raise InvalidDimensionError(f"bracket of frames {a.shape[-2:]} and {b.shape[-2:]}")
    m = np.swapaxes(a, -1, -2) @ b
    if m.shape[-1] == 1:
        val = np.abs(m[..., 0, 0])
    else:
        val = np.abs(np.linalg.det(m))
    return np.minimum(val, 1.0)


@lru_cache(maxsize=None)
def _row_subsets(d, k):
    return np.array(list(combinations(range(d), k)), dtype=int).reshape(-1, k)


def plucker(frames):
    """Plücker coordinates (all k x k row minors), shape ``(..., C(d, k))``.

    For orthonormal frames these are unit vectors, and the bracket of two
    subspaces is the absolute inner product of their coordinates.
    """
    f = np.asarray(frames, dtype=float)
    d, k = f.shape[-2:]
    if k == 1:
        return f[..., 0]
    idx = _row_subsets(d, k)
    return np.linalg.det(f[..., idx, :])


def bracket_matrix(frames_a, frames_b):
    """All pairwise brackets between two stacks of frames, ``(na, nb)``."""
    return np.minimum(np.abs(plucker(frames_a) @ plucker(frames_b).T), 1.0)


def normals_from_rows(a):
    """Generalized cross product of the ``m-1`` rows of ``a`` (``(..., m-1, m)``).

    The result is orthogonal to every row and its norm is the
    ``(m-1)``-volume of the parallelotope they span.
    """
    a = np.asarray(a, dtype=float)
    m = a.shape[-1]
    if m == 2:
        return np.stack([a[..., 0, 1], -a[..., 0, 0]], axis=-1)
    if m == 3:
        return np.cross(a[..., 0, :], a[..., 1, :])
    cols = [np.delete(np.arange(m), i) for i in range(m)]
    return np.stack(
        [(-1) ** i * np.linalg.det(a[..., :, cols[i]]) for i in range(m)], axis=-1
    )


def gram_volume(vectors):
    """Volume spanned by the rows of ``vectors`` (``(..., j, d)``), via the Gram determinant."""
    v = np.asarray(vectors, dtype=float)
    g = v @ np.swapaxes(v, -1, -2)
    return np.sqrt(np.maximum(np.linalg.det(g), 0.0))


# --- scalar API --------------------------------------------------------------


def bracket(L, M):
    """``<L, M>``: absolute determinant of the projection between equal-dimension subspaces."""
    if L.ambient_dim != M.ambient_dim or L.sub_dim != M.sub_dim or L.sub_dim < 1:
        raise InvalidDimensionError(
            f"bracket needs equal dimensions >= 1, got {L.frame.shape} and {M.frame.shape}"
        )
    return float(brackets(L.frame, M.frame))


def complement(L):
    """The orthogonal complement ``L^perp``."""
    return Subspace(complement_frames(L.frame))


def slice_subspace(u, L):
    """``u^perp ∩ L`` for a unit vector ``u`` in ``L``."""
    if L.sub_dim < 1:
        raise InvalidDimensionError("cannot slice a 0-dimensional subspace")
    u = np.asarray(u, dtype=float)
    return Subspace(slice_frames(u / np.linalg.norm(u), L.frame))


def extend_uniform(M, k, rng):
    """A Haar-distributed k-subspace containing ``M``."""
    return Subspace(extend_frames(rng, M.frame[None], k)[0])


def det_j(*vectors):
    """j-volume of the parallelepiped spanned by the vectors (0 when dependent)."""
    return float(gram_volume(np.array(vectors, dtype=float)))


def _check_dims(d, k):
    if d < 1 or not 1 <= k <= d:
        raise InvalidDimensionError(f"need 1 <= k <= d, got d={d}, k={k}")


# --- constants ---------------------------------------------------------------


def kappa(i):
    """Volume of the unit ball in R^i."""
    return pi ** (i / 2) / gamma(i / 2 + 1)


def c_const(k, m, l, n):
    """``(k! kappa_k m! kappa_m) / (l! kappa_l n! kappa_n)``."""
    num = factorial(k) * kappa(k) * factorial(m) * kappa(m)
    return num / (factorial(l) * kappa(l) * factorial(n) * kappa(n))


def rho(d, j):
    """Mass ratio between the Grassmann measure and the Haar-weighted projection function."""
    return c_const(j + 1, d - j, d, 1) / c_const(j, d - j, d, 0)


def ball_intrinsic_volume(n, j, r=1.0):
    """``V_j`` of an n-dimensional ball of radius r."""
    if j > n:
        return 0.0
    return comb(n, j) * kappa(n) / kappa(n - j) * r**j


@dataclass(frozen=True)
class DimConstants:
    d: int
    kappa: tuple

    @classmethod
    def for_dim(cls, d):
        if d < 2:
            raise InvalidDimensionError("constants need d >= 2")
        return cls(d, tuple(kappa(i) for i in range(d + 1)))

    @staticmethod
    def c(k, m, l, n):
        return c_const(k, m, l, n)

    def rho(self, j):
        return rho(self.d, j)


def constants(d):
    return DimConstants.for_dim(d)
