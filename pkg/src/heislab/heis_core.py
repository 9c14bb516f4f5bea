"""The Heisenberg group H_n realised on R^{2n+1}.

Coordinates are ``(p_1, ..., p_{2n}, t)`` with ``z_j = p_{2j-1} + i p_{2j}``.
Every array function accepts stacked points of shape ``(..., 2n+1)`` and
broadcasts; the :class:`HeisenbergPoint` wrapper is a validated single point.

Conventions follow the contact form

    alpha = dt + 2 * sum_j (y_j dx_j - x_j dy_j),

whose kernel is spanned by ``X_j = d/dx_j - 2 y_j d/dt`` and
``Y_j = d/dy_j + 2 x_j d/dt``.  The group law compatible with it (and under
which the Koranyi distance is left-invariant) is

    (z, t) * (z', t') = (z + z', t + t' - 2 Im sum_j z_j conj(z'_j)).
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import NamedTuple, Union

import numpy as np


class HeisenbergError(ValueError):
    """Invalid Heisenberg-group input (dimension mismatch, bad parameter)."""


@dataclass(frozen=True)
class HeisenbergPoint:
    n: int
    coords: np.ndarray

    def __post_init__(self):
        c = np.asarray(self.coords, dtype=float)
        if self.n < 1:
            raise HeisenbergError(f"group index must be positive, got {self.n}")
        if c.shape != (2 * self.n + 1,):
            raise HeisenbergError(
                f"H_{self.n} point needs {2 * self.n + 1} coordinates, got shape {c.shape}")
        if not np.all(np.isfinite(c)):
            raise HeisenbergError("coordinates must be finite")
        c.setflags(write=False)
        object.__setattr__(self, "coords", c)

    @classmethod
    def of(cls, coords) -> "HeisenbergPoint":
        c = np.asarray(coords, dtype=float)
        if c.ndim != 1 or c.size % 2 == 0:
            raise HeisenbergError(f"need an odd-length coordinate vector, got shape {c.shape}")
        return cls((c.size - 1) // 2, c)

    @classmethod
    def origin(cls, n: int) -> "HeisenbergPoint":
        return cls(n, np.zeros(2 * n + 1))

    @property
    def z(self) -> np.ndarray:
        return self.coords[:-1]

    @property
    def t(self) -> float:
        return float(self.coords[-1])

    def __mul__(self, other: "HeisenbergPoint") -> "HeisenbergPoint":
        return group_mul(self, other)

    def __eq__(self, other):
        if not isinstance(other, HeisenbergPoint):
            return NotImplemented
        return self.n == other.n and np.array_equal(self.coords, other.coords)

    def __hash__(self):
        return hash((self.n, self.coords.tobytes()))


PointLike = Union[HeisenbergPoint, np.ndarray]


def _arr(p) -> np.ndarray:
    if isinstance(p, HeisenbergPoint):
        return p.coords
    a = np.asarray(p, dtype=float)
    if a.shape[-1] % 2 == 0:
        raise HeisenbergError(f"last axis must have odd length 2n+1, got {a.shape[-1]}")
    return a


def _wrap(result: np.ndarray, *inputs):
    if any(isinstance(p, HeisenbergPoint) for p in inputs):
        return HeisenbergPoint.of(result)
    return result


def _check_same(a: np.ndarray, b: np.ndarray) -> None:
    if a.shape[-1] != b.shape[-1]:
        raise HeisenbergError(
            f"points live in different groups: dims {a.shape[-1]} and {b.shape[-1]}")


def group_index(p) -> int:
    return (_arr(p).shape[-1] - 1) // 2


def symplectic_pairing(z: np.ndarray, w: np.ndarray) -> np.ndarray:
    """``sum_j (x_j v_j - y_j u_j)`` = Im sum_j conj(z_j) w_j for z=(x,y), w=(u,v)."""
    return np.sum(z[..., 0::2] * w[..., 1::2] - z[..., 1::2] * w[..., 0::2], axis=-1)


def group_mul(p: PointLike, q: PointLike):
    a, b = _arr(p), _arr(q)
    _check_same(a, b)
    z = a[..., :-1] + b[..., :-1]
    # Im(z conj z') = -symplectic_pairing(z, z')
    t = a[..., -1] + b[..., -1] + 2.0 * symplectic_pairing(a[..., :-1], b[..., :-1])
    return _wrap(np.concatenate([z, t[..., None]], axis=-1), p, q)


def group_inv(p: PointLike):
    return _wrap(-_arr(p), p)


def koranyi_dist(p: PointLike, q: PointLike, variant: str = "gauge"):
    """Koranyi distance.

    ``variant="gauge"`` (default) is ``(|dz|^4 + |dt + 2 D|^2)^{1/4}`` with
    ``|dz|`` the Euclidean norm of the horizontal difference and
    ``D = sum_j det[[p_{2j-1}-q_{2j-1}, q_{2j-1}], [p_{2j}-q_{2j}, q_{2j}]]``
    (evaluated against the midpoint, which gives the same value).
    ``variant="coordinatewise"`` replaces ``|dz|^4`` by ``sum_i |dp_i|^4``;
    that expression is not a metric (it violates the triangle inequality)
    and is only kept for comparison.
    """
    a, b = _arr(p), _arr(q)
    _check_same(a, b)
    dz = a[..., :-1] - b[..., :-1]
    if variant == "gauge":
        horiz = np.sum(dz * dz, axis=-1)
    elif variant == "coordinatewise":
        horiz = np.sqrt(np.sum(dz ** 4, axis=-1))
    else:
        raise HeisenbergError(f"unknown Koranyi variant {variant!r}")
    # pairing against the midpoint equals pairing against b and is exactly
    # antisymmetric in floating point, so d(p, q) == d(q, p) bitwise
    mid = 0.5 * (a[..., :-1] + b[..., :-1])
    vert = a[..., -1] - b[..., -1] + 2.0 * symplectic_pairing(dz, mid)
    # sqrt(hypot(0, t)) == sqrt(|t|) exactly
    out = np.sqrt(np.hypot(horiz, vert))
    return float(out) if np.ndim(out) == 0 else out


def koranyi_norm(p: PointLike):
    a = _arr(p)
    return koranyi_dist(a, np.zeros_like(a))


def dilation(r: float, p: PointLike):
    if not r > 0:
        raise HeisenbergError(f"dilation factor must be positive, got {r}")
    a = _arr(p).copy()
    a[..., :-1] *= r
    a[..., -1] *= r * r
    return _wrap(a, p)


def contact_form_at(p: PointLike) -> np.ndarray:
    """Components of alpha at ``p``: ``(2y_1, -2x_1, ..., 2y_n, -2x_n, 1)``."""
    a = _arr(p)
    out = np.empty_like(a)
    out[..., 0:-1:2] = 2.0 * a[..., 1:-1:2]
    out[..., 1:-1:2] = -2.0 * a[..., 0:-1:2]
    out[..., -1] = 1.0
    return out


@dataclass(frozen=True)
class HorizontalFrame:
    point: HeisenbergPoint
    vectors: np.ndarray  # (2n, 2n+1): X_1, Y_1, ..., X_n, Y_n


def horizontal_frame(p: PointLike) -> HorizontalFrame:
    pt = p if isinstance(p, HeisenbergPoint) else HeisenbergPoint.of(p)
    n = pt.n
    x, y = pt.coords[0:-1:2], pt.coords[1:-1:2]
    vecs = np.zeros((2 * n, 2 * n + 1))
    for j in range(n):
        vecs[2 * j, 2 * j] = 1.0
        vecs[2 * j, -1] = -2.0 * y[j]
        vecs[2 * j + 1, 2 * j + 1] = 1.0
        vecs[2 * j + 1, -1] = 2.0 * x[j]
    return HorizontalFrame(pt, vecs)


def vertical_field(n: int) -> np.ndarray:
    e = np.zeros(2 * n + 1)
    e[-1] = 1.0
    return e


def is_horizontal_velocity(p: PointLike, v, tol: float) -> bool:
    a = _arr(p)
    v = np.asarray(v, dtype=float)
    if v.shape != a.shape:
        raise HeisenbergError(f"velocity shape {v.shape} does not match point shape {a.shape}")
    if tol < 0:
        raise HeisenbergError("tol must be nonnegative")
    val = float(np.dot(contact_form_at(a), v))
    return abs(val) <= tol * (1.0 + float(np.linalg.norm(v)))


class ComparisonScan(NamedTuple):
    lower_ratio_max: float
    upper_ratio_max: float
    pairs_used: int


def uniform_ball(rng: np.random.Generator, count: int, dim: int, radius: float,
                 groups: int = 1) -> np.ndarray:
    """Uniform samples in the ``dim``-ball, shape ``(count, groups, dim)``.

    Drops two coordinates of a uniform point on S^{dim+1}; one draw per row,
    so a longer run extends a shorter one with the same seed.
    """
    g = rng.standard_normal((count, groups, dim + 2))
    g /= np.linalg.norm(g, axis=-1, keepdims=True)
    return radius * g[..., :dim]


def comparison_ratios(p: np.ndarray, q: np.ndarray):
    """Per-pair ratios bounded above by the two-sided metric comparison.

    Returns ``(lower, upper)`` arrays over the non-degenerate pairs:
    ``|p-q| / ((|p|+|q|+1) d_H)`` and ``d_H / ((|p|^.5+|q|^.5+1) |p-q|^.5)``.
    Raises if every pair is degenerate.
    """
    p, q = np.atleast_2d(_arr(p)), np.atleast_2d(_arr(q))
    _check_same(p, q)
    euc = np.linalg.norm(p - q, axis=-1)
    keep = euc > 0
    if not np.any(keep):
        raise HeisenbergError("comparison scan is empty: every pair is degenerate (p == q)")
    p, q, euc = p[keep], q[keep], euc[keep]
    dh = koranyi_dist(p, q)
    npn, nqn = np.linalg.norm(p, axis=-1), np.linalg.norm(q, axis=-1)
    lower = euc / ((npn + nqn + 1.0) * dh)
    upper = dh / ((np.sqrt(npn) + np.sqrt(nqn) + 1.0) * np.sqrt(euc))
    return lower, upper


def comparison_ratio_scan(sample_count: int, radius: float, seed: int, n: int = 1) -> ComparisonScan:
    if sample_count < 1:
        raise HeisenbergError("sample_count must be >= 1")
    if not radius > 0:
        raise HeisenbergError("radius must be positive")
    rng = np.random.default_rng(seed)
    pts = uniform_ball(rng, sample_count, 2 * n + 1, radius, groups=2)
    lower, upper = comparison_ratios(pts[:, 0], pts[:, 1])
    return ComparisonScan(float(lower.max()), float(upper.max()), int(lower.size))


def random_points(rng: np.random.Generator, count: int, n: int = 1, scale: float = 1.0) -> np.ndarray:
    return scale * rng.standard_normal((count, 2 * n + 1))
