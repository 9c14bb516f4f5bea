"""Mollification of sampled maps, contact-defect rates and Hölder estimation.

Sampled maps live on one of three grids:

* ``torus``: ``m^d`` points of ``[0, 2pi)^d``, smoothed by periodic FFT
  convolution and differentiated spectrally;
* ``cube``: ``m^d`` points of ``[-w, w]^d``, smoothed with reflected
  boundaries (``scipy.ndimage``) and differentiated by central differences;
* ``sphere``: the vertices of a sphere mesh, smoothed by averaging over
  geodesic balls.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Callable, Dict, List, NamedTuple, Optional, Sequence, Union

import numpy as np
from scipy import ndimage
from scipy.spatial import cKDTree

from .exterior_forms import DifferentialForm, evaluate_form
from .gallery import ParametricMap
from .heis_core import koranyi_dist
from .sphere_mesh import SimplicialSphereMesh, loglog_slope


class ApproximationError(ValueError):
    pass


# ---------------------------------------------------------------------------
# kernels


def bump_profile(r: np.ndarray) -> np.ndarray:
    """``exp(-1/(1-r^2))`` on ``r < 1``, zero outside."""
    r = np.asarray(r, dtype=float)
    out = np.zeros_like(r)
    inside = r < 1.0
    out[inside] = np.exp(-1.0 / (1.0 - r[inside] ** 2))
    return out


def cosine_profile(r: np.ndarray) -> np.ndarray:
    r = np.asarray(r, dtype=float)
    return np.where(r < 1.0, 0.5 * (1.0 + np.cos(np.pi * np.minimum(r, 1.0))), 0.0)


KERNELS: Dict[str, Callable[[np.ndarray], np.ndarray]] = {
    "bump": bump_profile,
    "cosine": cosine_profile,
}


def _profile(kernel) -> Callable[[np.ndarray], np.ndarray]:
    if callable(kernel):
        return kernel
    try:
        return KERNELS[kernel]
    except KeyError:
        raise ApproximationError(f"unknown kernel {kernel!r}; known: {sorted(KERNELS)}") from None


# ---------------------------------------------------------------------------
# sampled maps


@dataclass
class SampledMap:
    domain: str
    values: np.ndarray
    spacing: float
    half_width: float = np.pi
    mesh: Optional[SimplicialSphereMesh] = field(default=None, repr=False)
    name: str = ""

    def __post_init__(self):
        v = np.asarray(self.values, dtype=float)
        if not np.all(np.isfinite(v)):
            raise ApproximationError("sampled values must be finite")
        if self.domain in ("torus", "cube"):
            if min(v.shape[:-1]) < 16:
                raise ApproximationError("grid resolution must be at least 16 per axis")
        elif self.domain == "sphere":
            if self.mesh is None or len(v) != len(self.mesh.vertices):
                raise ApproximationError("sphere samples need one value per mesh vertex")
        else:
            raise ApproximationError(f"unknown domain {self.domain!r}")
        self.values = v

    @property
    def dim(self) -> int:
        if self.domain == "sphere":
            return self.mesh.intrinsic_dim
        return self.values.ndim - 1

    @property
    def target_dim(self) -> int:
        return self.values.shape[-1]

    def grid(self) -> np.ndarray:
        """Parameter points with the grid shape, ``(..., d)``."""
        if self.domain == "sphere":
            return self.mesh.vertices
        m = self.values.shape[0]
        if self.domain == "torus":
            ax = np.arange(m) * self.spacing
        else:
            ax = np.linspace(-self.half_width, self.half_width, m)
        return np.stack(np.meshgrid(*([ax] * self.dim), indexing="ij"), axis=-1)

    def flat(self) -> np.ndarray:
        return self.values.reshape(-1, self.target_dim)

    def with_values(self, values: np.ndarray, name: str = "") -> "SampledMap":
        return SampledMap(self.domain, values, self.spacing, self.half_width, self.mesh,
                          name or self.name)

    def derivatives(self) -> np.ndarray:
        """Jacobian at grid points, shape ``(..., N, d)``."""
        if self.domain == "torus":
            m = self.values.shape[0]
            k = np.fft.fftfreq(m, d=1.0 / m)
            if m % 2 == 0:
                k[m // 2] = 0.0
            out = []
            for ax in range(self.dim):
                shape = [1] * (self.dim + 1)
                shape[ax] = m
                spec = np.fft.fft(self.values, axis=ax) * (1j * k.reshape(shape))
                out.append(np.real(np.fft.ifft(spec, axis=ax)))
            return np.stack(out, axis=-1)
        if self.domain == "cube":
            return np.stack([np.gradient(self.values, self.spacing, axis=ax)
                             for ax in range(self.dim)], axis=-1)
        raise ApproximationError("derivatives are only available on torus and cube grids")


def sample_on_torus(f, dim: int, resolution: int, name: str = "") -> SampledMap:
    h = 2 * np.pi / resolution
    ax = np.arange(resolution) * h
    pts = np.stack(np.meshgrid(*([ax] * dim), indexing="ij"), axis=-1)
    vals = np.asarray(f(pts.reshape(-1, dim)), dtype=float)
    return SampledMap("torus", vals.reshape(pts.shape[:-1] + (-1,)), h, np.pi, name=name or _name(f))


def sample_on_cube(f, dim: int, resolution: int, half_width: float = 1.0, name: str = "") -> SampledMap:
    ax = np.linspace(-half_width, half_width, resolution)
    pts = np.stack(np.meshgrid(*([ax] * dim), indexing="ij"), axis=-1)
    vals = np.asarray(f(pts.reshape(-1, dim)), dtype=float)
    return SampledMap("cube", vals.reshape(pts.shape[:-1] + (-1,)), ax[1] - ax[0], half_width,
                      name=name or _name(f))


def sample_on_sphere(f, mesh: SimplicialSphereMesh, name: str = "") -> SampledMap:
    vals = np.asarray(f(mesh.vertices), dtype=float)
    edges = mesh.faces(1)
    h = float(np.max(np.linalg.norm(mesh.vertices[edges[:, 0]] - mesh.vertices[edges[:, 1]], axis=1)))
    return SampledMap("sphere", vals, h, mesh=mesh, name=name or _name(f))


def _name(f) -> str:
    return getattr(f, "name", "") or getattr(f, "__name__", "")


def sample_map(pm: ParametricMap, resolution: int) -> SampledMap:
    """Sample a gallery map on the grid matching its domain."""
    kind = pm.domain.kind
    if kind in ("circle", "torus"):
        return sample_on_torus(pm, pm.domain.dim, resolution, pm.name)
    if kind == "cube":
        return sample_on_cube(pm, pm.domain.dim, resolution, pm.domain.size, pm.name)
    raise ApproximationError(f"no grid sampler for {kind!r} domains")


# ---------------------------------------------------------------------------
# mollification


def mollify(base: SampledMap, eps: float, kernel="bump") -> SampledMap:
    """Componentwise convolution with the unit-mass kernel rescaled to radius ``eps``."""
    prof = _profile(kernel)
    if not eps >= 2 * base.spacing:
        raise ApproximationError(
            f"eps={eps:g} is below twice the grid spacing {base.spacing:g}; kernel undersampled")
    if base.domain == "torus":
        m, d = base.values.shape[0], base.dim
        off = np.arange(m) * base.spacing
        off = np.minimum(off, 2 * np.pi - off)
        r2 = sum(np.meshgrid(*([off ** 2] * d), indexing="ij"))
        K = prof(np.sqrt(r2) / eps)
        K = K / K.sum()
        axes = tuple(range(d))
        spec = np.fft.fftn(base.values, axes=axes) * np.fft.fftn(K)[..., None]
        out = np.real(np.fft.ifftn(spec, axes=axes))
        return base.with_values(out)
    if base.domain == "cube":
        R = int(np.floor(eps / base.spacing))
        ax = np.arange(-R, R + 1) * base.spacing
        r = np.sqrt(sum(g ** 2 for g in np.meshgrid(*([ax] * base.dim), indexing="ij")))
        K = prof(r / eps)
        K = K / K.sum()
        out = np.stack([ndimage.convolve(base.values[..., c], K, mode="reflect")
                        for c in range(base.target_dim)], axis=-1)
        return base.with_values(out)
    if base.domain == "sphere":
        V = base.mesh.vertices
        tree = cKDTree(V)
        chord = 2.0 * np.sin(min(eps, np.pi) / 2.0)
        out = np.empty_like(base.values)
        for i, nbrs in enumerate(tree.query_ball_point(V, chord + 1e-12)):
            nbrs = np.asarray(nbrs)
            geo = np.arccos(np.clip(V[nbrs] @ V[i], -1.0, 1.0))
            w = prof(geo / eps)
            out[i] = w @ base.values[nbrs] / w.sum()
        return base.with_values(out)
    raise ApproximationError(f"unknown domain {base.domain!r}")


@dataclass
class MollifiedFamily:
    base: SampledMap
    kernel: str
    eps_list: List[float]
    maps: List[SampledMap]


def mollified_family(base: SampledMap, eps_list: Sequence[float], kernel="bump") -> MollifiedFamily:
    eps = [float(e) for e in eps_list]
    if not eps:
        raise ApproximationError("eps_list is empty")
    if any(b >= a for a, b in zip(eps, eps[1:])):
        raise ApproximationError("eps_list must be strictly decreasing")
    return MollifiedFamily(base, kernel if isinstance(kernel, str) else "custom", eps,
                           [mollify(base, e, kernel) for e in eps])


def sup_distance(a: SampledMap, b: SampledMap) -> float:
    return float(np.max(np.linalg.norm(a.flat() - b.flat(), axis=1)))


def pullback_norm(values: np.ndarray, jac: np.ndarray, form: DifferentialForm) -> np.ndarray:
    """Pointwise Euclidean norm of ``phi^* form`` from values ``(P, N)`` and Jacobians ``(P, N, d)``."""
    k, d = form.degree, jac.shape[-1]
    acc = np.zeros(len(values))
    for J in itertools.combinations(range(d), k):
        W = np.transpose(jac[:, :, list(J)], (0, 2, 1))
        acc += evaluate_form(form, values, W) ** 2
    return np.sqrt(acc)


def _interior_mask(sm: SampledMap, margin: float) -> np.ndarray:
    if sm.domain != "cube":
        return np.ones(sm.values.shape[:-1], dtype=bool)
    g = sm.grid()
    return np.all(np.abs(g) <= sm.half_width - margin + 1e-12, axis=-1)


class DefectRates(NamedTuple):
    eps: List[float]
    defects: Dict[str, List[float]]
    slopes: Dict[str, float]

    def rows(self):
        for name, vals in self.defects.items():
            for e, v in zip(self.eps, vals):
                yield e, v, name


def contact_defect_rates(family: MollifiedFamily, forms, floor: float = 1e-13) -> DefectRates:
    """Sup-norm of ``phi_eps^* form`` for each eps and its log-log slope in eps.

    ``forms`` is a list or a name -> form mapping.  On cube grids the sup is
    taken over points at least ``max(eps)`` from the boundary, where the
    reflected convolution equals the free-space one.  Slopes use the entries
    above ``floor``; fewer than two such entries give NaN.
    """
    if not family.eps_list:
        raise ApproximationError("empty eps_list")
    if not isinstance(forms, dict):
        forms = {f"form{i}": f for i, f in enumerate(forms)}
    mask = _interior_mask(family.base, max(family.eps_list) + family.base.spacing).reshape(-1)
    defects: Dict[str, List[float]] = {name: [] for name in forms}
    for sm in family.maps:
        vals = sm.flat()[mask]
        jac = sm.derivatives().reshape(-1, sm.target_dim, sm.dim)[mask]
        for name, form in forms.items():
            defects[name].append(float(np.max(pullback_norm(vals, jac, form))))
    slopes = {}
    for name, vals in defects.items():
        keep = [(e, v) for e, v in zip(family.eps_list, vals) if v > floor]
        slopes[name] = loglog_slope(*zip(*keep)) if len(keep) >= 2 else float("nan")
    return DefectRates(list(family.eps_list), defects, slopes)


# ---------------------------------------------------------------------------
# Hölder fits


class HolderFit(NamedTuple):
    exponent: float
    constant: float
    metric: str
    residual: float
    defined: bool = True
    pairs: int = 0

    def to_json(self) -> dict:
        return {"gamma": self.exponent, "C": self.constant, "metric": self.metric,
                "residual": self.residual, "defined": self.defined, "pairs": self.pairs}


def target_distance(a: np.ndarray, b: np.ndarray, metric: str) -> np.ndarray:
    if metric == "koranyi":
        return np.asarray(koranyi_dist(a, b))
    if metric == "euclidean":
        return np.linalg.norm(a - b, axis=-1)
    raise ApproximationError(f"unknown metric {metric!r}; use 'koranyi' or 'euclidean'")


def holder_fit(pm: ParametricMap, metric: str = "euclidean", pair_budget: int = 10_000, seed: int = 0,
               bins: int = 16, quantile: float = 0.99, r_span: float = 1e-3,
               r_max: Optional[float] = None) -> HolderFit:
    """Upper-envelope fit of ``log d(f(x), f(y))`` against ``log |x - y|``.

    Parameter gaps are log-uniform on ``[r_span * r_max, r_max]``; pairs are
    binned by gap, the ``quantile`` of log-distance is taken per bin and a
    line is fitted through the bin envelopes.  Returns the slope as exponent
    and ``exp(intercept)`` as constant.
    """
    if pair_budget < 1000:
        raise ApproximationError("pair_budget must be at least 1000")
    rng = np.random.default_rng(seed)
    r_max = pm.domain.max_offset() if r_max is None else float(r_max)
    r = np.exp(rng.uniform(np.log(r_span * r_max), np.log(r_max), pair_budget))
    x, y = pm.domain.pairs_at_distance(rng, r)
    gap = pm.domain.distance(x, y)
    d = target_distance(pm(x), pm(y), metric)
    ok = (gap > 0) & (d > 0)
    if not np.any(ok):
        return HolderFit(float("nan"), float("nan"), metric, float("nan"), False, int(pair_budget))
    lg, ld = np.log(gap[ok]), np.log(d[ok])
    edges = np.linspace(lg.min(), lg.max() + 1e-12, bins + 1)
    which = np.digitize(lg, edges) - 1
    cx, cy = [], []
    for b in range(bins):
        sel = which == b
        if np.count_nonzero(sel) >= 10:
            cx.append(np.mean(lg[sel]))
            cy.append(np.quantile(ld[sel], quantile))
    if len(cx) < 3:
        return HolderFit(float("nan"), float("nan"), metric, float("nan"), False, int(pair_budget))
    slope, icpt = np.polyfit(cx, cy, 1)
    resid = float(np.sqrt(np.mean((np.polyval([slope, icpt], cx) - np.array(cy)) ** 2)))
    return HolderFit(float(slope), float(np.exp(icpt)), metric, resid, True, int(np.count_nonzero(ok)))


# ---------------------------------------------------------------------------
# Gromov region


def _exact(x) -> Fraction:
    return x if isinstance(x, Fraction) else Fraction(repr(x)) if isinstance(x, float) else Fraction(x)


def gromov_value(k: int, gamma, theta) -> Fraction:
    """``2 gamma + theta (k - 1) - k`` in exact arithmetic on the decimal inputs."""
    if not isinstance(k, (int, np.integer)) or k < 1:
        raise ApproximationError("k must be an integer >= 1")
    g, t = _exact(gamma), _exact(theta)
    if not (Fraction(1, 2) < g <= 1):
        raise ApproximationError(f"gamma must lie in (1/2, 1], got {gamma}")
    if not t > 0:
        raise ApproximationError(f"theta must be positive, got {theta}")
    return 2 * g + t * (int(k) - 1) - int(k)


def gromov_region(k: int, gamma, theta) -> bool:
    """True iff ``(gamma, theta)`` lies in the no-injection region for R^k."""
    return gromov_value(k, gamma, theta) > 0
