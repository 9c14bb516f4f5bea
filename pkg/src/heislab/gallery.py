"""Concrete maps into H_n, R^N and S^2 used as witnesses and test inputs.

Each :class:`ParametricMap` carries a parameter :class:`Domain`, an
evaluation procedure on stacked parameters ``(M, d) -> (M, N)``, an optional
exact Jacobian and declared regularity tags (Hölder exponents per metric).
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Dict, Optional

import numpy as np

from .exterior_forms import Polynomial, SmoothMap, coordinates
from .heis_core import contact_form_at


class GalleryError(ValueError):
    pass


# ---------------------------------------------------------------------------
# parameter domains


@dataclass(frozen=True)
class Domain:
    """Parameter domain.

    kinds: ``circle`` (angle in [0, 2pi)), ``torus`` ([0, 2pi)^dim),
    ``interval`` ([lo, hi]), ``cube`` ([-size, size]^dim), ``ball`` (radius
    ``size``) and ``sphere`` (unit vectors in R^{dim+1}).
    """

    kind: str
    dim: int
    size: float = 1.0
    lo: float = 0.0

    @property
    def param_dim(self) -> int:
        return self.dim + 1 if self.kind == "sphere" else self.dim

    @property
    def scale(self) -> float:
        if self.kind in ("circle", "torus"):
            return np.pi
        if self.kind == "interval":
            return self.size - self.lo
        if self.kind == "sphere":
            return np.pi
        return 2.0 * self.size

    def sample(self, rng: np.random.Generator, count: int) -> np.ndarray:
        k, d = self.kind, self.dim
        if k in ("circle", "torus"):
            return rng.uniform(0.0, 2 * np.pi, (count, d))
        if k == "interval":
            return rng.uniform(self.lo, self.size, (count, 1))
        if k == "cube":
            return rng.uniform(-self.size, self.size, (count, d))
        if k == "ball":
            g = rng.standard_normal((count, d + 2))
            g /= np.linalg.norm(g, axis=1, keepdims=True)
            return self.size * g[:, :d]
        if k == "sphere":
            g = rng.standard_normal((count, d + 1))
            return g / np.linalg.norm(g, axis=1, keepdims=True)
        raise GalleryError(f"unknown domain kind {k!r}")

    def pairs_at_distance(self, rng: np.random.Generator, r: np.ndarray):
        """Random pairs ``(x, y)`` inside the domain with parameter distance ``r``."""
        r = np.asarray(r, dtype=float)
        m, k, d = len(r), self.kind, self.dim
        if k in ("circle", "torus"):
            x = self.sample(rng, m)
            u = _unit(rng, m, d)
            return x, np.mod(x + r[:, None] * u, 2 * np.pi)
        if k == "interval":
            x = rng.uniform(self.lo, self.size - r)[:, None]
            return x, x + r[:, None]
        if k == "cube":
            u = _unit(rng, m, d)
            step = r[:, None] * u
            lo = -self.size + np.maximum(0.0, -step)
            hi = self.size - np.maximum(0.0, step)
            x = lo + (hi - lo) * rng.random((m, d))
            return x, x + step
        if k == "ball":
            u = _unit(rng, m, d)
            x = self.sample(rng, m) * ((self.size - r) / self.size)[:, None]
            return x, x + r[:, None] * u
        if k == "sphere":
            x = self.sample(rng, m)
            w = rng.standard_normal(x.shape)
            w -= np.sum(w * x, axis=1, keepdims=True) * x
            w /= np.linalg.norm(w, axis=1, keepdims=True)
            return x, np.cos(r)[:, None] * x + np.sin(r)[:, None] * w
        raise GalleryError(f"unknown domain kind {k!r}")

    def distance(self, x: np.ndarray, y: np.ndarray) -> np.ndarray:
        if self.kind in ("circle", "torus"):
            dd = np.abs(x - y) % (2 * np.pi)
            dd = np.minimum(dd, 2 * np.pi - dd)
            return np.linalg.norm(dd, axis=-1)
        if self.kind == "sphere":
            return np.arccos(np.clip(np.sum(x * y, axis=-1), -1.0, 1.0))
        return np.linalg.norm(x - y, axis=-1)

    def max_offset(self) -> float:
        if self.kind in ("circle", "torus", "sphere"):
            return 1.0
        if self.kind == "interval":
            return 0.5 * (self.size - self.lo)
        return 0.5 * self.size


def _unit(rng, m, d):
    u = rng.standard_normal((m, d))
    return u / np.linalg.norm(u, axis=1, keepdims=True)


# ---------------------------------------------------------------------------
# maps


@dataclass
class ParametricMap:
    name: str
    domain: Domain
    func: Callable[[np.ndarray], np.ndarray]
    target_dim: int
    jac: Optional[Callable[[np.ndarray], np.ndarray]] = None
    tags: Dict[str, float] = field(default_factory=dict)
    target: str = "R"
    horizontal: bool = False
    n: int = 1
    smooth: Optional[SmoothMap] = field(default=None, repr=False)
    description: str = ""

    def __call__(self, params) -> np.ndarray:
        p = np.asarray(params, dtype=float)
        single = p.ndim == 1 and self.domain.param_dim > 1 or p.ndim == 0
        p = p.reshape(-1, self.domain.param_dim)
        out = np.asarray(self.func(p), dtype=float).reshape(len(p), self.target_dim)
        return out[0] if single else out

    def jacobian(self, params, h: float = 1e-6) -> np.ndarray:
        """``(M, N, d)`` derivative in the parameters (exact when available)."""
        p = np.asarray(params, dtype=float).reshape(-1, self.domain.param_dim)
        if self.jac is not None:
            return np.asarray(self.jac(p), dtype=float).reshape(len(p), self.target_dim, -1)
        d = self.domain.param_dim
        out = np.empty((len(p), self.target_dim, d))
        for i in range(d):
            e = np.zeros(d)
            e[i] = h
            out[:, :, i] = (self.func(p + e) - self.func(p - e)) / (2 * h)
        return out

    def as_smooth_map(self) -> SmoothMap:
        """A :class:`SmoothMap` on the ambient space of the domain.

        Circle parameters become points of R^2 through the angle; sphere, cube
        and ball maps are already defined on ambient coordinates.
        """
        if self.smooth is not None:
            return self.smooth
        if self.domain.kind == "circle":
            me = self

            def ev(x):
                return me.func(np.arctan2(x[:, 1], x[:, 0])[:, None] % (2 * np.pi))

            def jac(x):
                s = np.arctan2(x[:, 1], x[:, 0])[:, None] % (2 * np.pi)
                r2 = np.sum(x * x, axis=1)
                ds = np.stack([-x[:, 1] / r2, x[:, 0] / r2], axis=1)  # (M, 2)
                return me.jacobian(s)[:, :, :1] * ds[:, None, :]

            return SmoothMap(2, self.target_dim, ev, jac, name=self.name)
        return SmoothMap(self.domain.param_dim, self.target_dim, self.func,
                         self.jac, name=self.name)

    def contact_defect(self, params) -> np.ndarray:
        """``alpha(dphi(e_i))`` for each parameter direction, shape ``(M, d)``."""
        p = np.asarray(params, dtype=float).reshape(-1, self.domain.param_dim)
        vals = self(p)
        J = self.jacobian(p)
        return np.einsum("mn,mnd->md", contact_form_at(vals), J)

    def singular_values(self, params) -> np.ndarray:
        return np.linalg.svd(self.jacobian(params), compute_uv=False)


# lemniscate ------------------------------------------------------------------


def _lemniscate(s):
    s = s[:, 0]
    x, y = np.sin(s), np.sin(s) * np.cos(s)
    t = -2.0 * (2.0 / 3.0 - np.cos(s) + np.cos(s) ** 3 / 3.0)
    return np.stack([x, y, t], axis=1)


def _lemniscate_jac(s):
    s = s[:, 0]
    dx = np.cos(s)
    dy = np.cos(2 * s)
    dt = -2.0 * np.sin(s) ** 3
    return np.stack([dx, dy, dt], axis=1)[:, :, None]


_BOWTIE = np.array([[0.0, 0.0], [1.0, 1.0], [1.0, -1.0], [0.0, 0.0],
                    [-1.0, 1.0], [-1.0, -1.0], [0.0, 0.0]])


def _bowtie_nodes() -> np.ndarray:
    """Vertices of the horizontal bowtie in H_1 with their lifted heights."""
    t = [0.0]
    for a, b in zip(_BOWTIE[:-1], _BOWTIE[1:]):
        t.append(t[-1] + 2.0 * (a[0] * b[1] - a[1] * b[0]))
    return np.column_stack([_BOWTIE, t])


def _bowtie(s):
    nodes = _bowtie_nodes()
    u = (s[:, 0] % (2 * np.pi)) / (2 * np.pi) * 6.0
    i = np.minimum(u.astype(int), 5)
    f = (u - i)[:, None]
    return (1 - f) * nodes[i] + f * nodes[i + 1]


def _bowtie_jac(s):
    nodes = _bowtie_nodes()
    u = (s[:, 0] % (2 * np.pi)) / (2 * np.pi) * 6.0
    i = np.minimum(u.astype(int), 5)
    return ((nodes[i + 1] - nodes[i]) * 6.0 / (2 * np.pi))[:, :, None]


def figure_eight_lift(shape: str = "lemniscate") -> ParametricMap:
    """Closed horizontal figure-eight in H_1.

    ``lemniscate``: (sin s, sin s cos s) lifted by ``t' = 2(x y' - y x')``,
    giving ``t = -2(2/3 - cos s + cos^3 s / 3)``; the two passes through the
    planar origin sit at heights 0 and -8/3.
    ``polygon``: piecewise-linear bowtie O, (1,1), (1,-1), O, (-1,1), (-1,-1)
    with heights 0 and -4 at its two origin passes.
    """
    if shape == "lemniscate":
        return ParametricMap("figure_eight_lift", Domain("circle", 1), _lemniscate, 3,
                             _lemniscate_jac, {"euclidean": 1.0, "koranyi": 1.0},
                             target="H1", horizontal=True, n=1,
                             description="horizontal lift of the Gerono lemniscate")
    if shape == "polygon":
        return ParametricMap("figure_eight_polygon", Domain("circle", 1), _bowtie, 3,
                             _bowtie_jac, {"euclidean": 1.0, "koranyi": 1.0},
                             target="H1", horizontal=True, n=1,
                             description="horizontal lift of a polygonal bowtie")
    raise GalleryError(f"unknown figure-eight shape {shape!r}")


def radial_extension(phi: ParametricMap) -> ParametricMap:
    """``Phi(x) = phi(x/|x|)`` on the punctured ball."""
    if phi.domain.kind not in ("circle", "sphere"):
        raise GalleryError("radial extension needs a map on a sphere")
    k = phi.domain.dim
    amb = k + 1

    def to_param(x):
        r = np.linalg.norm(x, axis=1)
        if np.any(r == 0):
            raise GalleryError("radial extension is undefined at the origin")
        u = x / r[:, None]
        if phi.domain.kind == "circle":
            return np.arctan2(u[:, 1], u[:, 0])[:, None] % (2 * np.pi), r, u
        return u, r, u

    def ev(x):
        return phi(to_param(x)[0])

    def jac(x):
        p, r, u = to_param(x)
        # d(x/|x|) = (I - u u^T)/|x|
        P = (np.eye(amb)[None] - u[:, :, None] * u[:, None, :]) / r[:, None, None]
        if phi.domain.kind == "circle":
            ds = np.stack([-u[:, 1], u[:, 0]], axis=1) / r[:, None]
            return phi.jacobian(p)[:, :, :1] * ds[:, None, :]
        inner = phi.as_smooth_map().jacobian(u)
        return np.einsum("mnd,mde->mne", inner, P)

    return ParametricMap(f"radial_{phi.name}", Domain("ball", amb), ev, phi.target_dim, jac,
                         dict(phi.tags), target=phi.target, horizontal=phi.horizontal, n=phi.n,
                         description=f"radial extension of {phi.name}")


def identity_into_H(n: int = 1, cube_half_width: float = 1.0) -> ParametricMap:
    if n < 1:
        raise GalleryError("n must be >= 1")
    N = 2 * n + 1
    eye = np.eye(N)
    return ParametricMap(f"identity_H{n}", Domain("cube", N, cube_half_width), lambda p: p.copy(), N,
                         lambda p: np.broadcast_to(eye, (len(p), N, N)).copy(),
                         {"euclidean": 1.0, "koranyi": 0.5}, target=f"H{n}", horizontal=False, n=n,
                         smooth=SmoothMap.identity(N),
                         description="identity of a cube, C^1/2 into the Koranyi metric")


def hopf_polynomials():
    x1, x2, x3, x4 = coordinates(4)
    return [(x1 * x3 + x2 * x4) * 2, (x2 * x3 - x1 * x4) * 2, x1 * x1 + x2 * x2 - x3 * x3 - x4 * x4]


def hopf_map() -> ParametricMap:
    sm = SmoothMap.polynomial(hopf_polynomials(), name="hopf_map")
    return ParametricMap("hopf_map", Domain("sphere", 3), sm.__call__, 3, sm.jacobian,
                         {"euclidean": 1.0}, target="S2", smooth=sm,
                         description="Hopf fibration S^3 -> S^2")


def _hdisk(p):
    u, v = p[:, 0], p[:, 1]
    z = np.zeros_like(u)
    return np.stack([u * (1 + v * v) / 2, z, z], axis=1)


def _hdisk_jac(p):
    u, v = p[:, 0], p[:, 1]
    J = np.zeros((len(p), 3, 2))
    J[:, 0, 0] = (1 + v * v) / 2
    J[:, 0, 1] = u * v
    return J


def horizontal_disk() -> ParametricMap:
    x = Polynomial.coordinate(2, 0)
    y = Polynomial.coordinate(2, 1)
    comps = [x * (Polynomial.constant(2, 1) + y * y) * 0.5, Polynomial(2), Polynomial(2)]
    return ParametricMap("horizontal_disk", Domain("ball", 2), _hdisk, 3, _hdisk_jac,
                         {"euclidean": 1.0, "koranyi": 1.0}, target="H1", horizontal=True, n=1,
                         smooth=SmoothMap.polynomial(comps, name="horizontal_disk"),
                         description="disk folded onto the x-axis of H_1")


def horizontal_helix(tau):
    tau = np.asarray(tau, dtype=float)
    return np.stack([np.cos(tau), np.sin(tau), 2.0 * tau], axis=-1)


def _helix_fold(p):
    g = np.abs(p[:, 0]) + 0.5 * p[:, 1]
    return horizontal_helix(np.pi * g)


def _helix_fold_jac(p):
    tau = np.pi * (np.abs(p[:, 0]) + 0.5 * p[:, 1])
    dc = np.stack([-np.sin(tau), np.cos(tau), np.full_like(tau, 2.0)], axis=1)
    dg = np.stack([np.sign(p[:, 0]), np.full_like(tau, 0.5)], axis=1) * np.pi
    return dc[:, :, None] * dg[:, None, :]


def helix_fold_disk() -> ParametricMap:
    """Lipschitz horizontal disk ``(u, v) -> c(pi(|u| + v/2))`` through the helix
    ``c(tau) = (cos tau, sin tau, 2 tau)``; its boundary loop is folded, not embedded."""
    return ParametricMap("helix_fold_disk", Domain("ball", 2), _helix_fold, 3, _helix_fold_jac,
                         {"euclidean": 1.0, "koranyi": 1.0}, target="H1", horizontal=True, n=1,
                         description="Lipschitz horizontal disk factoring through a helix")


def weierstrass_loop(gamma: float = 0.5, terms: int = 12, dim: int = 3) -> ParametricMap:
    """C^gamma loop ``sum_j 2^{-j gamma} cos(2^j s + phase_c)`` in each coordinate."""
    if not 0 < gamma <= 1:
        raise GalleryError("gamma must lie in (0, 1]")
    j = np.arange(terms)
    amp = 2.0 ** (-j * gamma)
    freq = 2.0 ** j
    phases = np.arange(dim) * 2 * np.pi / max(dim, 1) / 3.0

    def ev(p):
        s = p[:, :1]
        return np.stack([np.sum(amp * np.cos(freq * s + ph), axis=1) for ph in phases], axis=1)

    def jac(p):
        s = p[:, :1]
        return np.stack([np.sum(-amp * freq * np.sin(freq * s + ph), axis=1) for ph in phases],
                        axis=1)[:, :, None]

    return ParametricMap(f"weierstrass_loop_{gamma:g}", Domain("circle", 1), ev, dim, jac,
                         {"euclidean": gamma}, target=f"R{dim}",
                         description="lacunary Fourier loop, Holder exponent gamma")


def weierstrass_sheet(gamma: float = 0.5, terms: int = 12) -> ParametricMap:
    """C^gamma map of the 2-torus, ``(a(s1), b(s2), a(s1) + b(s2))`` with
    ``a, b`` the first two coordinates of :func:`weierstrass_loop`."""
    w = weierstrass_loop(gamma, terms, dim=2)

    def ev(p):
        a, b = w(p[:, :1])[:, 0], w(p[:, 1:2])[:, 1]
        return np.column_stack([a, b, a + b])

    def jac(p):
        da, db = w.jacobian(p[:, :1])[:, 0, 0], w.jacobian(p[:, 1:2])[:, 1, 0]
        z = np.zeros_like(da)
        return np.stack([np.column_stack([da, z]), np.column_stack([z, db]), np.column_stack([da, db])], axis=1)

    return ParametricMap(f"weierstrass_sheet_{gamma:g}", Domain("torus", 2), ev, 3, jac,
                         {"euclidean": gamma}, target="R3",
                         description="product of lacunary Fourier loops, Holder exponent gamma")


def vertical_segment(length: float = 1.0) -> ParametricMap:
    return ParametricMap("vertical_segment", Domain("interval", 1, length),
                         lambda p: np.column_stack([np.zeros(len(p)), np.zeros(len(p)), p[:, 0]]), 3,
                         lambda p: np.broadcast_to(np.array([[0.0], [0.0], [1.0]]), (len(p), 3, 1)).copy(),
                         {"euclidean": 1.0, "koranyi": 0.5}, target="H1",
                         description="s -> (0, 0, s)")


REGISTRY: Dict[str, Callable[[], ParametricMap]] = {
    "figure_eight_lift": figure_eight_lift,
    "figure_eight_polygon": lambda: figure_eight_lift("polygon"),
    "radial_figure_eight": lambda: radial_extension(figure_eight_lift()),
    "identity_H1": lambda: identity_into_H(1),
    "identity_H2": lambda: identity_into_H(2),
    "hopf_map": hopf_map,
    "horizontal_disk": horizontal_disk,
    "helix_fold_disk": helix_fold_disk,
    "weierstrass_loop": weierstrass_loop,
    "weierstrass_sheet": weierstrass_sheet,
    "vertical_segment": vertical_segment,
}


def get_map(name: str) -> ParametricMap:
    try:
        return REGISTRY[name]()
    except KeyError:
        raise GalleryError(f"unknown map {name!r}; known: {', '.join(sorted(REGISTRY))}") from None


def list_maps():
    return [(name, get_map(name)) for name in sorted(REGISTRY)]
