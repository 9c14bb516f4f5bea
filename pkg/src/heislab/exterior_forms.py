"""Exterior calculus on R^N with polynomial or callable coefficients.

Indices are 0-based: ``dx_i`` for ``i in range(N)``.  A k-form stores a map
from strictly increasing index tuples to scalar fields; missing tuples mean a
zero coefficient.

Polynomial coefficients are exact: arithmetic is done on whatever number type
the coefficients carry (int, float, ``fractions.Fraction``), so integer or
rational inputs give bit-exact identities.  Callable coefficients are
evaluated pointwise and differentiated by central differences unless a
gradient is supplied.
"""

from __future__ import annotations

import itertools
import json
from fractions import Fraction
from functools import lru_cache
from numbers import Number
from typing import Callable, Dict, Iterable, Optional, Sequence, Tuple

import numpy as np

DEFAULT_FD_STEP = 1e-5

Exps = Tuple[int, ...]
Index = Tuple[int, ...]


class FormError(ValueError):
    pass


def _as_points(x, dim: int) -> Tuple[np.ndarray, bool]:
    a = np.asarray(x, dtype=float)
    single = a.ndim == 1
    a = np.atleast_2d(a)
    if a.shape[-1] != dim:
        raise FormError(f"points have dimension {a.shape[-1]}, field expects {dim}")
    return a, single


# ---------------------------------------------------------------------------
# scalar fields


class ScalarField:
    dim: int
    kind: str

    def __call__(self, x) -> np.ndarray:
        raise NotImplementedError

    def diff(self, i: int) -> "ScalarField":
        raise NotImplementedError

    def is_zero(self) -> bool:
        return False

    def __neg__(self):
        return self * -1

    def __sub__(self, other):
        return self + (-as_field(other, self.dim))

    def __rsub__(self, other):
        return as_field(other, self.dim) + (-self)

    def __radd__(self, other):
        return self + other

    def __rmul__(self, other):
        return self * other


class Polynomial(ScalarField):
    kind = "polynomial"

    def __init__(self, dim: int, terms: Optional[Dict[Exps, Number]] = None):
        self.dim = int(dim)
        clean: Dict[Exps, Number] = {}
        for exps, c in (terms or {}).items():
            exps = tuple(int(e) for e in exps)
            if len(exps) != self.dim or any(e < 0 for e in exps):
                raise FormError(f"bad exponent tuple {exps} for dimension {self.dim}")
            if c != 0:
                clean[exps] = clean.get(exps, 0) + c
        self.terms = {e: c for e, c in clean.items() if c != 0}

    @classmethod
    def constant(cls, dim: int, c: Number) -> "Polynomial":
        return cls(dim, {(0,) * dim: c})

    @classmethod
    def coordinate(cls, dim: int, i: int) -> "Polynomial":
        e = [0] * dim
        e[i] = 1
        return cls(dim, {tuple(e): 1})

    @classmethod
    def monomial(cls, exps: Sequence[int], c: Number = 1) -> "Polynomial":
        return cls(len(exps), {tuple(exps): c})

    def is_zero(self) -> bool:
        return not self.terms

    @property
    def degree(self) -> int:
        return max((sum(e) for e in self.terms), default=-1)

    def __call__(self, x):
        pts, single = _as_points(x, self.dim)
        out = np.zeros(pts.shape[0])
        for exps, c in self.terms.items():
            term = np.full(pts.shape[0], float(c))
            for i, e in enumerate(exps):
                if e:
                    term = term * pts[:, i] ** e
            out += term
        return out[0] if single else out

    def diff(self, i: int) -> "Polynomial":
        out: Dict[Exps, Number] = {}
        for exps, c in self.terms.items():
            if exps[i]:
                e = list(exps)
                e[i] -= 1
                out[tuple(e)] = out.get(tuple(e), 0) + c * exps[i]
        return Polynomial(self.dim, out)

    def __add__(self, other):
        if isinstance(other, Number):
            other = Polynomial.constant(self.dim, other)
        if isinstance(other, Polynomial):
            _same_dim(self, other)
            out = dict(self.terms)
            for e, c in other.terms.items():
                out[e] = out.get(e, 0) + c
            return Polynomial(self.dim, out)
        return _promote(self) + other

    def __mul__(self, other):
        if isinstance(other, Number):
            return Polynomial(self.dim, {e: c * other for e, c in self.terms.items()})
        if isinstance(other, Polynomial):
            _same_dim(self, other)
            out: Dict[Exps, Number] = {}
            for e1, c1 in self.terms.items():
                for e2, c2 in other.terms.items():
                    e = tuple(a + b for a, b in zip(e1, e2))
                    out[e] = out.get(e, 0) + c1 * c2
            return Polynomial(self.dim, out)
        return _promote(self) * other

    def __pow__(self, k: int) -> "Polynomial":
        out = Polynomial.constant(self.dim, 1)
        for _ in range(k):
            out = out * self
        return out

    def compose(self, inner: Sequence["Polynomial"]) -> "Polynomial":
        """``self(inner_0(x), ..., inner_{dim-1}(x))`` as a polynomial in x."""
        if len(inner) != self.dim:
            raise FormError(f"need {self.dim} inner polynomials, got {len(inner)}")
        d = inner[0].dim
        powers = [[Polynomial.constant(d, 1)] for _ in range(self.dim)]
        out = Polynomial(d)
        for exps, c in self.terms.items():
            term = Polynomial.constant(d, c)
            for i, e in enumerate(exps):
                while len(powers[i]) <= e:
                    powers[i].append(powers[i][-1] * inner[i])
                if e:
                    term = term * powers[i][e]
            out = out + term
        return out

    def __eq__(self, other):
        if isinstance(other, Number):
            other = Polynomial.constant(self.dim, other)
        if not isinstance(other, Polynomial):
            return NotImplemented
        return self.dim == other.dim and (self - other).is_zero()

    __hash__ = None

    def __repr__(self):
        if not self.terms:
            return "0"
        parts = []
        for exps, c in sorted(self.terms.items()):
            mono = "*".join(f"x{i}" + (f"^{e}" if e > 1 else "") for i, e in enumerate(exps) if e)
            parts.append(f"{c}" + (f"*{mono}" if mono else ""))
        return " + ".join(parts)

    def to_json(self) -> list:
        return [{"exponents": list(e), "coeff": float(c)} for e, c in sorted(self.terms.items())]

    @classmethod
    def from_json(cls, dim: int, monomials: list) -> "Polynomial":
        return cls(dim, {tuple(m["exponents"]): m["coeff"] for m in monomials})


class CallableField(ScalarField):
    """Pointwise-evaluated field; ``func`` maps ``(M, dim)`` arrays to ``(M,)``."""

    kind = "callable"

    def __init__(self, dim: int, func: Callable[[np.ndarray], np.ndarray],
                 grad: Optional[Callable[[np.ndarray], np.ndarray]] = None,
                 h: float = DEFAULT_FD_STEP):
        self.dim = int(dim)
        self.func = func
        self.grad = grad
        self.h = h

    def __call__(self, x):
        pts, single = _as_points(x, self.dim)
        out = np.asarray(self.func(pts), dtype=float).reshape(pts.shape[0])
        return out[0] if single else out

    def gradient(self, x) -> np.ndarray:
        pts, single = _as_points(x, self.dim)
        if self.grad is not None:
            g = np.asarray(self.grad(pts), dtype=float).reshape(pts.shape[0], self.dim)
        else:
            g = np.empty((pts.shape[0], self.dim))
            for i in range(self.dim):
                g[:, i] = self._central(pts, i)
        return g[0] if single else g

    def _central(self, pts: np.ndarray, i: int) -> np.ndarray:
        step = np.zeros(self.dim)
        step[i] = self.h
        return (self.func(pts + step) - self.func(pts - step)) / (2.0 * self.h)

    def diff(self, i: int) -> "CallableField":
        if self.grad is not None:
            grad = self.grad
            return CallableField(self.dim, lambda p: grad(p)[:, i], h=self.h)
        return CallableField(self.dim, lambda p: self._central(p, i), h=self.h)

    def __add__(self, other):
        other = as_field(other, self.dim)
        _same_dim(self, other)
        f, g = self, other
        return CallableField(self.dim, lambda p: f(p) + g(p), h=self.h)

    def __mul__(self, other):
        if isinstance(other, Number):
            f, c = self, float(other)
            return CallableField(self.dim, lambda p: c * f(p), h=self.h)
        other = as_field(other, self.dim)
        _same_dim(self, other)
        f, g = self, other
        return CallableField(self.dim, lambda p: f(p) * g(p), h=self.h)


def _same_dim(a: ScalarField, b: ScalarField) -> None:
    if a.dim != b.dim:
        raise FormError(f"fields on R^{a.dim} and R^{b.dim} cannot be combined")


def _promote(p: Polynomial) -> CallableField:
    return CallableField(p.dim, p.__call__)


def as_field(x, dim: int) -> ScalarField:
    if isinstance(x, ScalarField):
        return x
    if isinstance(x, Number):
        return Polynomial.constant(dim, x)
    if callable(x):
        return CallableField(dim, x)
    raise FormError(f"cannot interpret {x!r} as a scalar field")


def coordinates(dim: int) -> list:
    return [Polynomial.coordinate(dim, i) for i in range(dim)]


# ---------------------------------------------------------------------------
# forms


def _merge(i: Index, j: Index) -> Tuple[int, Optional[Index]]:
    if set(i) & set(j):
        return 0, None
    inversions = sum(1 for a in i for b in j if a > b)
    return (-1) ** inversions, tuple(sorted(i + j))


class DifferentialForm:
    """A k-form on R^dim.

    A form whose degree exceeds ``dim`` is always the zero form; ``wedge``
    produces such forms instead of raising.
    """

    def __init__(self, dim: int, degree: int, terms: Optional[Dict[Index, ScalarField]] = None):
        self.dim = int(dim)
        self.degree = int(degree)
        if self.degree < 0:
            raise FormError("degree must be nonnegative")
        clean: Dict[Index, ScalarField] = {}
        for idx, c in (terms or {}).items():
            idx = tuple(int(i) for i in idx)
            if len(idx) != self.degree or list(idx) != sorted(set(idx)) or any(
                    i < 0 or i >= self.dim for i in idx):
                raise FormError(f"bad index tuple {idx} for a {self.degree}-form on R^{self.dim}")
            c = as_field(c, self.dim)
            _same_dim(c, Polynomial(self.dim))
            if idx in clean:
                c = clean[idx] + c
            clean[idx] = c
        self.terms = {i: c for i, c in clean.items() if not c.is_zero()}

    # constructors -------------------------------------------------------
    @classmethod
    def zero(cls, dim: int, degree: int) -> "DifferentialForm":
        return cls(dim, degree)

    @classmethod
    def function(cls, f) -> "DifferentialForm":
        f = as_field(f, f.dim) if isinstance(f, ScalarField) else f
        return cls(f.dim, 0, {(): f})

    @classmethod
    def basis(cls, dim: int, idx: Sequence[int], coeff=1) -> "DifferentialForm":
        """``coeff * dx_{i_1} ^ ... ^ dx_{i_k}`` for an arbitrary index order."""
        idx = tuple(idx)
        if len(set(idx)) < len(idx):
            return cls(dim, len(idx))
        perm = np.argsort(idx)
        sign = round(np.linalg.det(np.eye(len(idx))[perm])) if idx else 1
        return cls(dim, len(idx), {tuple(sorted(idx)): as_field(coeff, dim) * sign})

    @classmethod
    def one_form(cls, coeffs: Sequence) -> "DifferentialForm":
        dim = len(coeffs)
        return cls(dim, 1, {(i,): as_field(c, dim) for i, c in enumerate(coeffs)
                            if not (isinstance(c, Number) and c == 0)})

    # algebra ------------------------------------------------------------
    @property
    def is_polynomial(self) -> bool:
        return all(isinstance(c, Polynomial) for c in self.terms.values())

    def is_zero(self) -> bool:
        return not self.terms

    def _compatible(self, other: "DifferentialForm") -> None:
        if self.dim != other.dim:
            raise FormError(f"forms on R^{self.dim} and R^{other.dim} cannot be combined")

    def __add__(self, other: "DifferentialForm") -> "DifferentialForm":
        self._compatible(other)
        if self.degree != other.degree:
            raise FormError(f"cannot add a {self.degree}-form and a {other.degree}-form")
        out = dict(self.terms)
        for idx, c in other.terms.items():
            out[idx] = out[idx] + c if idx in out else c
        return DifferentialForm(self.dim, self.degree, out)

    def __neg__(self):
        return self.scale(-1)

    def __sub__(self, other):
        return self + (-other)

    def scale(self, f) -> "DifferentialForm":
        f = as_field(f, self.dim)
        return DifferentialForm(self.dim, self.degree, {i: f * c for i, c in self.terms.items()})

    def __mul__(self, f):
        return self.scale(f)

    __rmul__ = __mul__

    def wedge(self, other: "DifferentialForm") -> "DifferentialForm":
        return wedge(self, other)

    __xor__ = wedge

    def d(self) -> "DifferentialForm":
        return exterior_d(self)

    def equals(self, other: "DifferentialForm") -> bool:
        """Exact equality; only meaningful for polynomial coefficients."""
        diff = self - other
        return diff.is_zero()

    # evaluation ---------------------------------------------------------
    def coefficient(self, idx: Sequence[int]) -> ScalarField:
        return self.terms.get(tuple(idx), Polynomial(self.dim))

    def evaluate(self, points, vectors) -> np.ndarray:
        return evaluate_form(self, points, vectors)

    def pointwise_norm(self, points) -> np.ndarray:
        """Euclidean norm of the coefficient vector at each point."""
        pts, single = _as_points(points, self.dim)
        acc = np.zeros(pts.shape[0])
        for c in self.terms.values():
            acc += c(pts) ** 2
        out = np.sqrt(acc)
        return out[0] if single else out

    def __repr__(self):
        if not self.terms:
            return f"0 ({self.degree}-form on R^{self.dim})"
        parts = []
        for idx, c in sorted(self.terms.items()):
            d = "^".join(f"dx{i}" for i in idx) or "1"
            parts.append(f"({c!r}) {d}")
        return " + ".join(parts)

    # serialization ------------------------------------------------------
    def to_json(self) -> dict:
        if not self.is_polynomial:
            raise FormError("only polynomial forms can be serialized")
        return {
            "dim": self.dim,
            "degree": self.degree,
            "terms": [{"indices": list(idx), "monomials": c.to_json()}
                      for idx, c in sorted(self.terms.items())],
        }

    @classmethod
    def from_json(cls, doc) -> "DifferentialForm":
        if isinstance(doc, str):
            doc = json.loads(doc)
        dim, degree = int(doc["dim"]), int(doc["degree"])
        terms = {tuple(t["indices"]): Polynomial.from_json(dim, t["monomials"]) for t in doc["terms"]}
        return cls(dim, degree, terms)


def wedge(a: DifferentialForm, b: DifferentialForm) -> DifferentialForm:
    a._compatible(b)
    out: Dict[Index, ScalarField] = {}
    for i, ca in a.terms.items():
        for j, cb in b.terms.items():
            sign, idx = _merge(i, j)
            if not sign:
                continue
            c = ca * cb if sign > 0 else (ca * cb) * -1
            out[idx] = out[idx] + c if idx in out else c
    deg = a.degree + b.degree
    if deg > a.dim:
        return DifferentialForm(a.dim, deg)
    return DifferentialForm(a.dim, deg, out)


def exterior_d(a: DifferentialForm) -> DifferentialForm:
    out: Dict[Index, ScalarField] = {}
    for idx, c in a.terms.items():
        for i in range(a.dim):
            if i in idx:
                continue
            dc = c.diff(i)
            if dc.is_zero():
                continue
            sign = (-1) ** sum(1 for k in idx if k < i)
            new = tuple(sorted(idx + (i,)))
            term = dc if sign > 0 else dc * -1
            out[new] = out[new] + term if new in out else term
    return DifferentialForm(a.dim, a.degree + 1, out)


def evaluate_form(a: DifferentialForm, points, vectors) -> np.ndarray:
    """Alternating evaluation of ``a`` at ``points`` on ``vectors``.

    ``points``: ``(N,)`` or ``(M, N)``; ``vectors``: ``(k, N)`` or ``(M, k, N)``.
    """
    pts, single = _as_points(points, a.dim)
    vec = np.asarray(vectors, dtype=float)
    if a.degree == 0:
        if vec.size and vec.shape[-2 if vec.ndim > 1 else 0] != 0:
            raise FormError("a 0-form takes no vectors")
        out = a.coefficient(())(pts)
        return out[0] if single else out
    if vec.ndim == 2:
        vec = np.broadcast_to(vec, (pts.shape[0],) + vec.shape)
    if vec.shape[-2] != a.degree or vec.shape[-1] != a.dim:
        raise FormError(f"a {a.degree}-form on R^{a.dim} needs {a.degree} vectors of length {a.dim}, "
                        f"got array of shape {vec.shape}")
    out = np.zeros(pts.shape[0])
    for idx, c in a.terms.items():
        minor = vec[:, :, list(idx)]
        out += c(pts) * np.linalg.det(minor)
    return out[0] if single else out


# ---------------------------------------------------------------------------
# smooth maps and pullback


class SmoothMap:
    """A map R^d -> R^N evaluated on stacked points ``(M, d) -> (M, N)``.

    ``jacobian`` returns ``(M, N, d)``; when absent, central differences with
    step ``h`` are used.  Maps built from polynomials keep their components so
    that pullbacks of polynomial forms stay exact.
    """

    def __init__(self, domain_dim: int, codomain_dim: int,
                 evaluate: Callable[[np.ndarray], np.ndarray],
                 jacobian: Optional[Callable[[np.ndarray], np.ndarray]] = None,
                 h: float = DEFAULT_FD_STEP,
                 components: Optional[Sequence[Polynomial]] = None,
                 name: str = ""):
        self.domain_dim = int(domain_dim)
        self.codomain_dim = int(codomain_dim)
        self._evaluate = evaluate
        self._jacobian = jacobian
        self.h = h
        self.components = list(components) if components is not None else None
        self.name = name

    @property
    def has_exact_jacobian(self) -> bool:
        return self._jacobian is not None

    def __call__(self, x) -> np.ndarray:
        pts, single = _as_points(x, self.domain_dim)
        out = np.asarray(self._evaluate(pts), dtype=float).reshape(pts.shape[0], self.codomain_dim)
        return out[0] if single else out

    def jacobian(self, x) -> np.ndarray:
        pts, single = _as_points(x, self.domain_dim)
        if self._jacobian is not None:
            jac = np.asarray(self._jacobian(pts), dtype=float)
        else:
            jac = self.fd_jacobian(pts)
        jac = jac.reshape(pts.shape[0], self.codomain_dim, self.domain_dim)
        return jac[0] if single else jac

    def fd_jacobian(self, x) -> np.ndarray:
        pts, _ = _as_points(x, self.domain_dim)
        jac = np.empty((pts.shape[0], self.codomain_dim, self.domain_dim))
        for i in range(self.domain_dim):
            step = np.zeros(self.domain_dim)
            step[i] = self.h
            jac[:, :, i] = (self(pts + step) - self(pts - step)) / (2.0 * self.h)
        return jac

    def jacobian_mismatch(self, points) -> float:
        """Max deviation between the exact and finite-difference Jacobians."""
        return float(np.max(np.abs(self.jacobian(points) - self.fd_jacobian(points))))

    @classmethod
    def polynomial(cls, components: Sequence[Polynomial], name: str = "") -> "SmoothMap":
        comps = list(components)
        d = comps[0].dim
        grads = [[c.diff(j) for j in range(d)] for c in comps]

        def ev(p):
            return np.stack([c(p) for c in comps], axis=-1)

        def jac(p):
            return np.stack([np.stack([g(p) for g in row], axis=-1) for row in grads], axis=-2)

        return cls(d, len(comps), ev, jac, components=comps, name=name)

    @classmethod
    def identity(cls, d: int) -> "SmoothMap":
        return cls.polynomial(coordinates(d), name="identity")

    @classmethod
    def linear(cls, matrix, offset=None) -> "SmoothMap":
        A = np.asarray(matrix, dtype=float)
        b = np.zeros(A.shape[0]) if offset is None else np.asarray(offset, dtype=float)
        xs = coordinates(A.shape[1])
        comps = []
        for r in range(A.shape[0]):
            p = Polynomial.constant(A.shape[1], float(b[r]))
            for c in range(A.shape[1]):
                if A[r, c]:
                    p = p + xs[c] * float(A[r, c])
            comps.append(p)
        return cls.polynomial(comps, name="affine")

    @classmethod
    def constant(cls, value, d: int) -> "SmoothMap":
        v = np.asarray(value, dtype=float)
        return cls.polynomial([Polynomial.constant(d, float(c)) for c in v], name="constant")

    def compose(self, inner: "SmoothMap") -> "SmoothMap":
        """``self o inner``."""
        if inner.codomain_dim != self.domain_dim:
            raise FormError("composition dimension mismatch")
        if self.components is not None and inner.components is not None:
            return SmoothMap.polynomial([c.compose(inner.components) for c in self.components])
        outer = self

        def ev(p):
            return outer(inner(p))

        def jac(p):
            return np.einsum("mij,mjk->mik", outer.jacobian(inner(p)), inner.jacobian(p))

        return SmoothMap(inner.domain_dim, self.codomain_dim, ev, jac)


def _poly_det(mat: Sequence[Sequence[Polynomial]], dim: int) -> Polynomial:
    k = len(mat)
    out = Polynomial(dim)
    for perm in itertools.permutations(range(k)):
        sign = round(np.linalg.det(np.eye(k)[list(perm)]))
        term = Polynomial.constant(dim, sign)
        for r, c in enumerate(perm):
            term = term * mat[r][c]
            if term.is_zero():
                break
        out = out + term
    return out


def pullback(f: SmoothMap, a: DifferentialForm) -> DifferentialForm:
    if f.codomain_dim != a.dim:
        raise FormError(f"map lands in R^{f.codomain_dim} but the form lives on R^{a.dim}")
    d, k = f.domain_dim, a.degree
    if k > d:
        return DifferentialForm(d, k)
    out_idx = list(itertools.combinations(range(d), k))
    if f.components is not None and a.is_polynomial:
        comps = f.components
        grads = [[c.diff(j) for j in range(d)] for c in comps]
        terms: Dict[Index, ScalarField] = {}
        for idx, c in a.terms.items():
            cf = c.compose(comps)
            if cf.is_zero():
                continue
            for J in out_idx:
                minor = _poly_det([[grads[i][j] for j in J] for i in idx], d)
                if minor.is_zero():
                    continue
                val = cf * minor
                terms[J] = terms[J] + val if J in terms else val
        return DifferentialForm(d, k, terms)

    form_terms = list(a.terms.items())

    def coefficient(J):
        def func(p):
            y = f(p)
            jac = f.jacobian(p)
            acc = np.zeros(p.shape[0])
            for idx, c in form_terms:
                if k == 0:
                    acc += c(y)
                else:
                    acc += c(y) * np.linalg.det(jac[:, list(idx)][:, :, list(J)])
            return acc
        return CallableField(d, func, h=f.h)

    return DifferentialForm(d, k, {J: coefficient(J) for J in out_idx} if form_terms else {})


# ---------------------------------------------------------------------------
# contact structure and the Lefschetz decomposition


def contact_form(n: int) -> DifferentialForm:
    """``dt + 2 sum_j (y_j dx_j - x_j dy_j)`` on R^{2n+1}, integer coefficients."""
    N = 2 * n + 1
    xs = coordinates(N)
    coeffs = [None] * N
    for j in range(n):
        coeffs[2 * j] = xs[2 * j + 1] * 2
        coeffs[2 * j + 1] = xs[2 * j] * -2
    coeffs[N - 1] = Polynomial.constant(N, 1)
    return DifferentialForm.one_form(coeffs)


def contact_form_differential(n: int) -> DifferentialForm:
    """``4 sum_j dy_j ^ dx_j`` written directly from its closed form."""
    N = 2 * n + 1
    out = DifferentialForm.zero(N, 2)
    for j in range(n):
        out = out + DifferentialForm.basis(N, (2 * j + 1, 2 * j), 4)
    return out


def _basis(dim: int, k: int):
    return list(itertools.combinations(range(dim), k))


@lru_cache(maxsize=None)
def _lefschetz_right_inverse(n: int, k: int):
    """Exact rational right inverse of ``s -> (sum_j dy_j^dx_j) ^ s``.

    Maps horizontal k-form coefficients to horizontal (k-2)-form coefficients.
    Only called when ``k >= n+1``, where the map is onto.
    """
    H = 2 * n
    rows, cols = _basis(H, k), _basis(H, k - 2)
    row_pos = {r: i for i, r in enumerate(rows)}
    L = [[Fraction(0)] * len(cols) for _ in rows]
    for c, J in enumerate(cols):
        for j in range(n):
            sign, idx = _merge((2 * j + 1, 2 * j), J)
            if sign and idx is not None:
                # (2j+1, 2j) is not increasing: flip once more
                L[row_pos[idx]][c] += -sign
    m = len(rows)
    if m == 0:
        return rows, cols, []
    # R = L^T (L L^T)^{-1}
    LLt = [[sum(L[i][t] * L[j][t] for t in range(len(cols))) for j in range(m)] for i in range(m)]
    inv = _fraction_inverse(LLt)
    R = [[sum(L[i][c] * inv[i][r] for i in range(m)) for r in range(m)] for c in range(len(cols))]
    return rows, cols, R


def _fraction_inverse(M):
    m = len(M)
    A = [list(row) + [Fraction(int(i == j)) for j in range(m)] for i, row in enumerate(M)]
    for col in range(m):
        piv = next(r for r in range(col, m) if A[r][col] != 0)
        A[col], A[piv] = A[piv], A[col]
        pv = A[col][col]
        A[col] = [v / pv for v in A[col]]
        for r in range(m):
            if r != col and A[r][col] != 0:
                f = A[r][col]
                A[r] = [a - f * b for a, b in zip(A[r], A[col])]
    return [row[m:] for row in A]


def _exact_scale(c: ScalarField, q: Fraction) -> ScalarField:
    if q == 1:
        return c
    if q.denominator == 1:
        return c * int(q)
    if isinstance(c, Polynomial) and all(isinstance(v, (int, Fraction)) for v in c.terms.values()):
        return c * q
    return c * float(q)


def lefschetz_decompose(kappa: DifferentialForm, n: int):
    """Write a k-form on R^{2n+1}, ``k >= n+1``, as ``alpha^beta + dalpha^sigma``.

    ``dt`` is eliminated first through ``dt = alpha - theta`` (theta the
    horizontal part of alpha); the purely horizontal remainder is then divided
    by ``dalpha`` with an exact rational right inverse of the Lefschetz map.
    Returns ``(beta, sigma)`` of degrees ``k-1`` and ``k-2``.
    """
    N = 2 * n + 1
    k = kappa.degree
    if kappa.dim != N:
        raise FormError(f"H_{n} forms live on R^{N}, got a form on R^{kappa.dim}")
    if k < n + 1:
        raise FormError(f"decomposition needs degree >= n+1 = {n + 1}, got {k}")
    t = N - 1
    alpha = contact_form(n)
    theta = DifferentialForm(N, 1, {i: c for i, c in alpha.terms.items() if i != (t,)})

    beta = DifferentialForm.zero(N, k - 1)
    horizontal = DifferentialForm.zero(N, k)
    for idx, c in kappa.terms.items():
        if idx and idx[-1] == t:
            rest = idx[:-1]
            piece = DifferentialForm(N, k - 1, {rest: c})
            # c dx_rest ^ dt = (-1)^{k-1} alpha ^ (c dx_rest) - c dx_rest ^ theta
            beta = beta + (piece if (k - 1) % 2 == 0 else -piece)
            horizontal = horizontal - wedge(piece, theta)
        else:
            horizontal = horizontal + DifferentialForm(N, k, {idx: c})

    sigma_terms: Dict[Index, ScalarField] = {}
    if k <= 2 * n:
        rows, cols, R = _lefschetz_right_inverse(n, k)
        for c_pos, J in enumerate(cols):
            acc = None
            for r_pos, I in enumerate(rows):
                q = R[c_pos][r_pos] / 4
                if q == 0 or I not in horizontal.terms:
                    continue
                term = _exact_scale(horizontal.terms[I], q)
                acc = term if acc is None else acc + term
            if acc is not None:
                sigma_terms[J] = acc
    sigma = DifferentialForm(N, k - 2, sigma_terms)
    return beta, sigma


def lefschetz_residual(kappa: DifferentialForm, beta: DifferentialForm, sigma: DifferentialForm,
                       n: int) -> DifferentialForm:
    """``alpha^beta + dalpha^sigma - kappa``."""
    alpha = contact_form(n)
    return wedge(alpha, beta) + wedge(exterior_d(alpha), sigma) - kappa


def random_polynomial(rng: np.random.Generator, dim: int, max_degree: int,
                      n_terms: int = 4, integer: bool = True, coeff_range: int = 5) -> Polynomial:
    terms: Dict[Exps, Number] = {}
    for _ in range(n_terms):
        deg = int(rng.integers(0, max_degree + 1))
        exps = [0] * dim
        for _ in range(deg):
            exps[int(rng.integers(0, dim))] += 1
        if integer:
            c = int(rng.integers(-coeff_range, coeff_range + 1))
        else:
            c = float(rng.uniform(-coeff_range, coeff_range))
        terms[tuple(exps)] = terms.get(tuple(exps), 0) + c
    return Polynomial(dim, terms)


def random_form(rng: np.random.Generator, dim: int, degree: int, max_degree: int = 3,
                density: float = 0.7, **kw) -> DifferentialForm:
    terms = {}
    for idx in _basis(dim, degree):
        if rng.random() < density:
            terms[idx] = random_polynomial(rng, dim, max_degree, **kw)
    return DifferentialForm(dim, degree, terms)
