"""Concrete map families: expanding circle/torus maps, Pomeau-Manneville,
monotone interval maps, with derivatives and inverse branches where they exist.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import InputError, NonDifferentiableError, UnsupportedCapabilityError


@dataclass(frozen=True)
class ExpandingMapInfo:
    """Uniform expansion data: d(f(x),f(y)) >= sigma*d(x,y) on rho-balls, and the
    inverse branches on rho-balls contract by 1/sigma."""

    sigma: float
    rho: float
    branch_count: int


def _lexsort_rows(pts: np.ndarray) -> np.ndarray:
    keys = tuple(pts[:, i] for i in reversed(range(pts.shape[1])))
    return pts[np.lexsort(keys)]


class MapBase:
    """A continuous self-map of one space kind.

    Subclasses fill in: name, params, space_kind ('interval' / 'circle' /
    'torus' / None for any), dim, monotone, expanding (ExpandingMapInfo or
    None), lipschitz, and the apply/derivative/preimages methods.  apply takes
    and returns canonical (N, dim) arrays.
    """

    name: str = "map"
    params: dict = {}
    space_kind = None
    dim: int = 1
    monotone: bool = False
    expanding: ExpandingMapInfo | None = None
    lipschitz: float = 1.0
    # radius within which closest-preimage selection provably picks the right
    # inverse branch (can exceed the conservative rho; None = no certificate)
    branch_radius: float | None = None

    def apply(self, pts: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def apply_point(self, x) -> np.ndarray:
        pts = np.atleast_1d(np.asarray(x, dtype=np.float64)).reshape(1, -1)
        return self.apply(pts)[0]

    def derivative(self, x) -> np.ndarray:
        raise UnsupportedCapabilityError(f"{self.name} has no derivative support")

    def preimages(self, y) -> np.ndarray:
        raise UnsupportedCapabilityError(f"{self.name} has no inverse-branch support")

    def describe(self) -> str:
        items = ",".join(f"{k}={self.params[k]}" for k in sorted(self.params))
        return f"{self.name}({items})"

    def __repr__(self):
        return self.describe()


def _mod1(values: np.ndarray) -> np.ndarray:
    out = np.mod(values, 1.0)
    out[out >= 1.0] = 0.0
    return out


class CircleAffine(MapBase):
    """x -> k*x + b (mod 1); degree-k covering map of the circle."""

    space_kind = "circle"

    def __init__(self, k: int, b: float = 0.0):
        k = int(k)
        if k < 1:
            raise InputError("circle_affine needs integer degree k >= 1")
        b = float(b)
        if not (0.0 <= b < 1.0):
            b = b % 1.0
        self.k = k
        self.b = b
        self.name = "circle_affine"
        self.params = {"k": k, "b": b}
        self.monotone = k == 1
        self.lipschitz = float(k)
        if k >= 2:
            self.expanding = ExpandingMapInfo(sigma=float(k), rho=1.0 / (4 * k), branch_count=k)
            self.branch_radius = 0.5

    def apply(self, pts):
        return _mod1(self.k * pts + self.b)

    def derivative(self, x):
        return np.array([[float(self.k)]])

    def preimages(self, y):
        y0 = float(np.atleast_1d(y)[0]) % 1.0
        xs = ((y0 - self.b) % 1.0 + np.arange(self.k)) / self.k
        return np.sort(xs % 1.0).reshape(-1, 1)


class TorusEndo(MapBase):
    """x -> A x (mod 1) for an integer matrix with all |eigenvalues| > 1."""

    space_kind = "torus"

    def __init__(self, A):
        A = np.asarray(A)
        if A.ndim != 2 or A.shape[0] != A.shape[1]:
            raise InputError("torus_endo needs a square matrix")
        if not np.array_equal(A, np.round(A)):
            raise InputError("torus_endo matrix must have integer entries")
        A = A.astype(np.int64)
        det = int(round(np.linalg.det(A.astype(np.float64))))
        if det == 0:
            raise InputError("torus_endo matrix must be invertible")
        eig = np.linalg.eigvals(A.astype(np.float64))
        if np.min(np.abs(eig)) <= 1.0:
            raise InputError("torus_endo needs all eigenvalues |lambda| > 1")
        sigma = float(np.linalg.svd(A.astype(np.float64), compute_uv=False).min())
        if sigma < 1.0 + 1e-9:
            # adapted-norm construction is out of scope; reject instead
            raise InputError("torus_endo expansion not certified in the standard metric")
        self.A = A
        self.Ainv = np.linalg.inv(A.astype(np.float64))
        self.det = abs(det)
        self.dim = A.shape[0]
        self.name = "torus_endo"
        self.params = {"A": A.tolist()}
        row_sum = float(np.abs(A).sum(axis=1).max())
        self.lipschitz = row_sum
        self.expanding = ExpandingMapInfo(sigma=sigma, rho=1.0 / (4.0 * row_sum), branch_count=self.det)
        self.branch_radius = self.expanding.rho

    def apply(self, pts):
        return _mod1(pts @ self.A.T.astype(np.float64))

    def derivative(self, x):
        return self.A.astype(np.float64).copy()

    def preimages(self, y):
        y0 = np.mod(np.asarray(y, dtype=np.float64).reshape(-1), 1.0)
        corners = np.array(np.meshgrid(*([[0.0, 1.0]] * self.dim), indexing="ij")).reshape(self.dim, -1).T
        images = corners @ self.A.T.astype(np.float64)
        lo = np.floor(images.min(axis=0) - y0).astype(int) - 1
        hi = np.ceil(images.max(axis=0) - y0).astype(int) + 1
        ranges = [np.arange(a, b + 1) for a, b in zip(lo, hi)]
        mesh = np.array(np.meshgrid(*ranges, indexing="ij")).reshape(self.dim, -1).T
        cand = (y0[None, :] + mesh.astype(np.float64)) @ self.Ainv.T
        ok = np.all((cand >= -1e-12) & (cand < 1.0 - 1e-12), axis=1)
        pts = _mod1(cand[ok])
        _, keep = np.unique(np.round(pts, 9), axis=0, return_index=True)
        pts = pts[np.sort(keep)]
        if pts.shape[0] != self.det:
            raise InputError("torus preimage enumeration inconsistent with |det A|")
        return _lexsort_rows(pts)


class PomeauManneville(MapBase):
    """Intermittent circle map: x + 2^a x^(1+a) on [0, 1/2], 2x - 1 above,
    glued at 1 == 0.  Derivative is >= 1 everywhere and equals 1 only at 0,
    so the map is not uniformly expanding."""

    space_kind = "circle"

    def __init__(self, alpha: float):
        alpha = float(alpha)
        if not (0.0 < alpha < 1.0):
            raise InputError("pomeau_manneville needs alpha in (0, 1)")
        self.alpha = alpha
        self.coeff = 2.0**alpha
        self.name = "pomeau_manneville"
        self.params = {"alpha": alpha}
        self.lipschitz = 2.0 + alpha

    def apply(self, pts):
        x = pts[:, 0]
        left = x + self.coeff * np.power(x, 1.0 + self.alpha)
        right = 2.0 * x - 1.0
        y = np.where(x <= 0.5, left, right)
        return _mod1(y.reshape(-1, 1))

    def derivative(self, x):
        x0 = float(np.atleast_1d(x)[0])
        if abs(x0 - 0.5) < 1e-15:
            raise NonDifferentiableError("pomeau_manneville is not differentiable at 1/2")
        if x0 < 0.5:
            return np.array([[1.0 + (1.0 + self.alpha) * self.coeff * x0**self.alpha]])
        return np.array([[2.0]])

    def _left_inverse(self, y: float) -> float:
        lo, hi = 0.0, 0.5
        for _ in range(60):
            mid = 0.5 * (lo + hi)
            if mid + self.coeff * mid ** (1.0 + self.alpha) < y:
                lo = mid
            else:
                hi = mid
        return 0.5 * (lo + hi)

    def preimages(self, y):
        y0 = float(np.atleast_1d(y)[0]) % 1.0
        left = self._left_inverse(y0 if y0 > 0.0 else 0.0)
        if y0 == 0.0:
            xs = np.array([0.0, 0.5])
        else:
            xs = np.array([left, (y0 + 1.0) / 2.0])
        return np.sort(xs % 1.0).reshape(-1, 1)


class Power(MapBase):
    """x -> x^p on [0, 1]; nondecreasing for p >= 1."""

    space_kind = "interval"

    def __init__(self, p: float):
        p = float(p)
        if p < 1.0:
            raise InputError("power map needs p >= 1")
        self.p = p
        self.name = "power"
        self.params = {"p": p}
        self.monotone = True
        self.lipschitz = p

    def apply(self, pts):
        return np.power(pts, self.p)

    def derivative(self, x):
        x0 = float(np.atleast_1d(x)[0])
        return np.array([[self.p * x0 ** (self.p - 1.0)]])


class IntervalAffine(MapBase):
    """x -> a*x + b mapping [0,1] into itself; monotone (either orientation)."""

    space_kind = "interval"

    def __init__(self, a: float, b: float):
        a, b = float(a), float(b)
        lo, hi = min(b, a + b), max(b, a + b)
        if lo < -1e-12 or hi > 1.0 + 1e-12:
            raise InputError("interval_affine image leaves [0, 1]")
        self.a, self.b = a, b
        self.name = "interval_affine"
        self.params = {"a": a, "b": b}
        self.monotone = True
        self.lipschitz = abs(a)

    def apply(self, pts):
        return np.clip(self.a * pts + self.b, 0.0, 1.0)

    def derivative(self, x):
        return np.array([[self.a]])


class Tabulated(MapBase):
    """Monotone interval map given by a table, evaluated by linear interpolation."""

    space_kind = "interval"

    def __init__(self, xs, ys):
        xs = np.asarray(xs, dtype=np.float64)
        ys = np.asarray(ys, dtype=np.float64)
        if xs.ndim != 1 or xs.shape != ys.shape or xs.size < 2:
            raise InputError("tabulated map needs matching 1-d x/y tables")
        if xs[0] != 0.0 or xs[-1] != 1.0 or np.any(np.diff(xs) <= 0):
            raise InputError("tabulated x nodes must increase from 0 to 1")
        dy = np.diff(ys)
        if not (np.all(dy >= 0) or np.all(dy <= 0)):
            raise InputError("tabulated map must be monotone")
        if ys.min() < -1e-12 or ys.max() > 1.0 + 1e-12:
            raise InputError("tabulated values leave [0, 1]")
        self.xs, self.ys = xs, np.clip(ys, 0.0, 1.0)
        self.name = "tabulated"
        self.params = {"xs": xs.tolist(), "ys": ys.tolist()}
        self.monotone = True
        slopes = dy / np.diff(xs)
        self.lipschitz = float(np.abs(slopes).max())
        self._slopes = slopes

    def apply(self, pts):
        return np.interp(pts[:, 0], self.xs, self.ys).reshape(-1, 1)

    def derivative(self, x):
        x0 = float(np.atleast_1d(x)[0])
        idx = np.searchsorted(self.xs, x0, side="right") - 1
        idx = min(max(idx, 0), self._slopes.size - 1)
        return np.array([[self._slopes[idx]]])


class Identity(MapBase):
    """Identity on any space."""

    space_kind = None

    def __init__(self, dim: int = 1):
        self.dim = int(dim)
        self.name = "identity"
        self.params = {"dim": self.dim}
        self.monotone = True
        self.lipschitz = 1.0

    def apply(self, pts):
        return pts.copy()

    def derivative(self, x):
        return np.eye(self.dim)

    def preimages(self, y):
        return np.asarray(y, dtype=np.float64).reshape(1, -1)


class CompositeMap(MapBase):
    """Composition of maps, applied left to right (factors[0] acts first)."""

    def __init__(self, factors):
        factors = tuple(factors)
        if not factors:
            raise InputError("composite needs at least one factor")
        kinds = {m.space_kind for m in factors if m.space_kind is not None}
        if len(kinds) > 1:
            raise InputError("composite factors live on different space kinds")
        self.factors = factors
        self.space_kind = kinds.pop() if kinds else None
        self.dim = factors[0].dim
        self.name = "compose"
        self.params = {"factors": [m.describe() for m in factors]}
        self.monotone = all(m.monotone for m in factors)
        self.lipschitz = float(np.prod([m.lipschitz for m in factors]))
        radii = [m.branch_radius for m in factors]
        if all(r is not None for r in radii):
            self.branch_radius = min(radii)
        infos = [m.expanding for m in factors]
        if all(info is not None for info in infos):
            self.expanding = ExpandingMapInfo(
                sigma=float(np.prod([i.sigma for i in infos])),
                rho=min(i.rho for i in infos),
                branch_count=int(np.prod([i.branch_count for i in infos])),
            )

    def apply(self, pts):
        out = pts
        for m in self.factors:
            out = m.apply(out)
        return out

    def derivative(self, x):
        jac = np.eye(self.dim)
        cur = np.atleast_1d(np.asarray(x, dtype=np.float64)).reshape(1, -1)
        for m in self.factors:
            jac = m.derivative(cur[0]) @ jac
            cur = m.apply(cur)
        return jac

    def preimages(self, y):
        pts = np.asarray(y, dtype=np.float64).reshape(1, -1)
        for m in reversed(self.factors):
            pts = np.concatenate([m.preimages(p) for p in pts], axis=0)
            _, keep = np.unique(np.round(pts, 9), axis=0, return_index=True)
            pts = pts[np.sort(keep)]
        return _lexsort_rows(pts)


def make_map(spec) -> MapBase:
    """Build a map from {"family": name, "params": {...}} (or (name, params))."""
    if isinstance(spec, MapBase):
        return spec
    if isinstance(spec, dict):
        family = spec.get("family")
        params = dict(spec.get("params", {}))
    else:
        family, params = spec[0], dict(spec[1])
    try:
        ctor = _FAMILIES[family]
    except KeyError:
        raise InputError(f"unknown map family {family!r}") from None
    return ctor(**params)


_FAMILIES = {
    "circle_affine": CircleAffine,
    "doubling": lambda: CircleAffine(2, 0.0),
    "rotation": lambda alpha: CircleAffine(1, alpha),
    "torus_endo": TorusEndo,
    "pomeau_manneville": PomeauManneville,
    "power": Power,
    "square": lambda: Power(2.0),
    "interval_affine": IntervalAffine,
    "tabulated": Tabulated,
    "identity": Identity,
}
