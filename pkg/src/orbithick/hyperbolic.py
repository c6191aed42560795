"""Geometry of hyperbolic n-space in the upper half-space model.

Points are stored as ``(x, t)`` with ``x`` in R^(n-1) and height ``t > 0``.
Isometries are stored as Lorentz matrices acting on the hyperboloid

    X_i = x_i / t,  X_n = (|x|^2 + t^2 - 1) / (2t),  X_{n+1} = (|x|^2 + t^2 + 1) / (2t),

which preserves the form ``J = diag(1, ..., 1, -1)``.  Internally the action on
half-space points goes through light-cone coordinates ``u = X_{n+1} - X_n = 1/t``
and ``v = X_{n+1} + X_n`` so that heights are recovered without cancellation.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional, Sequence, Union

import numpy as np

__all__ = [
    "Tolerances",
    "DEFAULT_TOL",
    "Point",
    "Isometry",
    "GeodesicRay",
    "TotallyGeodesicSubspace",
    "UnresolvedClassification",
    "INFINITY",
    "lorentz_form",
    "lorentz_inner",
    "to_hyperboloid",
    "from_hyperboloid",
    "boundary_to_light",
    "light_to_boundary",
    "dist",
    "dist_xt",
    "dist_artanh",
    "dist_vertical",
    "dist_horizontal",
    "classify",
    "displacement",
    "apply",
    "apply_xt",
    "cusp_chart",
    "project_to_subspace",
    "fixed_subspace",
    "hyperbolic_ball_to_euclidean",
    "euclidean_ball_to_hyperbolic",
    "midpoint",
    "geodesic_point",
]


@dataclass(frozen=True)
class Tolerances:
    """Numerical tolerances used throughout the package."""

    tol_ortho: float = 1e-9
    tol_eig: float = 1e-8
    tol_id: float = 1e-12
    tol_iso: float = 1e-8
    tol_dedup: float = 1e-8
    tol_geom: float = 1e-9

    @classmethod
    def from_dict(cls, d: Optional[dict]) -> "Tolerances":
        if not d:
            return cls()
        known = {k: float(v) for k, v in d.items() if k in cls.__dataclass_fields__}
        return cls(**known)


DEFAULT_TOL = Tolerances()


class UnresolvedClassification(ArithmeticError):
    """Raised when an isometry cannot be classified within tolerances."""

    def __init__(self, message: str, margins: dict):
        super().__init__(f"{message} (margins: {margins})")
        self.margins = margins


class _Infinity:
    """The boundary point at infinity of the upper half-space."""

    _instance = None

    def __new__(cls):
        if cls._instance is None:
            cls._instance = super().__new__(cls)
        return cls._instance

    def __repr__(self) -> str:
        return "INFINITY"

    def __reduce__(self):
        return (_Infinity, ())


INFINITY = _Infinity()
BoundaryPoint = Union[_Infinity, np.ndarray]


def _frozen(a) -> np.ndarray:
    arr = np.array(a, dtype=float)
    arr.setflags(write=False)
    return arr


# ---------------------------------------------------------------------------
# points and coordinates
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Point:
    """A point ``(x, t)`` of the upper half-space H^n."""

    x: np.ndarray
    t: float

    def __init__(self, x: Sequence[float], t: float):
        xa = _frozen(np.atleast_1d(np.asarray(x, dtype=float)))
        if xa.ndim != 1:
            raise ValueError("horizontal coordinate must be a vector")
        t = float(t)
        if not np.isfinite(t) or t <= 0.0:
            raise ValueError(f"height must be positive and finite, got {t}")
        object.__setattr__(self, "x", xa)
        object.__setattr__(self, "t", t)

    @property
    def n(self) -> int:
        return self.x.shape[0] + 1

    def hyperboloid(self) -> np.ndarray:
        return to_hyperboloid(self.x, self.t)

    @classmethod
    def from_hyperboloid(cls, X: np.ndarray) -> "Point":
        x, t = from_hyperboloid(X)
        return cls(x, float(t))

    def __eq__(self, other) -> bool:
        if not isinstance(other, Point):
            return NotImplemented
        return self.t == other.t and np.array_equal(self.x, other.x)

    def __hash__(self) -> int:
        return hash((self.t, self.x.tobytes()))

    def __repr__(self) -> str:
        return f"Point(x={self.x.tolist()}, t={self.t!r})"


def lorentz_form(n: int) -> np.ndarray:
    """The form diag(1, ..., 1, -1) on R^(n+1)."""
    J = np.eye(n + 1)
    J[n, n] = -1.0
    return J


def lorentz_inner(X: np.ndarray, Y: np.ndarray) -> np.ndarray:
    """Lorentz inner product along the last axis."""
    X = np.asarray(X, dtype=float)
    Y = np.asarray(Y, dtype=float)
    return np.sum(X[..., :-1] * Y[..., :-1], axis=-1) - X[..., -1] * Y[..., -1]


def to_hyperboloid(x: np.ndarray, t) -> np.ndarray:
    """Map half-space coordinates to the hyperboloid (vectorised)."""
    x = np.asarray(x, dtype=float)
    t = np.asarray(t, dtype=float)
    r2 = np.sum(x * x, axis=-1)
    out = np.empty(x.shape[:-1] + (x.shape[-1] + 2,))
    out[..., :-2] = x / t[..., None]
    out[..., -2] = (r2 + t * t - 1.0) / (2.0 * t)
    out[..., -1] = (r2 + t * t + 1.0) / (2.0 * t)
    return out


def from_hyperboloid(X: np.ndarray):
    """Inverse of :func:`to_hyperboloid`; returns ``(x, t)``."""
    X = np.asarray(X, dtype=float)
    u = X[..., -1] - X[..., -2]
    if np.any(u <= 0):
        raise ValueError("vector is not on the future hyperboloid")
    t = 1.0 / u
    x = X[..., :-2] * t[..., None]
    return x, t


def _to_lightcone(x: np.ndarray, t) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    t = np.asarray(t, dtype=float)
    out = np.empty(x.shape[:-1] + (x.shape[-1] + 2,))
    out[..., :-2] = x / t[..., None]
    out[..., -2] = 1.0 / t
    out[..., -1] = (np.sum(x * x, axis=-1) + t * t) / t
    return out


def _from_lightcone(C: np.ndarray):
    u = C[..., -2]
    if np.any(~(u > 0)) or not np.all(np.isfinite(C)):
        raise FloatingPointError("image point left the half-space (overflow near the boundary)")
    t = 1.0 / u
    return C[..., :-2] * t[..., None], t


def _lightcone_basis(n: int) -> np.ndarray:
    """Matrix B with X = B c for light-cone coordinates c = (X_1..X_{n-1}, u, v)."""
    B = np.zeros((n + 1, n + 1))
    B[: n - 1, : n - 1] = np.eye(n - 1)
    B[n - 1, n - 1] = -0.5
    B[n - 1, n] = 0.5
    B[n, n - 1] = 0.5
    B[n, n] = 0.5
    return B


def boundary_to_light(z: BoundaryPoint, n: int) -> np.ndarray:
    """Null vector representing a boundary point."""
    if z is INFINITY:
        v = np.zeros(n + 1)
        v[n - 1] = 1.0
        v[n] = 1.0
        return v
    y = np.asarray(z, dtype=float).reshape(n - 1)
    r2 = float(y @ y)
    return np.concatenate([2.0 * y, [r2 - 1.0, r2 + 1.0]])


def light_to_boundary(v: np.ndarray, rel_tol: float = 1e-10) -> BoundaryPoint:
    """Boundary point represented by a null vector (sign normalised)."""
    v = np.asarray(v, dtype=float)
    if v[-1] < 0:
        v = -v
    u = v[-1] - v[-2]
    if abs(u) <= rel_tol * np.linalg.norm(v):
        return INFINITY
    return v[:-2] / u


# ---------------------------------------------------------------------------
# distances
# ---------------------------------------------------------------------------


def dist_xt(x1, t1, x2, t2) -> np.ndarray:
    """Vectorised distance between half-space points.

    Uses ``sinh(d/2) = |p - q| / (2 sqrt(t s))``, which is stable for small
    distances.
    """
    x1 = np.asarray(x1, dtype=float)
    x2 = np.asarray(x2, dtype=float)
    t1 = np.asarray(t1, dtype=float)
    t2 = np.asarray(t2, dtype=float)
    dx2 = np.sum((x1 - x2) ** 2, axis=-1) + (t1 - t2) ** 2
    return 2.0 * np.arcsinh(np.sqrt(dx2) / (2.0 * np.sqrt(t1 * t2)))


def _check_same_dim(p: Point, q: Point) -> None:
    if p.n != q.n:
        raise ValueError(f"dimension mismatch: {p.n} vs {q.n}")


def dist(p: Point, q: Point) -> float:
    """Hyperbolic distance between two points."""
    _check_same_dim(p, q)
    return float(dist_xt(p.x, p.t, q.x, q.t))


def dist_artanh(p: Point, q: Point) -> float:
    """General closed form ``2 artanh(|p - q| / |p - q*|)`` with ``q* = (y, -s)``."""
    _check_same_dim(p, q)
    num = np.sqrt(np.sum((p.x - q.x) ** 2) + (p.t - q.t) ** 2)
    den = np.sqrt(np.sum((p.x - q.x) ** 2) + (p.t + q.t) ** 2)
    return float(2.0 * np.arctanh(num / den))


def dist_vertical(t: float, s: float) -> float:
    """Distance between points on a common vertical line."""
    return abs(float(np.log(t / s)))


def dist_horizontal(x, y, t: float) -> float:
    """Distance between points at a common height ``t``."""
    d = np.linalg.norm(np.asarray(x, dtype=float) - np.asarray(y, dtype=float))
    return float(2.0 * np.arcsinh(d / (2.0 * t)))


def hyperbolic_ball_to_euclidean(p: Point, rho: float):
    """Euclidean centre and radius of the hyperbolic ball ``B(p, rho)``."""
    c = np.concatenate([p.x, [p.t * np.cosh(rho)]])
    return c, p.t * np.sinh(rho)


def euclidean_ball_to_hyperbolic(center, r: float):
    """Hyperbolic centre and radius of a Euclidean ball in the half-space."""
    center = np.asarray(center, dtype=float)
    h = center[-1]
    if r >= h:
        raise ValueError("Euclidean ball meets the boundary")
    return Point(center[:-1], np.sqrt(h * h - r * r)), float(np.arctanh(r / h))


def geodesic_point(p: Point, q: Point, s: float) -> Point:
    """Point at fraction ``s`` of the way from ``p`` to ``q`` along the geodesic."""
    X, Y = p.hyperboloid(), q.hyperboloid()
    d = dist(p, q)
    if d == 0.0:
        return p
    a = np.sinh((1.0 - s) * d) / np.sinh(d)
    b = np.sinh(s * d) / np.sinh(d)
    return Point.from_hyperboloid(a * X + b * Y)


def midpoint(p: Point, q: Point) -> Point:
    return geodesic_point(p, q, 0.5)


# ---------------------------------------------------------------------------
# isometries
# ---------------------------------------------------------------------------


def classify(L: np.ndarray, tol: Tolerances = DEFAULT_TOL):
    """Classify a Lorentz matrix.

    Returns
    -------
    kind : str
        One of ``"identity"``, ``"elliptic"``, ``"parabolic"``, ``"hyperbolic"``.
    translation_length : float
        ``ln`` of the spectral radius for hyperbolic elements, else 0.
    """
    L = np.asarray(L, dtype=float)
    if L.ndim != 2 or L.shape[0] != L.shape[1] or L.shape[0] < 3:
        raise ValueError("expected a square matrix of size n+1 >= 3")
    m = L.shape[0]
    n = m - 1
    J = lorentz_form(n)
    scale = max(1.0, float(np.linalg.norm(L, 2)))
    defect = float(np.linalg.norm(L.T @ J @ L - J)) / scale**2
    if defect > tol.tol_ortho:
        raise ValueError(f"matrix does not preserve the Lorentz form (defect {defect:.3e})")
    if L[n, n] <= 0:
        raise ValueError("matrix reverses time orientation")

    I = np.eye(m)
    if np.linalg.norm(L - I) < tol.tol_id:
        return "identity", 0.0

    kthresh = tol.tol_eig * scale
    _, s, vt = np.linalg.svd(L - I)
    K = vt[s < kthresh].T
    if K.shape[1] > 0:
        G = K.T @ J @ K
        g = np.linalg.eigvalsh(G)
        gthresh = tol.tol_eig
        if g[0] < -gthresh:
            return "elliptic", 0.0
        if abs(g[0]) <= gthresh:
            return "parabolic", 0.0
        gmargin = float(g[0])
    else:
        gmargin = None

    ev = np.linalg.eigvals(L)
    rho = float(np.max(np.abs(ev)))
    if rho > 1.0 + tol.tol_eig:
        return "hyperbolic", float(np.log(rho))
    raise UnresolvedClassification(
        "isometry is neither clearly hyperbolic nor has a resolved fixed point",
        {
            "spectral_radius_minus_one": rho - 1.0,
            "kernel_dim": int(K.shape[1]),
            "min_kernel_gram_eigenvalue": gmargin,
            "smallest_singular_value_of_L_minus_I": float(s[-1]),
        },
    )


@dataclass(frozen=True)
class Isometry:
    """An isometry of H^n stored as a Lorentz matrix.

    Construct with :meth:`from_matrix` (which classifies) or one of the
    helper constructors.
    """

    L: np.ndarray
    kind: str
    translation_length: float
    _lc: np.ndarray = field(repr=False, compare=False)

    @property
    def n(self) -> int:
        return self.L.shape[0] - 1

    @classmethod
    def from_matrix(cls, L, tol: Tolerances = DEFAULT_TOL, kind: Optional[str] = None,
                    translation_length: Optional[float] = None) -> "Isometry":
        L = np.array(L, dtype=float)
        if kind is None:
            kind, translation_length = classify(L, tol)
        elif translation_length is None:
            translation_length = 0.0
        n = L.shape[0] - 1
        B = _lightcone_basis(n)
        lc = np.linalg.solve(B, L @ B)
        return cls(_frozen(L), kind, float(translation_length), _frozen(lc))

    @classmethod
    def identity(cls, n: int) -> "Isometry":
        return cls.from_matrix(np.eye(n + 1), kind="identity", translation_length=0.0)

    @classmethod
    def from_lightcone(cls, M: np.ndarray, tol: Tolerances = DEFAULT_TOL) -> "Isometry":
        n = M.shape[0] - 1
        B = _lightcone_basis(n)
        return cls.from_matrix(B @ M @ np.linalg.inv(B), tol)

    @classmethod
    def translation(cls, b: Sequence[float], tol: Tolerances = DEFAULT_TOL) -> "Isometry":
        """Horizontal translation ``x -> x + b``."""
        b = np.asarray(b, dtype=float)
        k = b.shape[0]
        M = np.eye(k + 2)
        M[:k, k] = b
        M[k + 1, :k] = 2.0 * b
        M[k + 1, k] = float(b @ b)
        return cls.from_lightcone(M, tol)

    @classmethod
    def dilation(cls, n: int, lam: float, tol: Tolerances = DEFAULT_TOL) -> "Isometry":
        """Dilation ``(x, t) -> lam (x, t)``; a boost of length ``|ln lam|``."""
        M = np.eye(n + 1)
        M[n - 1, n - 1] = 1.0 / lam
        M[n, n] = lam
        return cls.from_lightcone(M, tol)

    @classmethod
    def boost(cls, n: int, s: float, tol: Tolerances = DEFAULT_TOL) -> "Isometry":
        """Boost translating the vertical axis through ``x = 0`` by ``s``."""
        return cls.dilation(n, float(np.exp(s)), tol)

    @classmethod
    def rotation(cls, R: np.ndarray, tol: Tolerances = DEFAULT_TOL) -> "Isometry":
        """Orthogonal map ``(x, t) -> (R x, t)`` fixing the vertical axis ``x = 0``."""
        R = np.asarray(R, dtype=float)
        k = R.shape[0]
        M = np.eye(k + 2)
        M[:k, :k] = R
        return cls.from_lightcone(M, tol)

    @classmethod
    def inversion(cls, n: int, tol: Tolerances = DEFAULT_TOL) -> "Isometry":
        """Inversion in the unit sphere, swapping 0 and infinity."""
        L = np.eye(n + 1)
        L[n - 1, n - 1] = -1.0
        return cls.from_matrix(L, tol)

    @classmethod
    def from_points(cls, X: np.ndarray, Y: np.ndarray, tol: Tolerances = DEFAULT_TOL) -> "Isometry":
        """Lorentz matrix sending hyperboloid points ``X[k]`` to ``Y[k]`` (least squares)."""
        sol, *_ = np.linalg.lstsq(np.asarray(X), np.asarray(Y), rcond=None)
        return cls.from_matrix(sol.T, tol)

    @classmethod
    def from_sl2r(cls, A, tol: Tolerances = DEFAULT_TOL) -> "Isometry":
        """Convert a real 2x2 matrix acting by Moebius maps on H^2.

        Matrices of negative determinant act by ``z -> (a conj(z) + b)/(c conj(z) + d)``.
        """
        A = np.asarray(A, dtype=float)
        det = float(np.linalg.det(A))
        if abs(det) < 1e-14:
            raise ValueError("singular matrix")
        a, b, c, d = (A / np.sqrt(abs(det))).ravel()
        xs = np.array([0.0, 1.0, -1.0, 0.5, 0.0, 2.0])
        ts = np.array([1.0, 1.0, 2.0, 0.5, 3.0, 0.7])
        z = xs + 1j * ts
        if det < 0:
            z = np.conj(z)
        w = (a * z + b) / (c * z + d)
        X = to_hyperboloid(xs[:, None], ts)
        Y = to_hyperboloid(w.real[:, None], np.abs(w.imag))
        return cls.from_points(X, Y, tol)

    @classmethod
    def from_sl2c(cls, A, tol: Tolerances = DEFAULT_TOL) -> "Isometry":
        """Convert a complex 2x2 matrix acting on H^3 = C x R_{>0}."""
        A = np.asarray(A, dtype=complex)
        det = complex(np.linalg.det(A))
        if abs(det) < 1e-14:
            raise ValueError("singular matrix")
        a, b, c, d = (A / np.sqrt(det)).ravel()
        pts = np.array(
            [[0.0, 0.0, 1.0], [1.0, 0.0, 1.0], [0.0, 1.0, 1.0], [0.0, 0.0, 2.0],
             [1.0, 1.0, 0.5], [-0.5, 0.3, 1.7], [0.2, -1.1, 0.8]]
        )
        z = pts[:, 0] + 1j * pts[:, 1]
        t = pts[:, 2]
        den = np.abs(c * z + d) ** 2 + np.abs(c) ** 2 * t**2
        zp = ((a * z + b) * np.conj(c * z + d) + a * np.conj(c) * t**2) / den
        tp = t / den
        X = to_hyperboloid(pts[:, :2], t)
        Y = to_hyperboloid(np.stack([zp.real, zp.imag], axis=1), tp)
        return cls.from_points(X, Y, tol)

    def __matmul__(self, other: "Isometry") -> "Isometry":
        return Isometry.from_matrix(self.L @ other.L)

    def inverse(self) -> "Isometry":
        J = lorentz_form(self.n)
        return Isometry.from_matrix(J @ self.L.T @ J, kind=self.kind,
                                    translation_length=self.translation_length)

    def apply_xt(self, x: np.ndarray, t) -> tuple:
        """Vectorised action on half-space coordinates."""
        C = _to_lightcone(x, t)
        return _from_lightcone(C @ self._lc.T)

    def fixed_boundary_points(self, tol: Tolerances = DEFAULT_TOL) -> list:
        """Boundary fixed points: one for parabolic, two (repelling, attracting) for hyperbolic."""
        n = self.n
        if self.kind == "parabolic":
            scale = max(1.0, float(np.linalg.norm(self.L, 2)))
            _, s, vt = np.linalg.svd(self.L - np.eye(n + 1))
            K = vt[s < tol.tol_eig * scale].T
            G = K.T @ lorentz_form(n) @ K
            w, V = np.linalg.eigh(G)
            v = K @ V[:, int(np.argmin(np.abs(w)))]
            return [light_to_boundary(v)]
        if self.kind == "hyperbolic":
            ev, V = np.linalg.eig(self.L)
            i_max = int(np.argmax(np.abs(ev)))
            i_min = int(np.argmin(np.abs(ev)))
            return [light_to_boundary(np.real(V[:, i_min])), light_to_boundary(np.real(V[:, i_max]))]
        return []


def apply(g: Isometry, p: Point) -> Point:
    """Image of a point under an isometry."""
    if g.n != p.n:
        raise ValueError(f"dimension mismatch: {g.n} vs {p.n}")
    x, t = g.apply_xt(p.x[None, :], np.array([p.t]))
    return Point(x[0], float(t[0]))


def apply_xt(g: Isometry, x: np.ndarray, t) -> tuple:
    return g.apply_xt(x, t)


def displacement(g: Isometry, p: Point) -> float:
    """``d(p, g p)``."""
    return dist(p, apply(g, p))


def cusp_chart(z: BoundaryPoint, n: int) -> Isometry:
    """Isometry moving the boundary point ``z`` to infinity.

    For ``z = 0`` this is the inversion in the unit sphere; other finite points
    use that inversion conjugated by the translation taking ``z`` to 0, which is
    again an involution.
    """
    if z is INFINITY:
        return Isometry.identity(n)
    z = np.asarray(z, dtype=float).reshape(n - 1)
    inv = Isometry.inversion(n)
    if not np.any(z):
        return inv
    return Isometry.translation(z) @ inv @ Isometry.translation(-z)


# ---------------------------------------------------------------------------
# rays and totally geodesic subspaces
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class GeodesicRay:
    """Geodesic ray from ``base`` to a boundary point."""

    base: Point
    endpoint: BoundaryPoint

    def point_at(self, s: float) -> Point:
        if self.endpoint is INFINITY:
            return Point(self.base.x, self.base.t * np.exp(s))
        # move the endpoint to infinity, flow vertically, move back
        C = cusp_chart(self.endpoint, self.base.n)
        q = apply(C, self.base)
        return apply(C.inverse(), Point(q.x, q.t * np.exp(s)))


class TotallyGeodesicSubspace:
    """A totally geodesic copy of H^k inside H^n.

    Stored by a Lorentz-orthonormal basis ``b_0, ..., b_k`` of the underlying
    linear subspace, with ``b_0`` timelike.
    """

    def __init__(self, basis: np.ndarray):
        basis = np.array(basis, dtype=float)
        if basis.ndim != 2 or basis.shape[1] < 1:
            raise ValueError("basis must be an (n+1) x (k+1) array")
        J = lorentz_form(basis.shape[0] - 1)
        G = basis.T @ J @ basis
        target = np.eye(basis.shape[1])
        target[0, 0] = -1.0
        if np.linalg.norm(G - target) > 1e-8:
            raise ValueError("degenerate or non-orthonormal basis")
        if basis[-1, 0] < 0:
            basis[:, 0] = -basis[:, 0]
        basis.setflags(write=False)
        self.basis = basis

    @property
    def n(self) -> int:
        return self.basis.shape[0] - 1

    @property
    def dim(self) -> int:
        return self.basis.shape[1] - 1

    @classmethod
    def from_span(cls, K: np.ndarray, tol: float = 1e-9) -> Optional["TotallyGeodesicSubspace"]:
        """Subspace spanned by the columns of ``K``; ``None`` if it misses H^n."""
        K = np.asarray(K, dtype=float)
        if K.shape[1] == 0:
            return None
        Q, _ = np.linalg.qr(K)
        J = lorentz_form(K.shape[0] - 1)
        G = Q.T @ J @ Q
        w, V = np.linalg.eigh(G)
        if w[0] >= -tol or (w.size > 1 and w[1] <= tol):
            return None
        B = Q @ V
        B = B / np.sqrt(np.abs(w))[None, :]
        return cls(B)

    @classmethod
    def whole_space(cls, n: int) -> "TotallyGeodesicSubspace":
        B = np.eye(n + 1)
        return cls(B[:, [n] + list(range(n))])

    @classmethod
    def through_points(cls, pts: Sequence[Point]) -> Optional["TotallyGeodesicSubspace"]:
        return cls.from_span(np.stack([p.hyperboloid() for p in pts], axis=1))

    def _coeffs(self, X: np.ndarray) -> np.ndarray:
        return np.stack([lorentz_inner(X, self.basis[:, j]) for j in range(self.basis.shape[1])], axis=-1)

    def cosh_dist(self, X: np.ndarray) -> np.ndarray:
        c = self._coeffs(X)
        val = c[..., 0] ** 2 - np.sum(c[..., 1:] ** 2, axis=-1)
        return np.sqrt(np.maximum(val, 1.0))

    def distance(self, p: Point) -> float:
        return float(np.arccosh(self.cosh_dist(p.hyperboloid())))

    def distance_xt(self, x: np.ndarray, t) -> np.ndarray:
        return np.arccosh(self.cosh_dist(to_hyperboloid(x, t)))

    def project_hyperboloid(self, X: np.ndarray) -> np.ndarray:
        c = self._coeffs(X)
        P = -c[..., :1] * self.basis[:, 0] + c[..., 1:] @ self.basis[:, 1:].T
        nrm = np.sqrt(-lorentz_inner(P, P))
        return P / nrm[..., None]

    def contains(self, p: Point, tol: float = 1e-8) -> bool:
        return self.distance(p) < tol

    def sample(self, rng: np.random.Generator, m: int, radius: float = 1.0) -> list:
        """``m`` points of the subspace within ``radius`` of its base point."""
        out = []
        k = self.dim
        for _ in range(m):
            if k == 0:
                v = np.zeros(0)
            else:
                v = rng.normal(size=k)
                v *= rng.uniform(0, radius) / max(np.linalg.norm(v), 1e-300)
            r = float(np.linalg.norm(v)) if k else 0.0
            X = np.cosh(r) * self.basis[:, 0]
            if k and r > 0:
                X = X + np.sinh(r) * (self.basis[:, 1:] @ (v / r))
            out.append(Point.from_hyperboloid(X))
        return out

    def transformed(self, g: Isometry) -> "TotallyGeodesicSubspace":
        return TotallyGeodesicSubspace(g.L @ self.basis)

    def projector(self) -> np.ndarray:
        """Matrix of the Lorentz-orthogonal projection onto the span."""
        J = lorentz_form(self.n)
        S = np.diag([-1.0] + [1.0] * self.dim)
        return self.basis @ S @ self.basis.T @ J

    def same_as(self, other: "TotallyGeodesicSubspace", tol: float = 1e-7) -> bool:
        if self.dim != other.dim:
            return False
        return float(np.linalg.norm(self.projector() - other.projector())) < tol * max(
            1.0, float(np.linalg.norm(self.projector()))
        )

    @property
    def is_vertical(self) -> bool:
        """Whether infinity lies in the closure, i.e. the subspace is a vertical flat."""
        inf = boundary_to_light(INFINITY, self.n)
        P = self.projector()
        return bool(np.linalg.norm(P @ inf - inf) < 1e-8)

    def vertical_description(self):
        """For vertical subspaces: ``(x0, D)`` with the subspace ``{(x0 + D s, t)}``."""
        if not self.is_vertical:
            raise ValueError("subspace is not vertical")
        n = self.n
        p = Point.from_hyperboloid(self.basis[:, 0])
        x0 = p.x
        dirs = []
        for j in range(1, self.dim + 1):
            q = Point.from_hyperboloid(np.cosh(1.0) * self.basis[:, 0] + np.sinh(1.0) * self.basis[:, j])
            dirs.append(q.x - x0)
        if not dirs:
            return x0, np.zeros((n - 1, 0))
        D = np.stack(dirs, axis=1)
        U, s, _ = np.linalg.svd(D, full_matrices=False)
        return x0, U[:, s > 1e-9]

    def __repr__(self) -> str:
        return f"TotallyGeodesicSubspace(n={self.n}, dim={self.dim})"


def project_to_subspace(Y: TotallyGeodesicSubspace, p: Point) -> Point:
    """Nearest-point projection onto a totally geodesic subspace."""
    if Y.n != p.n:
        raise ValueError("dimension mismatch")
    return Point.from_hyperboloid(Y.project_hyperboloid(p.hyperboloid()))


def fixed_subspace(gens: Sequence[Isometry], tol: Tolerances = DEFAULT_TOL) -> Optional[TotallyGeodesicSubspace]:
    """Common fixed set of elliptic isometries, or ``None`` if it is empty."""
    if not gens:
        raise ValueError("need at least one isometry")
    n = gens[0].n
    for g in gens:
        if g.kind not in ("identity", "elliptic"):
            raise ValueError(f"expected elliptic or identity, got {g.kind}")
        if g.n != n:
            raise ValueError("dimension mismatch")
    A = np.concatenate([g.L - np.eye(n + 1) for g in gens], axis=0)
    scale = max(1.0, max(float(np.linalg.norm(g.L, 2)) for g in gens))
    _, s, vt = np.linalg.svd(A)
    s_full = np.zeros(n + 1)
    s_full[: s.size] = s
    K = vt[s_full < tol.tol_eig * scale * 10].T
    return TotallyGeodesicSubspace.from_span(K)
