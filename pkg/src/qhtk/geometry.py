"""Ambient norms, explicit domains, and exact distance-to-boundary oracles.

Domains are constructive: an intersection of primitives with closed-form
boundary distances (half-spaces, ambient-norm balls, slabs, boxes, planar
polygons), minus removed points, segments, or the countable axis-point
family used by the non-geodesic example.  Exactness of d(x, boundary) is
what every downstream quadrature and solve rests on, so there are no
general implicit surfaces here.

All oracles are vectorized over arrays of points of shape (N, dim).
Every object is immutable after construction.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

SQRT2 = float(np.sqrt(2.0))


class QHError(Exception):
    """Base class for toolkit errors."""


class InvalidInputError(QHError):
    pass


class DomainViolationError(QHError):
    """Query point outside the open domain (or exactly on its boundary)."""


class CertificationError(QHError):
    """A truncation / resolution certificate could not be established."""


def _as_points(x, dim=None):
    """Return points as a (N, dim) float array plus a flag for 1-D input."""
    a = np.asarray(x, dtype=float)
    single = a.ndim == 1
    if single:
        a = a[None, :]
    if a.ndim != 2:
        raise InvalidInputError(f"expected point array, got shape {a.shape}")
    if not np.isfinite(a).all():
        raise InvalidInputError("non-finite coordinates")
    if dim is not None and a.shape[1] != dim:
        raise InvalidInputError(f"dimension mismatch: expected {dim}, got {a.shape[1]}")
    return a, single


# ---------------------------------------------------------------------------
# norms
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class NormSpec:
    """Ambient norm: Euclidean or an l^p norm with exponent p in (1, inf)."""

    kind: str = "euclidean"
    p: float | None = None

    def __post_init__(self):
        if self.kind not in ("euclidean", "p"):
            raise InvalidInputError(f"unknown norm kind {self.kind!r}")
        if self.kind == "p":
            if self.p is None or not np.isfinite(self.p) or self.p <= 1.0:
                raise InvalidInputError("p-norm exponent must be finite and > 1")

    @property
    def exponent(self):
        return 2.0 if self.kind == "euclidean" else float(self.p)

    @property
    def dual_exponent(self):
        p = self.exponent
        return p / (p - 1.0)

    def eval(self, v):
        """Norm of v; vectorized over the last axis.

        Rows that underflow to zero are recomputed after rescaling by
        their max coordinate, so the norm vanishes only at the origin.
        """
        v = np.asarray(v, dtype=float)
        if self.kind == "euclidean":
            out = np.sqrt(np.sum(v * v, axis=-1))
        else:
            out = np.sum(np.abs(v) ** self.p, axis=-1) ** (1.0 / self.p)
        vmax = np.max(np.abs(v), axis=-1)
        bad = (out == 0.0) & (vmax > 0.0)
        if np.any(bad):
            scaled = self.eval(v[bad] / vmax[bad, ..., None] if v.ndim > 1 else v / vmax)
            if v.ndim > 1:
                out = np.where(bad, 0.0, out)
                out[bad] = vmax[bad] * scaled
            else:
                out = vmax * scaled
        return out

    def dual_eval(self, v):
        v = np.asarray(v, dtype=float)
        if self.kind == "euclidean":
            return np.sqrt(np.sum(v * v, axis=-1))
        q = self.dual_exponent
        return np.sum(np.abs(v) ** q, axis=-1) ** (1.0 / q)


EUCLIDEAN = NormSpec()


def norm_eval(norm: NormSpec, v):
    """Evaluate ``norm`` on the vector v (scalar result).

    Raises on non-finite input; returns 0 iff v = 0.
    """
    a = np.asarray(v, dtype=float)
    if a.ndim != 1 or a.size < 1:
        raise InvalidInputError("norm_eval expects a single vector")
    if not np.isfinite(a).all():
        raise InvalidInputError("non-finite vector")
    return float(norm.eval(a))


# ---------------------------------------------------------------------------
# primitives (intersected to form the open set)
# ---------------------------------------------------------------------------
#
# Each primitive answers, for an (N, dim) array of points, a "depth":
# positive inside, <= 0 outside, and for interior points equal to the exact
# ambient-norm distance to the primitive's boundary.

@dataclass(frozen=True)
class HalfSpace:
    """Open half-space {x : normal . x > offset}."""

    normal: tuple
    offset: float
    convex = True

    def depth(self, X, norm):
        n = np.asarray(self.normal, dtype=float)
        return (X @ n - self.offset) / float(norm.dual_eval(n))


@dataclass(frozen=True)
class BallPrimitive:
    """Open ambient-norm ball {x : ||x - center|| < radius}."""

    center: tuple
    radius: float
    convex = True

    def depth(self, X, norm):
        c = np.asarray(self.center, dtype=float)
        return self.radius - norm.eval(X - c)


@dataclass(frozen=True)
class Slab:
    """Open slab {x : lower < x[axis] < upper}; distances are axis-exact in any p-norm."""

    axis: int
    lower: float
    upper: float
    convex = True

    def depth(self, X, norm):
        t = X[:, self.axis]
        return np.minimum(t - self.lower, self.upper - t)


@dataclass(frozen=True)
class BoxPrimitive:
    """Open axis-aligned box."""

    lower: tuple
    upper: tuple
    convex = True

    def depth(self, X, norm):
        lo = np.asarray(self.lower, dtype=float)
        hi = np.asarray(self.upper, dtype=float)
        return np.minimum(X - lo, hi - X).min(axis=1)


def _segment_distance(X, a, b, norm):
    """Distance from points X (N, d) to the closed segment [a, b].

    Euclidean uses the closed-form projection; p-norms use a ternary search
    on the convex map t -> ||X - (a + t (b-a))||.
    """
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    d = b - a
    if norm.kind == "euclidean":
        dd = float(d @ d)
        if dd == 0.0:
            return norm.eval(X - a)
        t = np.clip(((X - a) @ d) / dd, 0.0, 1.0)
        return np.sqrt(np.sum((X - (a + t[:, None] * d)) ** 2, axis=1))
    lo = np.zeros(X.shape[0])
    hi = np.ones(X.shape[0])
    for _ in range(80):  # (2/3)^80 ~ 1e-14 bracket width
        m1 = lo + (hi - lo) / 3.0
        m2 = hi - (hi - lo) / 3.0
        f1 = norm.eval(X - (a + m1[:, None] * d))
        f2 = norm.eval(X - (a + m2[:, None] * d))
        take = f1 < f2
        hi = np.where(take, m2, hi)
        lo = np.where(take, lo, m1)
    t = 0.5 * (lo + hi)
    return norm.eval(X - (a + t[:, None] * d))


@dataclass(frozen=True)
class Polygon:
    """Open simple polygon in the plane (vertex list, any orientation)."""

    vertices: tuple

    def __post_init__(self):
        V = np.asarray(self.vertices, dtype=float)
        if V.ndim != 2 or V.shape[1] != 2 or V.shape[0] < 3:
            raise InvalidInputError("polygon needs >= 3 planar vertices")

    @property
    def convex(self):
        V = np.asarray(self.vertices, dtype=float)
        e = np.roll(V, -1, axis=0) - V
        cross = e[:, 0] * np.roll(e, -1, axis=0)[:, 1] - e[:, 1] * np.roll(e, -1, axis=0)[:, 0]
        return bool((cross >= -1e-14).all() or (cross <= 1e-14).all())

    def _inside(self, X):
        V = np.asarray(self.vertices, dtype=float)
        inside = np.zeros(X.shape[0], dtype=bool)
        x, y = X[:, 0], X[:, 1]
        n = V.shape[0]
        for i in range(n):  # even-odd crossing rule
            x1, y1 = V[i]
            x2, y2 = V[(i + 1) % n]
            crosses = (y1 > y) != (y2 > y)
            with np.errstate(divide="ignore", invalid="ignore"):
                xint = x1 + (y - y1) * (x2 - x1) / (y2 - y1)
            inside ^= crosses & (x < np.where(crosses, xint, np.inf))
        return inside

    def depth(self, X, norm):
        V = np.asarray(self.vertices, dtype=float)
        n = V.shape[0]
        dist = np.full(X.shape[0], np.inf)
        for i in range(n):
            dist = np.minimum(dist, _segment_distance(X, V[i], V[(i + 1) % n], norm))
        return np.where(self._inside(X), dist, -dist)


# ---------------------------------------------------------------------------
# removals (closed null sets deleted from the primitive intersection)
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class RemovedPoint:
    point: tuple

    def distance(self, X, norm):
        return norm.eval(X - np.asarray(self.point, dtype=float))


@dataclass(frozen=True)
class RemovedSegment:
    a: tuple
    b: tuple

    def distance(self, X, norm):
        return _segment_distance(X, self.a, self.b, norm)


@dataclass(frozen=True)
class AxisPointFamily:
    """The countable family {+-sqrt(2)(1 - 1/i) e_i : i >= 2}.

    Distances are exact: for a point supported on coordinates 1..m the
    candidates at i > m have squared distance ||x||^2 + 2 (1-1/i)^2, which
    is strictly increasing in i, so a scan up to the support plus the first
    tail term is a certified minimum.  Euclidean ambient norm only.
    """

    start_index: int = 2

    @staticmethod
    def _coef(i):
        return SQRT2 * (1.0 - 1.0 / np.asarray(i, dtype=float))

    def distance(self, X, norm):
        if norm.kind != "euclidean":
            raise InvalidInputError("axis point family requires the Euclidean norm")
        m = X.shape[1]
        nn = np.sum(X * X, axis=1)
        best = np.full(X.shape[0], np.inf)
        for i in range(max(2, self.start_index), m + 1):
            c = SQRT2 * (1.0 - 1.0 / i)
            cand = nn - 2.0 * c * np.abs(X[:, i - 1]) + c * c
            best = np.minimum(best, cand)
        c_tail = SQRT2 * (1.0 - 1.0 / (m + 1))
        best = np.minimum(best, nn + c_tail * c_tail)
        return np.sqrt(np.maximum(best, 0.0))

    def tail_lower_bound(self, X, truncation):
        c = SQRT2 * (1.0 - 1.0 / (truncation + 1))
        return np.sqrt(np.sum(X * X, axis=1) + c * c)


# ---------------------------------------------------------------------------
# domains
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class DomainSpec:
    """Open set: intersection of primitives minus closed removals.

    ``depth_many`` returns exact boundary distances for interior points and
    non-positive values outside (usable as an inside mask); the public
    ``boundary_distance`` validates interiority and raises otherwise.
    """

    dimension: int
    primitives: tuple = ()
    removals: tuple = ()
    norm: NormSpec = EUCLIDEAN
    name: str = ""

    def __post_init__(self):
        if self.dimension < 2:
            raise InvalidInputError("domains need dimension >= 2")
        if not self.primitives and not self.removals:
            raise InvalidInputError("domain must have a non-empty boundary")
        # batch homogeneous removals once; they dominate the oracle cost
        pts = [r.point for r in self.removals if type(r) is RemovedPoint]
        segs = [(r.a, r.b) for r in self.removals if type(r) is RemovedSegment]
        euclid = self.norm.kind == "euclidean"
        object.__setattr__(
            self, "_pts", np.asarray(pts, dtype=float) if (pts and euclid) else None
        )
        if segs and euclid:
            A = np.asarray([s[0] for s in segs], dtype=float)
            B = np.asarray([s[1] for s in segs], dtype=float)
            D = B - A
            object.__setattr__(self, "_segA", A)
            object.__setattr__(self, "_segD", D)
            object.__setattr__(self, "_segDD", np.maximum((D * D).sum(axis=1), 1e-300))
        else:
            object.__setattr__(self, "_segA", None)
        object.__setattr__(
            self,
            "_slow_removals",
            tuple(
                r for r in self.removals
                if not (euclid and type(r) in (RemovedPoint, RemovedSegment))
            ),
        )

    @property
    def is_convex(self):
        return not self.removals and all(p.convex for p in self.primitives)

    def depth_many(self, X):
        X, _ = _as_points(X, self.dimension)
        d = np.full(X.shape[0], np.inf)
        for p in self.primitives:
            d = np.minimum(d, p.depth(X, self.norm))
        if self._pts is not None:
            diff = X[:, None, :] - self._pts[None, :, :]
            d2 = np.einsum("nkd,nkd->nk", diff, diff).min(axis=1)
            d = np.minimum(d, np.sqrt(d2))
        if self._segA is not None:
            diff = X[:, None, :] - self._segA[None, :, :]
            t = np.einsum("nkd,kd->nk", diff, self._segD) / self._segDD
            np.clip(t, 0.0, 1.0, out=t)
            gap = diff - t[:, :, None] * self._segD[None, :, :]
            d2 = np.einsum("nkd,nkd->nk", gap, gap).min(axis=1)
            d = np.minimum(d, np.sqrt(d2))
        for r in self._slow_removals:
            d = np.minimum(d, r.distance(X, self.norm))
        return d

    def contains_many(self, X):
        return self.depth_many(X) > 0.0

    def contains(self, x):
        """Membership in the open set; dimension-checked."""
        X, _ = _as_points(x, self.dimension)
        return bool(self.contains_many(X)[0])

    def boundary_distance_many(self, X):
        X, _ = _as_points(X, self.dimension)
        d = self.depth_many(X)
        if (d <= 0.0).any():
            raise DomainViolationError("point outside (or on the boundary of) the domain")
        return d

    def boundary_distance(self, x):
        X, _ = _as_points(x, self.dimension)
        return float(self.boundary_distance_many(X)[0])

    def window_hint(self):
        """Axis bounds implied by the primitives (None per side if unbounded)."""
        lo = [None] * self.dimension
        hi = [None] * self.dimension
        for p in self.primitives:
            if isinstance(p, Slab):
                lo[p.axis] = p.lower if lo[p.axis] is None else max(lo[p.axis], p.lower)
                hi[p.axis] = p.upper if hi[p.axis] is None else min(hi[p.axis], p.upper)
            elif isinstance(p, BoxPrimitive):
                for j in range(self.dimension):
                    lo[j] = p.lower[j] if lo[j] is None else max(lo[j], p.lower[j])
                    hi[j] = p.upper[j] if hi[j] is None else min(hi[j], p.upper[j])
            elif isinstance(p, BallPrimitive):
                c = np.asarray(p.center, dtype=float)
                for j in range(self.dimension):
                    l, h = c[j] - p.radius, c[j] + p.radius
                    lo[j] = l if lo[j] is None else max(lo[j], l)
                    hi[j] = h if hi[j] is None else min(hi[j], h)
            elif isinstance(p, Polygon):
                V = np.asarray(p.vertices, dtype=float)
                for j in range(2):
                    l, h = V[:, j].min(), V[:, j].max()
                    lo[j] = l if lo[j] is None else max(lo[j], l)
                    hi[j] = h if hi[j] is None else min(hi[j], h)
            elif isinstance(p, HalfSpace):
                n = np.asarray(p.normal, dtype=float)
                j = int(np.argmax(np.abs(n)))
                if np.abs(n[j]) > 0.999999 * np.linalg.norm(n):
                    # axis-aligned half-space bounds one side
                    if n[j] > 0:
                        lo[j] = p.offset / n[j] if lo[j] is None else max(lo[j], p.offset / n[j])
                    else:
                        hi[j] = p.offset / n[j] if hi[j] is None else min(hi[j], p.offset / n[j])
        return lo, hi


@dataclass(frozen=True)
class StarlikeDomain3D:
    """Star-like 3-D set: the open unit cylinder around the x3 axis with the
    axis ray {x1 = x2 = 0, x3 >= 1/2} deleted, glued over x3 < 1/2 to the
    open ball around (0, 0, 1/2) of radius 1.

    Interior boundary distances reduce to two closed forms:
      x3 >= 1/2 : min(rho, 1 - rho)            rho = sqrt(x1^2 + x2^2)
      x3 <  1/2 : min(||x - c||, 1 - ||x - c||)  c = (0, 0, 1/2)
    since the deleted ray's tip is c and the rim circle lies on the sphere.
    """

    dimension: int = 3
    norm: NormSpec = EUCLIDEAN
    name: str = "starlike3d"
    is_convex = False

    def depth_many(self, X):
        X, _ = _as_points(X, 3)
        rho = np.sqrt(X[:, 0] ** 2 + X[:, 1] ** 2)
        upper = np.minimum(rho, 1.0 - rho)
        rc = np.sqrt(rho * rho + (X[:, 2] - 0.5) ** 2)
        lower = np.minimum(rc, 1.0 - rc)
        return np.where(X[:, 2] >= 0.5, upper, lower)

    def contains_many(self, X):
        return self.depth_many(X) > 0.0

    def contains(self, x):
        X, _ = _as_points(x, 3)
        return bool(self.contains_many(X)[0])

    def boundary_distance_many(self, X):
        d = self.depth_many(X)
        if (d <= 0.0).any():
            raise DomainViolationError("point outside (or on the boundary of) the domain")
        return d

    def boundary_distance(self, x):
        X, _ = _as_points(x, 3)
        return float(self.boundary_distance_many(X)[0])

    def window_hint(self):
        return [-1.0, -1.0, -0.5], [1.0, 1.0, None]


# ---------------------------------------------------------------------------
# operations on the section of the separable example
# ---------------------------------------------------------------------------

def l2_example_distance(x, truncation):
    """Distance from x to {0} union {+-sqrt(2)(1-1/i) e_i : i >= 2}.

    ``x`` is the dense coordinate block of a point supported on finitely
    many basis vectors; coordinates beyond ``len(x)`` are zero.  The scan
    runs over i <= truncation and is certified exact by the monotone tail
    bound sqrt(||x||^2 + 2 (1 - 1/(truncation+1))^2).

    Raises CertificationError when the truncation does not cover the
    support of x (the tail bound then says nothing about skipped indices).
    """
    X, _ = _as_points(x)
    m = X.shape[1]
    if truncation < 2:
        raise InvalidInputError("truncation must be >= 2")
    nn = float(np.sum(X * X))
    if nn == 0.0:
        raise DomainViolationError("point coincides with the removed origin")
    support = 0
    nz = np.nonzero(X[0])[0]
    if nz.size:
        support = int(nz.max()) + 1  # 1-based basis index
    if truncation < support:
        raise CertificationError(
            f"truncation {truncation} below support index {support}; raise it"
        )
    best = nn  # removed origin
    top = min(truncation, m)
    for i in range(2, top + 1):
        c = SQRT2 * (1.0 - 1.0 / i)
        best = min(best, nn - 2.0 * c * abs(float(X[0, i - 1])) + c * c)
    if truncation > m:
        c = SQRT2 * (1.0 - 1.0 / (m + 1))
        best = min(best, nn + c * c)
    c_tail = SQRT2 * (1.0 - 1.0 / (truncation + 1))
    tail_bound = nn + c_tail * c_tail
    if best > tail_bound + 1e-15:
        raise CertificationError("tail bound below scanned minimum; raise truncation")
    if best <= 0.0:
        raise DomainViolationError("point coincides with a removed axis point")
    return float(np.sqrt(best))


# ---------------------------------------------------------------------------
# polylines
# ---------------------------------------------------------------------------

@dataclass
class Polyline:
    """Finite path: ordered vertices, endpoints pinned for the solver."""

    vertices: np.ndarray
    free_interior: bool = True
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        V = np.asarray(self.vertices, dtype=float)
        if V.ndim != 2 or V.shape[0] < 2:
            raise InvalidInputError("polyline needs >= 2 vertices")
        if not np.isfinite(V).all():
            raise InvalidInputError("non-finite vertex")
        seg = np.diff(V, axis=0)
        if (np.sqrt(np.sum(seg * seg, axis=1)) == 0.0).any():
            raise InvalidInputError("consecutive polyline vertices must be distinct")
        self.vertices = V

    @property
    def dimension(self):
        return self.vertices.shape[1]

    def euclid_length(self):
        seg = np.diff(self.vertices, axis=0)
        return float(np.sqrt(np.sum(seg * seg, axis=1)).sum())

    def reversed(self):
        return Polyline(self.vertices[::-1].copy(), self.free_interior)

    def mirrored(self, axis):
        """Reflection across the hyperplane {x_axis = 0}."""
        V = self.vertices.copy()
        V[:, axis] = -V[:, axis]
        return Polyline(V, self.free_interior)

    def resample(self, count):
        """Uniform arclength resampling with ``count`` vertices (endpoints kept)."""
        V = self.vertices
        seg = np.sqrt(np.sum(np.diff(V, axis=0) ** 2, axis=1))
        s = np.concatenate([[0.0], np.cumsum(seg)])
        total = s[-1]
        t = np.linspace(0.0, total, count)
        out = np.empty((count, V.shape[1]))
        for j in range(V.shape[1]):
            out[:, j] = np.interp(t, s, V[:, j])
        out[0] = V[0]
        out[-1] = V[-1]
        return Polyline(out, self.free_interior)


def validate_polyline(domain, path: Polyline):
    """Check every vertex lies strictly inside ``domain``."""
    if path.dimension != domain.dimension:
        raise InvalidInputError("polyline dimension does not match domain")
    if not domain.contains_many(path.vertices).all():
        raise DomainViolationError("polyline vertex outside the domain")


def certify_segment(domain, a, b, max_depth=24):
    """True iff the segment [a, b] provably stays inside the domain.

    Uses the 1-Lipschitz property of boundary distance: a segment with
    d(a) + d(b) > ||b - a|| cannot exit.  Otherwise bisect; a midpoint
    outside is a definite failure.
    """
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    stack = [(a, b, max_depth)]
    while stack:
        pa, pb, depth = stack.pop()
        dd = domain.depth_many(np.stack([pa, pb]))
        if dd.min() <= 0.0:
            return False
        length = float(np.linalg.norm(pb - pa))
        if dd[0] + dd[1] > length:
            continue
        if depth == 0:
            return False
        mid = 0.5 * (pa + pb)
        stack.append((pa, mid, depth - 1))
        stack.append((mid, pb, depth - 1))
    return True


# ---------------------------------------------------------------------------
# named constructions
# ---------------------------------------------------------------------------

def half_plane(dimension=2):
    """Upper half-space {x_n > 0}."""
    normal = [0.0] * dimension
    normal[-1] = 1.0
    return DomainSpec(dimension, (HalfSpace(tuple(normal), 0.0),), name="half-plane")


def punctured_space(dimension=2):
    """R^n minus the origin."""
    return DomainSpec(
        dimension, (), (RemovedPoint((0.0,) * dimension),), name="punctured-plane"
    )


def strip(dimension=2, axis=None, half_width=1.0):
    """Slab {-half_width < x_axis < half_width}; axis defaults to the second coordinate."""
    axis = 1 if axis is None else axis
    name = "strip" if dimension == 2 else "slab3d"
    return DomainSpec(
        dimension, (Slab(axis, -half_width, half_width),), name=name
    )


def unit_ball(dimension=2, norm=EUCLIDEAN):
    return DomainSpec(
        dimension,
        (BallPrimitive((0.0,) * dimension, 1.0),),
        norm=norm,
        name="unit-ball",
    )


def symmetric_box(dimension=2, half_width=1.0):
    return DomainSpec(
        dimension,
        (BoxPrimitive((-half_width,) * dimension, (half_width,) * dimension),),
        name="box",
    )


def prolongation_polygon():
    """The eight-vertex polygon with the corridor [-4,-1] x (-1,1)."""
    verts = ((-4.0, 1.0), (-1.0, 1.0), (-1.0, 4.0), (4.0, 4.0),
             (4.0, -4.0), (-1.0, -4.0), (-1.0, -1.0), (-4.0, -1.0))
    return DomainSpec(2, (Polygon(verts),), name="polygon-P")


def l2_section(n):
    """Coordinate section of the separable non-geodesic example.

    Dimension n+1 holds every coordinate the curves through span{e1, e_n,
    e_{n+1}} touch; the removed family is scanned in full with a certified
    truncation, so distances match the infinite-dimensional values.
    """
    if n < 2:
        raise InvalidInputError("section index must be >= 2")
    dim = n + 1
    return DomainSpec(
        dim,
        (),
        (RemovedPoint((0.0,) * dim), AxisPointFamily()),
        name=f"l2-section({n})",
    )
