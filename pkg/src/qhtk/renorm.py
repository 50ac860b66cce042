"""Norms induced by centered quasihyperbolic balls of symmetric convex domains.

The gauge M(x) = inf{lambda > 0 : x in lambda B} of a centered ball
B = B_k(0, r) is an equivalent norm; as r grows the ball fills the domain,
so the induced norms converge to the norm whose open unit ball the domain
is.  Everything here reduces to directional radii of the ball, evaluated
by batched bisection against the solver.
"""

from __future__ import annotations

from dataclasses import dataclass, field as dfield

import numpy as np

from .ball import _boundary_ray_limit, directional_radii
from .batch import solve_batch
from .geometry import InvalidInputError, QHError
from .solver import RefinementConfig, SolverConfig


class ConfigurationError(QHError):
    """The domain does not satisfy the renorming hypotheses."""


NORM_SOLVER = SolverConfig(refinement=RefinementConfig(
    max_iterations=40, gradient_tol=2e-4, length_rel_tol=1e-9))


class InducedNorm:
    """Minkowski functional of the centered ball B_k(0, r).

    Evaluation is by directional radius: M(x) = |x| / rho(x/|x|) where
    rho(u) solves k(0, rho u) = r, found by bisection (centered balls of
    symmetric convex domains are star-shaped about 0).  Radii are cached
    per direction; batch queries share one bisection.
    """

    def __init__(self, domain, r, s: SolverConfig = NORM_SOLVER,
                 vertex_count=25, rounds=18, eval_tol=4e-4,
                 precheck_pairs=100, rng_seed=0, table=256):
        if not domain.is_convex:
            raise ConfigurationError("induced norms need a convex domain")
        lo, hi = domain.window_hint()
        if any(b is None or not np.isfinite(b) for b in lo + hi):
            raise ConfigurationError("induced norms need a bounded domain")
        if not domain.contains(np.zeros(domain.dimension)):
            raise ConfigurationError("the domain must contain the origin")
        self.domain = domain
        self.r = float(r)
        self.sconf = s
        self.vertex_count = vertex_count
        self.rounds = rounds
        self.eval_tol = eval_tol
        self._cache = {}
        self._spline = None
        self._check_symmetry_and_convexity(precheck_pairs, rng_seed)
        if table and domain.dimension == 2:
            self._build_table(int(table))

    def _build_table(self, n):
        """Dense periodic radius table; bulk gauge queries interpolate it.

        The directional radius of a smooth convex ball is a smooth
        periodic function of the angle, so a cubic spline over n knots
        carries interpolation error far below eval_tol; the spline is
        spot-validated against direct bisection in the test suite.
        """
        from scipy.interpolate import CubicSpline

        th = np.linspace(0.0, 2.0 * np.pi, n, endpoint=False)
        U = np.stack([np.cos(th), np.sin(th)], axis=1)
        rho = directional_radii(self.domain, np.zeros(2), U, self.r,
                                s=self.sconf, vertex_count=self.vertex_count,
                                rounds=self.rounds)
        th_ext = np.concatenate([th, [2.0 * np.pi]])
        rho_ext = np.concatenate([rho, [rho[0]]])
        self._spline = CubicSpline(th_ext, rho_ext, bc_type="periodic")

    # -- hypothesis gates ---------------------------------------------------

    def _check_symmetry_and_convexity(self, pairs, rng_seed):
        rng = np.random.default_rng(rng_seed)
        dim = self.domain.dimension
        th = rng.uniform(0, 2 * np.pi, 8)
        U = np.stack([np.cos(th), np.sin(th)], axis=1) if dim == 2 else None
        if U is None:
            U = rng.normal(size=(8, dim))
            U /= np.sqrt((U * U).sum(axis=1, keepdims=True))
        rad_p = self.radii(U)
        rad_m = self.radii(-U)
        if np.abs(rad_p - rad_m).max() > 1e-3 * max(rad_p.max(), 1e-12):
            raise ConfigurationError("ball is not symmetric: domain must be symmetric")
        # midpoint convexity of the ball on sampled pairs, re-solved
        if pairs > 0:
            a_dir = rng.integers(0, U.shape[0], pairs)
            b_dir = rng.integers(0, U.shape[0], pairs)
            ta = np.sqrt(rng.uniform(0, 1, pairs))
            tb = np.sqrt(rng.uniform(0, 1, pairs))
            A = (ta * rad_p[a_dir] * 0.98)[:, None] * U[a_dir]
            B = (tb * rad_p[b_dir] * 0.98)[:, None] * U[b_dir]
            mid = 0.5 * (A + B)
            ctr = np.zeros_like(mid)
            kv, _, _ = solve_batch(self.domain, ctr, mid, self.sconf,
                                   vertex_count=self.vertex_count, relax_sweeps=1)
            if (kv > self.r + 1e-3).any():
                raise ConfigurationError(
                    "sampled midpoint left the ball: convexity prerequisite failed"
                )

    # -- evaluation ----------------------------------------------------------

    def radii(self, dirs):
        """Directional radii of the ball, cached per unit direction."""
        U = np.atleast_2d(np.asarray(dirs, dtype=float))
        U = U / np.sqrt((U * U).sum(axis=1, keepdims=True))
        keys = [tuple(np.round(u, 12)) for u in U]
        missing = [i for i, k in enumerate(keys) if k not in self._cache]
        if missing:
            vals = directional_radii(
                self.domain, np.zeros(self.domain.dimension), U[missing], self.r,
                s=self.sconf, vertex_count=self.vertex_count, rounds=self.rounds,
            )
            for i, v in zip(missing, vals):
                self._cache[keys[i]] = float(v)
        return np.array([self._cache[k] for k in keys])

    def eval_many(self, X, exact=False):
        X = np.atleast_2d(np.asarray(X, dtype=float))
        nn = np.sqrt((X * X).sum(axis=1))
        out = np.zeros(X.shape[0])
        nz = nn > 0
        if nz.any():
            if self._spline is not None and not exact:
                th = np.mod(np.arctan2(X[nz, 1], X[nz, 0]), 2.0 * np.pi)
                out[nz] = nn[nz] / self._spline(th)
            else:
                out[nz] = nn[nz] / self.radii(X[nz] / nn[nz, None])
        return out

    def eval(self, x):
        return float(self.eval_many(np.asarray(x, dtype=float)[None, :])[0])


def minkowski_eval(norm: InducedNorm, x):
    """Gauge value of x; 0 iff x = 0."""
    x = np.asarray(x, dtype=float)
    if not np.isfinite(x).all():
        raise InvalidInputError("non-finite input")
    return norm.eval(x)


def triangle_check(norm: InducedNorm, samples=1000, rng_seed=0, scale=0.8):
    """Sampled triangle inequality M(x+y) <= M(x) + M(y) + 3 eval_tol.

    Returns the violation list (empty = pass); the slack covers the
    bisection and solver tolerance of the three evaluations.
    """
    rng = np.random.default_rng(rng_seed)
    dim = norm.domain.dimension
    X = rng.normal(size=(samples, dim))
    Y = rng.normal(size=(samples, dim))
    X *= scale * rng.uniform(0.2, 1.0, (samples, 1))
    Y *= scale * rng.uniform(0.2, 1.0, (samples, 1))
    Mx = norm.eval_many(X)
    My = norm.eval_many(Y)
    Ms = norm.eval_many(X + Y)
    slack = 3.0 * norm.eval_tol * np.maximum(Mx + My, 1.0)
    bad = Ms > Mx + My + slack
    return [
        {"x": X[i].tolist(), "y": Y[i].tolist(),
         "M_x": float(Mx[i]), "M_y": float(My[i]), "M_sum": float(Ms[i])}
        for i in np.nonzero(bad)[0]
    ]


def domain_directional_radius(domain, dirs):
    """Gauge radius of the domain itself along each direction."""
    U = np.atleast_2d(np.asarray(dirs, dtype=float))
    U = U / np.sqrt((U * U).sum(axis=1, keepdims=True))
    origin = np.zeros(domain.dimension)
    return np.array([_boundary_ray_limit(domain, origin, u) for u in U])


def _dense_closed_curve(pts, n=2048):
    closed = np.vstack([pts, pts[:1]])
    seg = np.sqrt(((closed[1:] - closed[:-1]) ** 2).sum(axis=1))
    cum = np.concatenate([[0.0], np.cumsum(seg)])
    t = np.linspace(0.0, cum[-1], n, endpoint=False)
    return np.stack([np.interp(t, cum, closed[:, 0]),
                     np.interp(t, cum, closed[:, 1])], axis=1)


def symmetric_hausdorff(A, B):
    from scipy.spatial import cKDTree

    ta, tb = cKDTree(A), cKDTree(B)
    return float(max(tb.query(A)[0].max(), ta.query(B)[0].max()))


def hausdorff_convergence(domain, radii, directions=128,
                          s: SolverConfig = NORM_SOLVER, vertex_count=25):
    """Hausdorff gap between the sphere of B_k(0, r) and the domain sphere.

    The domain is the open unit ball of its own gauge norm; as r grows the
    centered quasihyperbolic spheres converge to the domain sphere, so the
    returned series decreases toward 0.
    """
    if domain.dimension != 2:
        raise InvalidInputError("Hausdorff series is computed on planar domains")
    th = np.linspace(0, 2 * np.pi, directions, endpoint=False)
    U = np.stack([np.cos(th), np.sin(th)], axis=1)
    R_dom = domain_directional_radius(domain, U)
    dom_curve = _dense_closed_curve(R_dom[:, None] * U)
    out = []
    for r in radii:
        rho = directional_radii(domain, np.zeros(2), U, float(r),
                                s=s, vertex_count=vertex_count)
        ball_curve = _dense_closed_curve(rho[:, None] * U)
        out.append(symmetric_hausdorff(ball_curve, dom_curve))
    return np.array(out)


@dataclass
class ModulusEstimate:
    """Sampled modulus of convexity or smoothness of an induced norm.

    One-sided by construction: the convexity values bound the true modulus
    from above (an inf over a sample), the smoothness values from below
    (a sup over a sample).
    """

    kind: str
    taus: np.ndarray
    values: np.ndarray
    sample_count: int
    meta: dict = dfield(default_factory=dict)


def modulus_estimate(norm: InducedNorm, kind, taus, sample_budget=400, rng_seed=0):
    """delta(tau) = inf {1 - M((x+y)/2)} over unit pairs with M(x-y) >= tau,
    or the restricted smoothness modulus
    mu(tau) = sup {(M(y+h) + M(y-h))/2 - 1 : M(y+-h) >= M(y) = 1, |h| = tau}.
    """
    if kind not in ("convexity", "smoothness"):
        raise InvalidInputError("kind must be 'convexity' or 'smoothness'")
    if sample_budget < 1:
        raise InvalidInputError("sample budget must be positive")
    rng = np.random.default_rng(rng_seed)
    dim = norm.domain.dimension
    taus = np.asarray(taus, dtype=float)

    n_struct = min(64, sample_budget)
    th = np.linspace(0, 2 * np.pi, n_struct, endpoint=False)
    U_struct = np.stack([np.cos(th), np.sin(th)], axis=1)
    U_rand = rng.normal(size=(max(sample_budget - n_struct, 0), dim))
    if U_rand.size:
        U_rand /= np.sqrt((U_rand * U_rand).sum(axis=1, keepdims=True))
        U = np.vstack([U_struct, U_rand])
    else:
        U = U_struct
    unit = U / norm.eval_many(U)[:, None]  # M(unit) = 1

    if kind == "convexity":
        n = unit.shape[0]
        ia = rng.integers(0, n, sample_budget)
        ib = rng.integers(0, n, sample_budget)
        keep = ia != ib
        ia, ib = ia[keep], ib[keep]
        X, Y = unit[ia], unit[ib]
        sep = norm.eval_many(X - Y)
        midv = norm.eval_many(0.5 * (X + Y))
        vals = []
        for tau in taus:
            mask = sep >= tau
            vals.append(float((1.0 - midv[mask]).min()) if mask.any() else np.nan)
        values = np.array(vals)
        # inf over a shrinking feasible set: non-decreasing by construction
    else:
        n = unit.shape[0]
        H = rng.normal(size=(sample_budget, dim))
        H /= np.sqrt((H * H).sum(axis=1, keepdims=True))
        iy = rng.integers(0, n, sample_budget)
        Yp = unit[iy]
        vals = []
        for tau in taus:
            Hp = tau * H
            Mp = norm.eval_many(Yp + Hp)
            Mm = norm.eval_many(Yp - Hp)
            ok = (Mp >= 1.0) & (Mm >= 1.0)  # the restricted modulus variant
            v = 0.5 * (Mp + Mm) - 1.0
            vals.append(float(v[ok].max()) if ok.any() else 0.0)
        values = np.array(vals)
    return ModulusEstimate(kind=kind, taus=taus, values=values,
                           sample_count=int(sample_budget),
                           meta={"rng_seed": rng_seed, "r": norm.r})
