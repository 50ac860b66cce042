"""The quasihyperbolic length functional and its closed-form oracles.

The length of a rectifiable path gamma is the integral of
||gamma'(t)|| / d(gamma(t), boundary); polyline paths are integrated
segment by segment with adaptive composite Simpson.  Two classical
closed forms (half-space, punctured space) are kept as oracles to be
validated against the variational solver, never trusted over it.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .geometry import (
    DomainViolationError,
    InvalidInputError,
    Polyline,
    QHError,
    _as_points,
    certify_segment,
    validate_polyline,
)


class EvaluationError(QHError):
    """Quadrature could not reach tolerance or the path left the domain."""


@dataclass(frozen=True)
class QuadratureConfig:
    """Adaptive composite quadrature controls for path-length integrals.

    Simpson is the default; the midpoint rule is available for integrands
    whose endpoint weights are awkward (both are adaptive per segment).
    """

    rule: str = "adaptive-simpson"
    abs_tol: float = 1e-8
    rel_tol: float = 1e-8
    max_subdivisions: int = 24

    def __post_init__(self):
        if self.rule not in ("adaptive-simpson", "adaptive-midpoint"):
            raise InvalidInputError(f"unknown quadrature rule {self.rule!r}")
        if self.abs_tol <= 0 or self.rel_tol <= 0:
            raise InvalidInputError("quadrature tolerances must be positive")
        if self.max_subdivisions < 1:
            raise InvalidInputError("max_subdivisions must be >= 1")


DEFAULT_QUADRATURE = QuadratureConfig()


def adaptive_interval_integral(fvec, a, b, abs_tol=1e-10, rel_tol=1e-10, max_depth=40):
    """Adaptive Simpson of a vectorized scalar function on [a, b].

    ``fvec`` maps a 1-D array of abscissae to integrand values.  Used for
    parametric curve lengths where the path is not a polyline.
    """
    a = float(a)
    b = float(b)
    t0 = np.array([a])
    t1 = np.array([b])
    tm = 0.5 * (t0 + t1)
    f0 = fvec(t0)
    fm = fvec(tm)
    f1 = fvec(t1)
    simpson = (t1 - t0) / 6.0 * (f0 + 4.0 * fm + f1)
    crude = abs(float(simpson[0]))
    tol = np.array([max(abs_tol, rel_tol * crude)])
    depth = np.array([0])
    total = 0.0
    while t0.size:
        tm = 0.5 * (t0 + t1)
        tl = 0.5 * (t0 + tm)
        tr = 0.5 * (tm + t1)
        fl = fvec(tl)
        fr = fvec(tr)
        sl = (tm - t0) / 6.0 * (f0 + 4.0 * fl + fm)
        sr = (t1 - tm) / 6.0 * (fm + 4.0 * fr + f1)
        err = (sl + sr - simpson) / 15.0
        done = (np.abs(err) <= tol) | (depth >= max_depth)
        if (depth[done] >= max_depth).any() and (np.abs(err[done]) > 8 * tol[done]).any():
            raise EvaluationError("adaptive quadrature exhausted subdivision depth")
        total += float((sl + sr + err)[done].sum())
        keep = ~done
        t0 = np.concatenate([t0[keep], tm[keep]])
        t1 = np.concatenate([tm[keep], t1[keep]])
        f0 = np.concatenate([f0[keep], fm[keep]])
        f1 = np.concatenate([fm[keep], f1[keep]])
        fm = np.concatenate([fl[keep], fr[keep]])
        simpson = np.concatenate([sl[keep], sr[keep]])
        tol = np.concatenate([0.5 * tol[keep], 0.5 * tol[keep]])
        depth = np.concatenate([depth[keep] + 1, depth[keep] + 1])
    return total


def _integrate_polyline_midpoint(domain, V, q: QuadratureConfig):
    """Adaptive composite midpoint variant (no endpoint evaluations)."""
    A = V[:-1]
    B = V[1:]
    seg = B - A
    seg_norm = domain.norm.eval(seg)
    nseg = A.shape[0]

    def feval(sid, t):
        pts = A[sid] + t[:, None] * seg[sid]
        d = domain.depth_many(pts)
        if (d <= 0.0).any():
            raise EvaluationError("path exits the domain during quadrature")
        return seg_norm[sid] / d

    sid = np.arange(nseg)
    t0 = np.zeros(nseg)
    t1 = np.ones(nseg)
    fm = feval(sid, 0.5 * (t0 + t1))
    est = (t1 - t0) * fm
    crude = float(np.abs(est).sum())
    tol = np.full(nseg, max(q.abs_tol, q.rel_tol * crude) / max(nseg, 1))
    depth = np.zeros(nseg, dtype=int)
    total = 0.0
    while sid.size:
        tm = 0.5 * (t0 + t1)
        fl = feval(sid, 0.5 * (t0 + tm))
        fr = feval(sid, 0.5 * (tm + t1))
        child = 0.5 * (t1 - t0) * (fl + fr)
        err = (child - est) / 3.0
        done = np.abs(err) <= tol
        exhausted = (~done) & (depth >= q.max_subdivisions)
        if exhausted.any():
            if (np.abs(err[exhausted]) > 8 * tol[exhausted]).any():
                raise EvaluationError(
                    "quadrature tolerance unreachable within max_subdivisions"
                )
            done |= exhausted
        total += float((child + err)[done].sum())
        keep = ~done
        est = np.concatenate([(tm - t0)[keep] * fl[keep], (t1 - tm)[keep] * fr[keep]])
        sid = np.concatenate([sid[keep], sid[keep]])
        t0 = np.concatenate([t0[keep], tm[keep]])
        t1 = np.concatenate([tm[keep], t1[keep]])
        tol = np.concatenate([0.5 * tol[keep], 0.5 * tol[keep]])
        depth = np.concatenate([depth[keep] + 1, depth[keep] + 1])
    return total


def _integrate_polyline(domain, V, q: QuadratureConfig):
    """Sum of per-segment adaptive Simpson integrals of ||seg||/d."""
    if q.rule == "adaptive-midpoint":
        return _integrate_polyline_midpoint(domain, V, q)
    A = V[:-1]
    B = V[1:]
    seg = B - A
    seg_norm = domain.norm.eval(seg)
    nseg = A.shape[0]

    def feval(sid, t):
        pts = A[sid] + t[:, None] * seg[sid]
        d = domain.depth_many(pts)
        if (d <= 0.0).any():
            raise EvaluationError("path exits the domain during quadrature")
        return seg_norm[sid] / d

    sid = np.arange(nseg)
    t0 = np.zeros(nseg)
    t1 = np.ones(nseg)
    f0 = feval(sid, t0)
    f1 = feval(sid, t1)
    fm = feval(sid, 0.5 * (t0 + t1))
    simpson = (t1 - t0) / 6.0 * (f0 + 4.0 * fm + f1)
    crude = float(np.abs(simpson).sum())
    tol0 = max(q.abs_tol, q.rel_tol * crude) / max(nseg, 1)
    tol = np.full(nseg, tol0)
    depth = np.zeros(nseg, dtype=int)
    total = 0.0
    while sid.size:
        tm = 0.5 * (t0 + t1)
        tl = 0.5 * (t0 + tm)
        tr = 0.5 * (tm + t1)
        fl = feval(sid, tl)
        fr = feval(sid, tr)
        sl = (tm - t0) / 6.0 * (f0 + 4.0 * fl + fm)
        sr = (t1 - tm) / 6.0 * (fm + 4.0 * fr + f1)
        err = (sl + sr - simpson) / 15.0
        done = np.abs(err) <= tol
        exhausted = (~done) & (depth >= q.max_subdivisions)
        if exhausted.any():
            if (np.abs(err[exhausted]) > 8 * tol[exhausted]).any():
                raise EvaluationError(
                    "quadrature tolerance unreachable within max_subdivisions"
                )
            done |= exhausted
        total += float((sl + sr + err)[done].sum())
        keep = ~done
        sid = np.concatenate([sid[keep], sid[keep]])
        t0 = np.concatenate([t0[keep], tm[keep]])
        t1 = np.concatenate([tm[keep], t1[keep]])
        f0 = np.concatenate([f0[keep], fm[keep]])
        f1 = np.concatenate([fm[keep], f1[keep]])
        fm = np.concatenate([fl[keep], fr[keep]])
        simpson = np.concatenate([sl[keep], sr[keep]])
        tol = np.concatenate([0.5 * tol[keep], 0.5 * tol[keep]])
        depth = np.concatenate([depth[keep] + 1, depth[keep] + 1])
    return total


def qh_path_length(domain, path: Polyline, q: QuadratureConfig = DEFAULT_QUADRATURE):
    """Quasihyperbolic length of a polyline, to the requested tolerance.

    Preconditions: every vertex strictly inside; each segment certified to
    stay inside via the 1-Lipschitz bound on boundary distance (a segment
    shorter than the sum of endpoint distances cannot exit).
    """
    validate_polyline(domain, path)
    V = path.vertices
    d = domain.boundary_distance_many(V)
    seg = np.diff(V, axis=0)
    lens = np.sqrt(np.sum(seg * seg, axis=1))
    risky = ~(d[:-1] + d[1:] > lens)
    for i in np.nonzero(risky)[0]:
        if not certify_segment(domain, V[i], V[i + 1]):
            raise EvaluationError(f"segment {i} cannot be certified inside the domain")
    return _integrate_polyline(domain, V, q)


def qh_lower_bound(domain, x, y):
    """log(1 + ||x-y|| / d(., boundary)), maximized over both endpoints.

    Every admissible path from x to y is at least this long; the raw bound
    is asymmetric so both ends are tried.
    """
    X, _ = _as_points(x, domain.dimension)
    Y, _ = _as_points(y, domain.dimension)
    dx = domain.boundary_distance(x)
    dy = domain.boundary_distance(y)
    gap = float(domain.norm.eval((X - Y)[0]))
    return float(max(np.log1p(gap / dx), np.log1p(gap / dy)))


def halfplane_distance_oracle(x, y):
    """Hyperbolic distance in the upper half-space {x_n > 0}.

    2 asinh(||x - y|| / (2 sqrt(x_n y_n))); the classical closed form,
    written for stability at small separations.  Validated against the
    variational solver in the tests, not assumed.
    """
    X, _ = _as_points(x)
    Y, _ = _as_points(y)
    if X.shape[1] != Y.shape[1]:
        raise InvalidInputError("dimension mismatch")
    xn = float(X[0, -1])
    yn = float(Y[0, -1])
    if xn <= 0.0 or yn <= 0.0:
        raise DomainViolationError("points must lie strictly in the half-space")
    gap = float(np.linalg.norm(X[0] - Y[0]))
    return 2.0 * float(np.arcsinh(gap / (2.0 * np.sqrt(xn * yn))))


def punctured_distance_oracle(x, y):
    """Distance in R^n minus the origin: sqrt(theta^2 + log^2(|x|/|y|)).

    theta is the angle subtended at the deleted origin (<= pi).  Folklore
    formula consistent with half-circle geodesics; cross-checked against
    the solver rather than trusted.
    """
    X, _ = _as_points(x)
    Y, _ = _as_points(y)
    if X.shape[1] != Y.shape[1]:
        raise InvalidInputError("dimension mismatch")
    rx = float(np.linalg.norm(X[0]))
    ry = float(np.linalg.norm(Y[0]))
    if rx == 0.0 or ry == 0.0:
        raise DomainViolationError("origin is removed from the domain")
    u = X[0] / rx
    v = Y[0] / ry
    theta = 2.0 * np.arctan2(np.linalg.norm(u - v), np.linalg.norm(u + v))
    return float(np.hypot(theta, np.log(rx / ry)))
