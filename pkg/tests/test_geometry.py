import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from qhtk.geometry import (
    CertificationError,
    DomainViolationError,
    InvalidInputError,
    NormSpec,
    Polyline,
    StarlikeDomain3D,
    certify_segment,
    half_plane,
    l2_example_distance,
    l2_section,
    norm_eval,
    prolongation_polygon,
    punctured_space,
    strip,
    symmetric_box,
    unit_ball,
)
from qhtk.cases import build_omega_n

SQRT3 = np.sqrt(3.0)


# --- norms ------------------------------------------------------------------

def test_norm_euclidean_pythagoras():
    assert norm_eval(NormSpec(), np.array([3.0, 4.0])) == 5.0


def test_norm_zero_vector():
    assert norm_eval(NormSpec("p", 2.0), np.zeros(4)) == 0.0


def test_norm_p4_value():
    assert norm_eval(NormSpec("p", 4.0), np.array([1.0, 1.0])) == pytest.approx(
        2.0 ** 0.25, abs=1e-12
    )


def test_norm_rejects_bad_exponent():
    with pytest.raises(InvalidInputError):
        NormSpec("p", 1.0)
    with pytest.raises(InvalidInputError):
        NormSpec("p", np.inf)


def test_norm_rejects_nonfinite_vector():
    with pytest.raises(InvalidInputError):
        norm_eval(NormSpec(), np.array([1.0, np.nan]))


@settings(max_examples=120, deadline=None)
@given(
    p=st.one_of(st.none(), st.floats(1.05, 10.0)),
    v=st.lists(st.floats(-50, 50), min_size=2, max_size=5),
    w=st.lists(st.floats(-50, 50), min_size=2, max_size=5),
    lam=st.floats(-4, 4),
)
def test_norm_axioms(p, v, w, lam):
    norm = NormSpec() if p is None else NormSpec("p", p)
    n = min(len(v), len(w))
    a = np.array(v[:n])
    b = np.array(w[:n])
    na, nb = norm.eval(a), norm.eval(b)
    assert na >= 0
    assert norm.eval(lam * a) == pytest.approx(abs(lam) * na, rel=1e-10, abs=1e-10)
    assert norm.eval(a + b) <= na + nb + 1e-9 * (1 + na + nb)
    if na == 0:
        assert np.all(a == 0)


# --- membership and boundary distance ---------------------------------------

def test_strip_contains_far_point():
    assert strip().contains([100.0, 0.0])


def test_punctured_origin_removed():
    assert not punctured_space().contains([0.0, 0.0])


def test_polygon_contains_paper_point():
    assert prolongation_polygon().contains([-2.0, 0.0])


def test_halfplane_distance():
    assert half_plane().boundary_distance([0.0, 2.0]) == 2.0


def test_punctured_distance_to_origin():
    assert punctured_space().boundary_distance([1.0, 0.0]) == 1.0


def test_boundary_query_raises_on_boundary():
    with pytest.raises(DomainViolationError):
        half_plane().boundary_distance([1.0, 0.0])
    with pytest.raises(DomainViolationError):
        punctured_space().boundary_distance([0.0, 0.0])


def test_dimension_mismatch():
    with pytest.raises(InvalidInputError):
        strip().contains([0.0, 0.0, 0.0])


def test_omega5_distance_brute_force():
    # independent scan over every wall, removed point and slit
    om = build_omega_n(5)
    p = np.array([-0.5, 0.0])
    right = 3 * SQRT3 + 1
    cands = []
    for wall in (
        np.stack([np.full(30001, -1.0), np.linspace(-1, 1, 30001)], axis=1),
        np.stack([np.full(30001, right), np.linspace(-1, 1, 30001)], axis=1),
        np.stack([np.linspace(-1, right, 30001), np.full(30001, -1.0)], axis=1),
        np.stack([np.linspace(-1, right, 30001), np.full(30001, 1.0)], axis=1),
    ):
        cands.append(np.sqrt(((wall - p) ** 2).sum(axis=1)).min())
    for j in range(4):
        cands.append(np.linalg.norm(p - np.array([j * SQRT3, 0.0])))
    for j in range(3):
        c = (2 * j + 1) * SQRT3 / 2
        for sgn in (1, -1):
            seg = np.stack([np.full(20001, c), sgn * np.linspace(0.5, 1.0, 20001)], axis=1)
            cands.append(np.sqrt(((seg - p) ** 2).sum(axis=1)).min())
    assert om.boundary_distance(p) == pytest.approx(min(cands), abs=1e-9)


def test_omega_removed_point_membership():
    om = build_omega_n(3)
    assert not om.contains([SQRT3, 0.0])
    assert om.contains([-0.5, 0.0])


@pytest.mark.parametrize("domain", [
    strip(), half_plane(), unit_ball(), symmetric_box(),
    prolongation_polygon(), build_omega_n(3),
])
def test_boundary_distance_lipschitz(domain):
    # |d(x) - d(y)| <= |x - y| along random pairs
    rng = np.random.default_rng(11)
    lo, hi = domain.window_hint()
    lo = [(-3.0 if b is None else b) for b in lo]
    hi = [(3.0 if b is None else b) for b in hi]
    pts = rng.uniform(lo, hi, size=(40000, domain.dimension))
    inside = domain.contains_many(pts)
    pts = pts[inside]
    n = (len(pts) // 2) * 2
    a, b = pts[:n:2], pts[1:n:2]
    assert n >= 20000, "need >= 1e4 sampled pairs"
    da = domain.boundary_distance_many(a)
    db = domain.boundary_distance_many(b)
    gap = np.sqrt(((a - b) ** 2).sum(axis=1))
    assert (np.abs(da - db) <= gap + 1e-12).all()


@pytest.mark.parametrize("domain", [strip(), half_plane(), unit_ball(), symmetric_box()])
def test_boundary_distance_concave_on_convex(domain):
    rng = np.random.default_rng(5)
    lo, hi = domain.window_hint()
    lo = [(-3.0 if b is None else b) for b in lo]
    hi = [(3.0 if b is None else b) for b in hi]
    pts = rng.uniform(lo, hi, size=(6000, domain.dimension))
    pts = pts[domain.contains_many(pts)]
    n = (len(pts) // 2) * 2
    a, b = pts[:n:2], pts[1:n:2]
    da = domain.boundary_distance_many(a)
    db = domain.boundary_distance_many(b)
    dm = domain.boundary_distance_many(0.5 * (a + b))
    assert (dm >= 0.5 * (da + db) - 1e-12).all()


def test_constructed_near_removal_distance():
    dom = punctured_space()
    delta = 1e-7
    assert dom.boundary_distance([delta, 0.0]) <= delta + 1e-12


# --- the countable axis family ----------------------------------------------

def test_l2_distance_e1():
    x = np.zeros(6)
    x[0] = 1.0
    assert l2_example_distance(x, truncation=100) == pytest.approx(1.0, abs=1e-15)


def test_l2_distance_adjacent_point():
    # offsets from the removed point at sqrt2 / 2 along e2 shrink to zero;
    # squared-form cancellation caps the relative accuracy near eps^2/eps
    for eps, rel in ((1e-3, 1e-9), (1e-5, 1e-5)):
        x = np.zeros(4)
        x[1] = np.sqrt(2.0) * 0.5
        x[0] = eps
        assert l2_example_distance(x, truncation=50) == pytest.approx(eps, rel=rel)


def test_l2_distance_matches_raw_scan():
    # certified value equals an uncertified scan over a million indices
    rng = np.random.default_rng(2)
    for _ in range(12):
        x = np.zeros(9)
        x[0] = rng.uniform(-1.2, 1.2)
        i = rng.integers(1, 8)
        x[i] = rng.uniform(-1.2, 1.2)
        if np.linalg.norm(x) < 1e-9:
            continue
        got = l2_example_distance(x, truncation=10**4)
        nn = float(x @ x)
        best = nn
        idx = np.arange(2, 10**6 + 1, dtype=float)
        c = np.sqrt(2.0) * (1 - 1 / idx)
        coord = np.zeros_like(idx)
        coord[: x.size - 1] = np.abs(x[1:])
        best = min(best, float((nn - 2 * c * coord + c * c).min()))
        assert got == pytest.approx(np.sqrt(best), abs=1e-12)


def test_l2_truncation_certificate():
    x = np.zeros(9)
    x[0] = 0.3
    x[8] = 0.5  # support index 9
    with pytest.raises(CertificationError):
        l2_example_distance(x, truncation=5)
    assert l2_example_distance(x, truncation=9) > 0


def test_l2_midpoint_of_gamma3():
    # midpoint of the diagonal half circle: closed form sqrt(5)/3
    dom = l2_section(3)
    x = np.zeros(dom.dimension)
    x[2] = x[3] = 1.0 / np.sqrt(2.0)
    d = dom.boundary_distance(x)
    assert d == pytest.approx(np.sqrt(5.0) / 3.0, abs=1e-12)


# --- starlike domain oracle vs brute force -----------------------------------

def test_starlike_distance_brute_force():
    dom = StarlikeDomain3D()
    rng = np.random.default_rng(7)
    # dense boundary sampling: cylinder wall, deleted ray, sphere cap
    th = np.linspace(0, 2 * np.pi, 240, endpoint=False)
    zs = np.linspace(0.5, 3.0, 240)
    wall = np.stack(np.meshgrid(th, zs), axis=-1).reshape(-1, 2)
    wall_pts = np.stack([np.cos(wall[:, 0]), np.sin(wall[:, 0]), wall[:, 1]], axis=1)
    ray_pts = np.stack([np.zeros(800), np.zeros(800), np.linspace(0.5, 3.5, 800)], axis=1)
    u = rng.normal(size=(4000, 3))
    u /= np.linalg.norm(u, axis=1, keepdims=True)
    sph = np.array([0, 0, 0.5]) + u
    sph = sph[sph[:, 2] <= 0.5]
    boundary = np.vstack([wall_pts, ray_pts, sph])
    for _ in range(60):
        p = rng.uniform([-1, -1, -0.4], [1, 1, 2.0])
        if not dom.contains(p):
            continue
        brute = np.sqrt(((boundary - p) ** 2).sum(axis=1)).min()
        assert dom.boundary_distance(p) <= brute + 1e-9
        assert dom.boundary_distance(p) >= brute - 2e-2  # sampling gap


# --- polylines ----------------------------------------------------------------

def test_polyline_rejects_duplicates():
    with pytest.raises(InvalidInputError):
        Polyline(np.array([[0.0, 0.0], [0.0, 0.0]]))


def test_polyline_resample_keeps_endpoints():
    p = Polyline(np.array([[0.0, 0.0], [1.0, 0.0], [1.0, 1.0]]))
    q = p.resample(17)
    assert np.allclose(q.vertices[0], [0, 0])
    assert np.allclose(q.vertices[-1], [1, 1])
    assert q.euclid_length() == pytest.approx(p.euclid_length(), rel=1e-12)


def test_certify_segment():
    dom = punctured_space()
    assert certify_segment(dom, np.array([1.0, 0.5]), np.array([1.0, -0.5]))
    assert not certify_segment(dom, np.array([-1.0, 0.0]), np.array([1.0, 0.0]))
