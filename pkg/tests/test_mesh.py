import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from ablab import (
    cut_mesh,
    evaluate,
    generate_disk_mesh,
    generate_half_disk_mesh,
    graded_interval,
    read_mesh,
    write_mesh,
)
from ablab.mesh import ray_cut


def _disk(h=0.1, grading=None, **kw):
    if grading is None:
        grading = [((0.0, 0.0), 0.5)]
    return generate_disk_mesh((0.0, 0.0), 1.0, h, grading, **kw)


# ---------------------------------------------------------------- graded 1D

def test_graded_interval_uniform():
    pts = graded_interval(0.0, 1.0, lambda x: np.full_like(np.asarray(x, float), 0.1))
    assert pts[0] == 0.0 and pts[-1] == 1.0
    assert np.all(np.diff(pts) > 0)
    assert abs(len(pts) - 11) <= 1


@settings(max_examples=30, deadline=None)
@given(a=st.floats(-5, 5), width=st.floats(0.1, 10), h=st.floats(0.01, 0.5))
def test_graded_interval_bounds(a, width, h):
    pts = graded_interval(a, a + width, lambda x: np.full_like(np.asarray(x, float), h))
    assert pts[0] == a and pts[-1] == a + width
    d = np.diff(pts)
    assert np.all(d > 0)
    assert d.max() <= 2 * h + 1e-12


# ---------------------------------------------------------------- disk mesh

def test_disk_mesh_basic_postconditions():
    m = _disk()
    areas = m.triangle_areas()
    assert np.all(areas > 0), "triangles must be counterclockwise"
    assert abs(m.area() - math.pi) < 0.05
    assert m.euler_number() == 1
    outer = np.unique(m.boundary_markers["outer"])
    r = np.hypot(*m.vertices[outer].T)
    assert np.abs(r - 1.0).max() < 1e-12


def test_disk_mesh_rejects_bad_h():
    with pytest.raises(ValueError):
        generate_disk_mesh((0, 0), 1.0, 1.5, [])
    with pytest.raises(ValueError):
        generate_disk_mesh((0, 0), 1.0, 0.0, [])


def test_disk_mesh_rejects_bad_exponent():
    with pytest.raises(ValueError):
        generate_disk_mesh((0, 0), 1.0, 0.1, [((0.0, 0.0), 1.5)])


def test_disk_grading_tracks_square_root_law():
    h = 0.1
    m = _disk(h=h)
    r = np.hypot(*m.vertices.T)
    radii = np.unique(np.round(np.sort(r), 12))
    mids = 0.5 * (radii[1:] + radii[:-1])
    sizes = np.diff(radii)
    sel = (mids > 0.02) & (mids < 0.5)
    target = h * np.sqrt(mids[sel])
    assert np.abs(sizes[sel] / target - 1).max() < 0.35


def test_disk_grading_forces_vertex():
    m = _disk(grading=[((0.0, 0.0), 0.5), ((0.3, 0.0), 0.5)])
    d = np.hypot(m.vertices[:, 0] - 0.3, m.vertices[:, 1])
    assert d.min() == 0.0


def test_disk_refinement_ratio():
    n1 = _disk(h=0.1).num_vertices
    n2 = _disk(h=0.05).num_vertices
    assert 3.0 <= n2 / n1 <= 6.0


# ----------------------------------------------------------- half-disk mesh

def test_half_disk_markers_partition_boundary():
    m = generate_half_disk_mesh(4.0, 0.2, grading=[((0.0, 0.0), 0.5), ((1.0, 0.0), 0.5)])
    # boundary edges = edges incident to exactly one triangle
    t = m.triangles
    e = np.concatenate([t[:, [0, 1]], t[:, [1, 2]], t[:, [2, 0]]])
    e.sort(axis=1)
    uniq, counts = np.unique(e, axis=0, return_counts=True)
    boundary = set(map(tuple, uniq[counts == 1].tolist()))
    marked = []
    for edges in m.boundary_markers.values():
        se = np.sort(edges, axis=1)
        marked.extend(map(tuple, se.tolist()))
    assert len(marked) == len(set(marked)), "markers must not overlap"
    assert set(marked) == boundary

    names = set(m.boundary_markers)
    assert {"arc", "axis_load", "axis_fixed"} <= names

    load = np.unique(m.boundary_markers["axis_load"])
    assert m.vertices[load, 0].min() >= -1e-12
    assert m.vertices[load, 0].max() <= 1.0 + 1e-12
    fixed = np.unique(m.boundary_markers["axis_fixed"])
    assert m.vertices[fixed, 0].min() >= 1.0 - 1e-12
    # split vertex (1, 0) exists exactly
    d = np.hypot(m.vertices[:, 0] - 1.0, m.vertices[:, 1])
    assert d.min() == 0.0


def test_half_disk_rejects_small_radius():
    with pytest.raises(ValueError):
        generate_half_disk_mesh(0.8, 0.05)


# ------------------------------------------------------------------ cutting

def test_ray_cut_duplicates_interior_chain():
    m = _disk()
    cm = cut_mesh(m, [ray_cut("s0", (0, 0), 0.0, 1.0)])
    rc = cm.cuts[0]
    n_chain = len(rc.nodes)
    # endpoints stay single: center is a tip, outer end sits on the boundary
    assert len(cm.twin_map) // 2 == n_chain - 2
    assert cm.tip_nodes == [0] or np.allclose(cm.base.vertices[cm.tip_nodes[0]], [0, 0])
    assert cm.base.num_vertices == m.num_vertices + n_chain - 2


def test_cut_preserves_area_exactly():
    m = _disk()
    cm = cut_mesh(m, [ray_cut("s0", (0, 0), 0.0, 1.0)])
    assert abs(cm.base.area() - m.area()) < 1e-12


def test_twin_map_involution_and_coincidence():
    m = _disk()
    cm = cut_mesh(m, [ray_cut("s0", (0, 0), 0.0, 1.0)])
    assert cm.twin_map
    for a, b in cm.twin_map.items():
        assert cm.twin_map[b] == a and a != b
        assert np.array_equal(cm.base.vertices[a], cm.base.vertices[b])


def test_cut_sides_are_geometric():
    m = _disk()
    cm = cut_mesh(m, [ray_cut("s0", (0, 0), 0.0, 1.0)])
    rc = cm.cuts[0]
    tris = cm.base.triangles
    verts = cm.base.vertices
    for pos in range(len(rc.nodes)):
        p, q = int(rc.plus[pos]), int(rc.minus[pos])
        if p == q:
            continue
        cp = verts[tris[np.nonzero((tris == p).any(axis=1))[0][0]]].mean(axis=0)
        cq = verts[tris[np.nonzero((tris == q).any(axis=1))[0][0]]].mean(axis=0)
        # tangent points along +x, so the plus side is the upper half plane
        assert cp[1] > 0 > cq[1]


def test_two_cuts_meeting_duplicate_the_junction():
    m = _disk(extra_angles=[2.0], forced_s=[0.5])
    cm = cut_mesh(m, [ray_cut("s0", (0, 0), 0.0, 1.0),
                      ray_cut("gam", (0, 0), 2.0, 0.5)])
    copies = sorted({v for v in cm.twin_map
                     if np.allclose(cm.base.vertices[v], [0, 0])})
    assert len(copies) == 2
    # the junction carries a side for each cut, with opposite pairing
    tags = [cm.side_tags[v] for v in copies]
    assert {t["s0"] for t in tags} == {-1, 1}
    assert {t["gam"] for t in tags} == {-1, 1}
    assert tags[0]["s0"] == -tags[0]["gam"]
    # only the free end of the short cut is a tip
    assert len(cm.tip_nodes) == 1
    tip = cm.base.vertices[cm.tip_nodes[0]]
    assert np.allclose(tip, [0.5 * math.cos(2.0), 0.5 * math.sin(2.0)], atol=1e-12)


def test_cut_off_grid_is_rejected():
    m = _disk()
    with pytest.raises(ValueError):
        cut_mesh(m, [ray_cut("bad", (0, 0), 0.1234567, 1.0)])


def test_overlapping_cuts_rejected():
    m = _disk()
    with pytest.raises(ValueError, match="overlap"):
        cut_mesh(m, [ray_cut("a", (0, 0), 0.0, 1.0),
                     ray_cut("b", (0, 0), 0.0, 1.0)])


def test_cut_segments_must_cover_polyline():
    from ablab import CutSegment, CutSpec
    m = _disk()
    spec = CutSpec("s0", np.array([[0.0, 0.0], [1.0, 0.0]]),
                   (CutSegment("s0:0", 0.0, 0.5),))
    with pytest.raises(ValueError, match="cover"):
        cut_mesh(m, [spec])


# ------------------------------------------------------- locate and evaluate

def test_evaluate_reproduces_linear_fields():
    m = _disk()
    f = 3.0 * m.vertices[:, 0] - 2.0 * m.vertices[:, 1] + 1.0
    rng = np.random.default_rng(7)
    t = rng.uniform(0, 2 * math.pi, 50)
    r = rng.uniform(0.05, 0.85, 50)
    pts = np.column_stack([r * np.cos(t), r * np.sin(t)])
    vals = evaluate(m, f, pts)
    assert np.abs(vals - (3 * pts[:, 0] - 2 * pts[:, 1] + 1)).max() < 1e-10


def test_evaluate_after_cut_keeps_triangle_ids():
    m = _disk()
    cm = cut_mesh(m, [ray_cut("s0", (0, 0), 0.0, 1.0)])
    f = cm.base.vertices[:, 0] + 2.0 * cm.base.vertices[:, 1]
    pts = np.array([[0.3, 0.4], [-0.5, 0.1], [0.2, -0.6]])
    vals = evaluate(cm.base, f, pts)
    assert np.abs(vals - (pts[:, 0] + 2 * pts[:, 1])).max() < 1e-10


# ------------------------------------------------------------------- file IO

def test_abmesh_roundtrip(tmp_path):
    m = _disk()
    cm = cut_mesh(m, [ray_cut("s0", (0, 0), 0.0, 1.0)])
    path = tmp_path / "mesh.txt"
    write_mesh(path, cm)
    m2, recs = read_mesh(path)
    assert np.array_equal(m2.vertices, cm.base.vertices)
    assert np.array_equal(m2.triangles, cm.base.triangles)
    # one pair of oriented records per duplicated node
    assert len(recs) == len(cm.twin_map)
    plus = recs[recs[:, 3] == 1]
    for _, node, twin, _ in plus:
        assert cm.twin_map[int(node)] == int(twin)


def test_abmesh_header_line(tmp_path):
    m = _disk(h=0.3)
    path = tmp_path / "plain.txt"
    write_mesh(path, m)
    first = path.read_text().splitlines()[0]
    assert first == "abmesh 1"
    with pytest.raises(ValueError):
        bad = tmp_path / "bad.txt"
        bad.write_text("nope\n")
        read_mesh(bad)
