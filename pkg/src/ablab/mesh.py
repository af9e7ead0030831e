"""Structured triangulations of disks and half-disks with radial grading and slits.

Every mesh produced here is a polar grid around an anchor point: an anchor
vertex, plus rings of vertices at normalized radii s in (0,1] sampled on a
shared sorted angle list.  Spokes (constant-angle vertex chains) are straight,
so a ray from the anchor at any grid angle is automatically a union of mesh
edges.  That is what lets us slit the domain along rays exactly, with no
post-hoc edge splitting.

Slitting (cut_mesh) duplicates the vertices interior to a cut polyline and
re-wires incident triangles to the copy matching their geometric side.  Which
relation couples the two copies (continuity, sign flip, prescribed sum) is
decided later at system-reduction time, so a single cracked mesh can carry a
family of related boundary value problems.

Text export format "abmesh 1" (one file per mesh):
    abmesh 1
    V n          followed by n lines "x y"
    T m          followed by m lines "i j k marker"
    C c          followed by c lines "segid node twin side"
Indices are 0-based, floats printed with 17 significant digits.  Boundary
markers are not part of the format; readers that need them must reconstruct
from geometry.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

TWO_PI = 2.0 * math.pi

# Geometric tolerance used when matching vertices against cut polylines,
# relative to the domain scale.
SNAP_REL = 1e-9


# --------------------------------------------------------------------------
# 1D graded subdivision
# --------------------------------------------------------------------------

def graded_interval(a: float, b: float, spacing, max_cells: int = 100_000) -> np.ndarray:
    """Subdivide [a, b] so the local cell size tracks spacing(x).

    Integrates the density 1/spacing on a fine sample, rounds the total to a
    whole number of cells and places points at equal density increments.
    Returns the full point array including both endpoints.
    """
    if not b > a:
        raise ValueError(f"empty interval [{a}, {b}]")
    xs = np.linspace(a, b, 4097)
    dens = 1.0 / np.maximum(np.asarray(spacing(xs), dtype=float), 1e-300)
    cum = np.concatenate([[0.0], np.cumsum(0.5 * (dens[1:] + dens[:-1]) * np.diff(xs))])
    n = max(1, int(math.ceil(cum[-1] - 1e-9)))
    if n > max_cells:
        raise ValueError(f"grading would create {n} cells on [{a}, {b}]")
    pts = np.interp(np.linspace(0.0, cum[-1], n + 1), cum, xs)
    pts[0], pts[-1] = a, b
    return pts


def grading_factor(x: np.ndarray, centers, exponents, scale: float, floor: float = 1e-3) -> np.ndarray:
    """Multiplier for the local element size: min over grading centers of
    (|x - c|/scale)^gamma, clamped to [floor, 1]."""
    x = np.asarray(x, dtype=float)
    f = np.ones_like(x)
    for c, gamma in zip(centers, exponents):
        f = np.minimum(f, (np.abs(x - c) / scale) ** gamma)
    return np.clip(f, floor, 1.0)


def _fill_angles(required: np.ndarray, base_step: float, graded=()) -> np.ndarray:
    """Angle grid on [required[0], required[0] + 2*pi) hitting every required
    angle exactly; each gap between consecutive required angles is subdivided
    by graded_interval.  graded: list of (angle, exponent, scale) refinements.
    """
    req = np.sort(np.mod(required - required[0], TWO_PI)) + required[0]
    req = np.concatenate([req, [required[0] + TWO_PI]])

    def spacing(t):
        f = np.ones_like(np.asarray(t, dtype=float))
        for c, gamma, scale in graded:
            for shift in (-TWO_PI, 0.0, TWO_PI):
                f = np.minimum(f, (np.abs(t - (c + shift)) / scale) ** gamma)
        return base_step * np.clip(f, 5e-3, 1.0)

    parts = []
    for lo, hi in zip(req[:-1], req[1:]):
        if hi - lo < 1e-12:
            continue
        seg = graded_interval(lo, hi, spacing)
        parts.append(seg[:-1])
    return np.concatenate(parts)


# --------------------------------------------------------------------------
# Mesh containers
# --------------------------------------------------------------------------

@dataclass
class PolarInfo:
    """Construction metadata of a polar grid, kept for fast point location."""
    anchor: np.ndarray            # (2,)
    angles: np.ndarray            # (nt,) sorted, spanning one wedge or full turn
    svals: np.ndarray             # (nr,) increasing, in (0, 1]
    rho: np.ndarray               # (nt,) distance anchor -> outer boundary per angle
    closed: bool                  # True: full disk (angles wrap), False: open wedge


@dataclass
class Mesh:
    vertices: np.ndarray                       # (nv, 2) float64
    triangles: np.ndarray                      # (ntri, 3) int32, CCW
    boundary_markers: dict[str, np.ndarray]    # name -> (k, 2) vertex index pairs
    h_target: float
    polar: PolarInfo | None = None

    @property
    def num_vertices(self) -> int:
        return len(self.vertices)

    def triangle_areas(self) -> np.ndarray:
        p = self.vertices[self.triangles]
        e1 = p[:, 1] - p[:, 0]
        e2 = p[:, 2] - p[:, 0]
        return 0.5 * (e1[:, 0] * e2[:, 1] - e1[:, 1] * e2[:, 0])

    def area(self) -> float:
        return float(self.triangle_areas().sum())

    def edge_count(self) -> int:
        t = self.triangles
        e = np.concatenate([t[:, [0, 1]], t[:, [1, 2]], t[:, [2, 0]]])
        e.sort(axis=1)
        return len(np.unique(e, axis=0))

    def euler_number(self) -> int:
        """V - E + F counting triangles only (no outer face)."""
        return self.num_vertices - self.edge_count() + len(self.triangles)

    def boundary_nodes(self) -> np.ndarray:
        if not self.boundary_markers:
            return np.empty(0, dtype=np.int32)
        return np.unique(np.concatenate([e.ravel() for e in self.boundary_markers.values()]))


# --------------------------------------------------------------------------
# Polar grid assembly
# --------------------------------------------------------------------------

def _build_polar(anchor, rho, svals, angles, closed, h, markers_fn,
                 mirror_axis=None) -> Mesh:
    anchor = np.asarray(anchor, dtype=float)
    nt = len(angles)
    nr = len(svals)
    ncell = nt if closed else nt - 1
    if ncell < 3 and closed:
        raise ValueError("angle grid too coarse")

    d = np.column_stack([np.cos(angles), np.sin(angles)]) * rho[:, None]
    verts = np.empty((1 + nr * nt, 2))
    verts[0] = anchor
    for i, s in enumerate(svals):
        verts[1 + i * nt: 1 + (i + 1) * nt] = anchor + s * d

    def vid(i, j):
        return 1 + i * nt + (j % nt if closed else j)

    # Each quad is split along a diagonal.  The default orientation follows
    # the rotational direction, which makes two meshes built as mirror images
    # of each other triangulate differently.  With mirror_axis set, the
    # diagonal is chosen by which side of that axis the cell midpoint lies,
    # so reflecting the angle grid about the axis reflects the triangles too.
    th = np.asarray(angles, dtype=float)
    hi = np.concatenate([th[1:], th[:1] + 2.0 * math.pi]) if closed else th[1:]
    if mirror_axis is None:
        first_diag = np.ones(ncell, dtype=bool)
    else:
        mid = 0.5 * (th[:ncell] + hi[:ncell])
        first_diag = np.mod(mid - mirror_axis, 2.0 * math.pi) < math.pi

    tris = np.empty((ncell + 2 * (nr - 1) * ncell, 3), dtype=np.int32)
    for j in range(ncell):
        tris[j] = (0, vid(0, j), vid(0, j + 1))
    row = ncell
    for i in range(nr - 1):
        for j in range(ncell):
            va, vb = vid(i, j), vid(i + 1, j)
            vc, vd_ = vid(i + 1, j + 1), vid(i, j + 1)
            if first_diag[j]:
                tris[row] = (va, vb, vc)
                tris[row + 1] = (va, vc, vd_)
            else:
                tris[row] = (va, vb, vd_)
                tris[row + 1] = (vb, vc, vd_)
            row += 2

    mesh = Mesh(verts, tris, {}, h, PolarInfo(anchor, np.asarray(angles, float),
                                              np.asarray(svals, float),
                                              np.asarray(rho, float), closed))
    areas = mesh.triangle_areas()
    if areas.min() <= 0:
        raise ValueError(f"degenerate polar grid: min signed area {areas.min():.3e}")
    mesh.boundary_markers = markers_fn(mesh, vid, nr, nt, ncell)
    return mesh


def _circle_rho(anchor, center, radius, angles):
    """Distance from anchor to the circle |x-center|=radius along each angle."""
    u = np.asarray(anchor, float) - np.asarray(center, float)
    uu = float(u @ u)
    if uu >= radius * radius:
        raise ValueError("anchor must be strictly inside the disk")
    ud = u[0] * np.cos(angles) + u[1] * np.sin(angles)
    return -ud + np.sqrt(ud * ud + radius * radius - uu)


def generate_disk_mesh(center, radius: float, h: float, grading=(), *,
                       extra_angles=(), forced_s=(), angular_grading=(),
                       outer_growth: float | None = None,
                       angle_h_radius: float | None = None,
                       grading_scale: float | None = None,
                       mirror_axis: float | None = None) -> Mesh:
    """Triangulate the disk |x - center| < radius with a polar grid.

    grading: list of (point, exponent) pairs.  The first grading point (if
    any) becomes the grid anchor; further points must lie on a grid spoke and
    get a forced vertex ring plus radial refinement.  Near a grading point q
    the local element size follows h*(|x-q|/grading_scale)^exponent, clamped
    below at h*1e-3; grading_scale defaults to the disk radius.

    extra_angles: additional spoke angles the grid must contain (radians,
    measured at the anchor).  forced_s: normalized radii that must be vertex
    rings.  angular_grading: (angle, exponent, scale) triples refining the
    angle grid.  outer_growth: if set (a normalized radius), cells grow
    linearly beyond it, for large truncation domains.  angle_h_radius: the
    physical radius at which angular cells should have arc length h (default
    is the boundary, so large coarsened domains can keep their resolution
    concentrated near the anchor instead).

    mirror_axis: an angle at the anchor.  When set, each polar quad picks its
    splitting diagonal by the side of this axis its midpoint falls on, so two
    meshes whose angle grids are reflections of each other (with axes mapping
    to each other under that reflection) triangulate as exact mirror images.
    Default keeps the rotation-oriented diagonal everywhere.
    """
    center = np.asarray(center, dtype=float)
    if radius <= 0:
        raise ValueError("radius must be positive")
    if not 0 < h < radius:
        raise ValueError(f"element size h={h} must be in (0, radius={radius})")
    for q, gamma in grading:
        if not 0 < gamma <= 1:
            raise ValueError(f"grading exponent {gamma} outside (0, 1]")

    anchor = np.asarray(grading[0][0], dtype=float) if grading else center

    # angle grid; each off-anchor grading point contributes its spoke angle
    required = [0.0]
    ring_s, ring_centers, ring_exponents = [], [], []
    for idx, (q, gamma) in enumerate(grading):
        q = np.asarray(q, dtype=float)
        dq = q - anchor
        rq = float(np.hypot(*dq))
        if idx == 0:
            ring_centers.append(0.0)
            ring_exponents.append(gamma)
            continue
        ang = math.atan2(dq[1], dq[0])
        required.append(ang)
        # normalized radius of the ring through q, exact on its own spoke
        ring_s.append(rq / float(_circle_rho(anchor, center, radius, np.array([ang]))[0]))
        ring_centers.append(rq)
        ring_exponents.append(gamma)
    required.extend(extra_angles)
    rho_typ = radius - float(np.hypot(*(anchor - center)))
    if angle_h_radius is not None:
        if angle_h_radius <= 0:
            raise ValueError("angle_h_radius must be positive")
        rho_typ = min(rho_typ, angle_h_radius)
    base_step = h / max(rho_typ, 1e-12)
    angles = _fill_angles(np.asarray(required, dtype=float), base_step, angular_grading)

    rho = _circle_rho(anchor, center, radius, angles)
    rho_ref = float(rho.min())

    # radial grid in s, forced rings at grading points and caller requests
    forced = {1.0}
    forced.update(ring_s)
    for s in forced_s:
        if not 0 < s <= 1:
            raise ValueError(f"forced ring s={s} outside (0, 1]")
        forced.add(float(s))
    forced = sorted(forced)
    if forced[-1] > 1 + 1e-12:
        raise ValueError("grading point outside the disk")

    g_scale = radius if grading_scale is None else float(grading_scale)
    if g_scale <= 0:
        raise ValueError("grading_scale must be positive")

    def s_spacing(s):
        r_phys = np.asarray(s, dtype=float) * rho_ref
        f = grading_factor(r_phys, [0.0] if not ring_centers else ring_centers,
                           ring_exponents or [1.0], g_scale)
        if not ring_centers:
            f = np.ones_like(f)
        if outer_growth is not None:
            f = f * np.maximum(1.0, r_phys / (outer_growth * rho_ref))
        return (h / rho_ref) * f

    svals = [np.asarray([])]
    lo = 0.0
    for s1 in forced:
        seg = graded_interval(lo, s1, s_spacing)
        svals.append(seg[1:])
        lo = s1
    svals = np.concatenate(svals)

    def markers(mesh, vid, nr, nt, ncell):
        outer = np.array([[vid(nr - 1, j), vid(nr - 1, j + 1)] for j in range(ncell)],
                         dtype=np.int32)
        return {"outer": outer}

    return _build_polar(anchor, rho, svals, angles, True, h, markers,
                        mirror_axis=mirror_axis)


def generate_half_disk_mesh(radius: float, h: float, grading=()) -> Mesh:
    """Triangulate the upper half-disk {x2 > 0, |x| < radius}.

    The straight edge is split at (1, 0): markers are "arc" (curved part),
    "axis_load" for the segment (0,1), "axis_fixed" for (1,radius) and
    "axis_free" for (-radius,0).  A vertex is forced at (1,0) exactly.
    grading: list of (point, exponent) with points on the axis, typically
    the origin and (1,0).
    """
    if radius <= 0:
        raise ValueError("radius must be positive")
    if not 0 < h < radius:
        raise ValueError(f"element size h={h} must be in (0, radius={radius})")
    if radius <= 1:
        raise ValueError("radius must exceed 1 so the edge split point is interior")

    centers, exponents = [], []
    for q, gamma in grading:
        q = np.asarray(q, dtype=float)
        if abs(q[1]) > 1e-12:
            raise ValueError("half-disk grading points must lie on the axis")
        if not 0 < gamma <= 1:
            raise ValueError(f"grading exponent {gamma} outside (0, 1]")
        centers.append(float(q[0]))
        exponents.append(gamma)

    # angles in [0, pi]; refine toward angle 0 where the loaded segment and
    # the r^(1/2)-type corner at (1,0) live.  Arc resolution is pinned to the
    # unit-scale region: the field decays toward the truncation circle, so
    # wide outer arcs cost little accuracy.
    base_step = h / min(radius, 2.0)

    def t_spacing(t):
        f = np.clip((np.asarray(t, dtype=float) / math.pi) ** 0.5, 5e-3, 1.0)
        return base_step * f

    angles = graded_interval(0.0, math.pi, t_spacing)

    forced = sorted({1.0 / radius, 1.0} | {c / radius for c in centers if c > 0})

    def s_spacing(s):
        r_phys = np.asarray(s, dtype=float) * radius
        if centers:
            f = grading_factor(r_phys, centers, exponents, radius)
        else:
            f = np.ones_like(r_phys)
        # grow cells linearly past the unit-scale region of interest
        f = f * np.maximum(1.0, r_phys / 2.0)
        return (h / radius) * f

    svals = [np.asarray([])]
    lo = 0.0
    for s1 in forced:
        seg = graded_interval(lo, s1, s_spacing)
        svals.append(seg[1:])
        lo = s1
    svals = np.concatenate(svals)

    rho = np.full(len(angles), radius)

    def markers(mesh, vid, nr, nt, ncell):
        arc = np.array([[vid(nr - 1, j), vid(nr - 1, j + 1)] for j in range(ncell)],
                       dtype=np.int32)
        # positive axis: spoke at angle index 0; negative axis: angle index nt-1
        pos = [0] + [vid(i, 0) for i in range(nr)]
        neg = [0] + [vid(i, nt - 1) for i in range(nr)]
        xs = mesh.vertices[pos, 0]
        split = int(np.argmin(np.abs(xs - 1.0)))
        if abs(xs[split] - 1.0) > 1e-9 * radius:
            raise RuntimeError("vertex at (1,0) missing from the axis spoke")
        load = np.column_stack([pos[:split], pos[1:split + 1]]).astype(np.int32)
        fixed = np.column_stack([pos[split:-1], pos[split + 1:]]).astype(np.int32)
        free = np.column_stack([neg[:-1], neg[1:]]).astype(np.int32)
        return {"arc": arc, "axis_load": load, "axis_fixed": fixed, "axis_free": free}

    return _build_polar(np.zeros(2), rho, svals, angles, False, h, markers)


# --------------------------------------------------------------------------
# Cutting
# --------------------------------------------------------------------------

class JumpKind:
    """Coupling rule between the two sides of a cut segment."""
    CONTINUOUS = "continuous"
    ANTIPERIODIC = "antiperiodic"
    SUM = "sum"          # u+ + u- = g, with data g sampled at cut nodes


@dataclass(frozen=True)
class CutSegment:
    segment_id: str
    s0: float            # arclength range along the cut polyline
    s1: float
    kind: str = JumpKind.ANTIPERIODIC
    data: object = None  # callable g(x) for SUM segments


@dataclass(frozen=True)
class CutSpec:
    cut_id: str
    polyline: np.ndarray                 # (m, 2), from an interior anchor outward
    segments: tuple[CutSegment, ...]

    def length(self) -> float:
        p = np.asarray(self.polyline, dtype=float)
        return float(np.sum(np.hypot(*(p[1:] - p[:-1]).T)))


def ray_cut(cut_id: str, start, direction_angle: float, length: float,
            breaks=(), kinds=None, data=None) -> CutSpec:
    """CutSpec along a straight ray.  breaks: interior arclengths splitting the
    ray into len(breaks)+1 segments; kinds: one JumpKind per segment (default
    all antiperiodic); data: per-segment g for SUM segments."""
    start = np.asarray(start, dtype=float)
    end = start + length * np.array([math.cos(direction_angle), math.sin(direction_angle)])
    bounds = [0.0, *sorted(breaks), length]
    nseg = len(bounds) - 1
    kinds = list(kinds) if kinds is not None else [JumpKind.ANTIPERIODIC] * nseg
    data = list(data) if data is not None else [None] * nseg
    if len(kinds) != nseg or len(data) != nseg:
        raise ValueError("kinds/data length must match the number of segments")
    segs = tuple(CutSegment(f"{cut_id}:{i}", bounds[i], bounds[i + 1], kinds[i], data[i])
                 for i in range(nseg))
    return CutSpec(cut_id, np.vstack([start, end]), segs)


@dataclass
class ResolvedCut:
    """A CutSpec matched against mesh vertices."""
    spec: CutSpec
    nodes: np.ndarray     # ordered chain of original vertex ids
    arclen: np.ndarray    # arclength of each chain node
    plus: np.ndarray      # vertex id on the + side per chain node
    minus: np.ndarray     # vertex id on the - side (== plus where not duplicated)

    def segment_slice(self, seg: CutSegment, tol: float = 1e-9) -> np.ndarray:
        """Chain positions covered by a segment, endpoints included."""
        return np.nonzero((self.arclen >= seg.s0 - tol) & (self.arclen <= seg.s1 + tol))[0]


@dataclass
class CrackedMesh:
    base: Mesh
    cuts: list[ResolvedCut]
    twin_map: dict[int, int]
    side_tags: dict[int, dict[str, int]]     # node -> {cut_id: +1 / -1}
    tip_nodes: list[int]

    def find_cut(self, cut_id: str) -> ResolvedCut:
        for rc in self.cuts:
            if rc.spec.cut_id == cut_id:
                return rc
        raise KeyError(f"no cut named {cut_id!r}")

    def find_segment(self, segment_id: str):
        for rc in self.cuts:
            for seg in rc.spec.segments:
                if seg.segment_id == segment_id:
                    return rc, seg
        raise KeyError(f"no cut segment named {segment_id!r}")


def _resolve_chain(mesh: Mesh, spec: CutSpec, tol: float):
    """Vertices of mesh lying on the cut polyline, ordered by arclength."""
    poly = np.asarray(spec.polyline, dtype=float)
    verts = mesh.vertices
    found = {}
    offset = 0.0
    for a, b in zip(poly[:-1], poly[1:]):
        ab = b - a
        L = float(np.hypot(*ab))
        if L < tol:
            continue
        t = ((verts - a) @ ab) / (L * L)
        proj = a + np.clip(t, 0.0, 1.0)[:, None] * ab
        dist = np.hypot(*(verts - proj).T)
        hit = np.nonzero(dist <= tol)[0]
        for v in hit:
            arc = offset + np.clip(t[v], 0.0, 1.0) * L
            if v not in found or dist[v] < found[int(v)][1]:
                found[int(v)] = (float(arc), float(dist[v]))
        offset += L
    if not found:
        raise ValueError(f"cut {spec.cut_id!r}: no mesh vertices on the polyline; "
                         "re-mesh with the cut as a constraint")
    # Candidates sharing one arclength position are duplicates: on very fine
    # rings the vertices of neighboring spokes can pass within tol of the cut,
    # while genuine chain nodes sit a full mesh edge apart.  Keep the closest
    # candidate of each such cluster.
    node_list, arc_list = [], []
    for v in sorted(found, key=lambda q: found[q][0]):
        arc, d = found[v]
        if arc_list and arc - arc_list[-1] <= tol:
            if d < found[node_list[-1]][1]:
                node_list[-1], arc_list[-1] = v, arc
        else:
            node_list.append(v)
            arc_list.append(arc)
    nodes = np.array(node_list, dtype=np.int32)
    arcs = np.array(arc_list)
    # endpoints must be hit exactly
    if np.hypot(*(verts[nodes[0]] - poly[0])) > tol or \
       np.hypot(*(verts[nodes[-1]] - poly[-1])) > tol:
        raise ValueError(f"cut {spec.cut_id!r}: polyline endpoints are not mesh "
                         "vertices; re-mesh with the cut as a constraint")
    return nodes, arcs


def _validate_segments(spec: CutSpec, tol: float):
    L = spec.length()
    segs = sorted(spec.segments, key=lambda s: s.s0)
    if not segs or abs(segs[0].s0) > tol or abs(segs[-1].s1 - L) > tol:
        raise ValueError(f"cut {spec.cut_id!r}: segments must cover [0, {L}]")
    for s_prev, s_next in zip(segs[:-1], segs[1:]):
        if abs(s_prev.s1 - s_next.s0) > tol:
            raise ValueError(f"cut {spec.cut_id!r}: segment gap at arclength {s_prev.s1}")


def cut_mesh(mesh: Mesh, cuts) -> CrackedMesh:
    """Slit a mesh along the given cut polylines.

    Vertices strictly inside a cut are duplicated and incident triangles are
    re-wired by geometric side.  Endpoints stay single (crack tips) unless two
    distinct cuts end at the same interior point, in which case the meeting
    point is duplicated into its two angular sectors like any other cut node.
    """
    scale = float(np.abs(mesh.vertices).max()) or 1.0
    tol = SNAP_REL * max(1.0, scale)

    specs = list(cuts)
    chains = []
    chain_edge_owner: dict[tuple[int, int], int] = {}
    for ci, spec in enumerate(specs):
        _validate_segments(spec, tol)
        nodes, arcs = _resolve_chain(mesh, spec, tol)
        if len(nodes) < 2:
            raise ValueError(f"cut {spec.cut_id!r}: degenerate chain")
        edge_set = _mesh_edge_set(mesh)
        for u, v in zip(nodes[:-1], nodes[1:]):
            key = (min(int(u), int(v)), max(int(u), int(v)))
            if key not in edge_set:
                raise ValueError(f"cut {spec.cut_id!r}: chain pair {key} is not a mesh "
                                 "edge; re-mesh with the cut as a constraint")
            if key in chain_edge_owner:
                raise ValueError(f"cut {spec.cut_id!r} overlaps cut "
                                 f"{specs[chain_edge_owner[key]].cut_id!r} along an edge; "
                                 "cutting the same segment twice is not supported")
            chain_edge_owner[key] = ci
        chains.append((nodes, arcs))

    boundary = set(int(v) for v in mesh.boundary_nodes())
    endpoint_count: dict[int, int] = {}
    for nodes, _ in chains:
        for v in (int(nodes[0]), int(nodes[-1])):
            endpoint_count[v] = endpoint_count.get(v, 0) + 1

    # which nodes get duplicated, and along which incident cut edges the
    # triangle fan around them is split
    split_edges: dict[int, list[tuple[int, int]]] = {}

    def add_split(v, u):
        split_edges.setdefault(int(v), []).append((int(v), int(u)))

    tips: list[int] = []
    for nodes, _ in chains:
        for pos in range(1, len(nodes) - 1):
            add_split(nodes[pos], nodes[pos - 1])
            add_split(nodes[pos], nodes[pos + 1])
        for end, nb in ((nodes[0], nodes[1]), (nodes[-1], nodes[-2])):
            end = int(end)
            if end in boundary:
                continue
            if endpoint_count[end] >= 2:
                add_split(end, nb)
            elif end not in tips:
                tips.append(end)

    for v, edges in split_edges.items():
        if len(edges) != 2:
            raise ValueError(f"node {v}: {len(edges)} incident cut edges; only "
                             "two-sector splits are supported")

    verts = mesh.vertices.copy()
    tris = mesh.triangles.copy()
    incident: dict[int, list[int]] = {v: [] for v in split_edges}
    touched = np.nonzero(np.isin(tris, np.fromiter(split_edges, dtype=np.int64)))
    for ti, slot in zip(*touched):
        incident[int(tris[ti, slot])].append(int(ti))

    # triangle centroids are pure geometry; compute before any re-wiring
    centroids = verts[tris].mean(axis=1)

    twin_map: dict[int, int] = {}
    new_rows = []
    for v in sorted(split_edges):
        (_, u1), (_, u2) = split_edges[v]
        a1 = math.atan2(*(verts[u1] - verts[v])[::-1])
        a2 = math.atan2(*(verts[u2] - verts[v])[::-1])
        span = (a2 - a1) % TWO_PI
        tlist = sorted(incident[v])
        sector0 = []
        for ti in tlist:
            c = centroids[ti]
            beta = (math.atan2(c[1] - verts[v][1], c[0] - verts[v][0]) - a1) % TWO_PI
            sector0.append(beta < span)
        if all(sector0) or not any(sector0):
            raise ValueError(f"node {v}: cut does not separate the triangle fan")
        new_id = len(verts) + len(new_rows)
        new_rows.append(verts[v])
        keep_first = sector0[0]
        for ti, in0 in zip(tlist, sector0):
            if in0 != keep_first:
                tri = tris[ti]
                tri[tri == v] = new_id
        twin_map[v] = new_id
        twin_map[new_id] = v
    if new_rows:
        verts = np.vstack([verts, np.array(new_rows)])

    base = Mesh(verts, tris, mesh.boundary_markers, mesh.h_target, mesh.polar)

    resolved = []
    side_tags: dict[int, dict[str, int]] = {}
    for (nodes, arcs), spec in zip(chains, specs):
        plus = nodes.astype(np.int64).copy()
        minus = nodes.astype(np.int64).copy()
        pts = verts[nodes]
        for pos, v in enumerate(nodes):
            v = int(v)
            if v not in split_edges:
                continue
            w = twin_map[v]
            if pos == 0:
                tau = pts[1] - pts[0]
            elif pos == len(nodes) - 1:
                tau = pts[-1] - pts[-2]
            else:
                tau = pts[pos + 1] - pts[pos - 1]
            tau = tau / np.hypot(*tau)
            # Classify by a triangle of v's re-wired fan adjacent to the
            # chain edge at this node.  A triangle elsewhere in the fan is
            # not safe: where two cuts meet, a sector can open wider than a
            # half-plane and cross the other cut's tangent line.
            nb = int(nodes[pos + 1]) if pos == 0 else int(nodes[pos - 1])
            nb_ids = {nb, twin_map.get(nb, nb)}
            c = None
            for ti in incident[v]:
                row = tris[ti]
                if (row == v).any() and nb_ids.intersection(row.tolist()):
                    c = centroids[ti]
                    break
            if c is None:
                raise ValueError(f"node {v}: no triangle of its fan touches the "
                                 "chain edge; cut resolution is inconsistent")
            v_is_plus = tau[0] * (c[1] - verts[v][1]) - tau[1] * (c[0] - verts[v][0]) > 0
            pv, mv = (v, w) if v_is_plus else (w, v)
            plus[pos], minus[pos] = pv, mv
            side_tags.setdefault(pv, {})[spec.cut_id] = +1
            side_tags.setdefault(mv, {})[spec.cut_id] = -1
        resolved.append(ResolvedCut(spec, nodes, arcs, plus, minus))

    return CrackedMesh(base, resolved, twin_map, side_tags, tips)


def _mesh_edge_set(mesh: Mesh) -> set:
    t = mesh.triangles
    e = np.concatenate([t[:, [0, 1]], t[:, [1, 2]], t[:, [2, 0]]])
    e.sort(axis=1)
    return set(map(tuple, e.tolist()))


# --------------------------------------------------------------------------
# Point location and evaluation
# --------------------------------------------------------------------------

def locate_points(mesh: Mesh, pts: np.ndarray, tol: float = 1e-10):
    """Find (triangle index, barycentric coords) per query point.

    Uses the polar construction metadata to narrow the search when available
    and falls back to a full scan otherwise.  Points on cut lines resolve to
    whichever side's triangle is tested first; callers that care must offset
    their samples off the cut.
    """
    if isinstance(mesh, CrackedMesh):
        mesh = mesh.base
    pts = np.atleast_2d(np.asarray(pts, dtype=float))
    tris_idx = np.full(len(pts), -1, dtype=np.int64)
    bary = np.zeros((len(pts), 3))
    cand = _candidate_triangles(mesh, pts)
    verts = mesh.vertices
    tri = mesh.triangles
    for i, p in enumerate(pts):
        hit = False
        for ti in cand[i]:
            b = _barycentric(verts[tri[ti]], p)
            if b.min() >= -tol:
                tris_idx[i] = ti
                bary[i] = np.clip(b, 0.0, None)
                bary[i] /= bary[i].sum()
                hit = True
                break
        if not hit:
            ti, b = _locate_brute(verts, tri, p)
            if ti < 0:
                raise ValueError(f"point {p} not inside the mesh")
            tris_idx[i] = ti
            bary[i] = np.clip(b, 0.0, None)
            bary[i] /= bary[i].sum()
    return tris_idx, bary


def _locate_brute(verts, tri, p):
    p0 = verts[tri[:, 0]]
    m1 = verts[tri[:, 1]] - p0
    m2 = verts[tri[:, 2]] - p0
    det = m1[:, 0] * m2[:, 1] - m1[:, 1] * m2[:, 0]
    rx, ry = p[0] - p0[:, 0], p[1] - p0[:, 1]
    l1 = (rx * m2[:, 1] - ry * m2[:, 0]) / det
    l2 = (-rx * m1[:, 1] + ry * m1[:, 0]) / det
    l0 = 1.0 - l1 - l2
    lo = np.minimum(np.minimum(l0, l1), l2)
    ti = int(np.argmax(lo))
    if lo[ti] < -1e-9:
        return -1, None
    return ti, np.array([l0[ti], l1[ti], l2[ti]])


def _barycentric(tri_pts, p):
    m = np.column_stack([tri_pts[1] - tri_pts[0], tri_pts[2] - tri_pts[0]])
    rhs = p - tri_pts[0]
    det = m[0, 0] * m[1, 1] - m[0, 1] * m[1, 0]
    l1 = (rhs[0] * m[1, 1] - rhs[1] * m[0, 1]) / det
    l2 = (-rhs[0] * m[1, 0] + rhs[1] * m[0, 0]) / det
    return np.array([1.0 - l1 - l2, l1, l2])


def _candidate_triangles(mesh: Mesh, pts):
    info = mesh.polar
    n_all = len(mesh.triangles)
    if info is None:
        return [range(n_all)] * len(pts)
    nt = len(info.angles)
    ncell = nt if info.closed else nt - 1
    nr = len(info.svals)
    out = []
    for p in pts:
        d = p - info.anchor
        r = float(np.hypot(*d))
        t = math.atan2(d[1], d[0])
        t = info.angles[0] + (t - info.angles[0]) % TWO_PI
        j = int(np.searchsorted(info.angles, t + 1e-14) - 1)
        j = min(max(j, 0), ncell - 1)
        rho_here = info.rho[j]
        s = r / max(rho_here, 1e-300)
        i = int(np.searchsorted(info.svals, s))
        cands = []
        for jj in (j, (j - 1) % ncell if info.closed else max(j - 1, 0),
                   (j + 1) % ncell if info.closed else min(j + 1, ncell - 1)):
            for ii in range(max(i - 2, -1), min(i + 2, nr - 1)):
                if ii < 0:
                    cands.append(jj)                       # fan triangle
                else:
                    cands.append(ncell + 2 * (ii * ncell + jj))
                    cands.append(ncell + 2 * (ii * ncell + jj) + 1)
        out.append([c for c in dict.fromkeys(cands) if 0 <= c < n_all])
    return out


def evaluate(mesh: Mesh, values: np.ndarray, pts: np.ndarray) -> np.ndarray:
    """P1 interpolation of a nodal field at query points.  Accepts a cut
    mesh too; points on a cut line resolve to one side arbitrarily."""
    if isinstance(mesh, CrackedMesh):
        mesh = mesh.base
    ti, bary = locate_points(mesh, pts)
    return np.einsum("ij,ij->i", values[mesh.triangles[ti]], bary)


# --------------------------------------------------------------------------
# abmesh text format
# --------------------------------------------------------------------------

def write_mesh(path, obj) -> None:
    """Write a Mesh or CrackedMesh in the 'abmesh 1' text format."""
    cm = obj if isinstance(obj, CrackedMesh) else None
    mesh = cm.base if cm is not None else obj
    lines = ["abmesh 1", f"V {mesh.num_vertices}"]
    lines.extend(f"{x:.17g} {y:.17g}" for x, y in mesh.vertices)
    lines.append(f"T {len(mesh.triangles)}")
    lines.extend(f"{i} {j} {k} 0" for i, j, k in mesh.triangles)
    records = []
    if cm is not None:
        seg_index = {}
        for rc in cm.cuts:
            for seg in rc.spec.segments:
                seg_index[seg.segment_id] = len(seg_index)
        for rc in cm.cuts:
            for pos in range(len(rc.nodes)):
                if rc.plus[pos] == rc.minus[pos]:
                    continue
                arc = rc.arclen[pos]
                seg = next(s for s in rc.spec.segments
                           if s.s0 - 1e-9 <= arc <= s.s1 + 1e-9)
                sid = seg_index[seg.segment_id]
                records.append(f"{sid} {rc.plus[pos]} {rc.minus[pos]} 1")
                records.append(f"{sid} {rc.minus[pos]} {rc.plus[pos]} -1")
    lines.append(f"C {len(records)}")
    lines.extend(records)
    with open(path, "w") as fh:
        fh.write("\n".join(lines) + "\n")


def read_mesh(path):
    """Read an 'abmesh 1' file.  Returns (Mesh, cut_records) where
    cut_records is an int array of rows (segid, node, twin, side)."""
    with open(path) as fh:
        tokens = fh.read().split("\n")
    if tokens[0].strip() != "abmesh 1":
        raise ValueError(f"{path}: not an abmesh 1 file")
    k = 1

    def expect(tag):
        nonlocal k
        head = tokens[k].split()
        if head[0] != tag:
            raise ValueError(f"{path}: expected section {tag}, got {tokens[k]!r}")
        k += 1
        return int(head[1])

    nv = expect("V")
    verts = np.array([[float(w) for w in tokens[k + i].split()] for i in range(nv)])
    k += nv
    ntri = expect("T")
    tri_rows = np.array([[int(w) for w in tokens[k + i].split()] for i in range(ntri)],
                        dtype=np.int32)
    k += ntri
    nc = expect("C")
    recs = np.array([[int(w) for w in tokens[k + i].split()] for i in range(nc)],
                    dtype=np.int64).reshape(nc, 4) if nc else np.empty((0, 4), dtype=np.int64)
    mesh = Mesh(verts, tri_rows[:, :3], {}, h_target=0.0)
    return mesh, recs
