"""P1 finite element forms on cracked meshes, plus constraint reduction.

The stiffness and mass matrices are assembled on the full duplicated vertex
set of a CrackedMesh; the coupling between twin copies of a cut node is not
part of the matrices.  It is applied afterwards by reduce_system, which turns
a choice of jump rule per cut segment into a linear map

    u_full = lift + P x

from reduced unknowns x to nodal values, so one assembled matrix pair serves
every problem in a family that differs only in the coupling (continuity,
sign flip, prescribed sum) or in Dirichlet data.

Conventions for a twin pair (u+, u-) on a cut:
    continuous      u+ = u-            one shared unknown
    antiperiodic    u+ + u- = 0        one unknown x, u+ = x, u- = -x
    sum with g      u+ + u- = g        one unknown x, u+- = g/2 +- x
A node carrying two different rules from adjacent segments gets the
intersection of the two constraint sets, which is a pin (for example
continuous meets antiperiodic forces the value 0).  Crack tips, where the two
sides collapse to a single vertex, are pinned the same way: 0 under a sign
flip, g/2 under a prescribed sum, free when continuous.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

from .mesh import CrackedMesh, JumpKind, Mesh


# --------------------------------------------------------------------------
# symmetric sparse container
# --------------------------------------------------------------------------

@dataclass
class SymSparse:
    """Lower triangle of a symmetric sparse matrix in sorted COO form."""
    n: int
    rows: np.ndarray
    cols: np.ndarray
    vals: np.ndarray

    @classmethod
    def from_full_coo(cls, n: int, i, j, v) -> "SymSparse":
        i = np.asarray(i, dtype=np.int64)
        j = np.asarray(j, dtype=np.int64)
        v = np.asarray(v, dtype=float)
        keep = i >= j
        m = sp.coo_matrix((v[keep], (i[keep], j[keep])), shape=(n, n)).tocsr()
        m.sum_duplicates()
        m.eliminate_zeros()
        c = m.tocoo()
        order = np.lexsort((c.col, c.row))
        return cls(n, c.row[order].astype(np.int64), c.col[order].astype(np.int64),
                   c.data[order])

    def to_scipy(self) -> sp.csr_matrix:
        lower = sp.coo_matrix((self.vals, (self.rows, self.cols)),
                              shape=(self.n, self.n))
        off = self.rows != self.cols
        upper = sp.coo_matrix((self.vals[off], (self.cols[off], self.rows[off])),
                              shape=(self.n, self.n))
        return (lower + upper).tocsr()

    def dump(self, path) -> None:
        """Text dump, one 'i j value' line per stored entry, row-major."""
        with open(path, "w") as fh:
            for i, j, v in zip(self.rows, self.cols, self.vals):
                fh.write(f"{i} {j} {v:.17g}\n")


# --------------------------------------------------------------------------
# element forms
# --------------------------------------------------------------------------

def _triangle_geometry(mesh: Mesh):
    p = mesh.vertices[mesh.triangles]
    # edge vectors opposite each local vertex
    e0 = p[:, 2] - p[:, 1]
    e1 = p[:, 0] - p[:, 2]
    e2 = p[:, 1] - p[:, 0]
    area = 0.5 * (e2[:, 0] * (-e1[:, 1]) - e2[:, 1] * (-e1[:, 0]))
    return (e0, e1, e2), area


def assemble_stiffness(obj) -> SymSparse:
    """Dirichlet form int grad u . grad v over all triangles."""
    mesh = obj.base if isinstance(obj, CrackedMesh) else obj
    (e0, e1, e2), area = _triangle_geometry(mesh)
    edges = (e0, e1, e2)
    t = mesh.triangles
    ii, jj, vv = [], [], []
    for a in range(3):
        for b in range(3):
            ii.append(t[:, a])
            jj.append(t[:, b])
            vv.append(np.einsum("ij,ij->i", edges[a], edges[b]) / (4.0 * area))
    return SymSparse.from_full_coo(mesh.num_vertices, np.concatenate(ii),
                                   np.concatenate(jj), np.concatenate(vv))


def assemble_mass(obj) -> SymSparse:
    """L2 form int u v with the exact P1 element mass matrix."""
    mesh = obj.base if isinstance(obj, CrackedMesh) else obj
    _, area = _triangle_geometry(mesh)
    t = mesh.triangles
    ii, jj, vv = [], [], []
    for a in range(3):
        for b in range(3):
            ii.append(t[:, a])
            jj.append(t[:, b])
            vv.append(area * ((2.0 if a == b else 1.0) / 12.0))
    return SymSparse.from_full_coo(mesh.num_vertices, np.concatenate(ii),
                                   np.concatenate(jj), np.concatenate(vv))


def elementwise_energy(mesh: Mesh, u: np.ndarray) -> np.ndarray:
    """Per-triangle value of int |grad u|^2, for cross-checking the
    assembled stiffness form."""
    (e0, e1, e2), area = _triangle_geometry(mesh)
    t = mesh.triangles
    # grad u = sum_a u_a * rot(e_a) / (2A) with rot(x, y) = (-y, x)
    gx = -(u[t[:, 0]] * e0[:, 1] + u[t[:, 1]] * e1[:, 1] + u[t[:, 2]] * e2[:, 1])
    gy = u[t[:, 0]] * e0[:, 0] + u[t[:, 1]] * e1[:, 0] + u[t[:, 2]] * e2[:, 0]
    return (gx * gx + gy * gy) / (4.0 * area)


def elementwise_l2(mesh: Mesh, u: np.ndarray) -> np.ndarray:
    """Per-triangle value of int u^2."""
    _, area = _triangle_geometry(mesh)
    t = mesh.triangles
    u0, u1, u2 = u[t[:, 0]], u[t[:, 1]], u[t[:, 2]]
    return area / 6.0 * (u0 * u0 + u1 * u1 + u2 * u2 + u0 * u1 + u1 * u2 + u2 * u0)


# --------------------------------------------------------------------------
# line loads
# --------------------------------------------------------------------------

class PowerDensity:
    """Line density coef * t^power of the arclength t from the chain start.

    Moments against the linear hat functions are integrated in closed form,
    so the integrable endpoint singularity at t = 0 (power > -1) costs no
    accuracy.
    """

    def __init__(self, coef: float, power: float):
        if power <= -1:
            raise ValueError("power must exceed -1 for an integrable density")
        self.coef = float(coef)
        self.power = float(power)

    def moments(self, t0: float, t1: float):
        """(int rho, int t rho) over [t0, t1]."""
        q = self.power
        m0 = self.coef * (t1 ** (q + 1) - t0 ** (q + 1)) / (q + 1)
        m1 = self.coef * (t1 ** (q + 2) - t0 ** (q + 2)) / (q + 2)
        return m0, m1


def _element_loads(tvals: np.ndarray, density) -> np.ndarray:
    """Consistent nodal loads for a 1D chain of elements at parameters tvals."""
    f = np.zeros(len(tvals))
    if isinstance(density, PowerDensity):
        for a in range(len(tvals) - 1):
            t0, t1 = tvals[a], tvals[a + 1]
            h = t1 - t0
            if h <= 0:
                raise ValueError("chain parameters must increase")
            m0, m1 = density.moments(t0, t1)
            f[a] += (t1 * m0 - m1) / h
            f[a + 1] += (m1 - t0 * m0) / h
    else:
        # generic callable density(t), fixed-order Gauss per element
        x, w = np.polynomial.legendre.leggauss(4)
        for a in range(len(tvals) - 1):
            t0, t1 = tvals[a], tvals[a + 1]
            h = t1 - t0
            tq = 0.5 * h * x + 0.5 * (t0 + t1)
            wq = 0.5 * h * w
            rho = np.asarray(density(tq), dtype=float)
            f[a] += np.sum(wq * rho * (t1 - tq) / h)
            f[a + 1] += np.sum(wq * rho * (tq - t0) / h)
    return f


def assemble_jump_load(cm: CrackedMesh, segment_id: str, density) -> np.ndarray:
    """Nodal vector for the form  int_seg density (u+ - u-) ds.

    Scatters with opposite signs onto the two sides of the cut; where the
    sides coincide (tips) the contributions cancel and the node gets nothing.
    """
    rc, seg = cm.find_segment(segment_id)
    idx = rc.segment_slice(seg)
    if len(idx) < 2:
        raise ValueError(f"segment {segment_id!r} covers fewer than two chain nodes")
    tvals = rc.arclen[idx]
    f_chain = _element_loads(tvals, density)
    out = np.zeros(cm.base.num_vertices)
    for local, pos in enumerate(idx):
        p, q = int(rc.plus[pos]), int(rc.minus[pos])
        if p == q:
            continue
        out[p] += f_chain[local]
        out[q] -= f_chain[local]
    return out


def assemble_trace_sum_load(cm: CrackedMesh, segment_id: str, density) -> np.ndarray:
    """Nodal vector for the form  int_seg density (u+ + u-) ds.

    Same-sign scatter onto both sides.  On a continuous segment the two
    copies reduce to one unknown and the contributions add there, giving
    2 * int density u ds, which is the intended meaning for a slit that
    carries a load on both faces."""
    rc, seg = cm.find_segment(segment_id)
    idx = rc.segment_slice(seg)
    if len(idx) < 2:
        raise ValueError(f"segment {segment_id!r} covers fewer than two chain nodes")
    tvals = rc.arclen[idx]
    f_chain = _element_loads(tvals, density)
    out = np.zeros(cm.base.num_vertices)
    for local, pos in enumerate(idx):
        p, q = int(rc.plus[pos]), int(rc.minus[pos])
        out[p] += f_chain[local]
        if q != p:
            out[q] += f_chain[local]
        else:
            out[p] += f_chain[local]
    return out


def assemble_boundary_load(mesh: Mesh, marker: str, density, origin=(0.0, 0.0)) -> np.ndarray:
    """Nodal vector for int_marker density u ds, with the density parameter
    measured as distance from the given origin point (the marker chain must
    be straight so that distance equals arclength up to an offset)."""
    edges = mesh.boundary_markers[marker]
    origin = np.asarray(origin, dtype=float)
    out = np.zeros(mesh.num_vertices)
    for a, b in edges:
        ta = float(np.hypot(*(mesh.vertices[a] - origin)))
        tb = float(np.hypot(*(mesh.vertices[b] - origin)))
        (n0, n1), (t0, t1) = ((a, b), (ta, tb)) if ta <= tb else ((b, a), (tb, ta))
        f = _element_loads(np.array([t0, t1]), density)
        out[n0] += f[0]
        out[n1] += f[1]
    return out


# --------------------------------------------------------------------------
# constraint reduction
# --------------------------------------------------------------------------

@dataclass
class ReducedSystem:
    K: sp.csr_matrix          # reduced stiffness P^T K P
    M: sp.csr_matrix          # reduced mass P^T M P
    P: sp.csr_matrix          # full-from-reduced map, nv x ndof
    lift: np.ndarray          # inhomogeneous part, length nv
    K_full: sp.csr_matrix
    M_full: sp.csr_matrix
    pinned: dict[int, float]
    pairs: list[tuple[int, int]]

    @property
    def ndof(self) -> int:
        return self.P.shape[1]

    def expand(self, x: np.ndarray) -> np.ndarray:
        return self.lift + self.P @ x

    def reduced_load(self, f_full: np.ndarray) -> np.ndarray:
        """Right side of the stationarity system for
        min 1/2 u^T K u + f^T u over u = lift + P x."""
        return -(self.P.T @ (self.K_full @ self.lift + f_full))

    def energy(self, x: np.ndarray, f_full: np.ndarray | None = None) -> float:
        u = self.expand(x)
        val = 0.5 * float(u @ (self.K_full @ u))
        if f_full is not None:
            val += float(f_full @ u)
        return val


def reduce_system(cm: CrackedMesh, K: SymSparse, M: SymSparse,
                  dirichlet=(), kind_overrides: dict | None = None,
                  g_tol: float = 1e-12) -> ReducedSystem:
    """Apply cut couplings and Dirichlet pins, producing the reduced system.

    dirichlet: iterable of (nodes, value) pairs, or plain node arrays meaning
    value 0.  kind_overrides: segment_id -> (JumpKind, data) replacing the
    rule stored in the CutSpec, so one cracked mesh can host several related
    problems.
    """
    nv = cm.base.num_vertices
    overrides = kind_overrides or {}

    relations: dict[tuple[int, int], list[tuple[str, float]]] = {}
    tip_rules: dict[int, list[tuple[str, float]]] = {}
    tips = set(cm.tip_nodes)

    for rc in cm.cuts:
        for seg in rc.spec.segments:
            kind, data = overrides.get(seg.segment_id, (seg.kind, seg.data))
            idx = rc.segment_slice(seg)
            for pos in idx:
                p, q = int(rc.plus[pos]), int(rc.minus[pos])
                gval = 0.0
                if kind == JumpKind.SUM:
                    if data is None:
                        raise ValueError(f"segment {seg.segment_id!r}: SUM rule "
                                         "needs data g(x)")
                    gval = float(data(cm.base.vertices[p]))
                if p == q:
                    if p in tips:
                        tip_rules.setdefault(p, []).append((kind, gval))
                    continue
                # the rules constrain u+ + u- or u+ - u-, both symmetric in
                # the two copies, so an unordered key is enough
                key = (min(p, q), max(p, q))
                relations.setdefault(key, []).append((kind, gval))

    pinned: dict[int, float] = {}

    def pin(node: int, value: float):
        old = pinned.get(node)
        if old is not None and abs(old - value) > g_tol:
            raise ValueError(f"node {node}: conflicting pin values {old} and {value}")
        pinned[node] = value

    for node, rules in tip_rules.items():
        kinds = {k for k, _ in rules}
        if kinds == {JumpKind.CONTINUOUS}:
            continue
        if JumpKind.SUM in kinds:
            gs = [g for k, g in rules if k == JumpKind.SUM]
            if any(abs(g - gs[0]) > g_tol for g in gs):
                raise ValueError(f"tip {node}: inconsistent sum data")
            if JumpKind.ANTIPERIODIC in kinds and abs(gs[0]) > g_tol:
                raise ValueError(f"tip {node}: sum and sign-flip rules conflict")
            pin(node, gs[0] / 2.0)
        else:
            pin(node, 0.0)

    # classify twin pairs
    merged: dict[int, int] = {}      # node -> representative
    paired: list[tuple[int, int, float]] = []   # (plus, minus, g)
    for (a, b), rules in sorted(relations.items()):
        kinds = {k for k, _ in rules}
        gs = sorted({round(g, 14) for k, g in rules if k == JumpKind.SUM})
        if len(gs) > 1:
            raise ValueError(f"pair {(a, b)}: segments prescribe different sums {gs}")
        g = gs[0] if gs else 0.0
        has_sum = JumpKind.SUM in kinds
        has_flip = JumpKind.ANTIPERIODIC in kinds
        has_cont = JumpKind.CONTINUOUS in kinds
        if has_sum and has_flip and abs(g) > g_tol:
            raise ValueError(f"pair {(a, b)}: sum and sign-flip rules conflict")
        if has_flip or (has_sum and abs(g) <= g_tol and not has_cont):
            if has_cont:
                pin(a, 0.0)
                pin(b, 0.0)
            else:
                paired.append((a, b, 0.0))
        elif has_sum:
            if has_cont:
                pin(a, g / 2.0)
                pin(b, g / 2.0)
            else:
                paired.append((a, b, g))
        else:
            merged[max(a, b)] = min(a, b)

    for item in dirichlet:
        if isinstance(item, tuple) and len(item) == 2 and not np.isscalar(item[0]):
            nodes, value = item
        else:
            nodes, value = item, 0.0
        for nd in np.atleast_1d(np.asarray(nodes, dtype=np.int64)):
            pin(int(nd), float(value))

    # a merged node inherits its representative's pin, and vice versa
    for b, a in merged.items():
        if b in pinned or a in pinned:
            val = pinned.get(b, pinned.get(a))
            pin(a, val)
            pin(b, val)

    in_pair = {}
    for a, b, g in paired:
        in_pair[a] = (b, g, +1)
        in_pair[b] = (a, g, -1)
    for nd in pinned:
        if nd in in_pair:
            raise ValueError(f"node {nd} is both pinned and twin-coupled")

    # assign reduced columns
    col = np.full(nv, -1, dtype=np.int64)
    lift = np.zeros(nv)
    next_col = 0
    for v in range(nv):
        if v in pinned:
            lift[v] = pinned[v]
            continue
        if v in merged:
            continue
        if v in in_pair and in_pair[v][2] < 0:
            continue
        col[v] = next_col
        next_col += 1
    rows, cols, vals = [], [], []
    for v in range(nv):
        if v in pinned:
            continue
        if v in merged:
            rep = merged[v]
            rows.append(v), cols.append(col[rep]), vals.append(1.0)
            continue
        if v in in_pair:
            other, g, sgn = in_pair[v]
            lift[v] = g / 2.0
            c = col[v] if sgn > 0 else col[other]
            rows.append(v), cols.append(c), vals.append(float(sgn))
            continue
        rows.append(v), cols.append(col[v]), vals.append(1.0)

    P = sp.csr_matrix((vals, (rows, cols)), shape=(nv, next_col))
    K_full = K.to_scipy()
    M_full = M.to_scipy()
    K_red = (P.T @ K_full @ P).tocsr()
    M_red = (P.T @ M_full @ P).tocsr()
    return ReducedSystem(K_red, M_red, P, lift, K_full, M_full, pinned,
                         [(a, b) for a, b, _ in paired])
