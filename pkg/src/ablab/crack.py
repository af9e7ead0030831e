"""Slit limit problems governing the sharp eigenvalue shift rate.

Both problems below live on a truncated disk of radius R around the origin,
with a homogeneous Dirichlet condition on the outer circle standing in for
decay at infinity, and are solved for odd local order k (k=1 generic).

* general slit direction alpha: the plane carries a sign-flip ray at angle 0
  (the real-gauge field is antiperiodic across it) and a unit slit at angle
  alpha on which the unknown must cancel the half-power profile in the mean:
  trace+ + trace- = -2 psi.  Minimizing

      J(u) = 1/2 int |grad u|^2 + int_slit dpsi/dnu+ (u+ - u-)

  under those couplings yields the corrector w.  Derived scalars: the
  minimum value J, the truncated gradient integral L_trunc (its R-limit is
  the rate constant for the eigenfunction energy), and the first circular
  moment omega1.

* alpha = 0: the slit falls onto the sign-flip ray; by even reflection the
  problem reduces to a half-plane one with a loaded segment (0,1) on the
  axis, solved on the upper half-disk by solve_we.  Its minimum value is the
  reference constant m_k < 0, also evaluated a second way (energy plus an
  independent quadrature of the solution trace) as a cross-check.

Exact identities tie these together (identity_suite):

    -4 m_k cos(k alpha) = k omega1
    omega1              = -(2/k) J
    J                   = 2 m_k cos(k alpha)

All scalars computed at truncation R carry O(R^-k) tails, so the identities
are checked after extrapolation over a doubling ladder R, 2R, 4R; the same
three-point power-law fit serves L_trunc (extrapolate_L), the identity
scalars, and the moment decay law omega(r) = omega1 r^(-k/2).
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.sparse.linalg import splu

from .assembly import (
    PowerDensity,
    ReducedSystem,
    assemble_boundary_load,
    assemble_jump_load,
    assemble_mass,
    assemble_stiffness,
    assemble_trace_sum_load,
    reduce_system,
)
from .blowup import psi
from .mesh import (
    CrackedMesh,
    JumpKind,
    Mesh,
    cut_mesh,
    evaluate,
    generate_disk_mesh,
    generate_half_disk_mesh,
    ray_cut,
    write_mesh,
)

TWO_PI = 2.0 * math.pi


def gauss_legendre(n: int, a: float, b: float):
    """Gauss points and weights on [a, b]."""
    x, w = np.polynomial.legendre.leggauss(n)
    return 0.5 * (b - a) * x + 0.5 * (a + b), 0.5 * (b - a) * w


def _marker_nodes(mesh: Mesh, marker: str) -> np.ndarray:
    return np.unique(mesh.boundary_markers[marker])


def slit_profile_normal_derivative(k: int, alpha: float):
    """Density t -> normal derivative of the half-power profile on the plus
    side of the slit at angle alpha, as a function of the distance t from the
    origin.  The plus side is the one whose outward normal along the slit is
    (sin alpha, -cos alpha); there the derivative is
    -(k/2) cos(k alpha / 2) t^(k/2 - 1).  A finite difference test pins the
    sign."""
    return PowerDensity(-0.5 * k * math.cos(0.5 * k * alpha), 0.5 * k - 1.0)


# --------------------------------------------------------------------------
# solution container
# --------------------------------------------------------------------------

@dataclass
class CrackSolution:
    """Minimizer of a slit problem on a truncated disk.

    For alpha on the sign-flip ray (reflected=True) the stored mesh and field
    live on the upper half-disk and all full-plane scalars account for the
    even reflection; mk / mk_trace are then the two routes to the reference
    constant."""
    alpha: float
    k: int
    R: float
    h: float
    mesh: object               # CrackedMesh, or Mesh for the reflected case
    u: np.ndarray              # nodal values of the corrector w
    J: float                   # minimum value of the slit functional
    L_trunc: float             # int_{D_R} |grad w|^2 (reflection included)
    omega1: float = 0.0        # int_0^{2pi} w(cos t, sin t) sin(kt/2) dt
    reflected: bool = False
    system: ReducedSystem | None = None
    load: np.ndarray | None = None
    mk: float | None = None        # attained half-plane minimum (reflected)
    mk_trace: float | None = None  # energy/trace re-evaluation of the same
    trace_moment: float | None = None
    L_extrapolated: float | None = None

    def omega(self, r: float, n_theta: int = 720) -> float:
        """First half-integer circular moment
        int_0^{2 pi} w(r cos t, r sin t) sin(k t / 2) dt
        by composite midpoint on arcs that avoid the slit directions."""
        if not 0 < r < self.R:
            raise ValueError(f"moment radius {r} outside (0, R)")
        if self.reflected:
            # even reflection doubles the upper half integral for odd k
            n = max(32, n_theta // 2)
            t = (np.arange(n) + 0.5) * (math.pi / n)
            pts = r * np.column_stack([np.cos(t), np.sin(t)])
            vals = evaluate(self.mesh, self.u, pts)
            return 2.0 * float(vals @ np.sin(0.5 * self.k * t)) * (math.pi / n)
        cut_angles = sorted({0.0, self.alpha % TWO_PI})
        arcs = list(zip(cut_angles, cut_angles[1:] + [cut_angles[0] + TWO_PI]))
        total = 0.0
        for lo, hi in arcs:
            if hi - lo < 1e-12:
                continue
            n = max(16, int(round(n_theta * (hi - lo) / TWO_PI)))
            t = lo + (np.arange(n) + 0.5) * (hi - lo) / n
            pts = r * np.column_stack([np.cos(t), np.sin(t)])
            vals = evaluate(self.mesh, self.u, pts)
            total += float(vals @ np.sin(0.5 * self.k * t)) * (hi - lo) / n
        return total

    def trace(self, t) -> np.ndarray:
        """Values of w on the positive axis (reflected case: the loaded
        face), at distances t from the origin."""
        t = np.atleast_1d(np.asarray(t, dtype=float))
        pts = np.column_stack([t, np.zeros_like(t)])
        return evaluate(self.mesh, self.u, pts)

    def export(self, prefix) -> dict:
        """Write <prefix>.json (scalars), <prefix>.abmesh (mesh) and
        <prefix>.vals (one nodal value per line, same ordering)."""
        doc = {
            "alpha": self.alpha, "k": self.k, "R": self.R, "h": self.h,
            "J": self.J, "L_trunc": self.L_trunc, "omega1": self.omega1,
            "reflected": self.reflected,
            "mk": self.mk, "mk_trace": self.mk_trace,
            "L_extrapolated": self.L_extrapolated,
            "num_vertices": int(len(self.u)),
        }
        prefix = str(prefix)
        with open(prefix + ".json", "w") as fh:
            json.dump(doc, fh, indent=2, sort_keys=True)
        write_mesh(prefix + ".abmesh", self.mesh)
        np.savetxt(prefix + ".vals", self.u, fmt="%.17g")
        return doc


# --------------------------------------------------------------------------
# general slit direction
# --------------------------------------------------------------------------

def _crack_mesh(alpha: float, k: int, R: float, h: float) -> CrackedMesh:
    """Disk mesh carrying the sign-flip ray and the unit slit at angle alpha,
    graded toward the origin and the slit tip."""
    a = alpha % TWO_PI
    tip = (math.cos(a), math.sin(a))
    mesh = generate_disk_mesh(
        (0.0, 0.0), R, h,
        grading=[((0.0, 0.0), 0.5), (tip, 0.5)],
        extra_angles=(0.0, a),
        angular_grading=[(a, 0.5, 1.0)],
        outer_growth=2.0 / R if R > 2 else None,
        angle_h_radius=1.0,
        grading_scale=1.0,
        # slit angles a and -a must triangulate as mirror images, or the
        # even-in-angle energy profile picks up a spurious asymmetry from
        # the quad diagonals near the tip
        mirror_axis=a,
    )
    g = lambda x: -2.0 * psi(x, k=k)
    cuts = [
        ray_cut("s0", (0.0, 0.0), 0.0, R, kinds=[JumpKind.ANTIPERIODIC]),
        ray_cut("gam", (0.0, 0.0), a, 1.0, kinds=[JumpKind.SUM], data=[g]),
    ]
    return cut_mesh(mesh, cuts)


def solve_wp(alpha: float, k: int = 1, R: float = 4.0, h: float = 0.05) -> CrackSolution:
    """Solve the slit problem at angle alpha; see the module docstring.

    An angle on the sign-flip ray itself (alpha = 0 mod 2 pi) is routed to
    the reflected half-disk problem solve_we."""
    if k < 1 or k % 2 == 0:
        raise ValueError("local order k must be odd and positive")
    if R < 2:
        raise ValueError("truncation radius must exceed the unit slit comfortably")
    a = alpha % TWO_PI
    if min(a, TWO_PI - a) < 1e-12:
        return solve_we(k=k, R=R, h=h)

    cm = _crack_mesh(a, k, R, h)
    K = assemble_stiffness(cm)
    M = assemble_mass(cm)
    rs = reduce_system(cm, K, M, dirichlet=[_marker_nodes(cm.base, "outer")])
    f = assemble_jump_load(cm, "gam:0", slit_profile_normal_derivative(k, a))

    lu = splu(rs.K.tocsc())
    x = lu.solve(rs.reduced_load(f))
    u = rs.expand(x)
    J = rs.energy(x, f_full=f)
    L_trunc = float(u @ (rs.K_full @ u))
    sol = CrackSolution(alpha=a, k=k, R=R, h=h, mesh=cm, u=u, J=J,
                        L_trunc=L_trunc, system=rs, load=f)
    sol.omega1 = sol.omega(1.0)
    return sol


# --------------------------------------------------------------------------
# reflected problem (alpha = 0) on the half-disk
# --------------------------------------------------------------------------

def solve_we(k: int = 1, R: float = 4.0, h: float = 0.05,
             n_gauss: int = 64) -> CrackSolution:
    """Reflected slit problem on the upper half-disk of radius R.

    The unknown vanishes on the axis beyond (1,0) and on the truncation arc,
    is free on the negative axis, and the segment (0,1) carries the load
    density -(k/2) t^(k/2 - 1).  The attained minimum is the reference
    constant: mk = min 1/2 int |grad u|^2 + int_0^1 density u.  mk_trace
    re-evaluates the load term from the solution trace by Gauss quadrature
    after substituting t = s^2 (removing the endpoint singularity of the
    density), an independent route that agrees only if the solve is right.

    The returned scalars J, L_trunc, omega1 refer to the even reflection to
    the full plane: J = 2 mk, L_trunc doubles the half-disk energy."""
    if k < 1 or k % 2 == 0:
        raise ValueError("local order k must be odd and positive")
    mesh = generate_half_disk_mesh(R, h, grading=[((0.0, 0.0), 0.5), ((1.0, 0.0), 0.5)])
    K = assemble_stiffness(mesh)

    fixed = np.unique(np.concatenate([
        _marker_nodes(mesh, "arc"), _marker_nodes(mesh, "axis_fixed")]))
    dens = PowerDensity(-0.5 * k, 0.5 * k - 1.0)
    f = assemble_boundary_load(mesh, "axis_load", dens)

    free = np.setdiff1d(np.arange(mesh.num_vertices), fixed)
    Kf = K.to_scipy().tocsr()
    lu = splu(Kf[free][:, free].tocsc())
    x = lu.solve(-f[free])
    u = np.zeros(mesh.num_vertices)
    u[free] = x

    energy = float(u @ (Kf @ u))
    mk = 0.5 * energy + float(f @ u)

    s, w = gauss_legendre(n_gauss, 0.0, 1.0)
    tr = evaluate(mesh, u, np.column_stack([s * s, np.zeros_like(s)]))
    trace_moment = 2.0 * float(w @ (s ** (k - 1) * tr))
    mk_trace = 0.5 * energy - 0.5 * k * trace_moment

    sol = CrackSolution(alpha=0.0, k=k, R=R, h=h, mesh=mesh, u=u,
                        J=2.0 * mk, L_trunc=2.0 * energy, reflected=True,
                        load=f, mk=mk, mk_trace=mk_trace,
                        trace_moment=trace_moment)
    sol.omega1 = sol.omega(1.0)
    return sol


def solve_we_unfolded(k: int = 1, R: float = 4.0, h: float = 0.05) -> CrackSolution:
    """The alpha = 0 problem posed on the full disk without assuming the
    reflection symmetry: the ray carries a continuous loaded segment (0,1)
    (load on both faces) and is antiperiodic beyond.  Exists as an
    independent cross-check of solve_we; the two must agree on J and
    L_trunc up to discretization."""
    if k < 1 or k % 2 == 0:
        raise ValueError("local order k must be odd and positive")
    mesh = generate_disk_mesh(
        (0.0, 0.0), R, h,
        grading=[((0.0, 0.0), 0.5), ((1.0, 0.0), 0.5)],
        extra_angles=(0.0,),
        angular_grading=[(0.0, 0.5, 1.0)],
        outer_growth=2.0 / R if R > 2 else None,
        angle_h_radius=1.0,
        grading_scale=1.0,
    )
    cm = cut_mesh(mesh, [ray_cut("s0", (0.0, 0.0), 0.0, R, breaks=[1.0],
                                 kinds=[JumpKind.CONTINUOUS, JumpKind.ANTIPERIODIC])])
    K = assemble_stiffness(cm)
    M = assemble_mass(cm)
    rs = reduce_system(cm, K, M, dirichlet=[_marker_nodes(cm.base, "outer")])
    f = assemble_trace_sum_load(cm, "s0:0", PowerDensity(-0.5 * k, 0.5 * k - 1.0))

    lu = splu(rs.K.tocsc())
    x = lu.solve(rs.reduced_load(f))
    u = rs.expand(x)
    J = rs.energy(x, f_full=f)
    sol = CrackSolution(alpha=0.0, k=k, R=R, h=h, mesh=cm, u=u, J=J,
                        L_trunc=float(u @ (rs.K_full @ u)),
                        system=rs, load=f, mk=0.5 * J)
    sol.omega1 = sol.omega(1.0)
    return sol


# --------------------------------------------------------------------------
# truncation ladder
# --------------------------------------------------------------------------

def _ladder_points(entries, attr):
    pts = []
    for e in entries:
        if isinstance(e, CrackSolution):
            pts.append((e.R, getattr(e, attr)))
        else:
            r, v = e
            pts.append((float(r), float(v)))
    return pts


def _extrapolate_pairs(pairs):
    pairs = sorted(pairs)
    if len(pairs) != 3:
        raise ValueError("need exactly three ladder points")
    (ra, va), (rb, vb), (rc, vc) = pairs
    if abs(rb / ra - 2.0) > 1e-9 or abs(rc / rb - 2.0) > 1e-9:
        raise ValueError("ladder radii must double")
    d1, d2 = vb - va, vc - vb
    scale = max(abs(va), abs(vb), abs(vc), 1e-300)
    if abs(d1) <= 1e-12 * scale and abs(d2) <= 1e-12 * scale:
        return vc, {"order": math.inf, "tail": 0.0, "d1": d1, "d2": d2}
    if d1 * d2 <= 0.0:
        raise ValueError("ladder differences are not monotone; refine the solves")
    q = math.log2(d1 / d2)
    q = min(max(q, 0.5), 2.0)
    ratio = 2.0 ** (-q)
    tail = d2 * ratio / (1.0 - ratio)
    return vc + tail, {"order": q, "tail": tail, "d1": d1, "d2": d2}


def extrapolate_L(solutions, return_details: bool = False):
    """Extrapolate the gradient integral from solves at radii R, 2R, 4R.

    The truncation error model is L_trunc(R) = L - c R^(-q); the observed
    order q = log2 of the ratio of successive differences is clamped to
    [0.5, 2] and the geometric tail is summed onto the largest-R value.
    Accepts CrackSolution objects or bare (R, value) pairs.  Raises on a
    non-monotone triple (mesh too coarse to trust)."""
    limit, diag = _extrapolate_pairs(_ladder_points(solutions, "L_trunc"))
    for e in solutions:
        if isinstance(e, CrackSolution):
            e.L_extrapolated = limit
    return (limit, diag) if return_details else limit


# --------------------------------------------------------------------------
# exact identities as residuals
# --------------------------------------------------------------------------

def identity_suite(sol, mk: float) -> dict:
    """Residuals of the three exact identities, normalized by |2 mk|.

        r1: -4 mk cos(k alpha) = k omega1
        r2: omega1 = -(2/k) J
        r3: J = 2 mk cos(k alpha)

    sol: either one CrackSolution, or a doubling ladder of three (same alpha
    and k, radii R, 2R, 4R).  The identities hold in the untruncated limit;
    a single solution leaves O(R^-k) truncation tails in the residuals, a
    ladder removes them by the power-law extrapolation, leaving only
    discretization error.  Pass an mk treated the same way."""
    if isinstance(sol, CrackSolution):
        k, a = sol.k, sol.alpha
        omega1, J = sol.omega1, sol.J
        extrapolated = False
    else:
        sols = list(sol)
        ks = {s.k for s in sols}
        angs = {round(s.alpha, 12) for s in sols}
        if len(ks) != 1 or len(angs) != 1:
            raise ValueError("ladder entries must share alpha and k")
        k, a = sols[0].k, sols[0].alpha
        omega1, _ = _extrapolate_pairs(_ladder_points(sols, "omega1"))
        J, _ = _extrapolate_pairs(_ladder_points(sols, "J"))
        extrapolated = True

    denom = 2.0 * abs(mk)
    ca = math.cos(k * a)
    return {
        "r1": abs(k * omega1 + 4.0 * mk * ca) / denom,
        "r2": abs(omega1 + (2.0 / k) * J) / denom,
        "r3": abs(J - 2.0 * mk * ca) / denom,
        "omega1": omega1, "J": J, "alpha": a, "k": k,
        "extrapolated": extrapolated,
    }


def moment_constancy(sols, radii=(1.0, 1.5, 2.0)) -> dict:
    """Decay law of the circular moment: omega(r) r^(k/2) should not depend
    on r >= 1.  sols: doubling ladder of three solutions; each radius value
    is extrapolated over the ladder before comparison.  Returns the values
    and their largest relative spread."""
    sols = list(sols)
    k = sols[0].k
    values = {}
    for r in radii:
        pts = [(s.R, s.omega(r) * r ** (0.5 * k)) for s in sols]
        values[r], _ = _extrapolate_pairs(pts)
    ref = values[radii[0]]
    spread = max(abs(values[r] - ref) for r in radii) / abs(ref)
    return {"values": values, "spread": spread}


# --------------------------------------------------------------------------
# the rate constant profile
# --------------------------------------------------------------------------

def L_profile(k: int, alphas, R: float = 4.0, h: float = 0.05,
              ladder: bool = True) -> list[dict]:
    """Gradient integral L and minimum value J per slit angle.

    With ladder=True each angle is solved at R, 2R, 4R and both scalars are
    extrapolated; otherwise single solves at R are reported as-is."""
    out = []
    for alpha in alphas:
        if ladder:
            sols = [solve_wp(alpha, k=k, R=RR, h=h) for RR in (R, 2 * R, 4 * R)]
            L_inf, diag = extrapolate_L(sols, return_details=True)
            J_inf, _ = _extrapolate_pairs(_ladder_points(sols, "J"))
            out.append({"alpha": float(alpha), "L": L_inf, "J": J_inf,
                        "order": diag["order"],
                        "ladder_L": [(s.R, s.L_trunc) for s in sols]})
        else:
            sol = solve_wp(alpha, k=k, R=R, h=h)
            out.append({"alpha": float(alpha), "L": sol.L_trunc, "J": sol.J,
                        "order": None, "ladder_L": [(R, sol.L_trunc)]})
    return out


# --------------------------------------------------------------------------
# functional inequality margins (structure checks of the constrained space)
# --------------------------------------------------------------------------

def _bump(r):
    """C^1 bump supported on 0.2 <= r <= 2."""
    r = np.asarray(r, dtype=float)
    s = np.clip((r - 0.2) / 1.8, 0.0, 1.0)
    return np.sin(math.pi * s) ** 2


def _chart_angles(cm: CrackedMesh, alpha: float):
    """Per-vertex angle with duplicates resolved by their side tag.  First
    return: window [0, 2 pi] (copies on the sign-flip ray get 0 above and
    2 pi below; slit copies both get alpha).  Second: window
    [alpha, alpha + 2 pi], for fields that jump across the slit instead."""
    xy = cm.base.vertices
    t0 = np.mod(np.arctan2(xy[:, 1], xy[:, 0]), TWO_PI)
    ta = alpha + np.mod(t0 - alpha, TWO_PI)
    for v, tags in cm.side_tags.items():
        if "s0" in tags:
            t0[v] = 0.0 if tags["s0"] > 0 else TWO_PI
            # in the alpha-based window both sides of the ray sit at 2 pi
            ta[v] = TWO_PI
        if "gam" in tags:
            ta[v] = alpha if tags["gam"] > 0 else alpha + TWO_PI
            t0[v] = alpha
    return t0, ta


def hardy_poincare_margins(alpha: float = 2.0, R: float = 4.0,
                           h: float = 0.12, modes=(1, 3, 5)) -> dict:
    """Relative margins of two structure inequalities on nodal test fields.

    Fields continuous across the slit (bump * cos/sin of half-integer modes,
    antiperiodic across the sign-flip ray) must satisfy the quarter Hardy
    bound: int |grad u|^2 >= 1/4 int u^2/|x|^2.  Fields that additionally
    jump across the slit with zero two-sided sum satisfy the weaker unit-disk
    bound: int |grad u|^2 >= 1/6 int_{D_1} u^2.  Margins are normalized by
    the energy; small negative values only reflect interpolation and
    quadrature error, so the tolerance is -1e-3."""
    cm = _crack_mesh(alpha, 1, R, h)
    Kf = assemble_stiffness(cm).to_scipy().tocsr()
    verts = cm.base.vertices
    r = np.hypot(verts[:, 0], verts[:, 1])
    t0, ta = _chart_angles(cm, alpha % TWO_PI)
    eta = _bump(r)

    tris = cm.base.triangles
    areas = cm.base.triangle_areas()
    cent = verts[tris].mean(axis=1)
    rc2 = cent[:, 0] ** 2 + cent[:, 1] ** 2

    def forms(u):
        en = float(u @ (Kf @ u))
        ubar = u[tris].mean(axis=1)
        hardy_l2 = float(np.sum(areas * ubar ** 2 / rc2))
        disk_l2 = float(np.sum((areas * ubar ** 2)[rc2 < 1.0]))
        return en, hardy_l2, disk_l2

    hardy, poincare = [], []
    for m in modes:
        for gfun in (np.cos, np.sin):
            u = eta * gfun(0.5 * m * t0)
            en, hl2, dl2 = forms(u)
            hardy.append((en - 0.25 * hl2) / en)
            poincare.append((en - dl2 / 6.0) / en)
    # one member that genuinely jumps across the slit (zero two-sided sum)
    u = eta * np.sin(0.5 * ta)
    en, _, dl2 = forms(u)
    poincare.append((en - dl2 / 6.0) / en)
    return {"hardy": hardy, "poincare": poincare,
            "hardy_min": min(hardy), "poincare_min": min(poincare)}
