"""Half-flux magnetic eigenproblems in the real gauge on a slit disk.

The complex eigenproblem (i grad + A)^2 phi = lambda phi, where A carries
circulation 1/2 around a marked interior point (the pole), is unitarily
equivalent to the plain Laplace eigenproblem for the real field
u = e^{-i theta/2} phi, where theta is an angle chart anchored at the pole.
The price of the real picture is a sign flip across the chart's jump ray:
u changes sign across the ray from the pole to the boundary, which the
cracked-mesh machinery expresses as an antiperiodic coupling.  Away from
the ray the two energy densities agree pointwise, |grad u| = |(i grad+A)phi|,
because A is exactly half the chart gradient; that identity is what makes
every derived quantity below computable from real fields alone.

A study tracks eigenvalues while the pole moves toward a fixed interior
point (the anchor).  Both problems of a pair live on one cracked mesh whose
cut is the full ray from the anchor through the pole to the boundary:

* pole problem: continuous coupling between anchor and pole, antiperiodic
  beyond the pole (the two rules meeting at the pole force u = 0 there,
  matching the sqrt-distance vanishing of the true eigenfunction);
* anchor problem (pole sitting at the anchor): antiperiodic along the whole
  ray.

Solving both on one mesh makes their eigenvalue difference and the gradient
of the nodal difference meaningful without interpolation.  The phase freedom
left by the complex problem (a global sign, in the real picture) is fixed by
normalize_pair, which orients the pole-problem field against the anchor
field; energy_discrepancy then integrates |grad(u_a - u_0)|^2 over the slit
domain.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np

from .assembly import assemble_mass, assemble_stiffness, reduce_system
from .blowup import wrap_angle
from .eigensolve import EigenPair, detect_simplicity, smallest_eigenpairs
from .mesh import CrackedMesh, JumpKind, cut_mesh, generate_disk_mesh, ray_cut

TWO_PI = 2.0 * math.pi

POLE_ON_RAY_TOL = 1e-9
DEGENERATE_ALIGNMENT_TOL = 1e-10


# --------------------------------------------------------------------------
# angle charts and the half-flux potential
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class AngleChart:
    """Polar angle around an anchor point, single-valued off one ray.

    Values lie in [base_angle, base_angle + 2 pi); the discontinuity is the
    ray leaving the anchor at base_angle, where the half-phase e^{i theta/2}
    jumps by the factor -1."""
    anchor: tuple[float, float]
    base_angle: float = 0.0


def theta(chart: AngleChart, x):
    """Chart angle of one point or an (n, 2) array of points.

    Raises at the anchor itself, where no angle exists."""
    pts = np.atleast_2d(np.asarray(x, dtype=float)) - np.asarray(chart.anchor, dtype=float)
    r = np.hypot(pts[:, 0], pts[:, 1])
    if np.any(r == 0.0):
        raise ValueError("chart angle is undefined at the anchor")
    t = wrap_angle(np.arctan2(pts[:, 1], pts[:, 0]), chart.base_angle)
    return t if t.size > 1 else float(t[0])


def half_flux_potential(pole, x):
    """Vector potential with circulation 1/2 around the pole, the rotational
    field (-(x-p)_2, (x-p)_1) / (2 |x-p|^2).  Equals half the gradient of any
    angle chart anchored at the pole, away from the chart's ray."""
    pts = np.atleast_2d(np.asarray(x, dtype=float)) - np.asarray(pole, dtype=float)
    rr = pts[:, 0] ** 2 + pts[:, 1] ** 2
    if np.any(rr == 0.0):
        raise ValueError("potential is singular at the pole")
    out = 0.5 * np.column_stack([-pts[:, 1], pts[:, 0]]) / rr[:, None]
    return out if len(out) > 1 else out[0]


# --------------------------------------------------------------------------
# configuration and results
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class AbConfig:
    """Domain and solver knobs for one family of pole problems.

    The domain is the disk |x - center| < radius.  anchor is the fixed
    interior point the pole travels toward; None anchors each solve at its
    own pole (single antiperiodic ray, no continuity break).  n_window is
    the minimum number of eigenpairs computed per solve, so neighbor gaps
    around the requested index are always visible."""
    center: tuple[float, float] = (0.0, 0.0)
    radius: float = 1.0
    h: float = 0.05
    anchor: tuple[float, float] | None = None
    n_window: int = 6
    gap_tol: float = 1e-3

    def __post_init__(self):
        if self.radius <= 0:
            raise ValueError("radius must be positive")
        if not 0 < self.h < self.radius:
            raise ValueError("element size must lie in (0, radius)")
        if self.anchor is not None:
            c = np.asarray(self.center, dtype=float)
            if np.hypot(*(np.asarray(self.anchor, float) - c)) >= self.radius:
                raise ValueError("anchor must be interior to the disk")
        if self.n_window < 3:
            raise ValueError("eigenpair window must hold at least 3 pairs")


@dataclass
class AbEigenResult:
    """Eigenpairs of one pole position on its cracked mesh.

    fields holds the full nodal vectors (one per computed pair), each with
    unit L2 norm; pairs carries the reduced-space data including residuals.
    simple reports the relative spectral gap test at n0; when it fails the
    result is still returned and warning says so."""
    pole: np.ndarray
    ray_angle: float
    n0: int
    mesh: CrackedMesh
    system: object
    pairs: list[EigenPair]
    fields: list[np.ndarray]
    simple: bool
    sign_normalized: bool = False
    warning: str | None = None

    @property
    def value(self) -> float:
        return self.pairs[self.n0 - 1].value

    @property
    def field(self) -> np.ndarray:
        return self.fields[self.n0 - 1]


# --------------------------------------------------------------------------
# meshing a pole position
# --------------------------------------------------------------------------

def _pole_geometry(cfg: AbConfig, pole, ray_angle: float):
    pole = np.asarray(pole, dtype=float)
    center = np.asarray(cfg.center, dtype=float)
    if np.hypot(*(pole - center)) >= cfg.radius - 1e-12:
        raise ValueError("pole must be strictly interior to the disk")
    anchor = pole if cfg.anchor is None else np.asarray(cfg.anchor, dtype=float)
    d = pole - anchor
    delta = float(np.hypot(*d))
    if delta > POLE_ON_RAY_TOL:
        along = d @ np.array([math.cos(ray_angle), math.sin(ray_angle)])
        if abs(along - delta) > POLE_ON_RAY_TOL * max(1.0, delta):
            raise ValueError("pole must lie on the ray leaving the anchor at "
                             "ray_angle")
    else:
        delta = 0.0
    return pole, anchor, delta


def build_pole_mesh(cfg: AbConfig, pole, ray_angle: float) -> CrackedMesh:
    """Disk mesh slit along the ray from the anchor through the pole.

    The grid is anchored at cfg.anchor (or at the pole when no anchor is
    set), so the cut ray is a straight chain of mesh edges; the element size
    is graded with exponent 1/2 toward the anchor and, for a detached pole,
    toward the pole's vertex ring.  The cut carries one segment per side of
    the pole: (anchor, pole) continuous, (pole, boundary) antiperiodic; with
    the pole at the anchor there is a single antiperiodic segment."""
    pole, anchor, delta = _pole_geometry(cfg, pole, ray_angle)
    grading = [(tuple(anchor), 0.5)]
    if delta > 0.0:
        grading.append((tuple(pole), 0.5))
    mesh = generate_disk_mesh(cfg.center, cfg.radius, cfg.h, grading=grading,
                              extra_angles=(ray_angle,))
    angles = mesh.polar.angles
    j = int(np.argmin(np.abs(np.mod(angles - ray_angle + math.pi, TWO_PI) - math.pi)))
    length = float(mesh.polar.rho[j])
    if delta > 0.0:
        cut = ray_cut("ray", anchor, ray_angle, length, breaks=[delta],
                      kinds=[JumpKind.CONTINUOUS, JumpKind.ANTIPERIODIC])
    else:
        cut = ray_cut("ray", anchor, ray_angle, length,
                      kinds=[JumpKind.ANTIPERIODIC])
    return cut_mesh(mesh, [cut])


def _check_mesh_matches(cm: CrackedMesh, anchor, ray_angle: float, delta: float):
    rc = cm.find_cut("ray")
    poly = rc.spec.polyline
    if np.hypot(*(poly[0] - anchor)) > 1e-9:
        raise ValueError("mesh cut does not start at the anchor")
    direction = poly[1] - poly[0]
    ang = math.atan2(direction[1], direction[0])
    if abs(math.remainder(ang - ray_angle, TWO_PI)) > 1e-9:
        raise ValueError("mesh cut direction does not match ray_angle")
    segs = rc.spec.segments
    if delta > 0.0:
        if len(segs) < 2 or abs(segs[0].s1 - delta) > 1e-9:
            raise ValueError("mesh cut has no break at the pole distance; "
                             "build the mesh for this pole")
    return segs


# --------------------------------------------------------------------------
# the solves
# --------------------------------------------------------------------------

def solve_ab(cfg: AbConfig, pole, ray_angle: float, n0: int,
             cracked: CrackedMesh | None = None) -> AbEigenResult:
    """Lowest eigenpairs of the half-flux problem with the given pole.

    The pole must sit on the ray leaving the anchor at ray_angle (or at the
    anchor itself).  cracked reuses a mesh from build_pole_mesh, which is how
    the pole problem and its anchor problem share one discretization: the
    pole problem takes the cut's stored couplings, the anchor problem
    overrides the continuous stretch to antiperiodic.  Returns the full
    window of computed pairs; value/field expose the n0-th.  A failed
    spectral gap test at n0 sets warning but still returns the result."""
    if n0 < 1:
        raise ValueError("eigenpair index n0 is 1-based and must be positive")
    pole, anchor, delta = _pole_geometry(cfg, pole, ray_angle)
    if cracked is None:
        build_at = pole if cfg.anchor is None or delta > 0.0 else anchor
        cracked = build_pole_mesh(cfg, build_at, ray_angle)
    segs = _check_mesh_matches(cracked, anchor, ray_angle, delta)

    overrides = {}
    if delta == 0.0:
        for seg in segs:
            if seg.kind != JumpKind.ANTIPERIODIC:
                overrides[seg.segment_id] = (JumpKind.ANTIPERIODIC, None)

    K = assemble_stiffness(cracked)
    M = assemble_mass(cracked)
    outer = np.unique(cracked.base.boundary_markers["outer"])
    rs = reduce_system(cracked, K, M, dirichlet=[outer],
                       kind_overrides=overrides or None)

    count = max(n0 + 2, cfg.n_window)
    pairs = smallest_eigenpairs(rs.K, rs.M, count)
    fields = [rs.expand(p.vector) for p in pairs]
    simple = detect_simplicity(pairs, n0, cfg.gap_tol)
    warning = None
    if not simple:
        warning = (f"eigenvalue {n0} fails the spectral gap test "
                   f"(tolerance {cfg.gap_tol:g}); treat rates with care")
    return AbEigenResult(pole=pole, ray_angle=ray_angle, n0=n0, mesh=cracked,
                         system=rs, pairs=pairs, fields=fields, simple=simple,
                         warning=warning)


def _flip_index(result: AbEigenResult, idx: int) -> AbEigenResult:
    pairs = list(result.pairs)
    p = pairs[idx]
    pairs[idx] = EigenPair(p.value, -p.vector, p.residual, p.index)
    fields = list(result.fields)
    fields[idx] = -fields[idx]
    return replace(result, pairs=pairs, fields=fields)


def normalize_pair(result_a: AbEigenResult, result_0: AbEigenResult) -> AbEigenResult:
    """Orient the pole-problem field against the anchor-problem field.

    Both results must live on the same cracked mesh.  Flips the n0-th field
    of result_a if its L2 inner product with result_0's is negative, making
    the product positive; returns a copy flagged sign_normalized.  An inner
    product below 1e-10 in magnitude means the two fields are essentially
    orthogonal, which signals a wrong eigenvalue branch; that is an error."""
    if result_a.mesh is not result_0.mesh:
        raise ValueError("pair must share one cracked mesh")
    M = result_a.system.M_full
    ip = float(result_a.field @ (M @ result_0.field))
    if abs(ip) < DEGENERATE_ALIGNMENT_TOL:
        raise ValueError("phase alignment degenerate: the two fields are "
                         "L2-orthogonal; check the eigenvalue branch")
    out = _flip_index(result_a, result_a.n0 - 1) if ip < 0 else replace(
        result_a, pairs=list(result_a.pairs), fields=list(result_a.fields))
    out.sign_normalized = True
    return out


def fix_reference_sign(result: AbEigenResult) -> AbEigenResult:
    """Deterministic global sign for a reference field: the first nodal value
    exceeding 1e-12 of the maximum must be positive.  Makes blow-up frame
    coefficients reproducible across meshes and runs."""
    u = result.field
    tol = 1e-12 * np.abs(u).max()
    idx = np.nonzero(np.abs(u) > tol)[0]
    if len(idx) and u[idx[0]] < 0:
        return _flip_index(result, result.n0 - 1)
    return result


def energy_discrepancy(result_a: AbEigenResult, result_0: AbEigenResult) -> float:
    """Gradient energy of the nodal difference of the aligned pair,
    integrated over the slit domain.

    By the half-phase gauge identity this equals the squared magnetic-energy
    distance between the reconstructed complex eigenfunctions, so its decay
    as the pole approaches the anchor is the eigenfunction convergence rate.
    Requires normalize_pair first; an unaligned sign would shift the value
    by about four times the mean energy."""
    if result_a.mesh is not result_0.mesh:
        raise ValueError("pair must share one cracked mesh")
    if not result_a.sign_normalized:
        raise ValueError("sign-normalize the pair before comparing energies")
    d = result_a.field - result_0.field
    return float(d @ (result_a.system.K_full @ d))
