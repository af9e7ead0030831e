import math

import numpy as np

from _oracles import J_3HALF_FIRST_ZERO, J_HALF_FIRST_ZERO, dirichlet_disk_eigenvalue

from ablab import cut_mesh, generate_disk_mesh
from ablab.assembly import assemble_mass, assemble_stiffness, reduce_system
from ablab.eigensolve import detect_simplicity, smallest_eigenpairs
from ablab.mesh import Mesh, ray_cut


def _rect_mesh(nx, ny, lx=1.0, ly=1.0):
    """Structured rectangle triangulation built by hand, independent of the
    package's mesh generators."""
    xs = np.linspace(0, lx, nx + 1)
    ys = np.linspace(0, ly, ny + 1)
    X, Y = np.meshgrid(xs, ys, indexing="ij")
    verts = np.column_stack([X.ravel(), Y.ravel()])

    def vid(i, j):
        return i * (ny + 1) + j

    tris = []
    for i in range(nx):
        for j in range(ny):
            a, b, c, d = vid(i, j), vid(i + 1, j), vid(i + 1, j + 1), vid(i, j + 1)
            tris.append((a, b, c))
            tris.append((a, c, d))
    boundary = np.array([vid(i, j) for i in range(nx + 1) for j in range(ny + 1)
                         if i in (0, nx) or j in (0, ny)])
    m = Mesh(verts, np.array(tris, dtype=np.int32), {}, max(lx / nx, ly / ny))
    return m, boundary


def _dirichlet_disk_system(h):
    m = generate_disk_mesh((0, 0), 1.0, h, [((0.0, 0.0), 0.5)])
    outer = np.unique(m.boundary_markers["outer"])
    return reduce_system(cut_mesh(m, []), assemble_stiffness(m), assemble_mass(m),
                         dirichlet=[outer])


def test_square_ground_state():
    m, boundary = _rect_mesh(40, 40)
    sys = reduce_system(cut_mesh(m, []), assemble_stiffness(m), assemble_mass(m),
                        dirichlet=[boundary])
    pairs = smallest_eigenpairs(sys.K, sys.M, 3)
    exact = 2 * math.pi ** 2
    assert abs(pairs[0].value - exact) / exact < 5e-3
    # second and third states are the degenerate (1,2)/(2,1) pair
    exact2 = 5 * math.pi ** 2
    assert abs(pairs[1].value - exact2) / exact2 < 6e-3
    assert abs(pairs[2].value - exact2) / exact2 < 6e-3


def test_disk_ground_state_matches_bessel_zero():
    sys = _dirichlet_disk_system(0.07)
    pairs = smallest_eigenpairs(sys.K, sys.M, 1)
    exact = dirichlet_disk_eigenvalue(1)
    assert abs(pairs[0].value - exact) / exact < 0.01


def test_residuals_meet_tolerance():
    sys = _dirichlet_disk_system(0.12)
    pairs = smallest_eigenpairs(sys.K, sys.M, 4, tol=1e-9)
    assert all(p.residual <= 1e-9 for p in pairs)
    # vectors are M-normalized
    for p in pairs:
        assert abs(p.vector @ (sys.M @ p.vector) - 1.0) < 1e-8


def test_solver_is_deterministic():
    sys = _dirichlet_disk_system(0.15)
    a = smallest_eigenpairs(sys.K, sys.M, 3)
    b = smallest_eigenpairs(sys.K, sys.M, 3)
    for pa, pb in zip(a, b):
        assert pa.value == pb.value
        assert np.array_equal(pa.vector, pb.vector)


def test_detect_simplicity_on_disk_spectrum():
    sys = _dirichlet_disk_system(0.1)
    pairs = smallest_eigenpairs(sys.K, sys.M, 4)
    assert detect_simplicity(pairs, 1)
    # the first excited state of the disk is a degenerate pair
    assert not detect_simplicity(pairs, 2, gap_tol=1e-2)
    assert not detect_simplicity(pairs, 3, gap_tol=1e-2)


def test_half_flux_disk_spectrum():
    # pole at the center of the unit disk: after the sign-flip transmission
    # condition across a radial slit the spectrum is built from half-integer
    # Bessel modes, so the first four values are pi^2 (twice) and the square
    # of the first zero of the order-3/2 Bessel function (twice)
    m = generate_disk_mesh((0, 0), 1.0, 0.08, [((0.0, 0.0), 0.5)])
    cm = cut_mesh(m, [ray_cut("s0", (0, 0), 0.0, 1.0)])
    outer = np.unique(m.boundary_markers["outer"])
    sys = reduce_system(cm, assemble_stiffness(cm), assemble_mass(cm),
                        dirichlet=[outer])
    pairs = smallest_eigenpairs(sys.K, sys.M, 4)
    lam = np.array([p.value for p in pairs])
    e1 = J_HALF_FIRST_ZERO ** 2
    e3 = J_3HALF_FIRST_ZERO ** 2
    assert abs(lam[0] - e1) / e1 < 0.02
    assert abs(lam[1] - e1) / e1 < 0.02
    assert abs(lam[2] - e3) / e3 < 0.03
    assert abs(lam[3] - e3) / e3 < 0.03
    # min-max: conforming constraint space keeps discrete values above exact
    assert lam[0] >= e1 - 1e-6
