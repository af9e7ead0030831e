import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from ablab.blowup import (
    BlowupFit,
    fit_blowup,
    fit_blowup_sampler,
    nodal_ray_count,
    psi,
    psi_gradient,
    rotate_frame,
    wrap_angle,
)
from ablab.mesh import generate_disk_mesh, locate_points

RADII = [0.4, 0.2, 0.1, 0.05, 0.025]


def test_wrap_angle_window():
    t = wrap_angle(np.array([-0.1, 0.0, 6.5, 13.0]), base=0.0)
    assert np.all(t >= 0.0) and np.all(t < 2 * math.pi)
    assert abs(t[0] - (2 * math.pi - 0.1)) < 1e-12
    t2 = wrap_angle(0.2, base=0.5)
    assert abs(t2 - (0.2 + 2 * math.pi)) < 1e-12


def test_psi_matches_polar_formula():
    rng = np.random.default_rng(3)
    r = rng.uniform(0.1, 2.0, size=40)
    t = rng.uniform(0.0, 2 * math.pi, size=40)
    pts = np.column_stack([r * np.cos(t), r * np.sin(t)])
    for k in (1, 3):
        expect = r ** (k / 2) * np.sin(k * t / 2)
        assert np.allclose(psi(pts, k=k), expect, atol=1e-12)


def test_psi_gradient_finite_difference():
    rng = np.random.default_rng(5)
    pts = rng.uniform(-1.0, 1.0, size=(20, 2))
    # keep clear of the branch ray (positive x1 axis)
    pts = pts[np.hypot(pts[:, 0], pts[:, 1]) > 0.2]
    pts = pts[(pts[:, 1] > 0.05) | (pts[:, 0] < -0.05)]
    eps = 1e-6
    for k in (1, 3):
        g = psi_gradient(pts, k=k)
        for i, p in enumerate(pts):
            for d in range(2):
                e = np.zeros(2)
                e[d] = eps
                fd = (psi(p + e, k=k) - psi(p - e, k=k)) / (2 * eps)
                assert abs(g[i, d] - fd) < 5e-6


def test_fit_pure_sine_mode():
    fit = fit_blowup_sampler(lambda r, t: r ** 0.5 * np.sin(t / 2), RADII)
    assert fit.k == 1
    assert abs(fit.beta1) < 1e-10
    assert abs(fit.beta2 - 1.0) < 1e-10
    assert abs(fit.alpha0) < 1e-10
    assert abs(fit.slope - 1.0) < 1e-6
    assert abs(fit.amplitude - 1.0) < 1e-10


def test_fit_cosine_mode_gives_ray_at_pi():
    fit = fit_blowup_sampler(lambda r, t: 2 * r ** 0.5 * np.cos(t / 2), RADII)
    assert fit.k == 1
    assert abs(fit.beta1 - 2.0) < 1e-10
    assert abs(fit.beta2) < 1e-10
    assert abs(fit.alpha0 - math.pi) < 1e-10


def test_fit_k3_rotated_mode():
    fit = fit_blowup_sampler(lambda r, t: r ** 1.5 * np.sin(3 * (t - 0.4) / 2), RADII)
    assert fit.k == 3
    assert abs(fit.alpha0 - 0.4) < 1e-8
    assert abs(fit.amplitude - 1.0) < 1e-8
    assert abs(fit.slope - 2.0) < 1e-6


def test_fit_sees_through_higher_order_contamination():
    # add a next-branch term r^{3/2}; the linear-in-r extrapolation of the
    # mode coefficients must still recover the leading pair
    def f(r, t):
        return r ** 0.5 * (0.3 * np.cos(t / 2) + 0.7 * np.sin(t / 2)) \
            + 0.5 * r ** 1.5 * np.sin(3 * t / 2)

    fit = fit_blowup_sampler(f, RADII)
    assert fit.k == 1
    assert abs(fit.beta1 - 0.3) < 5e-3
    assert abs(fit.beta2 - 0.7) < 5e-3


def test_nodal_ray_counts():
    f1 = lambda r, t: r ** 0.5 * np.sin(t / 2)
    f3 = lambda r, t: r ** 1.5 * np.sin(3 * (t - 0.4) / 2)
    assert nodal_ray_count(f1, 0.3) == 1
    assert nodal_ray_count(f3, 0.3) == 3
    # rotated k=1 mode with the ray away from the seam
    g = lambda r, t: r ** 0.5 * np.sin((t - 2.0) / 2)
    assert nodal_ray_count(g, 0.3) == 1


def test_rotate_frame_aligns_ray():
    fit = fit_blowup_sampler(lambda r, t: r ** 1.5 * np.sin(3 * (t - 0.4) / 2), RADII)
    rot = rotate_frame(fit)
    assert abs(rot.alpha0) < 1e-8
    assert abs(rot.beta1) < 1e-8
    assert abs(abs(rot.beta2) - fit.amplitude) < 1e-8


@settings(max_examples=25, deadline=None)
@given(
    b1=st.floats(-3, 3),
    b2=st.floats(-3, 3),
    phi=st.floats(-6, 6),
)
def test_rotate_frame_amplitude_invariant(b1, b2, phi):
    fit = BlowupFit(k=3, beta1=b1, beta2=b2, alpha0=0.0,
                    radii=np.array(RADII), slope=2.0, residuals=np.zeros(5))
    rot = rotate_frame(fit, by=phi)
    assert abs(rot.amplitude - fit.amplitude) < 1e-12 + 1e-12 * fit.amplitude
    assert 0.0 <= rot.alpha0 < 2 * math.pi / 3 + 1e-12


def test_fit_report_fields(tmp_path):
    fit = fit_blowup_sampler(lambda r, t: r ** 0.5 * np.sin(t / 2), RADII)
    doc = fit.to_json(tmp_path / "fit.json")
    for key in ("k", "beta1_re", "beta1_im", "beta2_re", "beta2_im",
                "alpha0", "slope", "radii", "residuals"):
        assert key in doc
    assert doc["beta1_im"] == 0.0 and doc["beta2_im"] == 0.0
    import json
    ondisk = json.loads((tmp_path / "fit.json").read_text())
    assert ondisk == pytest.approx(doc)


def test_fit_blowup_from_mesh_field():
    # interpolate the pure mode on a mesh and recover it through evaluate
    mesh = generate_disk_mesh((0.0, 0.0), 1.0, 0.03, grading=[((0.0, 0.0), 0.5)])
    u = psi(mesh.vertices, k=1)
    fit = fit_blowup(mesh, u, (0.0, 0.0), boundary_distance=1.0)
    assert fit.k == 1
    assert abs(fit.beta1) < 2e-3
    assert abs(fit.beta2 - 1.0) < 2e-3
    assert abs(fit.alpha0) % (2 * math.pi) < 2e-2 or \
        abs(abs(fit.alpha0) - 2 * math.pi) < 2e-2


def test_fit_needs_three_radii():
    with pytest.raises(ValueError, match="three radii"):
        fit_blowup_sampler(lambda r, t: r ** 0.5 * np.sin(t / 2), [0.1, 0.05])
