"""Local structure of eigenfunctions near the flux pole.

In the real gauge an eigenfunction behaves near the limit pole like

    u(r, t) ~ r^(k/2) (b1 cos(k t/2) + b2 sin(k t/2)),   k odd,

with t the angle chart based at the pole.  This module provides the model
half-power profile, routines that fit (k, b1, b2) from nodal data sampled on
small circles, and the frame rotation that aligns the leading nodal ray with
angle zero.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass

import numpy as np

from .mesh import Mesh, evaluate

TWO_PI = 2.0 * math.pi


def wrap_angle(t, base: float = 0.0):
    """Map angles into [base, base + 2*pi)."""
    return base + np.mod(np.asarray(t, dtype=float) - base, TWO_PI)


def psi(points, k: int = 1, branch_angle: float = 0.0) -> np.ndarray:
    """Half-power profile r^(k/2) sin(k theta / 2) with theta measured in
    [branch_angle, branch_angle + 2*pi) from the origin.  Its discontinuity
    line is the ray at branch_angle."""
    pts = np.atleast_2d(np.asarray(points, dtype=float))
    r = np.hypot(pts[:, 0], pts[:, 1])
    t = wrap_angle(np.arctan2(pts[:, 1], pts[:, 0]), branch_angle)
    out = r ** (0.5 * k) * np.sin(0.5 * k * t)
    return out if out.size > 1 else float(out[0])


def psi_gradient(points, k: int = 1, branch_angle: float = 0.0) -> np.ndarray:
    """Cartesian gradient of psi away from its discontinuity ray."""
    pts = np.atleast_2d(np.asarray(points, dtype=float))
    r = np.hypot(pts[:, 0], pts[:, 1])
    t = wrap_angle(np.arctan2(pts[:, 1], pts[:, 0]), branch_angle)
    dr = 0.5 * k * r ** (0.5 * k - 1) * np.sin(0.5 * k * t)
    dt = 0.5 * k * r ** (0.5 * k - 1) * np.cos(0.5 * k * t)
    ex = np.column_stack([np.cos(t), np.sin(t)])
    et = np.column_stack([-np.sin(t), np.cos(t)])
    return dr[:, None] * ex + dt[:, None] * et


@dataclass
class BlowupFit:
    k: int
    beta1: float
    beta2: float
    alpha0: float              # leading nodal ray angle, in [0, 2*pi/k)
    radii: np.ndarray
    slope: float               # fitted growth exponent of the circle norms
    residuals: np.ndarray      # per-radius deviation of the coefficient fits
    amplitude: float = 0.0

    def __post_init__(self):
        self.amplitude = math.hypot(self.beta1, self.beta2)

    def to_json(self, path=None) -> dict:
        doc = {
            "k": self.k,
            "beta1_re": self.beta1, "beta1_im": 0.0,
            "beta2_re": self.beta2, "beta2_im": 0.0,
            "alpha0": self.alpha0,
            "slope": self.slope,
            "radii": [float(r) for r in self.radii],
            "residuals": [float(r) for r in self.residuals],
        }
        if path is not None:
            with open(path, "w") as fh:
                json.dump(doc, fh, indent=2, sort_keys=True)
        return doc


def _fit_from_sampler(sample, radii, base_angle: float, n_theta: int = 512) -> BlowupFit:
    """Shared fitting core.  sample(r, t_array) returns field values on the
    circle of radius r at angles t_array (angles in the chart window
    [base_angle, base_angle + 2*pi) so the profile is continuous there)."""
    radii = np.asarray(sorted(radii, reverse=True), dtype=float)
    if len(radii) < 3:
        raise ValueError("need at least three radii for a stable fit")
    t = base_angle + (np.arange(n_theta) + 0.5) * (TWO_PI / n_theta)
    dt = TWO_PI / n_theta

    norms = np.empty(len(radii))
    c_cos = {}
    c_sin = {}
    samples = {}
    for i, r in enumerate(radii):
        vals = np.asarray(sample(r, t), dtype=float)
        samples[r] = vals
        norms[i] = math.sqrt(max(r * dt * float(vals @ vals), 1e-300))

    # growth exponent: the circle L2 norm scales like r^(slope) with
    # slope = (k + 1)/2
    A = np.column_stack([np.log(radii), np.ones(len(radii))])
    slope, _ = np.linalg.lstsq(A, np.log(norms), rcond=None)[0]
    k = max(1, int(round(2.0 * slope - 1.0)))
    if k % 2 == 0:
        k = k - 1 if abs(2 * slope - 1 - (k - 1)) <= abs(2 * slope - 1 - (k + 1)) else k + 1

    # mode coefficients at each radius, then linear-in-r extrapolation to 0;
    # the next branch of the expansion is O(r) relative to the leading one
    for r in radii:
        vals = samples[r]
        scale = r ** (0.5 * k)
        c_cos[r] = dt * float(vals @ np.cos(0.5 * k * t)) / (math.pi * scale)
        c_sin[r] = dt * float(vals @ np.sin(0.5 * k * t)) / (math.pi * scale)

    B = np.column_stack([np.ones(len(radii)), radii])
    bc = np.linalg.lstsq(B, np.array([c_cos[r] for r in radii]), rcond=None)[0]
    bs = np.linalg.lstsq(B, np.array([c_sin[r] for r in radii]), rcond=None)[0]
    beta1, beta2 = float(bc[0]), float(bs[0])
    res = np.hypot(np.array([c_cos[r] for r in radii]) - (B @ bc),
                   np.array([c_sin[r] for r in radii]) - (B @ bs))

    alpha0 = math.atan2(-beta1, beta2) * 2.0 / k
    alpha0 = alpha0 % (TWO_PI / k)
    return BlowupFit(k, beta1, beta2, alpha0, radii, float(slope), res)


def fit_blowup_sampler(sample, radii, base_angle: float = 0.0) -> BlowupFit:
    """Fit the local expansion from an arbitrary sampling callable."""
    return _fit_from_sampler(sample, radii, base_angle)


def fit_blowup(mesh: Mesh, u: np.ndarray, pole, radii=None, base_angle: float = 0.0,
               boundary_distance: float | None = None) -> BlowupFit:
    """Fit the local expansion of a nodal field around a pole point.

    radii default to 0.2 * 2^(-j) * d for j = 0..4 with d the distance from
    the pole to the domain boundary (pass boundary_distance when the mesh
    alone does not determine it)."""
    pole = np.asarray(pole, dtype=float)
    if radii is None:
        if boundary_distance is None:
            raise ValueError("radii or boundary_distance must be given")
        radii = [0.2 * boundary_distance * 0.5 ** j for j in range(5)]

    def sample(r, t):
        pts = pole + r * np.column_stack([np.cos(t), np.sin(t)])
        return evaluate(mesh, u, pts)

    return _fit_from_sampler(sample, radii, base_angle)


def nodal_ray_count(sample, r: float, base_angle: float = 0.0, n_theta: int = 720) -> int:
    """Sign changes of the field along the circle of radius r.  The field is
    antiperiodic across the chart seam (u flips sign there), so a zero lying
    on the seam itself shows up as the two ends having equal sign.  For a
    half-power local mode this counts k."""
    t = base_angle + (np.arange(n_theta) + 0.5) * (TWO_PI / n_theta)
    vals = np.asarray(sample(r, t), dtype=float)
    s = np.sign(vals)
    s = s[s != 0]
    if len(s) < 2:
        return 0
    interior = int(np.sum(s[1:] != s[:-1]))
    seam = 1 if s[-1] == s[0] else 0
    return interior + seam


def rotate_frame(fit: BlowupFit, by: float | None = None) -> BlowupFit:
    """Re-express the fit in a frame rotated by the given angle (default: the
    fitted alpha0, which sends the leading nodal ray to angle zero).  The
    amplitude beta1^2 + beta2^2 is invariant."""
    phi = fit.alpha0 if by is None else by
    # under t -> t + phi the coefficient pair rotates by k*phi/2
    c, s = math.cos(0.5 * fit.k * phi), math.sin(0.5 * fit.k * phi)
    b1 = c * fit.beta1 + s * fit.beta2
    b2 = -s * fit.beta1 + c * fit.beta2
    alpha0 = (fit.alpha0 - phi) % (TWO_PI / fit.k)
    return BlowupFit(fit.k, float(b1), float(b2), alpha0, fit.radii.copy(),
                     fit.slope, fit.residuals.copy())
