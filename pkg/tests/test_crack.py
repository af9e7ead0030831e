import json
import math

import numpy as np
import pytest
from scipy.sparse.linalg import splu

from _oracles import MK1_EXACT

from ablab.blowup import psi
from ablab.crack import (
    L_profile,
    _crack_mesh,
    extrapolate_L,
    hardy_poincare_margins,
    identity_suite,
    moment_constancy,
    slit_profile_normal_derivative,
    solve_we,
    solve_we_unfolded,
    solve_wp,
)
from ablab.mesh import read_mesh

H = 0.05


@pytest.fixture(scope="module")
def we_ladder():
    return [solve_we(k=1, R=R, h=H) for R in (4.0, 8.0, 16.0)]


@pytest.fixture(scope="module")
def mk_limit(we_ladder):
    # extrapolate_L accepts bare (R, value) pairs, so it doubles as the
    # generic three-point ladder fit
    return extrapolate_L([(s.R, s.mk) for s in we_ladder])


@pytest.fixture(scope="module")
def wp_ladder_half_pi():
    return [solve_wp(0.5 * math.pi, k=1, R=R, h=H) for R in (8.0, 16.0, 32.0)]


@pytest.fixture(scope="module")
def wp_ladder_pi():
    return [solve_wp(math.pi, k=1, R=R, h=H) for R in (8.0, 16.0, 32.0)]


@pytest.fixture(scope="module")
def sol_generic():
    # one cheap general-angle solve shared by the structural checks
    return solve_wp(2.0, k=1, R=4.0, h=0.1)


# --------------------------------------------------------------------------
# reflected problem and its reference constant
# --------------------------------------------------------------------------

def test_reference_constant_negative_and_near_exact(we_ladder, mk_limit):
    for s in we_ladder:
        assert s.mk < 0.0
    assert mk_limit < 0.0
    assert abs(mk_limit - MK1_EXACT) <= 0.02 * abs(MK1_EXACT)


def test_reference_constant_two_routes_agree(we_ladder, mk_limit):
    trace_limit = extrapolate_L([(s.R, s.mk_trace) for s in we_ladder])
    assert abs(trace_limit - mk_limit) <= 1e-3 * abs(mk_limit)


def test_reflected_stationarity(we_ladder):
    # at the discrete minimum the load term equals minus the gradient
    # energy, hence mk = -E/2
    for s in we_ladder:
        energy = 0.5 * s.L_trunc
        assert abs(float(s.load @ s.u) + energy) <= 1e-9 * energy
        assert abs(s.mk + 0.5 * energy) <= 1e-9 * energy


def test_reflected_energy_limit(we_ladder):
    # the exact minimizer for k = 1 has full-plane gradient integral pi / 2
    vals = [s.L_trunc for s in we_ladder]
    assert vals[0] < vals[1] < vals[2]
    limit = extrapolate_L(we_ladder)
    for s in we_ladder:
        assert s.L_extrapolated == limit
    assert abs(limit - 0.5 * math.pi) <= 0.01 * (0.5 * math.pi)


def test_trace_profile_shape(we_ladder):
    # the minimizer trace on the loaded segment is proportional to
    # sqrt(1 - t); the ratio must be flat and positive
    s16 = we_ladder[-1]
    t = np.array([0.1, 0.25, 0.5, 0.75, 0.9])
    ratio = s16.trace(t) / np.sqrt(1.0 - t)
    assert ratio.mean() > 0.9
    assert ratio.max() - ratio.min() <= 5e-3 * abs(ratio.mean())


def test_unfolded_cross_check(we_ladder):
    folded = we_ladder[0]
    unfolded = solve_we_unfolded(k=1, R=4.0, h=H)
    assert abs(unfolded.J - folded.J) <= 5e-3 * abs(folded.J)
    assert abs(unfolded.mk - folded.mk) <= 5e-3 * abs(folded.mk)
    assert abs(unfolded.omega1 - folded.omega1) <= 2e-2 * abs(folded.omega1)


# --------------------------------------------------------------------------
# identities tying the general angle to the reference constant
# --------------------------------------------------------------------------

def test_identity_residuals_quarter_turn(wp_ladder_half_pi, mk_limit):
    res = identity_suite(wp_ladder_half_pi, mk_limit)
    assert res["extrapolated"] is True
    assert res["r1"] <= 0.02
    assert res["r2"] <= 0.02
    assert res["r3"] <= 0.02


def test_identity_residuals_half_turn(wp_ladder_pi, mk_limit):
    res = identity_suite(wp_ladder_pi, mk_limit)
    for key in ("r1", "r2", "r3"):
        assert res[key] <= 0.02
    # at alpha = pi the first moment equals 4 mk, so its sign is negative
    assert res["omega1"] < 0.0


def test_identity_suite_single_solution_is_flagged(wp_ladder_pi, mk_limit):
    res = identity_suite(wp_ladder_pi[0], mk_limit)
    assert res["extrapolated"] is False


def test_identity_suite_detects_wrong_constant(wp_ladder_pi, mk_limit):
    res = identity_suite(wp_ladder_pi, 2.0 * mk_limit)
    assert res["r1"] > 0.1
    assert res["r3"] > 0.1


def test_identity_suite_rejects_mixed_ladder(wp_ladder_pi, wp_ladder_half_pi,
                                             mk_limit):
    mixed = [wp_ladder_pi[0], wp_ladder_half_pi[1], wp_ladder_pi[2]]
    with pytest.raises(ValueError, match="share alpha"):
        identity_suite(mixed, mk_limit)


def test_moment_decay_law(wp_ladder_pi):
    res = moment_constancy(wp_ladder_pi)
    assert set(res["values"]) == {1.0, 1.5, 2.0}
    assert res["spread"] <= 0.02
    with pytest.raises(ValueError, match="radius"):
        wp_ladder_pi[0].omega(9.0)


# --------------------------------------------------------------------------
# ladder extrapolation on closed-form models
# --------------------------------------------------------------------------

def test_extrapolation_recovers_inverse_power_model():
    pairs = [(R, 1.0 - 1.0 / R) for R in (4.0, 8.0, 16.0)]
    limit, diag = extrapolate_L(pairs, return_details=True)
    assert limit == pytest.approx(1.0, abs=1e-12)
    assert diag["order"] == pytest.approx(1.0, abs=1e-12)


def test_extrapolation_constant_ladder_short_circuits():
    limit, diag = extrapolate_L([(4.0, 5.0), (8.0, 5.0), (16.0, 5.0)],
                                return_details=True)
    assert limit == 5.0
    assert diag["order"] == math.inf


def test_extrapolation_order_clamp():
    pairs = [(R, 1.0 - R ** -0.25) for R in (4.0, 8.0, 16.0)]
    _, diag = extrapolate_L(pairs, return_details=True)
    assert diag["order"] == 0.5


def test_extrapolation_rejects_bad_ladders():
    with pytest.raises(ValueError, match="three"):
        extrapolate_L([(4.0, 1.0), (8.0, 2.0)])
    with pytest.raises(ValueError, match="double"):
        extrapolate_L([(4.0, 1.0), (9.0, 2.0), (16.0, 2.5)])
    with pytest.raises(ValueError, match="monotone"):
        extrapolate_L([(4.0, 0.0), (8.0, 1.0), (16.0, 0.5)])


# --------------------------------------------------------------------------
# structure of the general-angle minimizer
# --------------------------------------------------------------------------

def test_minimizer_beats_admissible_perturbations(sol_generic):
    rs, f = sol_generic.system, sol_generic.load
    x = splu(rs.K.tocsc()).solve(rs.reduced_load(f))
    J0 = rs.energy(x, f_full=f)
    assert J0 == pytest.approx(sol_generic.J, rel=1e-12)
    rng = np.random.default_rng(20240817)
    floor = J0 - 1e-12 * max(1.0, abs(J0))
    for _ in range(20):
        v = rng.standard_normal(rs.ndof)
        v /= np.linalg.norm(v)
        for eps in (1e-3, -1e-3):
            assert rs.energy(x + eps * v, f_full=f) >= floor


def test_constraints_hold_at_solution(sol_generic):
    cm, u = sol_generic.mesh, sol_generic.u

    gam = cm.find_cut("gam")
    split = gam.plus != gam.minus
    assert split.sum() >= 5
    pts = cm.base.vertices[gam.plus[split]]
    target = -2.0 * np.atleast_1d(psi(pts, k=1))
    gap = u[gam.plus[split]] + u[gam.minus[split]] - target
    assert np.abs(gap).max() <= 1e-9

    ray = cm.find_cut("s0")
    m = ray.plus != ray.minus
    assert m.sum() >= 5
    assert np.abs(u[ray.plus[m]] + u[ray.minus[m]]).max() <= 1e-9

    outer = np.unique(cm.base.boundary_markers["outer"])
    assert np.abs(u[outer]).max() <= 1e-12


def test_interior_bound_tracks_slit_data(sol_generic, wp_ladder_pi):
    for sol in (sol_generic, wp_ladder_pi[0]):
        bound = 3.0 * abs(math.sin(0.5 * sol.k * sol.alpha))
        assert np.abs(sol.u).max() <= bound


# --------------------------------------------------------------------------
# angle profile of the rate constant
# --------------------------------------------------------------------------

def test_profile_even_in_angle():
    entries = L_profile(1, [0.5 * math.pi, 1.5 * math.pi], R=4.0, h=H)
    for e in entries:
        assert e["L"] > 0.0
        assert len(e["ladder_L"]) == 3
        assert 0.5 <= e["order"] <= 2.0
    la, lb = entries[0]["L"], entries[1]["L"]
    assert abs(la - lb) <= 0.02 * max(abs(la), abs(lb))


def test_mirror_pair_matches_to_rounding():
    # slit angles a and -a pose mirror-image problems; the discretization
    # (mesh, cut sides, junction handling, load) must preserve that exactly,
    # so the energies agree to rounding, not just to discretization error
    sa = solve_wp(0.9, k=1, R=4.0, h=0.1)
    sb = solve_wp(2.0 * math.pi - 0.9, k=1, R=4.0, h=0.1)
    assert abs(sa.L_trunc - sb.L_trunc) <= 1e-9 * abs(sa.L_trunc)
    assert abs(sa.J - sb.J) <= 1e-9
    # the meeting point of the two cuts gets geometrically consistent side
    # tags for either slit orientation
    for sol in (sa, sb):
        origin = [v for v, tags in sol.mesh.side_tags.items()
                  if len(tags) == 2]
        assert len(origin) == 2
        assert sorted(tuple(sorted(sol.mesh.side_tags[v].items())) for v in origin) == [
            (("gam", -1), ("s0", 1)), (("gam", 1), ("s0", -1))]


def test_fine_ring_chain_resolution():
    # at large R with small h the innermost vertex ring sits so close to the
    # origin that neighboring spokes pass within snapping distance of a cut;
    # chain resolution must keep only the true on-ray vertices
    cm = _crack_mesh(0.25 * math.pi, 1, 16.0, 0.025)
    s0 = cm.find_cut("s0")
    assert np.all(np.diff(s0.arclen) > 0.0)
    assert s0.arclen[-1] == pytest.approx(16.0, abs=1e-9)


def test_profile_rotation_period_for_higher_order():
    a = 0.2 * math.pi
    entries = L_profile(3, [a, a + 2.0 * math.pi / 3.0], R=4.0, h=H)
    la, lb = entries[0]["L"], entries[1]["L"]
    assert abs(la - lb) <= 0.02 * max(abs(la), abs(lb))
    ja, jb = entries[0]["J"], entries[1]["J"]
    assert abs(ja - jb) <= 0.02 * max(abs(ja), abs(jb))


def test_profile_single_radius_mode():
    entries = L_profile(1, [2.0], R=4.0, h=0.1, ladder=False)
    assert len(entries) == 1
    e = entries[0]
    assert e["order"] is None
    assert len(e["ladder_L"]) == 1
    assert e["L"] > 0.0


# --------------------------------------------------------------------------
# inequality margins, data sign, argument validation, export
# --------------------------------------------------------------------------

def test_structure_inequality_margins():
    res = hardy_poincare_margins()
    assert len(res["hardy"]) == 6
    assert len(res["poincare"]) == 7
    assert res["hardy_min"] >= -1e-3
    assert res["poincare_min"] >= -1e-3


@pytest.mark.parametrize("k,alpha", [(1, 2.0), (3, 2.0), (1, 0.75 * math.pi)])
def test_slit_density_matches_profile_derivative(k, alpha):
    dens = slit_profile_normal_derivative(k, alpha)
    nu = np.array([math.sin(alpha), -math.cos(alpha)])
    delta = 1e-6
    for t in (0.3, 0.8):
        x = t * np.array([math.cos(alpha), math.sin(alpha)])
        fd = (psi(x + delta * nu, k=k) - psi(x - delta * nu, k=k)) / (2 * delta)
        assert fd == pytest.approx(dens.coef * t ** dens.power, rel=1e-5)


def test_rejects_invalid_arguments():
    with pytest.raises(ValueError, match="odd"):
        solve_wp(1.0, k=2)
    with pytest.raises(ValueError, match="odd"):
        solve_we(k=4)
    with pytest.raises(ValueError, match="odd"):
        solve_we_unfolded(k=0)
    with pytest.raises(ValueError, match="radius"):
        solve_wp(1.0, R=1.5)


def test_axis_angle_routes_to_reflected_problem():
    sol = solve_wp(2.0 * math.pi, k=1, R=4.0, h=0.1)
    assert sol.reflected is True
    assert sol.mk is not None and sol.mk < 0.0


def test_export_writes_readable_bundle(tmp_path, sol_generic):
    doc = sol_generic.export(tmp_path / "case")
    with open(tmp_path / "case.json") as fh:
        ondisk = json.load(fh)
    assert ondisk == doc
    assert ondisk["num_vertices"] == len(sol_generic.u)
    vals = np.loadtxt(tmp_path / "case.vals")
    assert vals.shape == sol_generic.u.shape
    assert np.abs(vals - sol_generic.u).max() <= 1e-15
    mesh, records = read_mesh(tmp_path / "case.abmesh")
    assert mesh.num_vertices == len(sol_generic.u)
    assert len(records) > 0
