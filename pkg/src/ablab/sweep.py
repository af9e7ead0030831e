"""Pole sweep orchestration.

Runs the moving-pole study end to end: one limit solve at the anchor with a
local blow-up fit, then shared-mesh pair solves along rays at chosen angular
offsets from the fitted principal direction, log-log rate fits in the pole
distance, prefactor extrapolation, and comparison against the slit-problem
predictions.  Also renders the delimited, JSON, and figure reports.

Angles: a study is configured by OFFSETS relative to the principal direction
found by the blow-up fit, because the rate law depends only on that relative
angle; absolute ray angles are resolved after the discovery solve and are
what the records carry in their `alpha` field.
"""

from __future__ import annotations

import json
import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, fields

import numpy as np
from jsonschema import validate as _validate_schema

from .abo import (
    AbConfig,
    build_pole_mesh,
    energy_discrepancy,
    fix_reference_sign,
    normalize_pair,
    solve_ab,
)
from .blowup import fit_blowup
from .crack import L_profile, extrapolate_L, solve_we

TWO_PI = 2.0 * math.pi

# fraction of the anchor-to-boundary distance below which a pole distance is
# dominated by discretization error at desk scale
SMALL_DISTANCE_FRACTION = 0.025


def richardson2(coarse: float, fine: float) -> float:
    """Two-level Richardson combination (4*fine - coarse)/3 for a quantity
    with leading error O(h^2) evaluated at h and h/2."""
    return (4.0 * fine - coarse) / 3.0


# ---------------------------------------------------------------------------
# configuration


@dataclass(frozen=True)
class StudyConfig:
    """Inputs of a moving-pole rate study on a disk.

    offsets are ray angles measured from the principal nodal direction that
    the blow-up fit discovers at the anchor; abs_a are the pole distances
    along each ray, strictly decreasing.  h may be refined per distance via
    h_per_a.  crack_R/crack_h control the slit solves behind the
    predictions (each is run as an R, 2R, 4R ladder and extrapolated).
    """

    center: tuple = (0.0, 0.0)
    radius: float = 1.0
    b: tuple = (0.3, 0.0)
    n0: int = 1
    offsets: tuple = (0.0,)
    abs_a: tuple | None = None
    h: float = 0.04
    h_per_a: tuple | None = None
    discovery_angle: float = 0.0
    crack_R: float = 4.0
    crack_h: float = 0.05
    n_window: int = 6
    gap_tol: float = 1e-3
    fit_residual_tol: float = 0.05
    require_simple: bool = True
    check_refinement: bool = True

    def __post_init__(self):
        if self.radius <= 0:
            raise ValueError("radius must be positive")
        dist = self.radius - math.dist(self.b, self.center)
        if dist <= 0:
            raise ValueError("anchor b must be strictly interior to the disk")
        if self.abs_a is None:
            object.__setattr__(
                self, "abs_a", tuple(f * dist for f in (0.1, 0.05, 0.025))
            )
        abs_a = tuple(float(d) for d in self.abs_a)
        object.__setattr__(self, "abs_a", abs_a)
        if any(d <= 0 for d in abs_a):
            raise ValueError("pole distances must be positive")
        if any(b <= s for b, s in zip(abs_a, abs_a[1:])):
            raise ValueError("pole distances must be strictly decreasing")
        if abs_a[0] >= dist:
            raise ValueError("largest pole distance reaches the boundary")
        if self.h_per_a is not None and len(self.h_per_a) != len(abs_a):
            raise ValueError("h_per_a must match abs_a in length")
        object.__setattr__(self, "center", tuple(float(c) for c in self.center))
        object.__setattr__(self, "b", tuple(float(c) for c in self.b))
        object.__setattr__(self, "offsets", tuple(float(o) for o in self.offsets))
        if self.h_per_a is not None:
            object.__setattr__(
                self, "h_per_a", tuple(float(v) for v in self.h_per_a)
            )

    def boundary_distance(self) -> float:
        return self.radius - math.dist(self.b, self.center)

    def h_at(self, i: int) -> float:
        return self.h_per_a[i] if self.h_per_a is not None else self.h

    def warnings(self) -> list[str]:
        """Config-level cautions; computed, never silently dropped."""
        out = []
        floor = SMALL_DISTANCE_FRACTION * self.boundary_distance()
        for d in self.abs_a:
            if d < floor - 1e-12:
                out.append(
                    "pole distance %g is below %g times the anchor-to-boundary "
                    "distance; discretization error dominates the rate there"
                    % (d, SMALL_DISTANCE_FRACTION)
                )
        return out

    def to_json(self) -> dict:
        doc = asdict(self)
        for key, val in doc.items():
            if isinstance(val, tuple):
                doc[key] = list(val)
        return doc

    @classmethod
    def from_json(cls, doc: dict) -> "StudyConfig":
        known = {f.name for f in fields(cls)}
        unknown = set(doc) - known
        if unknown:
            raise ValueError("unknown config keys: %s" % ", ".join(sorted(unknown)))
        kwargs = {}
        for key, val in doc.items():
            kwargs[key] = tuple(val) if isinstance(val, list) else val
        return cls(**kwargs)


# ---------------------------------------------------------------------------
# results


@dataclass
class RateRow:
    abs_a: float
    lambda_a: float
    lambda0: float
    dlambda: float
    energy: float


@dataclass
class RateRecord:
    """Fitted rates along one ray, plus the slit-problem predictions."""

    alpha: float                 # absolute ray angle
    offset: float                # alpha minus the fitted principal direction
    rows: list = field(default_factory=list)
    slope_lambda: float = math.nan
    slope_lambda_residual: float = math.nan
    limit_lambda: float = math.nan
    slope_E: float = math.nan
    slope_E_residual: float = math.nan
    limit_E: float = math.nan
    pred_C0cos: float = math.nan
    pred_L: float = math.nan
    flags: list = field(default_factory=list)
    k: int = 1
    beta_sq: float = math.nan
    alpha0: float = math.nan
    mk: float = math.nan


def _loglog_fit(x, y):
    """Unweighted least squares slope of log y against log x, with the rms
    residual in log space."""
    lx = np.log(np.asarray(x, dtype=float))
    ly = np.log(np.asarray(y, dtype=float))
    A = np.column_stack([lx, np.ones_like(lx)])
    coef, *_ = np.linalg.lstsq(A, ly, rcond=None)
    resid = ly - A @ coef
    return float(coef[0]), float(math.sqrt(float(np.mean(resid * resid))))

def _prefactor_intercept(abs_a, vals, k):
    """Extrapolate vals/|a|^k to zero pole distance, linearly in |a| (the
    next term of the expansion is one power higher)."""
    d = np.asarray(abs_a, dtype=float)
    q = np.asarray(vals, dtype=float) / d**k
    A = np.column_stack([np.ones(len(d)), d])
    coef, *_ = np.linalg.lstsq(A, q, rcond=None)
    return float(coef[0])


# ---------------------------------------------------------------------------
# the study


def _pair_scalars(args):
    """One (ray, distance) job: shared-mesh pair solve reduced to scalars.

    Top-level function so a process pool can pickle it."""
    center, radius, b, n0, n_window, gap_tol, h, alpha, delta = args
    acfg = AbConfig(
        center=center, radius=radius, h=h, anchor=b,
        n_window=n_window, gap_tol=gap_tol,
    )
    pole = (b[0] + delta * math.cos(alpha), b[1] + delta * math.sin(alpha))
    cm = build_pole_mesh(acfg, pole, alpha)
    res_a = solve_ab(acfg, pole, alpha, n0, cracked=cm)
    res_0 = solve_ab(acfg, b, alpha, n0, cracked=cm)
    res_0 = fix_reference_sign(res_0)
    res_a = normalize_pair(res_a, res_0)
    energy = energy_discrepancy(res_a, res_0)
    return res_a.value, res_0.value, energy, bool(res_a.simple and res_0.simple)


def _job_args(cfg: StudyConfig, alpha: float, i_dist: int):
    return (
        cfg.center, cfg.radius, cfg.b, cfg.n0, cfg.n_window, cfg.gap_tol,
        cfg.h_at(i_dist), alpha, cfg.abs_a[i_dist],
    )


def run_rate_study(cfg: StudyConfig, jobs: int = 1) -> list[RateRecord]:
    """Full pipeline: discovery solve and blow-up fit at the anchor, pair
    solves over (offset, distance), rate fits, predictions, guards.

    Raises RuntimeError when the limit eigenvalue fails the spectral gap
    test (unless cfg.require_simple is off) and when the refinement guard
    detects that mesh error at the smallest distance is not separated from
    the increment the distance ladder is meant to resolve.
    """
    if not cfg.offsets:
        return []

    acfg = AbConfig(
        center=cfg.center, radius=cfg.radius, h=cfg.h, anchor=cfg.b,
        n_window=cfg.n_window, gap_tol=cfg.gap_tol,
    )
    disc_mesh = build_pole_mesh(acfg, cfg.b, cfg.discovery_angle)
    disc = solve_ab(acfg, cfg.b, cfg.discovery_angle, cfg.n0, cracked=disc_mesh)
    if not disc.simple and cfg.require_simple:
        raise RuntimeError(
            "limit eigenvalue %d fails the spectral gap test at the anchor; "
            "rates are only defined for a simple eigenvalue "
            "(set require_simple=False to proceed anyway)" % cfg.n0
        )
    disc = fix_reference_sign(disc)
    fit = fit_blowup(
        disc.mesh, disc.field, cfg.b,
        base_angle=cfg.discovery_angle,
        boundary_distance=cfg.boundary_distance(),
    )
    k = fit.k
    beta_sq = fit.beta1**2 + fit.beta2**2
    alpha0 = fit.alpha0

    # slit-problem predictions: reference constant and profile values, each
    # from an (R, 2R, 4R) ladder
    ladder_R = (cfg.crack_R, 2 * cfg.crack_R, 4 * cfg.crack_R)
    we = [solve_we(k=k, R=RR, h=cfg.crack_h) for RR in ladder_R]
    mk_ext = extrapolate_L([(s.R, s.mk) for s in we])
    wrapped = sorted({round(off % TWO_PI, 12) for off in cfg.offsets})
    prof = L_profile(k, wrapped, R=cfg.crack_R, h=cfg.crack_h, ladder=True)
    L_of = {round(row["alpha"], 12): row["L"] for row in prof}

    tasks = []
    for off in cfg.offsets:
        alpha = alpha0 + off
        for i in range(len(cfg.abs_a)):
            tasks.append(_job_args(cfg, alpha, i))
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            raw = list(pool.map(_pair_scalars, tasks))
    else:
        raw = [_pair_scalars(t) for t in tasks]

    n_dist = len(cfg.abs_a)
    records = []
    for i_off, off in enumerate(cfg.offsets):
        alpha = alpha0 + off
        chunk = raw[i_off * n_dist : (i_off + 1) * n_dist]
        rec = RateRecord(alpha=alpha, offset=off, k=k, beta_sq=beta_sq,
                         alpha0=alpha0, mk=mk_ext)
        for (lam_a, lam0, energy, simple), delta in zip(chunk, cfg.abs_a):
            rec.rows.append(RateRow(delta, lam_a, lam0, lam0 - lam_a, energy))
            if not simple:
                rec.flags.append("spectral gap marginal at |a| = %g" % delta)

        ds = np.array([r.abs_a for r in rec.rows])
        dl = np.array([r.dlambda for r in rec.rows])
        en = np.array([r.energy for r in rec.rows])

        rec.limit_lambda = _prefactor_intercept(ds, dl, k)
        rec.limit_E = _prefactor_intercept(ds, en, k)
        lambda_fitted = False
        if len(ds) < 3:
            rec.flags.append("fewer than three pole distances; slopes not fitted")
        else:
            rec.slope_E, rec.slope_E_residual = _loglog_fit(ds, en)
            if rec.slope_E_residual > cfg.fit_residual_tol:
                rec.flags.append(
                    "energy fit residual %.3g above %.3g"
                    % (rec.slope_E_residual, cfg.fit_residual_tol)
                )
            if np.all(dl > 0):
                rec.slope_lambda, rec.slope_lambda_residual = _loglog_fit(ds, dl)
                lambda_fitted = True
                if rec.slope_lambda_residual > cfg.fit_residual_tol:
                    rec.flags.append(
                        "eigenvalue fit residual %.3g above %.3g"
                        % (rec.slope_lambda_residual, cfg.fit_residual_tol)
                    )
            else:
                rec.flags.append(
                    "non-positive eigenvalue differences; slope not fitted "
                    "(expected when cos(k*offset) is near zero)"
                )

        rec.pred_C0cos = -4.0 * beta_sq * mk_ext * math.cos(k * off)
        L_val = L_of.get(round(off % TWO_PI, 12), math.nan)
        rec.pred_L = beta_sq * L_val

        # sign triangle: fitted limit, prediction, and the raw differences
        # must agree in sign whenever the cosine is safely away from zero
        if abs(math.cos(k * off)) >= 0.2:
            s_pred = math.copysign(1.0, rec.pred_C0cos)
            ok = math.copysign(1.0, rec.limit_lambda) == s_pred and all(
                math.copysign(1.0, v) == s_pred for v in dl
            )
            if not ok:
                rec.flags.append(
                    "sign triangle violated: fitted limit %.3g, prediction %.3g"
                    % (rec.limit_lambda, rec.pred_C0cos)
                )

        if cfg.check_refinement and len(cfg.abs_a) >= 2:
            _refinement_guard(cfg, alpha, rec, lambda_fitted)

        records.append(rec)
    return records


def _refinement_guard(cfg: StudyConfig, alpha: float, rec: RateRecord,
                      lambda_fitted: bool) -> None:
    """Scale separation check at the smallest pole distance: halving h must
    move the shared-mesh differences by less than the increment between the
    two smallest distances, or the ladder cannot resolve the rate."""
    i_small = len(cfg.abs_a) - 1
    args = list(_job_args(cfg, alpha, i_small))
    args[6] = args[6] / 2.0
    lam_a, lam0, energy_f, _ = _pair_scalars(tuple(args))
    dl_f = lam0 - lam_a
    row_mid, row_small = rec.rows[-2], rec.rows[-1]
    inc_l = abs(row_mid.dlambda - row_small.dlambda)
    inc_E = abs(row_mid.energy - row_small.energy)
    if lambda_fitted and not abs(dl_f - row_small.dlambda) < inc_l:
        raise RuntimeError(
            "refinement guard: halving h at |a| = %g moved the eigenvalue "
            "difference by %.3g, more than the %.3g increment it must resolve; "
            "refine h or enlarge the pole distances"
            % (row_small.abs_a, abs(dl_f - row_small.dlambda), inc_l)
        )
    if not abs(energy_f - row_small.energy) < inc_E:
        raise RuntimeError(
            "refinement guard: halving h at |a| = %g moved the energy "
            "discrepancy by %.3g, more than the %.3g increment it must resolve; "
            "refine h or enlarge the pole distances"
            % (row_small.abs_a, abs(energy_f - row_small.energy), inc_E)
        )


# ---------------------------------------------------------------------------
# profile study


def default_profile_grid(k: int) -> tuple:
    """8 angles for k = 1; for higher k, 6 angles spanning two periods."""
    if k == 1:
        return tuple(j * math.pi / 4 for j in range(8))
    return tuple(j * math.pi / 3 for j in range(6))


def run_L_profile_study(cfg: StudyConfig, records=None, k: int = 1,
                        alphas=None) -> dict:
    """Angle profile of the slit gradient integral, with symmetry residuals
    and (when rate records are supplied) the merged comparison of
    limit_E / beta_sq against the profile at matching offsets.

    An empty angle grid returns an empty table without error.
    """
    if records:
        k = records[0].k
    if alphas is None:
        alphas = default_profile_grid(k)
    alphas = [float(a) for a in alphas]
    report = {"k": k, "table": [], "evenness": None, "period_residual": None,
              "merged": []}
    if not alphas:
        return report

    table = L_profile(k, alphas, R=cfg.crack_R, h=cfg.crack_h, ladder=True)
    report["table"] = table
    vals = {round(row["alpha"] % TWO_PI, 9): row["L"] for row in table}

    even = []
    for a, L in vals.items():
        partner = round((-a) % TWO_PI, 9)
        if partner in vals and partner != a:
            pair_mean = 0.5 * (L + vals[partner])
            even.append(abs(L - vals[partner]) / abs(pair_mean))
    if even:
        report["evenness"] = max(even)

    period = TWO_PI / k
    per = []
    for a, L in vals.items():
        partner = round((a + period) % TWO_PI, 9)
        if partner in vals and partner != a:
            pair_mean = 0.5 * (L + vals[partner])
            per.append(abs(L - vals[partner]) / abs(pair_mean))
    if per:
        report["period_residual"] = max(per)

    if records:
        for rec in records:
            key = round(rec.offset % TWO_PI, 9)
            if key not in vals or not math.isfinite(rec.limit_E):
                continue
            ratio = rec.limit_E / rec.beta_sq
            L_val = vals[key]
            report["merged"].append({
                "offset": rec.offset,
                "limit_E_over_beta_sq": ratio,
                "L": L_val,
                "rel_err": abs(ratio - L_val) / abs(L_val),
            })
    return report


# ---------------------------------------------------------------------------
# reports


def _g17(x) -> str:
    return "%.17g" % float(x)


CSV_COLUMNS = (
    "alpha,abs_a,lambda_a,lambda0,dlambda,energy_discrepancy,"
    "slope_lambda,limit_lambda,slope_E,limit_E,pred_C0cos,pred_L"
)

_NUMBER_OR_NULL = {"type": ["number", "null"]}

SUMMARY_SCHEMA = {
    "type": "object",
    "additionalProperties": False,
    "required": ["k", "beta_sq", "alpha0", "mk", "config_warnings",
                 "records", "profile"],
    "properties": {
        "k": {"type": "integer", "minimum": 1},
        "beta_sq": _NUMBER_OR_NULL,
        "alpha0": _NUMBER_OR_NULL,
        "mk": _NUMBER_OR_NULL,
        "config_warnings": {"type": "array", "items": {"type": "string"}},
        "profile": {"type": ["object", "null"]},
        "records": {
            "type": "array",
            "minItems": 1,
            "items": {
                "type": "object",
                "additionalProperties": False,
                "required": ["alpha", "offset", "rows", "slope_lambda",
                             "slope_lambda_residual", "limit_lambda",
                             "slope_E", "slope_E_residual", "limit_E",
                             "pred_C0cos", "pred_L", "flags"],
                "properties": {
                    "alpha": {"type": "number"},
                    "offset": {"type": "number"},
                    "slope_lambda": _NUMBER_OR_NULL,
                    "slope_lambda_residual": _NUMBER_OR_NULL,
                    "limit_lambda": _NUMBER_OR_NULL,
                    "slope_E": _NUMBER_OR_NULL,
                    "slope_E_residual": _NUMBER_OR_NULL,
                    "limit_E": _NUMBER_OR_NULL,
                    "pred_C0cos": _NUMBER_OR_NULL,
                    "pred_L": _NUMBER_OR_NULL,
                    "flags": {"type": "array", "items": {"type": "string"}},
                    "rows": {
                        "type": "array",
                        "minItems": 1,
                        "items": {
                            "type": "object",
                            "additionalProperties": False,
                            "required": ["abs_a", "lambda_a", "lambda0",
                                         "dlambda", "energy"],
                            "properties": {
                                "abs_a": {"type": "number"},
                                "lambda_a": {"type": "number"},
                                "lambda0": {"type": "number"},
                                "dlambda": {"type": "number"},
                                "energy": {"type": "number"},
                            },
                        },
                    },
                },
            },
        },
    },
}


def _num_or_null(x):
    x = float(x)
    return x if math.isfinite(x) else None


def summary_document(records, profile=None, config=None) -> dict:
    """JSON-ready summary of a study; validated against SUMMARY_SCHEMA."""
    rec0 = records[0]
    doc = {
        "k": int(rec0.k),
        "beta_sq": _num_or_null(rec0.beta_sq),
        "alpha0": _num_or_null(rec0.alpha0),
        "mk": _num_or_null(rec0.mk),
        "config_warnings": list(config.warnings()) if config else [],
        "profile": None,
        "records": [],
    }
    if profile is not None:
        doc["profile"] = {
            "k": profile["k"],
            "evenness": profile["evenness"],
            "period_residual": profile["period_residual"],
            "table": [
                {"alpha": row["alpha"], "L": row["L"], "J": row["J"]}
                for row in profile["table"]
            ],
            "merged": profile["merged"],
        }
    for rec in records:
        doc["records"].append({
            "alpha": float(rec.alpha),
            "offset": float(rec.offset),
            "slope_lambda": _num_or_null(rec.slope_lambda),
            "slope_lambda_residual": _num_or_null(rec.slope_lambda_residual),
            "limit_lambda": _num_or_null(rec.limit_lambda),
            "slope_E": _num_or_null(rec.slope_E),
            "slope_E_residual": _num_or_null(rec.slope_E_residual),
            "limit_E": _num_or_null(rec.limit_E),
            "pred_C0cos": _num_or_null(rec.pred_C0cos),
            "pred_L": _num_or_null(rec.pred_L),
            "flags": list(rec.flags),
            "rows": [
                {k: float(v) for k, v in asdict(row).items()}
                for row in rec.rows
            ],
        })
    _validate_schema(doc, SUMMARY_SCHEMA)
    return doc


def write_rate_csv(records, path) -> None:
    lines = [CSV_COLUMNS]
    for rec in records:
        for row in rec.rows:
            cells = [
                rec.alpha, row.abs_a, row.lambda_a, row.lambda0, row.dlambda,
                row.energy, rec.slope_lambda, rec.limit_lambda, rec.slope_E,
                rec.limit_E, rec.pred_C0cos, rec.pred_L,
            ]
            lines.append(",".join(_g17(c) for c in cells))
    with open(path, "w") as fh:
        fh.write("\n".join(lines) + "\n")


def write_energy_plot_data(records, path) -> None:
    """(log|a|, log E) as two-column text, one blank-separated block per ray."""
    blocks = []
    for rec in records:
        lines = ["# alpha = %s  offset = %s" % (_g17(rec.alpha), _g17(rec.offset))]
        for row in rec.rows:
            lines.append("%s %s" % (_g17(math.log(row.abs_a)),
                                    _g17(math.log(row.energy))))
        blocks.append("\n".join(lines))
    with open(path, "w") as fh:
        fh.write("\n\n".join(blocks) + "\n")


def write_profile_data(profile: dict, path) -> None:
    """(alpha, L) as two-column text."""
    lines = ["# k = %d" % profile["k"]]
    for row in profile["table"]:
        lines.append("%s %s" % (_g17(row["alpha"]), _g17(row["L"])))
    with open(path, "w") as fh:
        fh.write("\n".join(lines) + "\n")


def _write_figures(records, profile, out_dir) -> list:
    import matplotlib

    matplotlib.use("Agg", force=True)
    import matplotlib.pyplot as plt

    written = []
    fig, ax = plt.subplots(figsize=(6.0, 4.5))
    for rec in records:
        ds = [row.abs_a for row in rec.rows]
        en = [row.energy for row in rec.rows]
        label = "offset %.3f (slope %.2f)" % (rec.offset, rec.slope_E)
        ax.loglog(ds, en, "o-", label=label)
    ax.set_xlabel("pole distance |a|")
    ax.set_ylabel("energy discrepancy")
    ax.legend(fontsize=8)
    ax.grid(True, which="both", alpha=0.3)
    path = os.path.join(out_dir, "rates.png")
    fig.savefig(path, dpi=150, bbox_inches="tight")
    plt.close(fig)
    written.append(path)

    fig, ax = plt.subplots(figsize=(6.0, 4.5))
    for rec in records:
        ds = [row.abs_a for row in rec.rows]
        dl = [row.dlambda for row in rec.rows]
        ax.plot(ds, dl, "s-", label="offset %.3f" % rec.offset)
    ax.axhline(0.0, color="k", lw=0.5)
    ax.set_xlabel("pole distance |a|")
    ax.set_ylabel("eigenvalue difference")
    ax.legend(fontsize=8)
    ax.grid(True, alpha=0.3)
    path = os.path.join(out_dir, "eigenvalue_shift.png")
    fig.savefig(path, dpi=150, bbox_inches="tight")
    plt.close(fig)
    written.append(path)

    if profile is not None and profile["table"]:
        fig, ax = plt.subplots(figsize=(6.0, 4.5))
        angs = [row["alpha"] for row in profile["table"]]
        Ls = [row["L"] for row in profile["table"]]
        ax.plot(angs, Ls, "o-")
        for m in profile["merged"]:
            ax.plot(m["offset"] % TWO_PI, m["limit_E_over_beta_sq"], "x",
                    color="tab:red", ms=9)
        ax.set_xlabel("slit angle")
        ax.set_ylabel("gradient integral")
        ax.grid(True, alpha=0.3)
        path = os.path.join(out_dir, "lprofile.png")
        fig.savefig(path, dpi=150, bbox_inches="tight")
        plt.close(fig)
        written.append(path)
    return written


def emit_reports(records, out_dir, format: str = "all", profile=None,
                 config=None) -> list:
    """Write the study reports; returns the list of paths written.

    format selects "csv" (delimited table plus the two-column plot-data
    files), "json" (schema-validated summary), "plots" (figures), or "all".
    The CSV uses 17 significant digits so a deterministic rerun is
    byte-identical.
    """
    if not records:
        raise ValueError("records must be nonempty")
    if format not in ("csv", "json", "plots", "all"):
        raise ValueError("format must be csv, json, plots, or all")
    os.makedirs(out_dir, exist_ok=True)
    written = []
    if format in ("csv", "all"):
        path = os.path.join(out_dir, "rates.csv")
        write_rate_csv(records, path)
        written.append(path)
        path = os.path.join(out_dir, "energy_rates.dat")
        write_energy_plot_data(records, path)
        written.append(path)
        if profile is not None and profile["table"]:
            path = os.path.join(out_dir, "lprofile.dat")
            write_profile_data(profile, path)
            written.append(path)
    if format in ("json", "all"):
        doc = summary_document(records, profile=profile, config=config)
        path = os.path.join(out_dir, "summary.json")
        with open(path, "w") as fh:
            json.dump(doc, fh, indent=2, sort_keys=True)
            fh.write("\n")
        written.append(path)
    if format in ("plots", "all"):
        written.extend(_write_figures(records, profile, out_dir))
    return written
