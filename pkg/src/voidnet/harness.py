"""Experiment orchestration: configs, validation, dispatch, output files.

Each experiment produces a tidy row set plus a metadata block echoing the
complete configuration, so any result file can be re-run exactly.  Output
is deterministic for a fixed (config, seed): wall time is printed to the
console, never written into result files.
"""

from __future__ import annotations

import csv
import json
import math
import time
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path

import numpy as np
import scipy

from . import __version__
from .analytics import (
    VORONOI_SHAPE,
    Z_95,
    user_count_pmf,
    void_prob_bounds,
    void_prob_nearest,
    void_prob_rca,
)
from .association import cell_count_pmf_mc, void_probability_mc
from .channel import (
    SIGMA2_IN_DB,
    SIGMA_IN_DB,
    ChannelParams,
    WeightLaw,
    fractional_moment,
    shadowing_sigma2_from_db,
    zeta_dagger,
)
from .coverage import MODELS, coverage_sweep
from .geometry import SimulationWindow
from .pointprocess import (
    csr_test,
    map_pattern,
    mark_expansion_factor,
    rep_rng,
    sample_ppp,
)
from .spatialstats import remark2_test

EXPERIMENTS = (
    "void-prob",
    "cell-pmf",
    "bounds-check",
    "conservation-check",
    "remark2",
    "coverage",
    "formulas",
)

MIN_EXPECTED_POINTS = 500.0

DEFAULT_RATIO_GRID = (0.5, 1.0, 2.0, 4.0, 8.0)


class ConfigError(ValueError):
    """Configuration failed validation; carries all diagnostics."""

    def __init__(self, diagnostics: list[str]):
        super().__init__("; ".join(diagnostics))
        self.diagnostics = diagnostics


def auto_side(lambda_b: float, lambda_u: float, min_expected: float = MIN_EXPECTED_POINTS) -> float:
    """Window side giving at least ``min_expected`` stations and users.

    Sized on the sparser of the two processes and rounded up a hair so
    the expectation never dips below the floor.
    """
    sparsest = min(x for x in (lambda_b, lambda_u) if x > 0)
    side = math.sqrt(min_expected / sparsest)
    return math.ceil(side * 1000.0) / 1000.0


def auto_window(lambda_b: float, lambda_u: float, min_expected: float = MIN_EXPECTED_POINTS) -> SimulationWindow:
    return SimulationWindow(side=auto_side(lambda_b, lambda_u, min_expected))


def suggested_reps(
    p_guess: float,
    expected_stations: float,
    half_width: float,
    design_effect: float = 2.0,
) -> int:
    """Replications for a target 95% half-width on a pooled void fraction.

    Inverts the Wilson/normal half-width z * sqrt(var); the
    per-replication variance is the binomial one over the expected
    station count, inflated by a design effect for within-replication
    correlation.
    """
    p = min(max(p_guess, 0.02), 0.98)
    var_rep = design_effect * p * (1.0 - p) / max(expected_stations, 1.0)
    return max(8, math.ceil(var_rep * (Z_95 / half_width) ** 2))


@dataclass(frozen=True)
class ExperimentConfig:
    """Flat experiment configuration; every field is echoed into outputs.

    Shadowing may be specified exactly one way: in natural-log variance
    (``sigma2_ln``), as a standard deviation in dB (``sigma_db``) or as a
    variance in dB^2 (``sigma2_db``); the resolved convention is tagged
    in the output metadata.
    """

    experiment: str
    lambda_u: float = 370.0
    lambda_b: float | None = None
    ratio_grid: tuple[float, ...] | None = None
    alpha: float = 4.0
    m: float = 1.0
    mu: float = 0.0
    sigma2_ln: float | None = None
    sigma_db: float | None = None
    sigma2_db: float | None = None
    law: str = "nearest"
    beta: float = 0.8
    model: str | None = None
    reps: int | None = None
    sets: int = 50
    side: float | str = "auto"
    seed: int = 1
    out: str | None = None
    fmt: str = "csv"
    half_width: float = 0.005
    mark_law: str = "lognormal:0.0,0.25"
    grid: int = 5
    n_envelope: int = 99

    def shadowing(self) -> tuple[float, str]:
        """(sigma2 in natural-log units, convention tag)."""
        specified = [
            ("sigma2-ln", self.sigma2_ln),
            (SIGMA_IN_DB, self.sigma_db),
            (SIGMA2_IN_DB, self.sigma2_db),
        ]
        given = [(tag, v) for tag, v in specified if v is not None]
        if len(given) > 1:
            raise ConfigError(["specify shadowing exactly one way (sigma2-ln, sigma-db or sigma2-db)"])
        if not given:
            return 0.0, "sigma2-ln"
        tag, value = given[0]
        if tag == "sigma2-ln":
            return float(value), tag
        return shadowing_sigma2_from_db(float(value), tag), tag

    def channel_params(self) -> ChannelParams:
        sigma2, _ = self.shadowing()
        return ChannelParams(m=self.m, mu=self.mu, sigma2=sigma2, alpha=self.alpha)

    def weight_law(self) -> WeightLaw:
        return parse_weight_law(self.law)

    def ratios(self) -> tuple[float, ...]:
        if self.ratio_grid is not None:
            return tuple(float(r) for r in self.ratio_grid)
        if self.lambda_b is not None and self.lambda_b > 0:
            return (self.lambda_u / self.lambda_b,)
        return DEFAULT_RATIO_GRID

    def window_for(self, lambda_b: float, lambda_u: float) -> SimulationWindow:
        if self.side == "auto":
            return auto_window(lambda_b, lambda_u if lambda_u > 0 else lambda_b)
        return SimulationWindow(side=float(self.side))

    @classmethod
    def from_mapping(cls, mapping: dict) -> "ExperimentConfig":
        known = {f.name for f in fields(cls)}
        unknown = sorted(set(mapping) - known)
        if unknown:
            raise ConfigError([f"unknown config key {k!r}" for k in unknown])
        values = dict(mapping)
        if "ratio_grid" in values and values["ratio_grid"] is not None:
            values["ratio_grid"] = tuple(float(r) for r in values["ratio_grid"])
        return cls(**values)


def parse_weight_law(spec: str) -> WeightLaw:
    """Parse ``nearest``, ``unit`` or ``lognormal:MU,SIGMA2``."""
    if spec == "nearest":
        return WeightLaw.nearest()
    if spec == "unit":
        return WeightLaw.unit()
    if spec.startswith("lognormal:"):
        try:
            mu_s, s2_s = spec.split(":", 1)[1].split(",")
            return WeightLaw.lognormal(float(mu_s), float(s2_s))
        except (ValueError, IndexError):
            raise ConfigError([f"bad lognormal weight spec {spec!r}; expected lognormal:MU,SIGMA2"])
    raise ConfigError([f"unknown weight law {spec!r}"])


def parse_mark_law(spec: str, cp: ChannelParams, law: WeightLaw):
    """(sampler(rng, n), analytic E[1/T^2], label) for a mark-law spec.

    ``deterministic:T`` scales every point by T; ``lognormal:MU,SIGMA2``
    draws ln T ~ Normal(MU, SIGMA2); ``channel`` uses T = (W H)^(-1/alpha)
    so the mapped intensity matches the transformed association process.
    """
    if spec.startswith("deterministic:"):
        t = float(spec.split(":", 1)[1])
        if t <= 0:
            raise ConfigError([f"deterministic mark must be > 0, got {t}"])
        return (lambda rng, n: np.full(n, t)), 1.0 / (t * t), spec
    if spec.startswith("lognormal:"):
        mu_s, s2_s = spec.split(":", 1)[1].split(",")
        mu_t, s2_t = float(mu_s), float(s2_s)
        if s2_t < 0:
            raise ConfigError(["lognormal mark variance must be >= 0"])
        sampler = lambda rng, n: np.exp(rng.normal(mu_t, math.sqrt(s2_t), size=n))
        return sampler, math.exp(-2.0 * mu_t + 2.0 * s2_t), spec
    if spec == "channel":
        from .channel import sample_gain  # local import keeps module load light

        p = 2.0 / cp.alpha
        moment = fractional_moment(cp, law, p)
        if math.isinf(moment):
            raise ConfigError(["channel mark law diverges: E[(WH)^(2/alpha)] is infinite"])

        def sampler(rng, n, cp=cp, law=law):
            w = np.ones(n) if law.kind != "lognormal" else np.exp(
                rng.normal(law.mu_w, math.sqrt(law.sigma2_w), size=n)
            )
            h = np.asarray(sample_gain(cp, rng, size=n), dtype=float).reshape(n)
            if law.kind == "nearest":
                return np.ones(n)
            return (w * h) ** (-1.0 / cp.alpha)

        return sampler, moment, spec
    raise ConfigError([f"unknown mark law {spec!r}"])


def validate(config: ExperimentConfig) -> list[str]:
    """Collect configuration diagnostics without running anything.

    Diagnostics prefixed ``warning:`` are advisory (the experiment still
    runs); anything else blocks :func:`run` with a nonzero exit.
    """
    diags: list[str] = []
    if config.experiment not in EXPERIMENTS:
        diags.append(f"unknown experiment {config.experiment!r}")
    if config.lambda_b is not None and config.lambda_b <= 0:
        diags.append("no base stations: lambda_b must be > 0")
    if config.lambda_u < 0:
        diags.append("lambda_u must be >= 0")
    if config.alpha <= 2:
        diags.append("path-loss exponent must be > 2 for finite interference")
    if config.m <= 0:
        diags.append("Nakagami shape m must be > 0")
    try:
        sigma2, _ = config.shadowing()
        if sigma2 < 0:
            diags.append("shadowing variance must be >= 0")
    except (ConfigError, ValueError) as exc:
        diags.append(str(exc))
        sigma2 = 0.0
    try:
        law = parse_weight_law(config.law)
        if law.kind in ("unit", "lognormal") and config.m <= 2.0 / config.alpha:
            diags.append(
                f"warning: zeta-dagger divergent: m <= 2/alpha ({config.m} <= {2.0 / config.alpha:.4f}); "
                "closed-form overlays reduce to the lower bound"
            )
    except ConfigError as exc:
        diags.extend(exc.diagnostics)
    if config.beta <= 0:
        diags.append("SIR threshold beta must be > 0")
    if config.model is not None and config.model not in MODELS:
        diags.append(f"unknown interference model {config.model!r}")
    if config.fmt not in ("csv", "json"):
        diags.append(f"unknown output format {config.fmt!r}")
    if config.reps is not None and config.reps < 1:
        diags.append("reps must be >= 1")
    if config.grid < 2:
        diags.append("quadrat grid must be >= 2")
    if config.side != "auto":
        try:
            side = float(config.side)
            if side <= 0:
                diags.append("window side must be > 0")
            else:
                for ratio in config.ratios():
                    lb = config.lambda_u / ratio if config.lambda_u > 0 else (config.lambda_b or 0)
                    needed = auto_side(lb, config.lambda_u if config.lambda_u > 0 else lb)
                    if side < needed:
                        diags.append(
                            f"warning: window side {side} km gives expected counts below "
                            f"{MIN_EXPECTED_POINTS:.0f} at ratio {ratio}; need >= {needed} km"
                        )
                        break
        except (TypeError, ValueError):
            diags.append(f"side must be 'auto' or a positive number, got {config.side!r}")
    if config.experiment == "void-prob" and config.reps is not None:
        ratio = config.ratios()[0]
        lb = config.lambda_u / ratio
        window = config.window_for(lb, config.lambda_u)
        p_guess = void_prob_nearest(config.lambda_u, lb)
        needed = suggested_reps(p_guess, lb * window.sampling_area(), config.half_width)
        if config.reps < needed:
            diags.append(
                f"warning: reps={config.reps} too small for half-width {config.half_width}; "
                f"suggest reps >= {needed}"
            )
    return diags


# ---------------------------------------------------------------------------
# experiment bodies
# ---------------------------------------------------------------------------


def _void_prob_rows(config: ExperimentConfig) -> tuple[list[dict], dict]:
    cp = config.channel_params()
    law = config.weight_law()
    zd = zeta_dagger(cp, law)
    rho = VORONOI_SHAPE * zd if math.isfinite(zd) else math.inf
    rows = []
    for ratio in config.ratios():
        lambda_b = config.lambda_u / ratio
        window = config.window_for(lambda_b, config.lambda_u)
        p_guess = void_prob_rca(config.lambda_u, lambda_b, rho if math.isfinite(rho) else VORONOI_SHAPE)
        reps = config.reps or suggested_reps(
            p_guess, lambda_b * window.sampling_area(), config.half_width
        )
        est = void_probability_mc(lambda_b, config.lambda_u, cp, law, reps, window, config.seed)
        lower, upper = void_prob_bounds(config.lambda_u, lambda_b, zd)
        rows.append(
            {
                "ratio": ratio,
                "lambda_b": lambda_b,
                "lambda_u": config.lambda_u,
                "side": window.side,
                "reps": reps,
                "p_void_sim": est.value,
                "ci_low": est.ci_low,
                "ci_high": est.ci_high,
                "p_void_nearest_formula": void_prob_nearest(config.lambda_u, lambda_b),
                "p_void_rca_formula": void_prob_rca(config.lambda_u, lambda_b, rho),
                "bound_low": lower,
                "bound_high": upper,
            }
        )
    return rows, {"zeta_dagger": zd, "rho": rho}


def _cell_pmf_rows(config: ExperimentConfig) -> tuple[list[dict], dict]:
    cp = config.channel_params()
    law = config.weight_law()
    ratio = config.ratios()[0]
    lambda_b = config.lambda_u / ratio
    window = config.window_for(lambda_b, config.lambda_u)
    reps = config.reps or suggested_reps(
        void_prob_nearest(config.lambda_u, lambda_b),
        lambda_b * window.sampling_area(),
        config.half_width,
    )
    pmf = cell_count_pmf_mc(lambda_b, config.lambda_u, cp, law, reps, window, config.seed)
    rows = []
    for n in pmf.n_values:
        rows.append(
            {
                "n_users": int(n),
                "p_sim": pmf.pmf[n],
                "ci_low": pmf.ci_low[n],
                "ci_high": pmf.ci_high[n],
                "p_formula": user_count_pmf(int(n), config.lambda_u, lambda_b),
            }
        )
    meta = {"ratio": ratio, "lambda_b": lambda_b, "mean_users_per_cell": pmf.mean,
            "reps": reps, "side": window.side}
    return rows, meta


def _bounds_check_rows(config: ExperimentConfig) -> tuple[list[dict], dict]:
    rng = rep_rng(config.seed, 2**32)
    inner_reps = config.reps or 24
    rows = []
    violations = 0
    for s in range(config.sets):
        law_kind = rng.choice(["nearest", "unit", "lognormal"])
        alpha = float(rng.uniform(3.0, 5.0))
        m = float(rng.uniform(2.0 / alpha + 0.2, 4.0))
        sigma2 = float(rng.uniform(0.0, 1.5))
        mu = float(rng.uniform(-0.5, 0.5))
        ratio = float(rng.uniform(0.3, 6.0))
        if law_kind == "nearest":
            law = WeightLaw.nearest()
        elif law_kind == "unit":
            law = WeightLaw.unit()
        else:
            law = WeightLaw.lognormal(float(rng.uniform(-0.5, 0.5)), float(rng.uniform(0.0, 1.0)))
        cp = ChannelParams(m=m, mu=mu, sigma2=sigma2, alpha=alpha)
        lambda_b = config.lambda_u / ratio
        window = config.window_for(lambda_b, config.lambda_u)
        est = void_probability_mc(
            lambda_b, config.lambda_u, cp, law, inner_reps, window, config.seed + s
        )
        zd = zeta_dagger(cp, law)
        lower, upper = void_prob_bounds(config.lambda_u, lambda_b, zd)
        p_rca = void_prob_rca(config.lambda_u, lambda_b, VORONOI_SHAPE * zd)
        within = lower - 3.0 * est.se <= est.value <= upper + 3.0 * est.se
        violations += not within
        rows.append(
            {
                "set": s,
                "law": law_kind,
                "m": m,
                "alpha": alpha,
                "sigma2_ln": sigma2,
                "mu": mu,
                "ratio": ratio,
                "reps": inner_reps,
                "p_void_sim": est.value,
                "se": est.se,
                "bound_low": lower,
                "bound_high": upper,
                "p_void_rca_formula": p_rca,
                "within_bounds": int(within),
            }
        )
    return rows, {"sets": config.sets, "violations": violations}


def _conservation_rows(config: ExperimentConfig) -> tuple[list[dict], dict]:
    cp = config.channel_params()
    law = config.weight_law()
    sampler, mean_inv_sq, label = parse_mark_law(config.mark_law, cp, law)
    lambda_b = config.lambda_b if config.lambda_b else 100.0
    suites = config.reps or 200

    # About 40 mapped points per quadrat keeps the chi-square quadrat test
    # well calibrated in both tails.
    mapped_intensity_value = lambda_b * mean_inv_sq
    target_side = (
        float(config.side)
        if config.side != "auto"
        else auto_side(mapped_intensity_value, mapped_intensity_value,
                       min_expected=40.0 * config.grid**2)
    )
    target = SimulationWindow(side=target_side)
    expansion = mark_expansion_factor(sampler, rep_rng(config.seed, 2**33))
    source = SimulationWindow(side=target.side * expansion)

    rows = []
    counts = np.empty(suites)
    rejected = 0
    for s in range(suites):
        rng = rep_rng(config.seed, s)
        src = sample_ppp(lambda_b, source, rng)
        marks = sampler(rng, len(src))
        mapped = map_pattern(src, marks, target=target, mean_inverse_square=mean_inv_sq)
        counts[s] = len(mapped)
        report = csr_test(mapped, config.grid)
        rejected += report.p_value < 0.05
        rows.append(
            {
                "suite": s,
                "n_mapped": len(mapped),
                "chi2": report.statistic,
                "dof": report.dof,
                "p_value": report.p_value,
            }
        )
    expected_count = mapped_intensity_value * target.sampling_area()
    meta = {
        "mark_law": label,
        "lambda_b": lambda_b,
        "mean_inverse_square": mean_inv_sq,
        "mapped_intensity": mapped_intensity_value,
        "target_side": target.side,
        "source_side": source.side,
        "expansion": expansion,
        "suites": suites,
        "reject_rate_5pct": rejected / suites,
        "mean_count": float(counts.mean()),
        "expected_count": expected_count,
        "count_se": float(counts.std(ddof=1) / math.sqrt(suites)) if suites > 1 else 0.0,
    }
    return rows, meta


def _remark2_rows(config: ExperimentConfig) -> tuple[list[dict], dict]:
    cp = config.channel_params()
    law = config.weight_law()
    ratio = config.ratios()[0]
    lambda_b = config.lambda_u / ratio
    window = config.window_for(lambda_b, config.lambda_u)
    reps = config.reps or 40
    report = remark2_test(
        lambda_b, config.lambda_u, cp, law, reps, window, config.seed,
        n_envelope=config.n_envelope,
    )
    rows = []
    for i, r in enumerate(report.radii):
        rows.append(
            {
                "r": float(r),
                "k_hat": report.k_hat_mean[i],
                "lo": report.envelope_low[i],
                "hi": report.envelope_high[i],
                "pi_r_sq": math.pi * float(r) ** 2,
                "exit_rate": report.per_radius_exit_rate[i],
            }
        )
    meta = {
        "ratio": ratio,
        "lambda_b": lambda_b,
        "side": window.side,
        "reps": reps,
        "exit_fraction": report.exit_fraction,
        "void_fraction": report.void_fraction,
        "matched_intensity": report.matched_intensity,
        "uninformative": report.uninformative,
        "note": "pointwise envelopes; exit rates are correlated across radii",
    }
    return rows, meta


def _coverage_rows(config: ExperimentConfig) -> tuple[list[dict], dict]:
    cp = config.channel_params()
    law = config.weight_law()
    models = MODELS if config.model is None else (config.model,)
    reps = config.reps or 400
    ratios = config.ratios() if config.ratio_grid is not None else (0.5, 1.0, 2.0, 5.0, 10.0)
    results = coverage_sweep(
        ratios,
        config.lambda_u,
        cp,
        law,
        config.beta,
        reps,
        config.seed,
        window_fn=lambda lb, lu: config.window_for(lb, lu),
        models=models,
    )
    rows = [
        {
            "ratio": r.ratio,
            "lambda_b": r.lambda_b,
            "model": r.model,
            "beta": r.beta,
            "coverage": r.estimate,
            "ci_low": r.ci_low,
            "ci_high": r.ci_high,
            "reps": r.reps,
            "near_tie_fraction": r.near_tie_fraction,
        }
        for r in results
    ]
    return rows, {"models": ",".join(models)}


def _formulas_rows(config: ExperimentConfig) -> tuple[list[dict], dict]:
    cp = config.channel_params()
    law = config.weight_law()
    zd = zeta_dagger(cp, law)
    rho = VORONOI_SHAPE * zd if math.isfinite(zd) else math.inf
    rows = []
    for ratio in config.ratios():
        lambda_b = config.lambda_u / ratio
        lower, upper = void_prob_bounds(config.lambda_u, lambda_b, zd)
        rows.append(
            {
                "ratio": ratio,
                "lambda_b": lambda_b,
                "lambda_u": config.lambda_u,
                "zeta_dagger": zd,
                "rho": rho,
                "p_void_nearest": void_prob_nearest(config.lambda_u, lambda_b),
                "p_void_rca": void_prob_rca(config.lambda_u, lambda_b, rho),
                "bound_low": lower,
                "bound_high": upper,
            }
        )
    return rows, {"zeta_dagger": zd, "rho": rho}


_BODIES = {
    "void-prob": _void_prob_rows,
    "cell-pmf": _cell_pmf_rows,
    "bounds-check": _bounds_check_rows,
    "conservation-check": _conservation_rows,
    "remark2": _remark2_rows,
    "coverage": _coverage_rows,
    "formulas": _formulas_rows,
}


# ---------------------------------------------------------------------------
# output
# ---------------------------------------------------------------------------


def _format_value(v):
    if isinstance(v, (np.floating,)):
        return repr(float(v))
    if isinstance(v, float):
        return repr(v)
    if isinstance(v, (np.integer,)):
        return int(v)
    return v


def _metadata(config: ExperimentConfig, extra: dict) -> dict:
    meta = {f"config.{k}": v for k, v in asdict(config).items()}
    sigma2, tag = config.shadowing()
    meta["resolved.sigma2_ln"] = sigma2
    meta["resolved.db_convention"] = tag
    meta["tool.version"] = __version__
    meta["tool.numpy"] = np.__version__
    meta["tool.scipy"] = scipy.__version__
    for k, v in extra.items():
        meta[f"result.{k}"] = v
    return meta


def write_rows(path: Path, fmt: str, rows: list[dict], metadata: dict) -> None:
    if fmt == "json":
        payload = {
            "metadata": {k: _format_value(v) for k, v in metadata.items()},
            "rows": [{k: _format_value(v) for k, v in row.items()} for row in rows],
        }
        path.write_text(json.dumps(payload, indent=2) + "\n")
        return
    with open(path, "w", newline="") as fh:
        for k, v in metadata.items():
            fh.write(f"# {k}={_format_value(v)}\n")
        if rows:
            writer = csv.DictWriter(fh, fieldnames=list(rows[0].keys()))
            writer.writeheader()
            for row in rows:
                writer.writerow({k: _format_value(v) for k, v in row.items()})


def run(config: ExperimentConfig) -> Path:
    """Validate, dispatch and write the experiment's result file."""
    diagnostics = validate(config)
    fatal = [d for d in diagnostics if not d.startswith("warning:")]
    if fatal:
        raise ConfigError(fatal)
    for d in diagnostics:
        print(d)

    started = time.perf_counter()
    rows, extra = _BODIES[config.experiment](config)
    elapsed = time.perf_counter() - started

    out = Path(config.out) if config.out else Path(f"{config.experiment}.{config.fmt}")
    write_rows(out, config.fmt, rows, _metadata(config, extra))
    print(f"{config.experiment}: {len(rows)} rows -> {out} ({elapsed:.1f}s)")
    return out
