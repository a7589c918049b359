"""Scenario execution: simulate, tabulate, check, persist."""

from __future__ import annotations

import io
import json
import logging
import time
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np

from .. import __version__, engine, models, stablelim, verify
from .config import ConfigError, ExperimentConfig

log = logging.getLogger(__name__)

MARTINGALE_GENERATIONS = 11
MIN_CF_SAMPLES = 1000


class ConditionError(ConfigError):
    """The law violates the standing assumptions and no override was given."""


# ---------------------------------------------------------------------------
# per-replicate table


def table_generations(cfg: ExperimentConfig) -> list:
    pol = cfg.simulation_policy()
    n, M = pol.horizon, pol.max_generation
    gens = set(range(min(M, MARTINGALE_GENERATIONS) + 1))
    gens.update(n - r for r in cfg.lags)
    gens.update({1, n, M})
    return sorted(gens)


def series_coefficients(cfg: ExperimentConfig) -> Optional[np.ndarray]:
    spec = cfg.checks.get("series_tail")
    if spec is None:
        return None
    base = [float(v) for v in spec["coefficients"]]
    M = cfg.simulation_policy().max_generation
    mode = spec.get("tail", "periodic")
    if mode == "periodic":
        return np.array([base[j % len(base)] for j in range(M)])
    if mode == "constant":
        return np.array(base + [base[-1]] * (M - len(base)))
    return np.array(base + [0.0] * (M - len(base)))


def column_names(cfg: ExperimentConfig) -> list:
    gens = table_generations(cfg)
    cols = ["replicate"] + [f"W_theta_{g}" for g in gens] + [f"W_alpha_theta_{g}" for g in gens]
    if "series_tail" in cfg.checks:
        cols.append("series")
    return cols + ["extinct_at", "capped", "pruned_mass"]


def _tabulate(batch: engine.PathBatch, cfg: ExperimentConfig) -> dict:
    gens = table_generations(cfg)
    out = {"replicate": np.arange(batch.start, batch.start + len(batch), dtype=np.int64)}
    for g in gens:
        out[f"W_theta_{g}"] = batch.W_theta[:, g].copy()
    for g in gens:
        out[f"W_alpha_theta_{g}"] = batch.W_alpha_theta[:, g].copy()
    a = series_coefficients(cfg)
    if a is not None:
        out["series"] = engine.weighted_increment_series(batch, a)
    out["extinct_at"] = batch.extinct_at.astype(np.int64)
    out["capped"] = batch.capped.astype(np.int64)
    out["pruned_mass"] = batch.pruned_mass_bound.copy()
    return out


def simulate_table(cfg: ExperimentConfig, threads: Optional[int] = None,
                   backend: Optional[str] = None) -> dict:
    """Simulate every replicate and return the per-replicate columns."""
    pol = cfg.simulation_policy()
    law = engine.prepare(cfg.build_law(), cfg.theta, cfg.alpha,
                         pol.offspring_truncation_epsilon, backend)
    threads = cfg.threads if threads is None else threads

    def work(lo, hi):
        batch = engine._run_chunk(law, pol, cfg.seed, lo, hi, engine.ROOT_LABEL)
        return _tabulate(batch, cfg)

    parts = engine.map_chunks(work, 0, cfg.replicates, threads)
    return {k: np.concatenate([p[k] for p in parts]) for k in column_names(cfg)}


# ---------------------------------------------------------------------------
# CSV persistence


def _fmt(values: np.ndarray) -> list:
    if values.dtype.kind in "iu":
        return [str(int(v)) for v in values]
    return [repr(float(v)) for v in values]


def write_table(path, table: dict, digest: str) -> None:
    cols = list(table)
    formatted = [_fmt(np.asarray(table[c])) for c in cols]
    buf = io.StringIO()
    buf.write(f"# config_digest={digest}\n")
    buf.write(",".join(cols) + "\n")
    for row in zip(*formatted):
        buf.write(",".join(row) + "\n")
    Path(path).write_text(buf.getvalue())


def read_digest(path) -> str:
    with open(path) as fh:
        first = fh.readline().strip()
    prefix = "# config_digest="
    if not first.startswith(prefix):
        raise ConfigError(f"{path} has no config digest header")
    return first[len(prefix):]


def read_table(path) -> dict:
    with open(path) as fh:
        fh.readline()
        cols = fh.readline().strip().split(",")
        data = np.loadtxt(fh, delimiter=",", ndmin=2)
    table = {}
    for i, c in enumerate(cols):
        col = data[:, i] if data.size else np.zeros(0)
        if c in ("replicate", "extinct_at", "capped"):
            col = col.astype(np.int64)
        table[c] = col
    return table


def write_cf_table(path, grid, theoretical, digest: str, empirical=None) -> None:
    buf = io.StringIO()
    buf.write(f"# config_digest={digest}\n")
    if empirical is None:
        buf.write("t,re,im\n")
        for t, z in zip(grid, theoretical):
            buf.write(f"{float(t)!r},{float(z.real)!r},{float(z.imag)!r}\n")
    else:
        buf.write("t,reEmp,imEmp,reTheo,imTheo\n")
        for t, e, z in zip(grid, empirical, theoretical):
            buf.write(f"{float(t)!r},{float(e.real)!r},{float(e.imag)!r},"
                      f"{float(z.real)!r},{float(z.imag)!r}\n")
    Path(path).write_text(buf.getvalue())


# ---------------------------------------------------------------------------
# report


@dataclass
class RunReport:
    scenario: str
    config_digest: str
    verdicts: dict
    counts: dict
    wall_clock: float
    software_version: str
    backend: str
    law: dict = field(default_factory=dict)
    warnings: list = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return all(v.get("status") == "pass" for v in self.verdicts.values())

    def to_dict(self) -> dict:
        d = asdict(self)
        d["passed"] = self.passed
        return d

    def to_json(self) -> str:
        return json.dumps(verify._jsonable(self.to_dict()), indent=2, sort_keys=True)


def _status(verdict_dict: dict) -> dict:
    verdict_dict["status"] = "pass" if verdict_dict.get("passed") else "fail"
    return verdict_dict


def _guard(name: str, fn, verdicts: dict) -> None:
    try:
        result = fn()
    except (verify.InsufficientSampleError, verify.WindowEmptyError) as exc:
        verdicts[name] = {"status": "insufficient-sample", "passed": False, "details": str(exc)}
        return
    if isinstance(result, dict):
        for sub, v in result.items():
            verdicts[f"{name}:{sub}"] = _status(v.to_dict())
    else:
        verdicts[name] = _status(result.to_dict())


def law_summary(cfg: ExperimentConfig) -> tuple:
    law = cfg.build_law()
    rep = models.check_conditions(law, cfg.theta, cfg.alpha)
    return law, rep


def run_checks(cfg: ExperimentConfig, table: dict, kappa: float, c: Optional[float],
               ecf_sink: Optional[dict] = None) -> dict:
    """Evaluate every enabled check on the uncapped replicates."""
    pol = cfg.simulation_policy()
    n, M, alpha = pol.horizon, pol.max_generation, cfg.alpha
    tol = cfg.tolerances
    keep = table["capped"] == 0
    col = lambda name: np.asarray(table[name])[keep]  # noqa: E731
    grid = cfg.grid_points()
    verdicts: dict = {}
    checks = cfg.checks

    def need_cf_samples(x):
        if x.shape[0] < MIN_CF_SAMPLES:
            raise verify.InsufficientSampleError(
                f"{x.shape[0]} usable replicates, CF checks need {MIN_CF_SAMPLES}")

    def need_c():
        if c is None or not c > 0:
            raise verify.InsufficientSampleError("no closed-form tail constant for this law")
        return stablelim.StableSpec(alpha, c)

    if "tail_ratio" in checks:
        q = tuple(checks["tail_ratio"].get("quantiles", (0.99, 0.999)))
        _guard("tail_ratio", lambda: verify.tail_ratio_check(
            col(f"W_theta_{M}"), col("W_theta_1"), kappa, q, tol["tail_ratio"]), verdicts)

    if "hill" in checks:
        frac = checks["hill"].get("top_fraction", 0.01)
        which = checks["hill"].get("samples", "both")
        targets = {"W1": "W_theta_1", "WM": f"W_theta_{M}"}
        for key, name in targets.items():
            if which in (key, "both"):
                _guard(f"hill_{key}", lambda name=name: verify.hill_check(
                    col(name), alpha, frac, tol["hill"]), verdicts)

    lags = cfg.lags
    W_M = col(f"W_theta_{M}")
    X = np.stack([kappa ** (-(n - r) / alpha) * (W_M - col(f"W_theta_{n - r}")) for r in lags],
                 axis=1)
    mix = col(f"W_alpha_theta_{n}")

    if "mixture_cf" in checks:
        def mixture():
            spec = need_c()
            need_cf_samples(X)
            dev = X[:, lags.index(0)] if 0 in lags else kappa ** (-n / alpha) * (
                W_M - col(f"W_theta_{n}"))
            v = verify.mixture_check(dev, mix, spec, kappa, grid, tol["cf_sup"])
            if ecf_sink is not None:
                ecf_sink["mixture_cf"] = (grid, verify.ecf(dev, grid),
                                          stablelim.mixture_cf(spec, kappa, np.sort(mix), grid))
            return v
        _guard("mixture_cf", mixture, verdicts)

    for betas in (checks.get("fdd") or {}).get("betas", []):
        label = "fdd[" + ",".join(f"{b:g}" for b in betas) + "]"

        def fdd(betas=betas, label=label):
            spec = need_c()
            need_cf_samples(X)
            v = verify.fdd_check(X, mix, betas, spec, kappa, grid, tol["cf_sup"])
            if ecf_sink is not None:
                b = np.asarray(betas, dtype=float)
                ecf_sink[label] = (grid, verify.ecf(X @ b, grid),
                                   stablelim.fdd_limit_cf(spec, kappa, b, np.sort(mix), grid))
            return v
        _guard(label, fdd, verdicts)

    if "martingale" in checks:
        max_n = min(int(checks["martingale"].get("max_n", 10)), M - 1,
                    MARTINGALE_GENERATIONS - 1)
        z = tol["mean_z"]
        for k in range(max_n + 1):
            _guard(f"martingale:increment_{k}", lambda k=k: verify.mean_check(
                col(f"W_theta_{k + 1}") - col(f"W_theta_{k}"), 0.0,
                f"W_{k + 1} - W_{k}", z), verdicts)
            _guard(f"martingale:alpha_theta_{k + 1}", lambda k=k: verify.mean_check(
                col(f"W_alpha_theta_{k + 1}"), 1.0, f"W_{k + 1}(alpha theta)", z), verdicts)
        _guard("martingale:W_M", lambda: verify.mean_check(W_M, 1.0, f"W_{M}", z), verdicts)

    if "series_tail" in checks:
        spec_s = checks["series_tail"]

        def series():
            if c is None:
                raise verify.InsufficientSampleError("no closed-form tail constant for this law")
            return verify.series_tail_check(
                col("series"), spec_s["coefficients"], kappa, alpha, c,
                spec_s.get("tail", "periodic"), spec_s.get("top_fraction", 0.005),
                tol["series_tail"])
        _guard("series_tail", series, verdicts)
    return verdicts


def run_scenario(cfg: ExperimentConfig, threads: Optional[int] = None,
                 out_dir=None, override_conditions: bool = False,
                 samples_path=None, write: bool = True,
                 backend: Optional[str] = None) -> RunReport:
    """Simulate (or load) the replicate table, run the checks and persist artifacts."""
    t0 = time.perf_counter()
    law, rep = law_summary(cfg)
    essential = ("kappa_lt_1", "supercritical", "m_theta_finite", "m_alpha_theta_finite")
    failed = [k for k in essential if not rep.conditions.get(k, True)]
    if failed and not override_conditions:
        raise ConditionError(f"standing assumptions fail: {', '.join(failed)}")
    warnings = [f"condition {k} fails" for k in rep.failed()]
    pol = cfg.simulation_policy()
    scale = engine.truncation_scale(rep.kappa, cfg.alpha, pol.horizon, pol.max_generation) \
        if rep.kappa > 0 else 0.0
    if scale > 1e-2:
        warnings.append(f"neglected W - W_M has relative scale {scale:.3g} > 1e-2 at horizon "
                        f"{pol.horizon}")

    if samples_path is not None:
        if read_digest(samples_path) != cfg.digest:
            raise ConfigError(f"{samples_path} was produced by a different configuration")
        table = read_table(samples_path)
        used_backend = "stored"
    else:
        table = simulate_table(cfg, threads, backend)
        used_backend = backend or engine.BACKEND
        if isinstance(law, models.Custom):
            used_backend = "python"

    ecfs: dict = {}
    kappa = rep.kappa
    verdicts = run_checks(cfg, table, kappa, rep.tail_constant_c, ecfs)
    counts = {
        "replicates": int(len(table["replicate"])),
        "extinct": int(np.count_nonzero(table["extinct_at"] >= 0)),
        "capped": int(np.count_nonzero(table["capped"])),
        "used": int(np.count_nonzero(table["capped"] == 0)),
        "max_pruned_mass": float(np.max(table["pruned_mass"])) if len(table["pruned_mass"])
        else 0.0,
    }
    report = RunReport(cfg.scenario, cfg.digest, verdicts, counts,
                       time.perf_counter() - t0, __version__, used_backend,
                       {"m_theta": rep.m_theta, "m_alpha_theta": rep.m_alpha_theta,
                        "kappa": kappa, "tail_constant_c": rep.tail_constant_c,
                        "conditions": rep.conditions, "truncation_scale": scale},
                       warnings)
    if write:
        out = Path(out_dir if out_dir is not None else cfg.output.get("dir", "runs"))
        out.mkdir(parents=True, exist_ok=True)
        if samples_path is None:
            write_table(out / f"{cfg.scenario}.csv", table, cfg.digest)
        for label, (grid, emp, theo) in ecfs.items():
            safe = label.replace("[", "_").replace("]", "").replace(",", "_")
            write_cf_table(out / f"{cfg.scenario}.ecf.{safe}.csv", grid, theo, cfg.digest, emp)
        (out / f"{cfg.scenario}.report.json").write_text(report.to_json() + "\n")
    return report


def export_cf_tables(cfg: ExperimentConfig, out_dir, mix_weights=None,
                     threads: Optional[int] = None) -> list:
    """Write the theoretical CF tables ``cf_Q``, ``cf_U0`` and the mixture."""
    law, rep = law_summary(cfg)
    c = rep.tail_constant_c
    if c is None or not c > 0:
        raise ConfigError("the law has no closed-form tail constant; CF tables are undefined")
    if not 0 < rep.kappa < 1:
        raise ConfigError(f"kappa={rep.kappa} is outside (0, 1)")
    spec = stablelim.StableSpec(cfg.alpha, c)
    ar = stablelim.ARSpec.from_kappa(rep.kappa, spec)
    grid = cfg.grid_points()
    if mix_weights is None:
        table = simulate_table(cfg, threads)
        n = cfg.simulation_policy().horizon
        mix_weights = np.asarray(table[f"W_alpha_theta_{n}"])[table["capped"] == 0]
    weights = np.sort(np.asarray(mix_weights, dtype=float))
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    tables = {
        "cf_Q": stablelim.cf_Q(spec, grid),
        "cf_U0": stablelim.cf_U0(ar, grid),
        "mixture": stablelim.mixture_cf(spec, rep.kappa, weights, grid),
    }
    paths = []
    for name, values in tables.items():
        p = out / f"{cfg.scenario}.{name}.csv"
        write_cf_table(p, grid, values, cfg.digest)
        paths.append(p)
    return paths
