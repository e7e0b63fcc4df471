"""Scenario orchestration: presets, paired sim/theory runs, CSV emission."""
from __future__ import annotations

import dataclasses
import warnings
from dataclasses import dataclass
from importlib import resources
from pathlib import Path

import numpy as np

from .activation import BernoulliModel, moments
from .config import ScenarioConfig, load_config
from .engine import MsdCurve, run_monte_carlo, to_db
from .errors import ValidationError
from .spectrum import run_spectrum_monte_carlo
from .theory import (
    MAX_STATE_DIM,
    MeanStabilityReport,
    MsStabilityReport,
    mean_artifacts,
    mean_stability,
    ms_artifacts,
    ms_stability,
    network_weighting,
    steady_state_msd,
    transient_msd,
)

PRESETS = (
    "illustrative-0idle",
    "illustrative-30idle",
    "illustrative-50idle",
    "benefit-eta0",
    "benefit-eta1",
    "spectrum",
)


def load_preset(name: str) -> ScenarioConfig:
    """Load one of the shipped scenario files by name."""
    if name not in PRESETS:
        raise ValidationError(f"unknown preset {name!r}; available: {', '.join(PRESETS)}")
    ref = resources.files(__package__) / "presets" / f"{name}.yaml"
    with resources.as_file(ref) as path:
        return load_config(path)


@dataclass
class ScenarioResult:
    """Aligned simulated and theoretical curves plus the analysis reports."""

    name: str
    config: ScenarioConfig
    sim: MsdCurve | None = None
    sync_sim: MsdCurve | None = None
    theory_msd: np.ndarray | None = None
    zeta_star: float | None = None
    mean_report: MeanStabilityReport | None = None
    ms_report: MsStabilityReport | None = None
    bias: np.ndarray | None = None
    alpha_final: np.ndarray | None = None


def _apply_overrides(cfg: ScenarioConfig, runs, horizon, seed, eta, mode) -> ScenarioConfig:
    changes = {}
    if runs is not None:
        changes["runs"] = int(runs)
    if horizon is not None:
        changes["horizon"] = int(horizon)
    if seed is not None:
        changes["seed"] = int(seed)
    if eta is not None:
        changes["eta"] = float(eta)
    if mode is not None:
        changes["mode"] = mode
    if not changes:
        return cfg
    return dataclasses.replace(cfg, run=dataclasses.replace(cfg.run, **changes))


def run_scenario(
    cfg: ScenarioConfig | str,
    runs: int | None = None,
    horizon: int | None = None,
    seed: int | None = None,
    eta: float | None = None,
    mode: str | None = None,
    compare_sync: bool = True,
) -> ScenarioResult:
    """Run a scenario (or named preset): simulation, theory, or both.

    The asynchronous Monte-Carlo run is always paired with its
    mean-matched synchronous counterpart unless ``compare_sync`` is off.
    Theory is attached when the mode requests it and the state dimension
    fits the analysis guard; instability is reported, not fatal.
    """
    if isinstance(cfg, str):
        cfg = load_preset(cfg)
    cfg = _apply_overrides(cfg, runs, horizon, seed, eta, mode)
    run = cfg.run
    result = ScenarioResult(name=cfg.name, config=cfg)

    if cfg.is_spectrum:
        spec_res = run_spectrum_monte_carlo(
            cfg.spectrum, eta=run.eta, horizon=run.horizon, runs=run.runs,
            seed=run.seed, mode="async",
        )
        result.sim = spec_res.curve
        result.alpha_final = spec_res.alpha_final
        if compare_sync:
            result.sync_sim = run_spectrum_monte_carlo(
                cfg.spectrum, eta=run.eta, horizon=run.horizon, runs=run.runs,
                seed=run.seed, mode="sync",
            ).curve
        return result

    net, model, params = cfg.net, cfg.model, cfg.params
    activation = BernoulliModel(params)
    if run.mode in ("simulate", "both"):
        result.sim = run_monte_carlo(
            net, model, activation, eta=run.eta, horizon=run.horizon,
            runs=run.runs, seed=run.seed, mode="async",
        )
        if compare_sync:
            result.sync_sim = run_monte_carlo(
                net, model, activation, eta=run.eta, horizon=run.horizon,
                runs=run.runs, seed=run.seed, mode="sync",
            )
    if run.mode in ("theory", "both"):
        if net.n_nodes * net.dim > MAX_STATE_DIM:
            warnings.warn(
                "state dimension exceeds the analysis guard; skipping theory",
                stacklevel=2,
            )
            return result
        ms = moments(params, net)
        ma = mean_artifacts(ms, model, run.eta)
        msa = ms_artifacts(ms, model, run.eta, net)
        result.mean_report = mean_stability(ma, ms, model, run.eta)
        result.ms_report = ms_stability(msa, ms, model, run.eta)
        result.bias = ma.bias
        sigma = network_weighting(net)
        w0_err = model.w_star_flat  # zero initialization
        if result.ms_report.stable:
            result.theory_msd = transient_msd(msa, ma, sigma, w0_err, run.horizon)
            if result.mean_report.stable:
                result.zeta_star = steady_state_msd(msa, ma, sigma)
        else:
            warnings.warn(
                f"mean-square recursion unstable (rho(F) = {msa.rho_f:.4g});"
                " omitting theory curve",
                stacklevel=2,
            )
    return result


def _format(value: float) -> str:
    return format(value, ".9g")


def emit_csv(result: ScenarioResult, path, which: str = "async") -> Path:
    """Write one curve file and its metadata sibling.

    Columns: iteration, msd_sim_db, msd_theory_db, then per-cluster
    msd_sim_c<q>_db columns when the scenario asked for the cluster
    weighting. The sibling ``.meta`` file carries the scalar reports as
    key=value lines. Outputs are bit-stable for a fixed configuration.
    """
    path = Path(path)
    curve = result.sim if which == "async" else result.sync_sim
    theory = result.theory_msd
    if curve is None and theory is None:
        raise ValidationError(f"no {which} curve in this result")
    per_cluster = (
        curve.per_cluster_db
        if curve is not None and result.config.run.weighting == "cluster"
        else None
    )
    rows = len(curve.msd) if curve is not None else len(theory)
    header = ["iteration", "msd_sim_db", "msd_theory_db"]
    if per_cluster is not None:
        header += [f"msd_sim_c{q + 1}_db" for q in range(per_cluster.shape[0])]
    sim_db = curve.msd_db if curve is not None else None
    theory_db = to_db(theory) if theory is not None else None
    lines = [",".join(header)]
    for i in range(rows):
        row = [str(i), _format(sim_db[i]) if sim_db is not None else ""]
        row.append(_format(theory_db[i]) if theory_db is not None and i < len(theory_db) else "")
        if per_cluster is not None:
            row += [_format(per_cluster[q, i]) for q in range(per_cluster.shape[0])]
        lines.append(",".join(row))
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")

    meta = []
    if result.mean_report is not None:
        meta.append(f"rho_B={_format(result.mean_report.rho)}")
    if result.ms_report is not None:
        meta.append(f"rho_F={_format(result.ms_report.rho)}")
    if result.mean_report is not None:
        meta.append(f"bound_mean={_format(result.mean_report.sufficient_bound)}")
    if result.ms_report is not None:
        meta.append(f"bound_ms={_format(result.ms_report.sufficient_bound)}")
    if result.zeta_star is not None:
        meta.append(f"zeta_star_db={_format(10.0 * np.log10(result.zeta_star))}")
    meta.append(f"seed={result.config.run.seed}")
    meta.append(f"runs={result.config.run.runs}")
    path.with_suffix(".meta").write_text("\n".join(meta) + "\n", encoding="utf-8")
    return path


def emit_psd_csv(result: ScenarioResult, path) -> Path:
    """Reconstructed aggregate spectrum per secondary user (spectrum runs)."""
    from .spectrum import basis_matrix, reconstruct_psd

    cfg = result.config
    if not cfg.is_spectrum or result.alpha_final is None:
        raise ValidationError("PSD output is only available for spectrum runs")
    scen = cfg.spectrum
    freqs, true_psd = reconstruct_psd(scen, scen.alpha_flat)
    per_user = result.alpha_final.reshape(
        scen.n_secondary, scen.n_antennas, scen.dim
    ).mean(axis=1)
    phi = basis_matrix(scen)
    header = ["frequency", "psd_true"] + [
        f"psd_user{u + 1}" for u in range(scen.n_secondary)
    ]
    spectra = [
        phi @ per_user[u].reshape(scen.n_primary, scen.n_basis).sum(axis=0)
        for u in range(scen.n_secondary)
    ]
    lines = [",".join(header)]
    for j in range(scen.n_freq):
        row = [_format(freqs[j]), _format(true_psd[j])]
        row += [_format(spectra[u][j]) for u in range(scen.n_secondary)]
        lines.append(",".join(row))
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")
    return path
