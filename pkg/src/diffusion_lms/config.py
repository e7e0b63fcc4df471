"""Scenario configuration: YAML ingestion, validation, 1-based translation.

A configuration file has a ``run`` block plus either the standard triple
``network`` / ``model`` / ``async`` or a ``spectrum`` block. Node labels
in files are 1-based and translated to the internal 0-based indexing.
See the README for the full schema.
"""
from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np
import yaml

from .activation import (
    BernoulliParams,
    uniform_inter_factors,
    uniform_intra_weights,
    validate_params,
)
from .engine import SignalModel, make_signal_model
from .errors import ParseError, ProbabilityRange, ValidationError
from .network import ClusteredNetwork, build_network
from .spectrum import SpectrumScenario, make_spectrum_scenario

_MODES = ("simulate", "theory", "both")
_WEIGHTINGS = ("network", "cluster")


@dataclass(frozen=True)
class RunSettings:
    eta: float = 1.0
    horizon: int = 1000
    runs: int = 100
    seed: int = 0
    mode: str = "both"
    weighting: str = "network"


@dataclass(frozen=True)
class ScenarioConfig:
    """Everything one scenario needs; exactly one of the two shapes is set."""

    name: str
    run: RunSettings
    net: ClusteredNetwork | None = None
    model: SignalModel | None = None
    params: BernoulliParams | None = None
    spectrum: SpectrumScenario | None = None

    @property
    def is_spectrum(self) -> bool:
        return self.spectrum is not None


def load_config(path) -> ScenarioConfig:
    """Parse and validate a scenario file."""
    path = Path(path)
    try:
        raw = yaml.safe_load(path.read_text())
    except yaml.YAMLError as exc:
        mark = getattr(exc, "problem_mark", None)
        where = f" at line {mark.line + 1}" if mark is not None else ""
        raise ParseError(f"{path}: invalid YAML{where}: {exc}") from exc
    if not isinstance(raw, dict):
        raise ParseError(f"{path}: top level must be a mapping")
    return parse_config(raw, default_name=path.stem)


def parse_config(raw: dict, default_name: str = "scenario") -> ScenarioConfig:
    name = str(raw.get("name", default_name))
    run = _parse_run(raw.get("run", {}))
    if "spectrum" in raw:
        scen = _parse_spectrum(raw["spectrum"])
        return ScenarioConfig(name=name, run=run, spectrum=scen)
    for section in ("network", "model", "async"):
        if section not in raw:
            raise ValidationError(f"missing required section '{section}'")
    net = _parse_network(raw["network"])
    model = _parse_model(raw["model"], net)
    params = _parse_async(raw["async"], net)
    return ScenarioConfig(name=name, run=run, net=net, model=model, params=params)


def _parse_run(block: dict) -> RunSettings:
    if not isinstance(block, dict):
        raise ValidationError("'run' must be a mapping")
    settings = RunSettings(
        eta=float(block.get("eta", 1.0)),
        horizon=int(block.get("horizon", 1000)),
        runs=int(block.get("runs", 100)),
        seed=int(block.get("seed", 0)),
        mode=str(block.get("mode", "both")),
        weighting=str(block.get("weighting", "network")),
    )
    if settings.eta < 0:
        raise ValidationError("eta must be nonnegative")
    if settings.horizon < 0 or settings.runs < 1:
        raise ValidationError("horizon must be >= 0 and runs >= 1")
    if settings.mode not in _MODES:
        raise ValidationError(f"mode must be one of {_MODES}")
    if settings.weighting not in _WEIGHTINGS:
        raise ValidationError(f"weighting must be one of {_WEIGHTINGS}")
    return settings


def _parse_network(block: dict) -> ClusteredNetwork:
    try:
        nodes = int(block["nodes"])
        dim = int(block["dimension"])
        edges = [(int(a) - 1, int(b) - 1) for a, b in block["edges"]]
        clusters = [{int(i) - 1 for i in c} for c in block["clusters"]]
    except (KeyError, TypeError, ValueError) as exc:
        raise ValidationError(f"malformed network block: {exc}") from exc
    return build_network(nodes, dim, edges, clusters)


def _parse_model(block: dict, net: ClusteredNetwork) -> SignalModel:
    n = net.n_nodes
    if "sigma2_x" in block:
        rx = np.broadcast_to(np.asarray(block["sigma2_x"], dtype=float), (n,)).copy()
    elif "rx" in block:
        rx = np.asarray(block["rx"], dtype=float)
    else:
        raise ValidationError("model block needs 'sigma2_x' or 'rx'")
    sigma2_z = np.broadcast_to(np.asarray(block["sigma2_z"], dtype=float), (n,)).copy()
    tasks = block.get("tasks")
    if tasks is None:
        raise ValidationError("model block needs per-cluster 'tasks'")
    return make_signal_model(net, rx=rx, sigma2_z=sigma2_z, cluster_tasks=tasks)


def _per_node(value, net: ClusteredNetwork, what: str) -> np.ndarray:
    """Scalar, per-node list, or {per_cluster: [...]} to a length-N vector."""
    n = net.n_nodes
    if isinstance(value, dict):
        per_cluster = value.get("per_cluster")
        if per_cluster is None or len(per_cluster) != net.n_clusters:
            raise ValidationError(f"'{what}' per_cluster needs one value per cluster")
        out = np.empty(n)
        for q, v in enumerate(per_cluster):
            for k in net.clusters[q]:
                out[k] = float(v)
        return out
    arr = np.asarray(value, dtype=float)
    if arr.ndim == 0:
        return np.full(n, float(arr))
    if arr.shape != (n,):
        raise ValidationError(f"'{what}' must be a scalar or length-{n} list")
    return arr


def _parse_async(block: dict, net: ClusteredNetwork) -> BernoulliParams:
    n = net.n_nodes
    mu = _per_node(block.get("mu", 0.01), net, "mu")
    q = _per_node(block.get("q", 1.0), net, "q")

    weights = block.get("weights", "uniform-intra")
    if weights == "uniform-intra":
        a = uniform_intra_weights(net)
    else:
        a = np.zeros((n, n))
        for l, k, value in weights:
            a[int(l) - 1, int(k) - 1] = float(value)

    p_raw = block.get("p", 1.0)
    p = np.zeros((n, n))
    if isinstance(p_raw, dict):
        per_cluster = p_raw.get("per_cluster")
        if per_cluster is None or len(per_cluster) != net.n_clusters:
            raise ValidationError("'p' per_cluster needs one value per cluster")
        for l, k in net.intra_links():
            p[l, k] = float(per_cluster[net.cluster_index[k]])
    else:
        p[:, :] = float(p_raw)

    factors = block.get("factors", "uniform-inter")
    if factors == "uniform-inter":
        rho = uniform_inter_factors(net)
    else:
        rho = np.zeros((n, n))
        for k, l, value in factors:
            rho[int(k) - 1, int(l) - 1] = float(value)

    r_raw = block.get("r", 1.0)
    r = np.full((n, n), float(r_raw))

    for name, arr in (("q", q), ("p", p), ("r", r)):
        if np.any(arr < 0) or np.any(arr > 1):
            raise ProbabilityRange(f"probabilities '{name}' must lie in [0, 1]")

    params = BernoulliParams(mu=mu, q=q, a=a, p=p, rho=rho, r=r)
    validate_params(params, net)
    return params


def _parse_spectrum(block: dict) -> SpectrumScenario:
    try:
        return make_spectrum_scenario(
            n_primary=int(block["primary_users"]),
            n_secondary=int(block["secondary_users"]),
            n_antennas=int(block["antennas"]),
            n_basis=int(block["basis_functions"]),
            n_freq=int(block["frequency_samples"]),
            basis_width=float(block["basis_width"]),
            alpha_star=block["alpha_star"],
            primary_pos=block["primary_positions"],
            secondary_pos=block["secondary_positions"],
            loss_threshold=float(block["loss_threshold"]),
            loss_jitter=float(block.get("loss_jitter", 0.1)),
            noise_std=float(block.get("noise_std", 0.01)),
            link_decay=float(block.get("link_decay", 0.15)),
            mu=float(block["mu"]),
            q=float(block["q"]),
            p_intra=float(block["p"]),
        )
    except KeyError as exc:
        raise ValidationError(f"spectrum block is missing {exc}") from exc
