"""Experiment configuration: a flat key-value text format, fully validated.

One format, documented by example (see the README and the configs/
directory).  Lines are ``key = value`` with '#' comments; keys are
dotted paths.  Parsing validates everything up front and reports every
problem at once rather than stopping at the first.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import ConfigError, ParameterError
from .estimator import EstimatorConfig
from .graphs import Graph, read_edge_list, ring_khop_graph
from .noise import FAMILIES, NoiseModel
from .nonlinearities import Clip, Identity, Nonlinearity, Quantizer, Sign

__all__ = ["ExperimentConfig", "parse_config", "EXPERIMENT_KINDS"]

EXPERIMENT_KINDS = ("simulate", "ensemble", "asymptotic", "sweep")
NONLINEARITY_KINDS = ("sign", "clip", "quantizer", "identity")
GRAPH_FAMILIES = ("ring_khop", "edge_list")


@dataclass(frozen=True, eq=False)
class ExperimentConfig:
    """A fully validated experiment description."""

    kind: str
    graph_family: str
    graph_n: int | None
    graph_k: int | None
    graph_edge_list: Path | None
    noise_obs: NoiseModel
    noise_comm: NoiseModel
    nl_consensus: Nonlinearity
    nl_observation: Nonlinearity
    a: float
    b: float
    delta: float
    horizon: int
    replicates: int
    seed: int
    theta_star: np.ndarray
    h: np.ndarray
    allow_identity: bool
    out_dir: Path

    def build_graph(self):
        if self.graph_family == "ring_khop":
            # sweep configs omit the radius; validation uses the base ring
            return ring_khop_graph(self.graph_n,
                                   1 if self.graph_k is None else self.graph_k)
        return read_edge_list(self.graph_edge_list)

    def estimator_config(self, graph):
        obs = np.tile(self.h, (graph.n, 1))
        return EstimatorConfig(
            a=self.a, b=self.b, delta=self.delta, horizon=self.horizon,
            replicates=self.replicates, seed=self.seed,
            theta_star=self.theta_star, obs_vectors=obs)


_MISSING = object()


class _Reader:
    """Typed access to the raw key-value map, collecting every error."""

    def __init__(self, raw):
        self.raw = raw
        self.errors = []
        self.seen = set()

    def error(self, msg):
        self.errors.append(msg)

    def get(self, key, kind, default=_MISSING, required=False):
        self.seen.add(key)
        if key not in self.raw:
            if required:
                self.error(f"missing required key '{key}'")
                return None
            return None if default is _MISSING else default
        text = self.raw[key]
        try:
            return kind(text)
        except (ValueError, TypeError):
            self.error(f"key '{key}': cannot parse {text!r} as {kind.__name__}")
            return None

    def unknown_keys(self):
        return sorted(set(self.raw) - self.seen)


def _bool(text):
    t = text.strip().lower()
    if t in ("true", "yes", "1", "on"):
        return True
    if t in ("false", "no", "0", "off"):
        return False
    raise ValueError(text)


def _float_list(text):
    return np.array([float(p) for p in text.split(",")], dtype=np.float64)


def _levels(text):
    """Quantizer level list: 'threshold:value' pairs, comma separated."""
    thresholds, values = [], []
    for part in text.split(","):
        t, _, v = part.partition(":")
        if not _:
            raise ValueError(text)
        thresholds.append(float(t))
        values.append(float(v))
    return np.array(thresholds), np.array(values)


def _read_raw(path):
    raw = {}
    errors = []
    for lineno, line in enumerate(Path(path).read_text().splitlines(), start=1):
        stripped = line.split("#", 1)[0].strip()
        if not stripped:
            continue
        key, eq, value = stripped.partition("=")
        if not eq:
            errors.append(f"line {lineno}: expected 'key = value', got {line!r}")
            continue
        key = key.strip()
        value = value.strip()
        if key in raw:
            errors.append(f"line {lineno}: duplicate key '{key}'")
            continue
        raw[key] = value
    return raw, errors


def _read_noise(r, block):
    family = r.get(f"{block}.family", str, required=True)
    beta = r.get(f"{block}.beta", float)
    sigma = r.get(f"{block}.sigma", float)
    if family is None:
        return None
    if family not in FAMILIES:
        r.error(f"key '{block}.family': unknown family {family!r}; "
                f"expected one of {FAMILIES}")
        return None
    try:
        if family == "eq3":
            if beta is None:
                r.error(f"missing required key '{block}.beta' (the polynomial-tail "
                        "family needs its exponent; beta > 2 keeps the first "
                        "absolute moment finite)")
                return None
            return NoiseModel.heavy_tail(beta)
        if family == "gaussian":
            if sigma is None:
                r.error(f"missing required key '{block}.sigma'")
                return None
            return NoiseModel.gaussian(sigma)
        return NoiseModel.zero()
    except ParameterError as exc:
        r.error(f"{block}: {exc}")
        return None


def _read_nonlinearity(r, block, allow_identity):
    kind = r.get(f"{block}.kind", str, required=True)
    tau = r.get(f"{block}.tau", float)
    levels = r.get(f"{block}.levels", _levels)
    if kind is None:
        return None
    if kind not in NONLINEARITY_KINDS:
        r.error(f"key '{block}.kind': unknown kind {kind!r}; "
                f"expected one of {NONLINEARITY_KINDS}")
        return None
    try:
        if kind == "sign":
            return Sign()
        if kind == "clip":
            if tau is None:
                r.error(f"missing required key '{block}.tau'")
                return None
            return Clip(tau)
        if kind == "quantizer":
            if levels is None:
                r.error(f"missing required key '{block}.levels' "
                        "(format: 'threshold:value, threshold:value, ...')")
                return None
            return Quantizer(levels[0], levels[1])
        if not allow_identity:
            r.error(f"{block}: the identity map is unbounded and violates the "
                    "nonlinearity assumptions; it is only valid for the "
                    "linear-baseline experiment "
                    "(set estimator.allow_identity = true)")
            return None
        return Identity()
    except ParameterError as exc:
        r.error(f"{block}: {exc}")
        return None


def parse_config(path):
    """Parse and validate an experiment file; raises ConfigError listing
    every problem found."""
    raw, errors = _read_raw(path)
    r = _Reader(raw)
    r.errors.extend(errors)

    kind = r.get("kind", str, required=True)
    if kind is not None and kind not in EXPERIMENT_KINDS:
        r.error(f"key 'kind': unknown experiment kind {kind!r}; "
                f"expected one of {EXPERIMENT_KINDS}")
        kind = None

    graph_family = r.get("graph.family", str, required=True)
    graph_n = r.get("graph.n", int)
    graph_k = r.get("graph.k", int)
    edge_list = r.get("graph.edge_list", Path)
    if graph_family is not None and graph_family not in GRAPH_FAMILIES:
        r.error(f"key 'graph.family': unknown family {graph_family!r}; "
                f"expected one of {GRAPH_FAMILIES}")
        graph_family = None
    if graph_family == "ring_khop":
        if graph_n is None:
            r.error("missing required key 'graph.n'")
        if graph_k is None and kind != "sweep":
            r.error("missing required key 'graph.k'")
    elif graph_family == "edge_list":
        if edge_list is None:
            r.error("missing required key 'graph.edge_list'")
        elif not edge_list.exists():
            r.error(f"key 'graph.edge_list': file not found: {edge_list}")

    allow_identity = r.get("estimator.allow_identity", _bool, default=False)
    noise_obs = _read_noise(r, "noise.observation")
    noise_comm = _read_noise(r, "noise.communication")
    nl_cons = _read_nonlinearity(r, "nonlinearity.consensus", allow_identity)
    nl_obs = _read_nonlinearity(r, "nonlinearity.observation", allow_identity)

    a = r.get("estimator.a", float, required=True)
    b = r.get("estimator.b", float, required=True)
    delta = r.get("estimator.delta", float, default=1.0)
    needs_run = kind in ("simulate", "ensemble")
    horizon = r.get("estimator.horizon", int, required=needs_run)
    replicates = r.get("estimator.replicates", int, required=(kind == "ensemble"))
    seed = r.get("estimator.seed", int, required=needs_run)
    theta = r.get("estimator.theta_star", _float_list, required=needs_run)
    h = r.get("estimator.h", _float_list,
              required=(kind in ("simulate", "ensemble", "asymptotic", "sweep")))
    out_dir = r.get("output.dir", Path, default=Path("out"))

    if a is not None and not a > 0:
        r.error(f"key 'estimator.a': must be positive, got {a}")
    if b is not None and not b > 0:
        r.error(f"key 'estimator.b': must be positive, got {b}")
    if delta is not None and not 0.5 < delta <= 1.0:
        r.error(f"key 'estimator.delta': step exponent must lie in (0.5, 1] "
                f"for almost-sure convergence, got {delta}")
    if horizon is not None and horizon < 1:
        r.error(f"key 'estimator.horizon': must be >= 1, got {horizon}")
    if replicates is not None and replicates < 1:
        r.error(f"key 'estimator.replicates': must be >= 1, got {replicates}")
    if kind == "ensemble" and replicates is not None and replicates < 2:
        r.error("key 'estimator.replicates': an ensemble needs at least 2")
    if h is not None and not np.any(h != 0.0):
        r.error("key 'estimator.h': the observation vector must be nonzero")
    if theta is not None and h is not None and theta.shape != h.shape:
        r.error(f"keys 'estimator.theta_star'/'estimator.h': dimension "
                f"mismatch ({theta.shape[0]} vs {h.shape[0]})")

    if kind == "sweep":
        if graph_family is not None and graph_family != "ring_khop":
            r.error("sweep experiments require graph.family = ring_khop")
        if graph_n is not None and graph_n % 2 == 0:
            r.error(f"key 'graph.n': sweeps need an odd agent count so the "
                    f"k-hop family ends at the complete graph, got {graph_n}")
        for blk, model in (("noise.observation", noise_obs),
                           ("noise.communication", noise_comm)):
            if model is not None and model.family != "eq3":
                r.error(f"{blk}: sweeps require the polynomial-tail family")
        if (noise_obs is not None and noise_comm is not None
                and noise_obs.family == noise_comm.family == "eq3"
                and noise_obs.beta != noise_comm.beta):
            r.error("sweeps require equal tail exponents on both noise channels")
        for blk, nl in (("nonlinearity.consensus", nl_cons),
                        ("nonlinearity.observation", nl_obs)):
            if nl is not None and nl.kind != "sign":
                r.error(f"{blk}: sweeps are defined for the sign nonlinearity")
        if h is not None and h.shape[0] != 1:
            r.error("key 'estimator.h': sweeps use a scalar observation gain")

    if graph_family == "ring_khop" and graph_n is not None:
        if graph_n < 3:
            r.error(f"key 'graph.n': k-hop rings need n >= 3, got {graph_n}")
        elif graph_k is not None and not 1 <= graph_k <= (graph_n - 1) // 2:
            r.error(f"key 'graph.k': hop radius out of range "
                    f"[1, {(graph_n - 1) // 2}] for n = {graph_n}")

    for key in r.unknown_keys():
        r.error(f"unknown key '{key}'")

    if r.errors:
        raise ConfigError(r.errors)

    return ExperimentConfig(
        kind=kind, graph_family=graph_family, graph_n=graph_n,
        graph_k=graph_k, graph_edge_list=edge_list,
        noise_obs=noise_obs, noise_comm=noise_comm,
        nl_consensus=nl_cons, nl_observation=nl_obs,
        a=a, b=b, delta=delta,
        horizon=horizon if horizon is not None else 1,
        replicates=replicates if replicates is not None else 1,
        seed=seed if seed is not None else 0,
        theta_star=theta if theta is not None else np.ones(1),
        h=h, allow_identity=allow_identity, out_dir=out_dir)
