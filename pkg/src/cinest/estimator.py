"""The nonlinear consensus+innovations recursion and its Monte Carlo harness.

Each agent i holds an estimate x_i of the unknown parameter vector and
updates it synchronously from fresh noisy observations and noisy
neighbor exchanges:

    x_i <- x_i - alpha_t ( (b/a) sum_{j in nbrs(i)} psi_c(x_i - x_j + xi_ij)
                           - h_i psi_o(z_i - h_i . x_i) ),
    z_i = h_i . theta_star + n_i,      alpha_t = a / (t+1)^delta.

Randomness discipline: replicate r owns the stream seeded by
(master seed, r); each step consumes one uniform block, observation
draws for agents 1..N first, then one draw per vector component per
directed arc in canonical arc order.  Trajectories are therefore a pure
function of (config, graph, models, replicate index), independent of
chunking, backend, or scheduling.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np

from . import _kernels
from .errors import ParameterError
from .graphs import validate_connected

__all__ = [
    "EstimatorConfig",
    "NetworkState",
    "TrajectoryRecord",
    "EnsembleStats",
    "MetricsTable",
    "snapshot_times",
    "initial_state",
    "step",
    "run",
    "run_ensemble",
    "error_metrics",
]

MSE_DIVERGENCE_LIMIT = 1e12

# steps per kernel call; large enough that per-chunk Python overhead is
# negligible, capped so noise buffers stay modest
_CHUNK_STEPS = 1024
_CHUNK_BUDGET = 24_000_000  # max doubles per noise buffer


@dataclass(frozen=True, eq=False)
class EstimatorConfig:
    """Algorithm gains, horizon, replication and observation geometry.

    theta_star is the true parameter (length M); obs_vectors stacks the
    per-agent observation vectors h_i as rows (N x M), every row nonzero.
    init, when given, is the common or per-agent initial estimate;
    the default starts every agent at the zero vector.
    """

    a: float
    b: float
    delta: float
    horizon: int
    replicates: int
    seed: int
    theta_star: np.ndarray
    obs_vectors: np.ndarray
    init: np.ndarray | None = None
    snapshots: tuple[int, ...] | None = None

    def __post_init__(self):
        if not self.a > 0 or not self.b > 0:
            raise ParameterError(f"gains must be positive, got a={self.a}, b={self.b}")
        if not 0.5 < self.delta <= 1.0:
            raise ParameterError(
                f"step exponent delta must lie in (0.5, 1], got {self.delta}")
        if self.horizon < 1:
            raise ParameterError(f"horizon must be >= 1, got {self.horizon}")
        if self.replicates < 1:
            raise ParameterError(f"replicates must be >= 1, got {self.replicates}")
        theta = np.atleast_1d(np.asarray(self.theta_star, dtype=np.float64))
        obs = np.atleast_2d(np.asarray(self.obs_vectors, dtype=np.float64))
        if obs.shape[1] != theta.shape[0]:
            raise ParameterError(
                f"obs_vectors are {obs.shape[1]}-dimensional but theta_star "
                f"has dimension {theta.shape[0]}")
        if np.any(np.all(obs == 0.0, axis=1)):
            raise ParameterError("every observation vector h_i must be nonzero")
        theta.flags.writeable = False
        obs.flags.writeable = False
        object.__setattr__(self, "theta_star", theta)
        object.__setattr__(self, "obs_vectors", obs)
        if self.init is not None:
            init = np.asarray(self.init, dtype=np.float64)
            if init.shape == theta.shape:
                init = np.tile(init, (obs.shape[0], 1))
            if init.shape != (obs.shape[0], theta.shape[0]):
                raise ParameterError(
                    f"init must have shape (M,) or (N, M), got {init.shape}")
            init = init.copy()
            init.flags.writeable = False
            object.__setattr__(self, "init", init)
        if self.snapshots is not None:
            snaps = tuple(int(t) for t in self.snapshots)
            if (not snaps or any(t < 1 or t > self.horizon for t in snaps)
                    or any(b <= a for a, b in zip(snaps, snaps[1:]))):
                raise ParameterError(
                    "snapshots must be strictly increasing within [1, horizon]")
            object.__setattr__(self, "snapshots", snaps)

    @property
    def n_agents(self):
        return self.obs_vectors.shape[0]

    @property
    def dim(self):
        return self.theta_star.shape[0]

    def snapshot_schedule(self):
        if self.snapshots is not None:
            return self.snapshots
        return snapshot_times(self.horizon)

    def initial_estimates(self):
        if self.init is not None:
            return np.array(self.init)
        return np.zeros((self.n_agents, self.dim))


def snapshot_times(horizon):
    """Default snapshot schedule: powers of 2 and of 10 up to the horizon,
    plus the horizon itself.  Log-spaced cheap coverage that still hits
    the decade marks convergence checks compare against."""
    if horizon < 1:
        raise ParameterError(f"horizon must be >= 1, got {horizon}")
    ts = set()
    t = 1
    while t <= horizon:
        ts.add(t)
        t *= 2
    t = 1
    while t <= horizon:
        ts.add(t)
        t *= 10
    ts.add(horizon)
    return tuple(sorted(ts))


@dataclass
class NetworkState:
    """All agents' estimates at one time step."""

    x: np.ndarray  # (N, M)
    t: int = 0
    diverged_at: int | None = None


@dataclass(frozen=True)
class TrajectoryRecord:
    """Snapshots of one replicate's run."""

    replicate: int
    times: np.ndarray            # (S,)
    per_agent_sq: np.ndarray     # (S, N) squared error per agent
    network_mse: np.ndarray      # (S,)
    diverged_at: int | None = None
    states: np.ndarray | None = None  # (S, N, M) when recorded

    def __post_init__(self):
        if np.any(np.diff(self.times) <= 0):
            raise ParameterError("snapshot times must be strictly increasing")


@dataclass(frozen=True)
class EnsembleStats:
    """Cross-replicate statistics of the scaled error sqrt(t+1)(x - theta).

    Statistics are computed over non-divergent replicates; divergent ones
    are counted and their first bad step recorded.  Because every
    replicate owns an independent stream, merge order cannot affect any
    field.
    """

    times: np.ndarray                       # (S,)
    n_replicates: int
    diverged_at: np.ndarray                 # (R,) -1 when clean
    scaled_mean: np.ndarray                 # (S, N, M)
    scaled_var: np.ndarray                  # (S, N, M), ddof=1
    network_scaled_second_moment: np.ndarray  # (S,)
    mse_mean: np.ndarray                    # (S,)
    per_replicate_network_mse: np.ndarray   # (R, S)

    @property
    def n_divergent(self):
        return int(np.sum(self.diverged_at >= 0))


@dataclass(frozen=True)
class MetricsTable:
    """Per-snapshot error metrics derived from a trajectory record."""

    times: np.ndarray
    per_agent_mse: np.ndarray        # (S, N)
    network_mse: np.ndarray          # (S,)
    scaled_second_moment: np.ndarray  # (S,): (t+1) * network MSE


def initial_state(cfg):
    return NetworkState(x=cfg.initial_estimates(), t=0, diverged_at=None)


def _kernel_inputs(cfg, g):
    if g.n != cfg.n_agents:
        raise ParameterError(
            f"graph has {g.n} agents but config provides {cfg.n_agents} "
            "observation vectors")
    arc_rx, arc_tx = g.arcs
    h = cfg.obs_vectors
    z_det = h @ cfg.theta_star
    return arc_rx, arc_tx, h, np.ascontiguousarray(z_det), cfg.theta_star


def _draw_noise(rngs, m_o, m_c, n_steps, n, n_arcs, m):
    """Per-replicate uniform blocks mapped through the inverse CDFs.

    Block layout per step: N observation draws, then one draw per arc
    component in canonical arc order.
    """
    n_draws = n + n_arcs * m
    n_reps = len(rngs)
    obs = np.empty((n_reps, n_steps, n))
    comm = np.empty((n_reps, n_steps, n_arcs, m))
    for bi, rng in enumerate(rngs):
        u = rng.random((n_steps, n_draws))
        obs[bi] = m_o.ppf(u[:, :n])
        if n_arcs:
            comm[bi] = m_c.ppf(u[:, n:]).reshape(n_steps, n_arcs, m)
    return obs, comm


def _run_batch(cfg, g, nl_c, nl_o, m_o, m_c, replicate_indices, *,
               backend=None, record_states=False, chunk_steps=None):
    """Advance a batch of replicates to the horizon, recording snapshots.

    Returns (times, deviations (B, S, N, M), diverged_at (B,), states).
    """
    kern = _kernels.get_backend(backend)
    arc_rx, arc_tx, h, z_det, theta = _kernel_inputs(cfg, g)
    n, m = cfg.n_agents, cfg.dim
    n_arcs = arc_rx.shape[0]
    snaps = cfg.snapshot_schedule()
    n_reps = len(replicate_indices)

    n_draws = max(1, n + n_arcs * m)
    max_chunk = chunk_steps or max(
        1, min(_CHUNK_STEPS, _CHUNK_BUDGET // (n_reps * n_draws)))

    x = np.ascontiguousarray(
        np.broadcast_to(cfg.initial_estimates(), (n_reps, n, m)).copy())
    diverged = np.full(n_reps, -1, dtype=np.int64)
    rngs = [np.random.default_rng([cfg.seed, int(r)]) for r in replicate_indices]

    pc = nl_c.kernel_params
    po = nl_o.kernel_params
    b_over_a = cfg.b / cfg.a
    sumsq_limit = MSE_DIVERGENCE_LIMIT * n

    dev = np.empty((n_reps, len(snaps), n, m))
    states = np.empty((n_reps, len(snaps), n, m)) if record_states else None

    t = 0
    for si, target in enumerate(snaps):
        while t < target:
            c = min(max_chunk, target - t)
            alphas = cfg.a / np.power(
                np.arange(t + 1, t + c + 1, dtype=np.float64), cfg.delta)
            noise_obs, noise_comm = _draw_noise(rngs, m_o, m_c, c, n, n_arcs, m)
            kern.run_chunk(x, diverged, t, alphas, noise_obs, noise_comm,
                           arc_rx, arc_tx, h, z_det, theta, b_over_a,
                           pc[0], pc[1], pc[2], pc[3],
                           po[0], po[1], po[2], po[3],
                           sumsq_limit)
            t += c
        dev[:, si] = x - theta
        if record_states:
            states[:, si] = x
    return np.asarray(snaps, dtype=np.int64), dev, diverged, states


def step(state, cfg, g, nl_c, nl_o, m_o, m_c, rng, *, backend=None):
    """One synchronous update of every agent; returns the new state.

    Consumes exactly one uniform block from the stream, so repeated
    stepping reproduces ``run`` draw for draw.  A diverged state is
    returned frozen.
    """
    kern = _kernels.get_backend(backend)
    arc_rx, arc_tx, h, z_det, theta = _kernel_inputs(cfg, g)
    n, m = cfg.n_agents, cfg.dim
    n_arcs = arc_rx.shape[0]
    x = np.ascontiguousarray(state.x, dtype=np.float64).reshape(1, n, m).copy()
    diverged = np.array(
        [-1 if state.diverged_at is None else state.diverged_at], dtype=np.int64)
    alphas = np.array([cfg.a / float(state.t + 1) ** cfg.delta])
    noise_obs, noise_comm = _draw_noise([rng], m_o, m_c, 1, n, n_arcs, m)
    pc = nl_c.kernel_params
    po = nl_o.kernel_params
    kern.run_chunk(x, diverged, state.t, alphas, noise_obs, noise_comm,
                   arc_rx, arc_tx, h, z_det, theta, cfg.b / cfg.a,
                   pc[0], pc[1], pc[2], pc[3],
                   po[0], po[1], po[2], po[3],
                   MSE_DIVERGENCE_LIMIT * n)
    return NetworkState(
        x=x[0], t=state.t + 1,
        diverged_at=None if diverged[0] < 0 else int(diverged[0]))


def run(cfg, g, nl_c, nl_o, m_o, m_c, replicate_index=0, *,
        backend=None, record_states=False, require_connected=True):
    """Run one replicate to the horizon and record snapshots.

    Identical inputs produce identical trajectories, bit for bit.
    """
    if require_connected:
        report = validate_connected(g)
        if not report.ok:
            raise ParameterError(report.detail)
    times, dev, diverged, states = _run_batch(
        cfg, g, nl_c, nl_o, m_o, m_c, [replicate_index],
        backend=backend, record_states=record_states)
    per_agent_sq = np.einsum("snm,snm->sn", dev[0], dev[0])
    return TrajectoryRecord(
        replicate=int(replicate_index),
        times=times,
        per_agent_sq=per_agent_sq,
        network_mse=per_agent_sq.mean(axis=1),
        diverged_at=None if diverged[0] < 0 else int(diverged[0]),
        states=None if states is None else states[0],
    )


def run_ensemble(cfg, g, nl_c, nl_o, m_o, m_c, *, backend=None,
                 require_connected=True):
    """Run all configured replicates and reduce to scaled-error statistics."""
    if cfg.replicates < 2:
        raise ParameterError("an ensemble needs at least 2 replicates")
    if require_connected:
        report = validate_connected(g)
        if not report.ok:
            raise ParameterError(report.detail)
    times, dev, diverged, _ = _run_batch(
        cfg, g, nl_c, nl_o, m_o, m_c, np.arange(cfg.replicates),
        backend=backend)
    ok = diverged < 0
    n_ok = int(ok.sum())
    if n_ok < cfg.replicates:
        warnings.warn(
            f"{cfg.replicates - n_ok} of {cfg.replicates} replicates diverged; "
            "ensemble statistics use the remaining ones", RuntimeWarning,
            stacklevel=2)

    scale = np.sqrt(times + 1.0)[None, :, None, None]
    per_agent_sq = np.einsum("rsnm,rsnm->rsn", dev, dev)
    per_rep_mse = per_agent_sq.mean(axis=2)

    if n_ok >= 2:
        scaled_ok = dev[ok] * scale
        scaled_mean = scaled_ok.mean(axis=0)
        scaled_var = scaled_ok.var(axis=0, ddof=1)
        mse_mean = per_rep_mse[ok].mean(axis=0)
        net_scaled = (times + 1.0)[None, :] * per_rep_mse[ok]
        net_scaled = net_scaled.mean(axis=0)
    else:
        shape = dev.shape[1:]
        scaled_mean = np.full(shape, np.nan)
        scaled_var = np.full(shape, np.nan)
        mse_mean = np.full(len(times), np.nan)
        net_scaled = np.full(len(times), np.nan)

    return EnsembleStats(
        times=times,
        n_replicates=cfg.replicates,
        diverged_at=diverged,
        scaled_mean=scaled_mean,
        scaled_var=scaled_var,
        network_scaled_second_moment=net_scaled,
        mse_mean=mse_mean,
        per_replicate_network_mse=per_rep_mse,
    )


def error_metrics(rec, theta_star=None):
    """Tabulate (t, per-agent MSE, network MSE, scaled second moment).

    Uses the recorded squared errors; when full states were recorded and
    a parameter is supplied, errors are recomputed against it instead.
    """
    if rec.states is not None and theta_star is not None:
        theta = np.atleast_1d(np.asarray(theta_star, dtype=np.float64))
        d = rec.states - theta[None, None, :]
        per_agent = np.einsum("snm,snm->sn", d, d)
    else:
        per_agent = rec.per_agent_sq
    network = per_agent.mean(axis=1)
    return MetricsTable(
        times=rec.times,
        per_agent_mse=per_agent,
        network_mse=network,
        scaled_second_moment=(rec.times + 1.0) * network,
    )
