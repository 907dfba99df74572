"""Command-line front end.

Subcommands: validate, simulate, ensemble, asymptotic, sweep.  Every
command reads one config file, writes CSV artifacts plus a plain-text
summary into the output directory, and is byte-reproducible from
(config, seed).  Numbers are written with 17 significant digits so
doubles round-trip exactly.

Exit codes: 0 success, 2 validation error, 3 instability, 4 numeric
failure.
"""

from __future__ import annotations

import argparse
import dataclasses
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .asymptotics import asymptotic_covariance, topology_sweep
from .config import parse_config
from .errors import (AssumptionError, ConfigError, NumericError,
                     ParameterError, StabilityError)
from .estimator import error_metrics, run, run_ensemble
from .graphs import validate_connected
from .nonlinearities import validate_assumption2

EXIT_OK = 0
EXIT_VALIDATION = 2
EXIT_INSTABILITY = 3
EXIT_NUMERIC = 4


def _fmt(x):
    return f"{float(x):.17g}"


def _write(path, text):
    Path(path).write_text(text)


def _say(quiet, *parts):
    if not quiet:
        print(*parts)


def _load(args):
    cfg = parse_config(args.config)
    if args.seed is not None:
        cfg = dataclasses.replace(cfg, seed=args.seed)
    if args.out is not None:
        cfg = dataclasses.replace(cfg, out_dir=Path(args.out))
    cfg.out_dir.mkdir(parents=True, exist_ok=True)
    return cfg


def _require_kind(cfg, kind):
    if cfg.kind != kind:
        raise ConfigError([f"config declares kind = {cfg.kind} but the "
                           f"'{kind}' command was invoked"])


def _models(cfg, graph):
    return (cfg.estimator_config(graph), cfg.nl_consensus, cfg.nl_observation,
            cfg.noise_obs, cfg.noise_comm)


def _trajectory_rows(rec, include_agents=True):
    """CSV rows for one replicate: per-agent and network-aggregate metrics."""
    rows = []
    metrics = error_metrics(rec)
    for si, t in enumerate(metrics.times):
        if include_agents:
            for agent in range(metrics.per_agent_mse.shape[1]):
                mse = metrics.per_agent_mse[si, agent]
                rows.append((rec.replicate, int(t), agent + 1, mse,
                             (t + 1.0) * mse))
        rows.append((rec.replicate, int(t), -1, metrics.network_mse[si],
                     metrics.scaled_second_moment[si]))
    return rows


def _write_trajectory_csv(path, rows):
    lines = ["replicate,t,agent,mse,scaled_second_moment"]
    for rep, t, agent, mse, scaled in rows:
        lines.append(f"{rep},{t},{agent},{_fmt(mse)},{_fmt(scaled)}")
    _write(path, "\n".join(lines) + "\n")


def cmd_validate(cfg, quiet=False):
    """Print the assumption-compliance matrix for a parsed config."""
    lines = []

    def row(name, ok, detail=""):
        status = "PASS" if ok else "FAIL"
        suffix = f"  ({detail})" if detail else ""
        lines.append(f"{name}: {status}{suffix}")

    graph = cfg.build_graph()
    report = validate_connected(graph)
    row("network.simple_undirected", True, "by construction")
    row("network.connected", report.ok, report.detail)

    pos = np.linspace(1e-3, 10.0, 257)
    grid = np.concatenate([-pos[::-1], [0.0], pos])
    for label, nl in (("consensus", cfg.nl_consensus),
                      ("observation", cfg.nl_observation)):
        rep = validate_assumption2(nl, grid)
        for name, ok in rep.rows():
            row(f"nonlinearity.{label}.{nl.kind}.{name.replace(' ', '_')}", ok)
        if rep.c1 is not None:
            lines.append(f"nonlinearity.{label}.{nl.kind}.c1: {_fmt(rep.c1)}")

    w = np.linspace(0.0, 25.0, 401)
    for label, m in (("observation", cfg.noise_obs),
                     ("communication", cfg.noise_comm)):
        if m.family == "zero":
            row(f"noise.{label}.zero.degenerate", True,
                "point mass at 0; density checks not applicable")
            continue
        sym = bool(np.max(np.abs(m.pdf(w) - m.pdf(-w))) == 0.0)
        row(f"noise.{label}.{m.family}.symmetric_pdf", sym)
        row(f"noise.{label}.{m.family}.positive_near_zero", m.pdf(0.0) > 0.0)
        row(f"noise.{label}.{m.family}.finite_first_moment",
            np.isfinite(m.mean_abs()), f"E|w| = {_fmt(m.mean_abs())}")
        if not np.isfinite(m.second_moment()):
            lines.append(f"noise.{label}.{m.family}.variance: infinite "
                         "(impulsive regime)")

    text = "\n".join(lines)
    _say(quiet, text)
    _write(cfg.out_dir / "validation.txt", text + "\n")
    return EXIT_OK


def cmd_simulate(cfg, quiet=False):
    """Run one replicate and write its trajectory CSV."""
    _require_kind(cfg, "simulate")
    graph = cfg.build_graph()
    est, nl_c, nl_o, m_o, m_c = _models(cfg, graph)
    rec = run(est, graph, nl_c, nl_o, m_o, m_c, replicate_index=0)
    _write_trajectory_csv(cfg.out_dir / "trajectory.csv", _trajectory_rows(rec))
    final = rec.network_mse[-1]
    summary = [
        f"replicate = {rec.replicate}",
        f"horizon = {est.horizon}",
        f"final_network_mse = {_fmt(final)}",
        f"diverged_at = {rec.diverged_at if rec.diverged_at is not None else -1}",
    ]
    _write(cfg.out_dir / "summary.txt", "\n".join(summary) + "\n")
    _say(quiet, f"final network MSE = {_fmt(final)}")
    return EXIT_OK


def _analytic_reference(cfg, graph):
    """Tr(S)/N when the asymptotic model is computable, else None."""
    try:
        model = asymptotic_covariance(
            cfg.a, cfg.b, cfg.nl_consensus, cfg.nl_observation,
            cfg.noise_comm, cfg.noise_obs, graph,
            np.tile(cfg.h, (graph.n, 1)))
    except (StabilityError, NumericError, AssumptionError, ParameterError):
        return None
    return model.trace_s_over_n


def cmd_ensemble(cfg, quiet=False):
    """Run the replicate ensemble; write per-replicate trajectories and
    the scaled-second-moment table with the analytic reference when
    available."""
    _require_kind(cfg, "ensemble")
    graph = cfg.build_graph()
    est, nl_c, nl_o, m_o, m_c = _models(cfg, graph)

    import warnings
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", RuntimeWarning)
        stats = run_ensemble(est, graph, nl_c, nl_o, m_o, m_c)

    rows = []
    for rep in range(est.replicates):
        for si, t in enumerate(stats.times):
            mse = stats.per_replicate_network_mse[rep, si]
            rows.append((rep, int(t), -1, mse, (t + 1.0) * mse))
    _write_trajectory_csv(cfg.out_dir / "trajectory.csv", rows)

    reference = _analytic_reference(cfg, graph)
    header = "t,n_effective,mse_mean,scaled_second_moment"
    if reference is not None:
        header += ",trace_s_over_n"
    lines = [header]
    n_eff = stats.n_replicates - stats.n_divergent
    for si, t in enumerate(stats.times):
        line = (f"{int(t)},{n_eff},{_fmt(stats.mse_mean[si])},"
                f"{_fmt(stats.network_scaled_second_moment[si])}")
        if reference is not None:
            line += f",{_fmt(reference)}"
        lines.append(line)
    _write(cfg.out_dir / "ensemble.csv", "\n".join(lines) + "\n")

    final = stats.network_scaled_second_moment[-1]
    summary = [
        f"replicates = {stats.n_replicates}",
        f"divergent = {stats.n_divergent}",
        f"final_scaled_second_moment = {_fmt(final)}",
    ]
    if reference is not None:
        summary.append(f"trace_s_over_n = {_fmt(reference)}")
        summary.append(f"ratio_empirical_to_analytic = {_fmt(final / reference)}")
    _write(cfg.out_dir / "summary.txt", "\n".join(summary) + "\n")
    _say(quiet, f"scaled second moment = {_fmt(final)}"
         + (f", analytic = {_fmt(reference)}" if reference is not None else "")
         + (f", divergent replicates = {stats.n_divergent}"
            if stats.n_divergent else ""))
    return EXIT_OK


def _write_matrix_csv(path, mat):
    lines = [",".join(_fmt(v) for v in row) for row in np.atleast_2d(mat)]
    _write(path, "\n".join(lines) + "\n")


def cmd_asymptotic(cfg, quiet=False, dump_matrices=False):
    """Compute the asymptotic covariance and write the scalar report."""
    _require_kind(cfg, "asymptotic")
    graph = cfg.build_graph()
    model = asymptotic_covariance(
        cfg.a, cfg.b, cfg.nl_consensus, cfg.nl_observation,
        cfg.noise_comm, cfg.noise_obs, graph, np.tile(cfg.h, (graph.n, 1)))
    report = [
        f"n = {graph.n}",
        f"m = {cfg.h.shape[0]}",
        f"trace_S_over_N = {_fmt(model.trace_s_over_n)}",
        f"spectral_abscissa = {_fmt(model.spectral_abscissa)}",
        f"sigma_o_sq = {_fmt(model.sigma_o_sq)}",
        f"sigma_c_sq = {_fmt(model.sigma_c_sq)}",
        f"phi_c_prime0 = {_fmt(model.phi_c_prime0)}",
        f"phi_o_prime0 = {_fmt(model.phi_o_prime0)}",
    ]
    _write(cfg.out_dir / "asymptotic.txt", "\n".join(report) + "\n")
    if dump_matrices:
        _write_matrix_csv(cfg.out_dir / "sigma.csv", model.sigma)
        _write_matrix_csv(cfg.out_dir / "s0.csv", model.s0)
        _write_matrix_csv(cfg.out_dir / "s.csv", model.s)
    _say(quiet, f"Tr(S)/N = {_fmt(model.trace_s_over_n)}, "
                f"spectral abscissa = {_fmt(model.spectral_abscissa)}")
    return EXIT_OK


def cmd_sweep(cfg, quiet=False):
    """Evaluate the per-node variance across the k-hop ring family."""
    _require_kind(cfg, "sweep")
    result = topology_sweep(cfg.graph_n, cfg.noise_obs.beta, cfg.a, cfg.b,
                            float(cfg.h[0]))
    lines = ["d,sigma_d_sq,stable"]
    for row in result.rows:
        lines.append(f"{row.d},{_fmt(row.sigma_d_sq)},{int(row.stable)}")
    _write(cfg.out_dir / "sweep.csv", "\n".join(lines) + "\n")

    n_unstable = sum(1 for row in result.rows if not row.stable)
    if result.argmin_d is None:
        _write(cfg.out_dir / "summary.txt",
               "all degrees unstable; no argmin\n")
        print("error: every degree in the sweep is unstable; increase "
              "the gain a", file=sys.stderr)
        return EXIT_INSTABILITY
    best = next(r for r in result.rows if r.d == result.argmin_d)
    summary = [
        f"argmin d = {result.argmin_d}",
        f"sigma_d_sq_min = {_fmt(best.sigma_d_sq)}",
        f"rows = {len(result.rows)}",
        f"unstable_rows = {n_unstable}",
    ]
    _write(cfg.out_dir / "summary.txt", "\n".join(summary) + "\n")
    _say(quiet, f"argmin d = {result.argmin_d}")
    return EXIT_OK


def build_parser():
    parser = argparse.ArgumentParser(
        prog="cinest",
        description="Nonlinear consensus+innovations estimation workbench")
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)
    for name, help_text in (
            ("validate", "check assumption compliance of a config"),
            ("simulate", "run one replicate and write its trajectory"),
            ("ensemble", "run the replicate ensemble and its statistics"),
            ("asymptotic", "compute the analytic asymptotic covariance"),
            ("sweep", "per-node variance across the k-hop ring family")):
        p = sub.add_parser(name, help=help_text)
        p.add_argument("--config", required=True, help="experiment file")
        p.add_argument("--out", default=None, help="output directory override")
        p.add_argument("--seed", type=int, default=None, help="seed override")
        p.add_argument("--quiet", action="store_true", help="suppress stdout")
        if name == "asymptotic":
            p.add_argument("--dump-matrices", action="store_true",
                           help="also write sigma.csv, s0.csv, s.csv")
    return parser


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        cfg = _load(args)
        if args.command == "validate":
            return cmd_validate(cfg, quiet=args.quiet)
        if args.command == "simulate":
            return cmd_simulate(cfg, quiet=args.quiet)
        if args.command == "ensemble":
            return cmd_ensemble(cfg, quiet=args.quiet)
        if args.command == "asymptotic":
            return cmd_asymptotic(cfg, quiet=args.quiet,
                                  dump_matrices=args.dump_matrices)
        return cmd_sweep(cfg, quiet=args.quiet)
    except ConfigError as exc:
        for err in exc.errors:
            print(f"config error: {err}", file=sys.stderr)
        return EXIT_VALIDATION
    except (ParameterError, AssumptionError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    except StabilityError as exc:
        print(f"instability: {exc}", file=sys.stderr)
        return EXIT_INSTABILITY
    except NumericError as exc:
        print(f"numeric failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC


def console_main():
    sys.exit(main())
