"""Pure numpy simulation kernel, vectorized across replicates.

Reference semantics for one synchronous update of every agent:

    x_i <- x_i - alpha_t ( (b/a) sum_{j in nbrs(i)} psi_c(x_i - x_j + xi_ij)
                           - h_i psi_o(z_i - h_i . x_i) )

with z_i = h_i . theta + n_i.  The consensus sum accumulates in canonical
arc order (receiver-major, senders ascending) and every elementwise
expression mirrors the compiled kernel operation for operation, so both
backends produce bit-identical trajectories.

Replicates that diverge (non-finite state or network MSE beyond the
limit) are frozen at the offending state and skipped from then on.
"""

from __future__ import annotations

import numpy as np

from ..nonlinearities import vector_apply


def run_chunk(x, diverged_at, t0, alphas, noise_obs, noise_comm,
              arc_rx, arc_tx, h, z_det, theta, b_over_a,
              pc_code, pc_tau, pc_thr, pc_vals,
              po_code, po_tau, po_thr, po_vals,
              sumsq_limit):
    """Advance a batch of replicates by ``len(alphas)`` steps, in place.

    Parameters
    ----------
    x : (B, N, M) float64
        Current states; updated in place.
    diverged_at : (B,) int64
        -1 while a replicate is active; set to the global step index at
        which divergence was detected, after which the replicate freezes.
    t0 : int
        Global index of the first step in this chunk.
    alphas : (C,) float64
        Step sizes for steps t0 .. t0+C-1.
    noise_obs : (B, C, N) float64
        Observation noise, one scalar per agent per step.
    noise_comm : (B, C, A, M) float64
        Communication noise, one vector per directed arc per step, in
        canonical arc order.
    arc_rx, arc_tx : (A,) int64
        Receiver/sender of each arc.
    h : (N, M) float64
        Observation vectors; z_det holds h_i . theta.
    sumsq_limit : float
        N times the network-MSE divergence threshold.
    """
    n_steps = alphas.shape[0]
    n_arcs = arc_rx.shape[0]
    m = x.shape[2]
    active = diverged_at < 0
    if not active.any():
        return
    with np.errstate(over="ignore", invalid="ignore"):
        for c in range(n_steps):
            act = np.flatnonzero(active)
            if act.size == 0:
                break
            all_active = act.size == x.shape[0]
            xa = x if all_active else x[act]
            xi = noise_comm[:, c] if all_active else noise_comm[act, c]
            nn = noise_obs[:, c] if all_active else noise_obs[act, c]

            # consensus term, accumulated in canonical arc order
            acc = np.zeros_like(xa)
            if n_arcs:
                terms = vector_apply(
                    pc_code, pc_tau, pc_thr, pc_vals,
                    (xa[:, arc_rx, :] - xa[:, arc_tx, :]) + xi)
                for a in range(n_arcs):
                    acc[:, arc_rx[a]] += terms[:, a]

            # innovation term
            dot = h[None, :, 0] * xa[:, :, 0]
            for l in range(1, m):
                dot = dot + h[None, :, l] * xa[:, :, l]
            resid = (z_det[None, :] + nn) - dot
            po = vector_apply(po_code, po_tau, po_thr, po_vals, resid)

            xn = xa - alphas[c] * (b_over_a * acc - po[:, :, None] * h[None, :, :])

            # divergence detection on the post-update state
            dev = xn - theta[None, None, :]
            sumsq = (dev * dev).sum(axis=(1, 2))
            bad = ~np.isfinite(xn).all(axis=(1, 2)) | (sumsq > sumsq_limit)

            if all_active:
                x[:] = xn
            else:
                x[act] = xn
            if bad.any():
                hit = act[bad]
                diverged_at[hit] = t0 + c
                active[hit] = False
