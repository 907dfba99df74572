"""Analytic asymptotic covariance of the scaled estimation error.

With unit step exponent the scaled error sqrt(t+1)(x - 1 (x) theta) is
asymptotically normal with covariance

    S = a^2 * integral_0^inf exp(Sigma v) S0 exp(Sigma^T v) dv,

the unique solution of the continuous Lyapunov equation
Sigma S + S Sigma^T + a^2 S0 = 0, where

    Sigma = 1/2 I - b phi_c'(0) (L (x) I_M) - a phi_o'(0) H^T H,
    S0    = (b/a)^2 sigma_c^2 Diag({d_i I_M})
            - (b/a) (K_co H + (K_co H)^T) + sigma_o^2 H^T H.

Sigma must be stable (spectral abscissa < 0), which the gain a controls.
For regular graphs with a common scalar observation gain everything
diagonalizes against the Laplacian spectrum, giving the closed-form
per-node variance used by the topology sweep; the matrix pipeline is its
small-scale oracle.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.linalg

from .errors import NumericError, ParameterError, StabilityError
from .graphs import circulant_khop_spectrum, laplacian, ring_khop_graph
from .noise import NoiseModel
from .nonlinearities import effective_variance, phi_prime_zero

__all__ = [
    "AsymptoticModel",
    "SweepRow",
    "SweepResult",
    "build_H",
    "build_sigma",
    "check_stability",
    "build_s0",
    "solve_lyapunov",
    "asymptotic_covariance",
    "per_node_variance_regular",
    "cross_covariance",
    "topology_sweep",
]

LYAPUNOV_RESIDUAL_RTOL = 1e-9

# above this size the Kronecker-vectorized solve (n^2 x n^2 system) stops
# being reasonable in time and memory; switch to Schur-based solution
_KRON_MAX = 64


@dataclass(frozen=True, eq=False)
class AsymptoticModel:
    """Asymptotic covariance and every ingredient used to build it."""

    sigma: np.ndarray            # (NM, NM) dynamics matrix
    s0: np.ndarray               # (NM, NM) driving covariance
    kco: np.ndarray              # (NM, N) noise cross-covariance
    s: np.ndarray                # (NM, NM) asymptotic covariance
    sigma_o_sq: float
    sigma_c_sq: float
    phi_c_prime0: float
    phi_o_prime0: float
    spectral_abscissa: float

    @property
    def trace_s_over_n(self):
        n = self.kco.shape[1]
        return float(np.trace(self.s)) / n


def build_H(obs_vectors):
    """Stack observation vectors into the N x NM block arrangement.

    Row i carries h_i^T in block i, so H^T H is NM x NM block diagonal
    with blocks h_i h_i^T.
    """
    obs = np.atleast_2d(np.asarray(obs_vectors, dtype=np.float64))
    n, m = obs.shape
    if np.any(np.all(obs == 0.0, axis=1)):
        raise ParameterError("every observation vector h_i must be nonzero")
    big = np.zeros((n, n * m))
    for i in range(n):
        big[i, i * m:(i + 1) * m] = obs[i]
    return big


def build_sigma(a, b, phi_c_prime0, phi_o_prime0, lap, obs_matrix):
    """Dynamics matrix of the scaled-error recursion (symmetric)."""
    n = lap.shape[0]
    nm = obs_matrix.shape[1]
    m = nm // n
    if not (phi_c_prime0 > 0 and phi_o_prime0 > 0):
        raise ParameterError("smoothed-map slopes must be positive")
    eye_m = np.eye(m)
    return (0.5 * np.eye(nm)
            - b * phi_c_prime0 * np.kron(lap, eye_m)
            - a * phi_o_prime0 * obs_matrix.T @ obs_matrix)


def check_stability(sigma):
    """Spectral abscissa (max real part of the eigenvalues).

    Negative means stable; nonnegative signals the gain a must grow.
    """
    try:
        eig = np.linalg.eigvals(sigma)
    except np.linalg.LinAlgError as exc:
        raise NumericError(f"eigenvalue computation failed: {exc}") from exc
    return float(eig.real.max())


def build_s0(a, b, sigma_c_sq, sigma_o_sq, degrees, obs_matrix, kco=None):
    """Driving noise covariance of the scaled-error recursion."""
    degrees = np.asarray(degrees, dtype=np.float64)
    n = degrees.shape[0]
    nm = obs_matrix.shape[1]
    m = nm // n
    s0 = ((b / a) ** 2 * sigma_c_sq
          * np.kron(np.diag(degrees), np.eye(m))
          + sigma_o_sq * obs_matrix.T @ obs_matrix)
    if kco is not None:
        cross = (b / a) * np.asarray(kco, dtype=np.float64) @ obs_matrix
        s0 = s0 - cross - cross.T
        min_eig = float(np.linalg.eigvalsh(s0).min())
        if min_eig < -1e-10 * max(1.0, float(np.abs(s0).max())):
            import warnings
            warnings.warn(
                f"driving covariance is not positive semidefinite "
                f"(min eigenvalue {min_eig:.3e}); the supplied noise "
                "cross-covariance may be inconsistent", RuntimeWarning,
                stacklevel=2)
    return s0


def solve_lyapunov(sigma, q, *, method=None):
    """Solve Sigma S + S Sigma^T + Q = 0 for symmetric PSD Q.

    Dense Kronecker-vectorized linear solve up to size 64; Schur-based
    (Bartels-Stewart) solution above, both verified against the residual
    contract ||Sigma S + S Sigma^T + Q||_F <= 1e-9 ||Q||_F.  Refuses
    unstable Sigma, for which the defining integral diverges.
    """
    sigma = np.asarray(sigma, dtype=np.float64)
    q = np.asarray(q, dtype=np.float64)
    if sigma.ndim != 2 or sigma.shape[0] != sigma.shape[1]:
        raise ParameterError(f"Sigma must be square, got shape {sigma.shape}")
    if q.shape != sigma.shape:
        raise ParameterError(
            f"Q shape {q.shape} does not match Sigma shape {sigma.shape}")
    if not np.allclose(q, q.T, rtol=0.0, atol=1e-12 * max(1.0, np.abs(q).max())):
        raise ParameterError("Q must be symmetric")
    abscissa = check_stability(sigma)
    if abscissa >= 0.0:
        raise StabilityError(
            f"Sigma is not stable (spectral abscissa {abscissa:.6g}); "
            "increase the gain a", abscissa=abscissa)

    n = sigma.shape[0]
    if method is None:
        method = "kron" if n <= _KRON_MAX else "schur"
    if method == "kron":
        eye = np.eye(n)
        big = np.kron(eye, sigma) + np.kron(sigma, eye)
        sol = np.linalg.solve(big, -q.flatten(order="F"))
        s = sol.reshape((n, n), order="F")
    elif method == "schur":
        s = scipy.linalg.solve_continuous_lyapunov(sigma, -q)
    else:
        raise ParameterError(f"unknown Lyapunov method {method!r}")

    s = 0.5 * (s + s.T)
    residual = np.linalg.norm(sigma @ s + s @ sigma.T + q, "fro")
    bound = LYAPUNOV_RESIDUAL_RTOL * np.linalg.norm(q, "fro")
    if residual > max(bound, 1e-300):
        raise NumericError(
            f"Lyapunov residual {residual:.3e} exceeds {bound:.3e}; "
            "the system is too ill-conditioned for the accuracy contract")
    return s


def asymptotic_covariance(a, b, nl_c, nl_o, m_c, m_o, g, obs_vectors, kco=None):
    """Full covariance pipeline from models to the asymptotic matrix S."""
    sigma_c_sq = effective_variance(nl_c, m_c)
    sigma_o_sq = effective_variance(nl_o, m_o)
    phi_c0 = phi_prime_zero(nl_c, m_c)
    phi_o0 = phi_prime_zero(nl_o, m_o)
    obs_matrix = build_H(obs_vectors)
    lap = laplacian(g)
    sigma = build_sigma(a, b, phi_c0, phi_o0, lap, obs_matrix)
    abscissa = check_stability(sigma)
    if abscissa >= 0.0:
        raise StabilityError(
            f"dynamics matrix unstable: spectral abscissa {abscissa:.6g} >= 0; "
            "increase the gain a", abscissa=abscissa)
    nm = obs_matrix.shape[1]
    kco_arr = np.zeros((nm, g.n)) if kco is None else np.asarray(kco, dtype=np.float64)
    s0 = build_s0(a, b, sigma_c_sq, sigma_o_sq, g.degrees, obs_matrix,
                  kco=None if kco is None else kco_arr)
    s = solve_lyapunov(sigma, a * a * s0)
    return AsymptoticModel(
        sigma=sigma, s0=s0, kco=kco_arr, s=s,
        sigma_o_sq=float(sigma_o_sq), sigma_c_sq=float(sigma_c_sq),
        phi_c_prime0=float(phi_c0), phi_o_prime0=float(phi_o0),
        spectral_abscissa=abscissa)


def cross_covariance(nl_c, nl_o, joint_pdf, g, m, *, span=50.0):
    """Noise cross-covariance matrix for dependent observation and
    communication noise, by 2-D quadrature of the joint density.

    Entry (k, s) with s = M(i-1) + l sums, over arcs into agent i, the
    expectation of psi_c(w_c) psi_o(w_o) under ``joint_pdf(w_c, w_o, k,
    i, j, l)``.  Independent noises factor to zero, the default of the
    covariance pipeline; this path exists for user-supplied joint laws.
    """
    from scipy.integrate import dblquad

    n = g.n
    kco = np.zeros((n * m, n))
    for i in range(n):
        for l in range(m):
            srow = m * i + l
            for k in range(n):
                total = 0.0
                for j in g.neighbors[i]:
                    val, _ = dblquad(
                        lambda wo, wc: nl_c(wc) * nl_o(wo)
                        * joint_pdf(wc, wo, k, i, j, l),
                        -span, span, -span, span, epsabs=1e-10)
                    total += val
                kco[srow, k] = total
    return kco


def per_node_variance_regular(d, eigenvalues, a, b, h, f_o0, f_c0,
                              sigma_o_sq, sigma_c_sq):
    """Closed-form average per-node asymptotic variance on a regular graph
    of degree d, with sign nonlinearities and a common scalar gain h.

    With q = a^2 h^2 sigma_o^2 + b^2 d sigma_c^2 and Laplacian
    eigenvalues 0 = lambda_1 <= ... <= lambda_N:

        sigma_d^2 = q / (N (4 a h^2 f_o(0) - 1))
                    + (q / N) sum_{i>=2} 1 / (4 b lambda_i f_c(0)
                                              + 4 a h^2 f_o(0) - 1)
    """
    lam = np.asarray(eigenvalues, dtype=np.float64)
    n = lam.shape[0]
    if n < 1 or abs(lam[0]) > 1e-9 or np.any(np.diff(lam) < -1e-12):
        raise ParameterError(
            "eigenvalues must be ascending with lambda_1 = 0")
    base = 4.0 * a * h * h * f_o0 - 1.0
    denoms = 4.0 * b * lam[1:] * f_c0 + base
    if base <= 0.0 or np.any(denoms <= 0.0):
        raise StabilityError(
            "closed-form denominator nonpositive: the dynamics matrix is "
            "unstable for these gains; increase a",
            abscissa=-0.5 * min(base, denoms.min() if denoms.size else base))
    q = a * a * h * h * sigma_o_sq + b * b * d * sigma_c_sq
    return q / (n * base) + (q / n) * float(np.sum(1.0 / denoms))


@dataclass(frozen=True)
class SweepRow:
    """One degree's entry in a topology sweep."""

    d: int
    sigma_d_sq: float
    stable: bool


@dataclass(frozen=True)
class SweepResult:
    """Per-node variance across the k-hop ring family, plus the argmin."""

    n: int
    beta: float
    rows: tuple[SweepRow, ...]
    argmin_d: int | None

    def as_arrays(self):
        d = np.array([r.d for r in self.rows])
        s = np.array([r.sigma_d_sq for r in self.rows])
        stable = np.array([r.stable for r in self.rows])
        return d, s, stable


def topology_sweep(n, beta, a, b, h):
    """Per-node asymptotic variance across ring densities.

    Evaluates the closed form on every k-hop ring (degrees 2, 4, ...,
    n-1; n must be odd so the family ends at the complete graph), with
    polynomial-tail noise of exponent beta on both channels and sign
    nonlinearities, for which both effective variances are exactly 1 and
    both density values at zero are (beta-1)/2.  Circulant spectra keep
    each degree O(n).
    """
    n = int(n)
    if n < 3 or n % 2 == 0:
        raise ParameterError(f"sweep needs an odd agent count >= 3, got {n}")
    if not beta > 2.0:
        raise ParameterError(f"tail exponent must exceed 2, got {beta}")
    if not (a > 0 and b > 0):
        raise ParameterError(f"gains must be positive, got a={a}, b={b}")
    if h == 0:
        raise ParameterError("observation gain h must be nonzero")
    f0 = (beta - 1.0) / 2.0
    rows = []
    best = None
    for k in range(1, (n - 1) // 2 + 1):
        d = 2 * k
        lam = circulant_khop_spectrum(n, k)
        try:
            var = per_node_variance_regular(
                d, lam, a, b, h, f0, f0, 1.0, 1.0)
        except StabilityError:
            rows.append(SweepRow(d=d, sigma_d_sq=float("nan"), stable=False))
            continue
        rows.append(SweepRow(d=d, sigma_d_sq=var, stable=True))
        if best is None or var < best[1]:
            best = (d, var)
    return SweepResult(
        n=n, beta=float(beta), rows=tuple(rows),
        argmin_d=None if best is None else best[0])
