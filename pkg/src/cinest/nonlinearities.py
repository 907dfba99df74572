"""Bounded odd nonlinearities and their noise-derived quantities.

Provides the map library applied inside the estimator update (sign,
clipping, symmetric quantizer, plus the unbounded identity kept only as
the linear baseline), grid-based compliance checks of the standing
assumptions, and the two derived quantities the asymptotic covariance
needs:

* effective variance, the second moment of the noise after passing
  through the map: integral of |psi(w)|^2 p(w) dw, finite for bounded
  psi even when the raw noise variance is infinite;
* the slope at zero of the noise-smoothed map
  phi(u) = integral of psi(u + w) p(w) dw, which sets the effective gain
  of the mean dynamics.

Evaluation is vectorized; each kind also exposes primitive parameters so
the compiled simulation kernel can evaluate the identical function.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.integrate import quad

from .errors import AssumptionError, NumericError, ParameterError

__all__ = [
    "Nonlinearity",
    "Sign",
    "Clip",
    "Quantizer",
    "Identity",
    "ComplianceReport",
    "vector_apply",
    "effective_variance",
    "phi",
    "phi_prime_zero",
    "validate_assumption2",
]

# kernel dispatch codes, mirrored in _kernels/_core.pyx
KIND_SIGN = 0
KIND_CLIP = 1
KIND_QUANTIZER = 2
KIND_IDENTITY = 3

_EMPTY = np.zeros(0)


def vector_apply(code, tau, thresholds, values, w):
    """Evaluate a nonlinearity by primitive parameters, elementwise.

    Single source of truth for what each kind computes; the compiled
    kernel replicates these semantics exactly (including NaN
    propagation), so trajectories are identical across backends.
    """
    w = np.asarray(w, dtype=np.float64)
    if code == KIND_SIGN:
        return np.sign(w)
    if code == KIND_CLIP:
        return np.clip(w, -tau, tau)
    if code == KIND_QUANTIZER:
        idx = np.searchsorted(thresholds, np.abs(w), side="left")
        idx = np.minimum(idx, len(values) - 1)
        return np.sign(w) * values[idx]
    return w


class Nonlinearity:
    """Base class: an odd scalar map applied componentwise to vectors.

    Attributes describe the analytic structure the derived-quantity
    integrals exploit:

    bound
        c1 with |psi| <= c1 everywhere, or None if unbounded.
    saturation
        W with |psi(w)| = bound for |w| >= W (0 for sign), or None.
    increasing_radius
        c2 with psi strictly increasing on (-c2, c2), or None.
    discontinuous_at_zero
        whether psi jumps at the origin.
    """

    kind = "abstract"
    bound = None
    saturation = None
    increasing_radius = None
    discontinuous_at_zero = False

    # primitive parameters for the kernels
    _code = None
    _tau = 0.0
    _thresholds = _EMPTY
    _values = _EMPTY

    @property
    def is_compliant(self):
        """True when the map satisfies the boundedness assumption."""
        return self.bound is not None

    @property
    def kernel_params(self):
        return (self._code, self._tau, self._thresholds, self._values)

    def __call__(self, w):
        out = vector_apply(self._code, self._tau, self._thresholds,
                           self._values, w)
        return float(out) if out.ndim == 0 else out

    def __repr__(self):
        return f"{type(self).__name__}()"


class Sign(Nonlinearity):
    """sign(w): -1, 0, +1.  Bounded by 1, saturated away from 0."""

    kind = "sign"
    bound = 1.0
    saturation = 0.0
    discontinuous_at_zero = True
    _code = KIND_SIGN


@dataclass(frozen=True, repr=False)
class Clip(Nonlinearity):
    """Clamp to [-tau, tau]; identity inside the band."""

    tau: float

    kind = "clip"
    _code = KIND_CLIP

    def __post_init__(self):
        if not self.tau > 0:
            raise ParameterError(f"clip threshold must be positive, got {self.tau}")

    @property
    def bound(self):
        return self.tau

    @property
    def saturation(self):
        return self.tau

    @property
    def increasing_radius(self):
        return self.tau

    @property
    def _tau(self):
        return self.tau

    def __repr__(self):
        return f"Clip(tau={self.tau})"


@dataclass(frozen=True, repr=False, eq=False)
class Quantizer(Nonlinearity):
    """Symmetric quantizer: ascending positive thresholds and outputs.

    For w > 0 the output is values[j] where j indexes the first threshold
    >= w, saturating at the last value; negative inputs mirror by
    oddness and psi(0) = 0.  The jump at the origin satisfies the
    discontinuous-at-zero alternative of the assumption set.
    """

    thresholds: np.ndarray
    values: np.ndarray

    kind = "quantizer"
    _code = KIND_QUANTIZER
    discontinuous_at_zero = True

    def __post_init__(self):
        thr = np.atleast_1d(np.asarray(self.thresholds, dtype=np.float64))
        val = np.atleast_1d(np.asarray(self.values, dtype=np.float64))
        if thr.size == 0 or thr.size != val.size:
            raise ParameterError(
                f"quantizer needs matching nonempty threshold/value lists, "
                f"got {thr.size} and {val.size}")
        if not (np.all(np.diff(thr) > 0) and thr[0] > 0):
            raise ParameterError("quantizer thresholds must be ascending and positive")
        if not (np.all(np.diff(val) > 0) and val[0] > 0):
            raise ParameterError("quantizer values must be ascending and positive")
        thr.flags.writeable = False
        val.flags.writeable = False
        object.__setattr__(self, "thresholds", thr)
        object.__setattr__(self, "values", val)

    @property
    def bound(self):
        return float(self.values[-1])

    @property
    def saturation(self):
        return float(self.thresholds[-1])

    @property
    def _thresholds(self):
        return self.thresholds

    @property
    def _values(self):
        return self.values

    def __repr__(self):
        return (f"Quantizer(thresholds={self.thresholds.tolist()}, "
                f"values={self.values.tolist()})")


class Identity(Nonlinearity):
    """The linear baseline.  Unbounded, hence non-compliant: usable only
    to demonstrate how the linear scheme degrades under impulsive noise."""

    kind = "identity"
    increasing_radius = np.inf
    _code = KIND_IDENTITY


def _interior_kinks(nl, lo, hi):
    """Breakpoints of psi inside (lo, hi), for the quadrature routines."""
    pts = []
    if nl.kind == "clip":
        pts = [-nl.tau, nl.tau]
    elif nl.kind == "quantizer":
        pts = [*(-nl.thresholds[::-1]), 0.0, *nl.thresholds]
    return [p for p in pts if lo < p < hi]


_QUAD_OPTS = dict(epsabs=1e-13, epsrel=1e-12, limit=200)


def effective_variance(nl, noise, *, use_symmetry=True):
    """Second moment of psi(w) under the noise law.

    Bounded maps integrate psi^2 p over the non-saturated band by
    adaptive quadrature and add the exact tail mass bound^2 (1 - F(W)).
    The unbounded identity falls back to the raw noise second moment and
    refuses infinite-variance noise.
    """
    if nl.bound is None:
        second = noise.second_moment()
        if not np.isfinite(second):
            raise NumericError(
                "divergent effective variance: identity nonlinearity with "
                "infinite-variance noise")
        return second
    w_sat = nl.saturation
    tail_hi = nl.bound ** 2 * (1.0 - noise.cdf(w_sat))
    if use_symmetry:
        core = 0.0
        if w_sat > 0.0:
            core, _ = quad(lambda w: nl(w) ** 2 * noise.pdf(w), 0.0, w_sat,
                           points=_interior_kinks(nl, 0.0, w_sat), **_QUAD_OPTS)
        return 2.0 * (core + tail_hi)
    core = 0.0
    if w_sat > 0.0:
        core, _ = quad(lambda w: nl(w) ** 2 * noise.pdf(w), -w_sat, w_sat,
                       points=_interior_kinks(nl, -w_sat, w_sat), **_QUAD_OPTS)
    tail_lo = nl.bound ** 2 * noise.cdf(-w_sat)
    return core + tail_lo + tail_hi


def phi(nl, noise, u):
    """Noise-smoothed map: phi(u) = integral of psi(u + w) p(w) dw.

    Odd and monotone in u with phi(0) = 0.  For sign the smoothing
    collapses to 1 - 2 F(-u); bounded maps split into a finite integral
    over the non-saturated band plus exact tail terms.
    """
    u_arr = np.asarray(u, dtype=np.float64)
    out = np.empty(u_arr.shape)
    flat = out.reshape(-1)
    for idx, ui in enumerate(u_arr.reshape(-1)):
        flat[idx] = _phi_scalar(nl, noise, float(ui))
    return float(out) if out.ndim == 0 else out


def _phi_scalar(nl, noise, u):
    if nl.kind == "identity":
        return u  # zero-mean noise
    if nl.kind == "sign":
        return 1.0 - 2.0 * noise.cdf(-u)
    w_sat = nl.saturation
    core, _ = quad(lambda v: nl(v) * noise.pdf(v - u), -w_sat, w_sat,
                   points=_interior_kinks(nl, -w_sat, w_sat), **_QUAD_OPTS)
    tails = nl.bound * (1.0 - noise.cdf(w_sat - u)) \
        - nl.bound * noise.cdf(-w_sat - u)
    return core + tails


def _finite_difference_slope(nl, noise, step):
    """Richardson-extrapolated central difference of phi at the origin.

    Densities with a kink at 0 (the polynomial-tail family) make the
    central-difference error first order in the step, so the
    extrapolation eliminates the O(h) term; for smooth densities the
    residual is O(h^2) either way.
    """
    def central(h):
        return (_phi_scalar(nl, noise, h)
                - _phi_scalar(nl, noise, -h)) / (2.0 * h)

    return 2.0 * central(step / 2.0) - central(step)


def phi_prime_zero(nl, noise, *, step=1e-4):
    """Slope of the smoothed map at the origin.

    Analytic shortcuts where available (2 p(0) for sign, 1 for identity),
    otherwise a Richardson-extrapolated central difference of phi.
    Raises if the result is not strictly positive, which signals a
    noncompliant map/noise pairing.
    """
    if nl.kind == "sign":
        slope = 2.0 * noise.pdf(0.0)
    elif nl.kind == "identity":
        slope = 1.0
    else:
        slope = _finite_difference_slope(nl, noise, step)
    if not (slope > 0.0 and np.isfinite(slope)):
        raise AssumptionError(
            f"smoothed-map slope at zero must be positive and finite, got "
            f"{slope}; the nonlinearity/noise pairing violates the standing "
            "assumptions")
    return float(slope)


@dataclass(frozen=True)
class ComplianceReport:
    """Grid-based assumption check results for one nonlinearity."""

    kind: str
    odd: bool
    positive_on_positives: bool
    monotone: bool
    bounded: bool
    zero_behavior: bool
    c1: float | None
    c2: float | None
    details: tuple[str, ...] = field(default_factory=tuple)

    @property
    def compliant(self):
        return (self.odd and self.positive_on_positives and self.monotone
                and self.bounded and self.zero_behavior)

    def rows(self):
        """(name, passed) pairs, in assumption order."""
        return (
            ("odd", self.odd),
            ("positive on positives", self.positive_on_positives),
            ("monotone nondecreasing", self.monotone),
            ("bounded", self.bounded),
            ("discontinuous at zero or strictly increasing near zero",
             self.zero_behavior),
        )


def validate_assumption2(nl, grid):
    """Check the nonlinearity assumptions on a symmetric grid of points.

    The grid must be symmetric about 0 so oddness is testable pointwise.
    Boundedness uses the map's declared structure (a finite grid cannot
    certify a bound): the identity map reports as unbounded and fails.
    """
    grid = np.sort(np.asarray(grid, dtype=np.float64))
    if not np.array_equal(grid, -grid[::-1]):
        raise ParameterError("grid must be symmetric about 0")
    vals = nl(grid)
    details = []

    odd = bool(np.array_equal(vals, -nl(-grid)))
    pos_mask = grid > 0
    positive = bool(np.all(vals[pos_mask] > 0)) if pos_mask.any() else True
    monotone = bool(np.all(np.diff(vals) >= 0))

    bounded = nl.bound is not None
    c1 = None
    if bounded:
        c1 = float(nl.bound)
        if np.max(np.abs(vals)) > c1 + 1e-15:
            bounded = False
            details.append("grid value exceeds the declared bound")
    else:
        details.append("unbounded: |psi(w)| grows without limit")

    c2 = nl.increasing_radius
    if nl.discontinuous_at_zero:
        zero_ok = True
        details.append("discontinuous at zero")
    elif c2 is not None and c2 > 0:
        inner = grid[np.abs(grid) < c2]
        zero_ok = inner.size < 2 or bool(np.all(np.diff(nl(inner)) > 0))
        details.append(f"strictly increasing on (-{c2}, {c2})")
    else:
        zero_ok = False
        details.append("neither discontinuous at zero nor strictly increasing "
                       "near zero")

    return ComplianceReport(
        kind=nl.kind, odd=odd, positive_on_positives=positive,
        monotone=monotone, bounded=bounded, zero_behavior=zero_ok,
        c1=c1, c2=None if c2 in (None, np.inf) else float(c2),
        details=tuple(details))
