"""Independent numerical verification of the analytic ingredients.

Quadrature evaluations of the uniform-phase log identity and the
exponential-log constant, plus Monte Carlo checks of the slack-free
conditional log bounds used by the converse analysis.  Everything here is
decoupled from the rate-evaluation path so it can serve as an oracle for it.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from numpy.random import Generator, Philox

_CHUNK = 1 << 20
_START_PANELS = 64

# Key-space offset separating bound-check batches from mc-engine blocks.
_BATCH_KEY_OFFSET = 1 << 32


class QuadratureError(RuntimeError):
    """Dyadic refinement exhausted its panel budget without converging."""


@dataclass(frozen=True)
class QuadratureConfig:
    n_points: int = 1 << 24      # panel budget for dyadic refinement
    tolerance: float = 1e-6      # target absolute error

    def __post_init__(self):
        if self.n_points < 16:
            raise ValueError(f"n_points must be at least 16, got {self.n_points}")
        if self.tolerance <= 0.0:
            raise ValueError(f"tolerance must be positive, got {self.tolerance}")


_DEFAULT_QUAD = QuadratureConfig()


def _midpoint_dyadic(fn, config):
    """Midpoint rule on (0, 1), doubling panels until two successive levels
    agree within half the tolerance.  Midpoints never touch the interval
    endpoints, so integrable endpoint/interior log singularities are safe.
    """
    n = min(_START_PANELS, config.n_points)
    prev = None
    while n <= config.n_points:
        total = 0.0
        for lo in range(0, n, _CHUNK):
            hi = min(lo + _CHUNK, n)
            t = (np.arange(lo, hi, dtype=float) + 0.5) / n
            total += float(np.sum(fn(t)))
        val = total / n
        if prev is not None and abs(val - prev) <= 0.5 * config.tolerance:
            return val
        prev = val
        n <<= 1
    raise QuadratureError(
        f"midpoint refinement did not reach tolerance {config.tolerance} "
        f"within {config.n_points} panels"
    )


def rotation_mean_log_closed_form(a_mag, b_mag):
    """Mean over a uniform phase of log2 |b + a e^{j theta}|^2, closed form.

    The average equals log2 max(a^2, b^2).
    """
    a, b = float(a_mag), float(b_mag)
    if a < 0.0 or b < 0.0:
        raise ValueError("magnitudes must be nonnegative")
    if a == 0.0 and b == 0.0:
        raise ValueError("log of zero: a and b cannot both vanish")
    return 2.0 * math.log2(max(a, b))


def rotation_mean_log_quadrature(a_mag, b_mag, config=None):
    """Same mean evaluated by direct quadrature of the phase integral.

    The integrand has an integrable log singularity when a == b; midpoint
    panels (even counts) never hit it exactly.
    """
    a, b = float(a_mag), float(b_mag)
    if a < 0.0 or b < 0.0:
        raise ValueError("magnitudes must be nonnegative")
    if a == 0.0 and b == 0.0:
        raise ValueError("log of zero: a and b cannot both vanish")
    config = config or _DEFAULT_QUAD
    c = a * a + b * b
    d = 2.0 * a * b

    def fn(t):
        arg = c + d * np.cos(2.0 * math.pi * t)
        return np.log2(np.maximum(arg, 1e-300))

    return _midpoint_dyadic(fn, config)


def exp_log_mean(config=None):
    """E[log2 X] for a unit-mean exponential X, by quadrature.

    Evaluates the integral of exp(-x) log2(x) over (0, inf) through the
    substitution x = -log(1 - u); the exact value is -EulerGamma / ln 2.
    """
    config = config or _DEFAULT_QUAD

    def fn(t):
        return np.log2(np.maximum(-np.log1p(-t), 1e-300))

    return _midpoint_dyadic(fn, config)


@dataclass(frozen=True)
class BoundsCheckReport:
    """Per-batch margins of the two conditional log bounds.

    ``upper_margins`` holds ``rhs - lhs`` of the Jensen upper bound on
    E[log2(1 + lambda1 ||h||^2) | h_hat]; any negative entry is a build
    error, not a statistical event.  ``lower_margins`` holds ``lhs - rhs``
    of the rotation-based lower bound on E[log2(1 + g^H K g) | g_hat].
    """

    upper_margins: np.ndarray
    lower_margins: np.ndarray
    n_batches: int
    n_samples: int

    @property
    def passed(self):
        return bool(np.all(self.upper_margins >= 0.0) and np.all(self.lower_margins >= 0.0))


def conditional_log_bounds_check(k_eigs, cfg, mc_cfg, n_batches=100, quad_config=None):
    """Monte Carlo check of the slack-free conditional-expectation bounds.

    For a PSD matrix with eigenvalues ``k_eigs = (lambda1, lambda2)``,
    verifies per estimate-conditioned batch that
    (i)  E[log2(1 + l1 ||h||^2) | h_hat] <= log2(1 + l1 ||h_hat||^2 + 2 sigma^2 l1),
    (ii) E[log2(1 + g^H K g) | g_hat] >= max(log2(2^gamma sigma^2 l1), 0),
    where gamma is the exponential-log constant.
    """
    lam1, lam2 = float(k_eigs[0]), float(k_eigs[1])
    if not lam1 >= lam2 >= 0.0 or lam1 <= 0.0:
        raise ValueError("eigenvalues must satisfy lambda1 >= lambda2 >= 0 with lambda1 > 0")
    s2 = cfg.sigma_sq
    gamma = exp_log_mean(quad_config)
    rhs_lower = max(gamma + math.log2(s2 * lam1), 0.0)

    est_scale = math.sqrt(max(1.0 - s2, 0.0) / 2.0)
    err_scale = math.sqrt(s2 / 2.0)
    upper = np.empty(n_batches)
    lower = np.empty(n_batches)
    for b in range(n_batches):
        rng = Generator(Philox(key=np.array([mc_cfg.seed, _BATCH_KEY_OFFSET + b],
                                            dtype=np.uint64)))
        est = (rng.standard_normal(4) + 1j * rng.standard_normal(4)) * est_scale
        h_hat, g_hat = est[0:2], est[2:4]
        err = (rng.standard_normal((mc_cfg.n_samples, 4))
               + 1j * rng.standard_normal((mc_cfg.n_samples, 4))) * err_scale
        h = h_hat + err[:, 0:2]
        g = g_hat + err[:, 2:4]

        h_norm_sq = np.sum(h.real ** 2 + h.imag ** 2, axis=1)
        lhs_upper = float(np.mean(np.log2(1.0 + lam1 * h_norm_sq)))
        rhs_upper = math.log2(1.0 + lam1 * float(np.sum(np.abs(h_hat) ** 2)) + 2.0 * s2 * lam1)
        upper[b] = rhs_upper - lhs_upper

        quad_form = lam1 * (g[:, 0].real ** 2 + g[:, 0].imag ** 2) \
            + lam2 * (g[:, 1].real ** 2 + g[:, 1].imag ** 2)
        lhs_lower = float(np.mean(np.log2(1.0 + quad_form)))
        lower[b] = lhs_lower - rhs_lower

    return BoundsCheckReport(
        upper_margins=upper, lower_margins=lower,
        n_batches=n_batches, n_samples=mc_cfg.n_samples,
    )
