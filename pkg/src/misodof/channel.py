"""Fading and CSIT model of the two-user MISO broadcast channel.

The transmitter has two antennas and serves two single-antenna users over an
i.i.d. Rayleigh-fading channel.  At every slot it holds an imperfect estimate
of the current channel vectors: the true vectors decompose as
``h = h_hat + h_tilde`` and ``g = g_hat + g_tilde``, where estimates and
errors are independent circularly-symmetric complex Gaussians with per-entry
variances ``1 - sigma_sq`` and ``sigma_sq``.  Estimation quality is tracked
through the exponent ``alpha`` defined by ``sigma_sq = snr_p ** -alpha``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

N_ANTENNAS = 2

LIGHT_SPEED_MPS = 3.0e8

# Estimates with norm below this are considered degenerate and redrawn.
_DEGENERATE_NORM = 1e-12
_MAX_REDRAWS = 100


@dataclass(frozen=True)
class CsitConfig:
    """Transmit power and current-CSIT quality parameters.

    ``sigma_hat_sq`` is the error variance floored at the noise-limited
    level ``1/snr_p`` and ``alpha_hat`` its exponent; power allocations use
    the floored pair so they stay meaningful when the raw error variance
    drops below the AWGN floor.
    """

    snr_p: float
    sigma_sq: float
    alpha: float
    sigma_hat_sq: float
    alpha_hat: float

    def __post_init__(self):
        if not self.snr_p > 1.0:
            raise ValueError(f"snr_p must exceed 1 (linear), got {self.snr_p}")
        if not 0.0 < self.sigma_sq <= 1.0:
            raise ValueError(f"sigma_sq must lie in (0, 1], got {self.sigma_sq}")
        if not 0.0 <= self.alpha <= 1.0:
            raise ValueError(f"alpha must lie in [0, 1], got {self.alpha}")
        if self.sigma_hat_sq < 1.0 / self.snr_p * (1.0 - 1e-12):
            raise ValueError("sigma_hat_sq below the noise floor 1/snr_p")
        if not 0.0 <= self.alpha_hat <= 1.0:
            raise ValueError(f"alpha_hat must lie in [0, 1], got {self.alpha_hat}")

    @classmethod
    def from_alpha(cls, snr_p, alpha):
        """Build a config from (P, alpha); the error variance is P**-alpha."""
        if alpha < 0.0:
            raise ValueError(f"alpha must be nonnegative, got {alpha}")
        alpha = min(float(alpha), 1.0)
        sigma_sq = float(snr_p) ** (-alpha)
        return cls._complete(float(snr_p), sigma_sq, alpha)

    @classmethod
    def from_sigma_sq(cls, snr_p, sigma_sq):
        """Build a config from (P, sigma^2); alpha = min(-log sigma^2 / log P, 1)."""
        snr_p = float(snr_p)
        sigma_sq = float(sigma_sq)
        if not 0.0 < sigma_sq <= 1.0:
            raise ValueError(f"sigma_sq must lie in (0, 1], got {sigma_sq}")
        if not snr_p > 1.0:
            raise ValueError(f"snr_p must exceed 1 (linear), got {snr_p}")
        alpha = min(-math.log2(sigma_sq) / math.log2(snr_p), 1.0)
        return cls._complete(snr_p, sigma_sq, alpha)

    @classmethod
    def _complete(cls, snr_p, sigma_sq, alpha):
        sigma_hat_sq = max(1.0 / snr_p, sigma_sq)
        alpha_hat = -math.log(sigma_hat_sq) / math.log(snr_p)
        alpha_hat = min(max(alpha_hat, 0.0), 1.0)
        return cls(snr_p, sigma_sq, alpha, sigma_hat_sq, alpha_hat)


@dataclass(frozen=True)
class DopplerParams:
    """Band-limited Doppler fading parameters.

    The normalized one-sided Doppler bandwidth is
    ``F = speed_mps * carrier_hz * slot_sec / light_mps`` and must stay
    below 1/2 for channel prediction to be useful.
    """

    speed_mps: float
    carrier_hz: float
    slot_sec: float
    light_mps: float = LIGHT_SPEED_MPS

    def __post_init__(self):
        if self.speed_mps < 0 or self.carrier_hz <= 0 or self.slot_sec <= 0 or self.light_mps <= 0:
            raise ValueError("Doppler parameters must be positive (speed may be zero)")
        if not self.normalized_bandwidth < 0.5:
            raise ValueError(
                f"normalized Doppler bandwidth F = {self.normalized_bandwidth} >= 1/2; "
                "prediction-based CSIT is useless"
            )

    @property
    def normalized_bandwidth(self):
        return self.speed_mps * self.carrier_hz * self.slot_sec / self.light_mps


@dataclass(frozen=True)
class ChannelSample:
    """One joint draw of true channels, estimates, and estimation errors.

    All vectors are complex with shape (2,); ``h = h_hat + h_tilde`` and
    ``g = g_hat + g_tilde`` hold exactly.
    """

    h: np.ndarray
    g: np.ndarray
    h_hat: np.ndarray
    g_hat: np.ndarray
    h_tilde: np.ndarray
    g_tilde: np.ndarray


@dataclass(frozen=True)
class ChannelBatch:
    """Vectorized collection of channel samples; all arrays are (n, 2)."""

    h: np.ndarray
    g: np.ndarray
    h_hat: np.ndarray
    g_hat: np.ndarray
    h_tilde: np.ndarray
    g_tilde: np.ndarray

    @property
    def n(self):
        return self.h.shape[0]

    def sample(self, i):
        return ChannelSample(
            h=self.h[i], g=self.g[i],
            h_hat=self.h_hat[i], g_hat=self.g_hat[i],
            h_tilde=self.h_tilde[i], g_tilde=self.g_tilde[i],
        )


def _draw(rng, n, est_scale, err_scale):
    # Fixed draw layout: 16 reals per sample, estimates first.
    z = rng.standard_normal((n, 16))
    est = (z[:, 0:4] + 1j * z[:, 4:8]) * est_scale
    err = (z[:, 8:12] + 1j * z[:, 12:16]) * err_scale
    return est, err


def sample_batch(rng, cfg, n):
    """Draw ``n`` independent channel samples as a ChannelBatch.

    Entries of the estimates are i.i.d. CN(0, 1 - sigma_sq), entries of the
    errors i.i.d. CN(0, sigma_sq), all four vectors mutually independent.
    Samples with a degenerate estimate direction (norm below 1e-12) are
    redrawn, except in the no-CSIT regime sigma_sq == 1 where the estimates
    are deterministically zero.
    """
    s2 = cfg.sigma_sq
    est_scale = math.sqrt(max(1.0 - s2, 0.0) / 2.0)
    err_scale = math.sqrt(s2 / 2.0)
    est, err = _draw(rng, n, est_scale, err_scale)
    if s2 < 1.0:
        for _ in range(_MAX_REDRAWS):
            bad = (
                (np.linalg.norm(est[:, 0:2], axis=1) < _DEGENERATE_NORM)
                | (np.linalg.norm(est[:, 2:4], axis=1) < _DEGENERATE_NORM)
            )
            if not bad.any():
                break
            est_new, err_new = _draw(rng, int(bad.sum()), est_scale, err_scale)
            est[bad] = est_new
            err[bad] = err_new
        else:
            raise RuntimeError(
                "degenerate channel estimates persisted through "
                f"{_MAX_REDRAWS} redraws; generator is broken"
            )
    h_hat, g_hat = est[:, 0:2], est[:, 2:4]
    h_tilde, g_tilde = err[:, 0:2], err[:, 2:4]
    return ChannelBatch(
        h=h_hat + h_tilde, g=g_hat + g_tilde,
        h_hat=h_hat, g_hat=g_hat,
        h_tilde=h_tilde, g_tilde=g_tilde,
    )


def sample_channel(rng, cfg):
    """Draw a single ChannelSample from an explicit generator state."""
    return sample_batch(rng, cfg, 1).sample(0)


def projector(x):
    """Rank-1 orthogonal projector onto the direction of ``x``.

    Accepts a single vector (2,) or a batch (..., 2); returns (..., 2, 2).
    Raises ValueError on a zero vector.
    """
    x = np.asarray(x, dtype=complex)
    norm_sq = np.sum(x.real ** 2 + x.imag ** 2, axis=-1)
    if np.any(norm_sq <= 0.0):
        raise ValueError("projector of the zero vector is undefined")
    return x[..., :, None] * np.conj(x)[..., None, :] / norm_sq[..., None, None]


def orthogonal_complement(x):
    """Deterministic unit vector orthogonal to the 2-vector ``x``.

    Uses the conjugate-swap formula ``(-conj(x2), conj(x1)) / ||x||`` so the
    result is reproducible.  Accepts batches (..., 2).
    """
    x = np.asarray(x, dtype=complex)
    norm = np.sqrt(np.sum(x.real ** 2 + x.imag ** 2, axis=-1))
    if np.any(norm <= 0.0):
        raise ValueError("orthogonal complement of the zero vector is undefined")
    v = np.stack([-np.conj(x[..., 1]), np.conj(x[..., 0])], axis=-1)
    return v / norm[..., None]


def alpha_from_doppler(params):
    """Current-CSIT quality exponent of a band-limited Doppler channel.

    With noise-free feedback of the channel observations, one-step
    prediction leaves an error decaying as P**-(1 - 2F), so
    alpha = 1 - 2F.
    """
    f = params.normalized_bandwidth
    if f >= 0.5:
        raise ValueError(f"normalized Doppler bandwidth F = {f} >= 1/2")
    return 1.0 - 2.0 * f
