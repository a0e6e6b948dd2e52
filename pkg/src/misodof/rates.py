"""Exact finite-SNR ergodic achievable rates, logs base 2, bits per use.

Implements the two-phase quantize-and-multicast scheme (precoded broadcast of
two private signals, then multicast of the digitized overheard interferences
as a common message with two fresh private messages superposed) and the
TDMA / ZF / MAT-style / rate-split-ZF baselines.  Expectations are Monte
Carlo estimates over joint draws of channels and estimates; transmit policies
may depend on the estimates only.

Covariances are handled in two forms: explicit (..., 2, 2) matrices on the
public surface, and rank-1 component lists ``((coeff, direction), ...)``
inside the Monte Carlo integrands.  The component form matters numerically:
at very high SNR the matrix entries are ~P while quadratic forms along
nulled directions are O(1), and forming the matrix first loses them to
cancellation.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import mc
from .channel import CsitConfig, projector
from .regions import Scheme

_E1 = np.array([1.0 + 0.0j, 0.0 + 0.0j])
_E2 = np.array([0.0 + 0.0j, 1.0 + 0.0j])

_ZERO_DIR_TOL = 1e-12
_PSD_TOL = 1e-9


@dataclass(frozen=True)
class PowerPolicy:
    """Covariance, power-split, and distortion parameters of one scheme use.

    Matrices are complex (..., 2, 2); a leading batch axis carries
    per-sample (estimate-dependent) covariances.  ``d1_tilde``/``d2_tilde``
    are the normalized quantizer distortions in (0, 1].
    """

    q_u: np.ndarray
    q_v: np.ndarray
    q_c: np.ndarray
    q_p1: np.ndarray
    q_p2: np.ndarray
    p1: float
    p2: float
    p_c: float
    p_p: float
    d1_tilde: float
    d2_tilde: float

    def validate(self, snr_p):
        budget = snr_p * (1.0 + 1e-9)
        tr_phase1 = _trace(self.q_u) + _trace(self.q_v)
        tr_phase2 = _trace(self.q_c) + _trace(self.q_p1) + _trace(self.q_p2)
        if np.any(tr_phase1 > budget) or np.any(tr_phase2 > budget):
            raise ValueError("policy exceeds the transmit power budget")
        for q in (self.q_u, self.q_v, self.q_c, self.q_p1, self.q_p2):
            _check_psd(q)
        if not (0.0 < self.d1_tilde <= 1.0 and 0.0 < self.d2_tilde <= 1.0):
            raise ValueError("normalized distortions must lie in (0, 1]")


def _trace(q):
    return np.asarray(q)[..., 0, 0].real + np.asarray(q)[..., 1, 1].real


def _check_psd(q):
    q = np.asarray(q)
    herm_err = np.max(np.abs(q - np.conj(np.swapaxes(q, -1, -2))))
    scale = np.maximum(_trace(q), 1.0)
    if herm_err > _PSD_TOL * np.max(scale):
        raise ValueError("covariance matrix is not Hermitian")
    min_eig = np.min(np.linalg.eigvalsh(q), axis=-1)
    if np.any(min_eig < -_PSD_TOL * scale):
        raise ValueError("covariance matrix is not positive semidefinite")


@dataclass(frozen=True)
class RateResult:
    """Per-user rates with Monte Carlo standard errors and rate components."""

    r1: float
    r2: float
    se_r1: float
    se_r2: float
    r_c: float = 0.0
    r_p1: float = 0.0
    r_p2: float = 0.0
    r_mimo1: float = 0.0
    r_mimo2: float = 0.0
    r_eta1: float = 0.0
    r_eta2: float = 0.0
    se_r_c: float = 0.0
    se_r_p1: float = 0.0
    se_r_p2: float = 0.0
    se_r_mimo1: float = 0.0
    se_r_mimo2: float = 0.0


@dataclass(frozen=True)
class CommonMessageRates:
    """Rate triple of superposition coding with a common message."""

    r_c: float
    r_p1: float
    r_p2: float
    se_r_c: float
    se_r_p1: float
    se_r_p2: float


def _unit_or(x, fallback):
    x = np.asarray(x, dtype=complex)
    norm = np.sqrt(np.sum(x.real ** 2 + x.imag ** 2, axis=-1))
    degenerate = norm < _ZERO_DIR_TOL
    unit = x / np.where(degenerate, 1.0, norm)[..., None]
    return np.where(degenerate[..., None], fallback, unit)


def _perp_unit(x, fallback):
    x = np.asarray(x, dtype=complex)
    v = np.stack([-np.conj(x[..., 1]), np.conj(x[..., 0])], axis=-1)
    return _unit_or(v, fallback)


def _inner(x, w):
    return np.sum(np.conj(x) * w, axis=-1)


def _inner_mag_sq(x, w):
    ip = _inner(x, w)
    return ip.real ** 2 + ip.imag ** 2


def _quad(x, q):
    """x^H Q x for a covariance given as matrix or rank-1 components."""
    if isinstance(q, np.ndarray):
        return interference_power(x, q)
    total = 0.0
    for coeff, w in q:
        total = total + coeff * _inner_mag_sq(x, w)
    return total


def _pair_entries(h, g, q):
    """Entries (m00, m11, m01) of S Q S^H with S = [h^H; g^H]."""
    if isinstance(q, np.ndarray):
        s = np.stack([np.conj(h), np.conj(g)], axis=-2)
        sh = np.conj(np.swapaxes(s, -1, -2))
        m = s @ np.asarray(q, dtype=complex) @ sh
        return m[..., 0, 0].real, m[..., 1, 1].real, m[..., 0, 1]
    m00 = 0.0
    m11 = 0.0
    m01 = 0.0 + 0.0j
    for coeff, w in q:
        iph = _inner(h, w)
        ipg = _inner(g, w)
        m00 = m00 + coeff * (iph.real ** 2 + iph.imag ** 2)
        m11 = m11 + coeff * (ipg.real ** 2 + ipg.imag ** 2)
        m01 = m01 + coeff * iph * np.conj(ipg)
    return m00, m11, m01


def _power_split(cfg):
    # Phase-1 split (p1 orthogonal / p2 aligned with the crossing user's
    # estimate) and phase-2 split (p_c common / p_p private zero-forced).
    p_p = cfg.alpha_hat / cfg.sigma_hat_sq
    p_c = max(cfg.snr_p - p_p, 0.0)
    p2 = max((1.0 - cfg.alpha_hat) * (cfg.snr_p / 2.0) * cfg.sigma_hat_sq, 0.0)
    p1 = cfg.snr_p - p2
    if p_p > cfg.snr_p * (1.0 + 1e-12):
        raise AssertionError("private power exceeds the budget; config is inconsistent")
    return p1, p2, p_c, p_p


def _distortion(cfg):
    # Quantizer distortion at the AWGN level relative to the interference
    # power, clamped into [1/P, 1].
    raw = max(1.0 / (cfg.snr_p * cfg.sigma_sq), 1.0 / cfg.snr_p)
    return min(raw, 1.0)


def _policy_components(cfg, h_hat, g_hat):
    """Rank-1 components of all five covariances of the default policy."""
    p1, p2, p_c, p_p = _power_split(cfg)
    perp_g = _perp_unit(g_hat, _E1)
    par_g = _unit_or(g_hat, _E2)
    perp_h = _perp_unit(h_hat, _E1)
    par_h = _unit_or(h_hat, _E2)
    return {
        "q_u": ((p1 / 2.0, perp_g), (p2 / 2.0, par_g)),
        "q_v": ((p1 / 2.0, perp_h), (p2 / 2.0, par_h)),
        "q_c": ((p_c / 2.0, _E1), (p_c / 2.0, _E2)),
        "q_p1": ((p_p / 2.0, perp_g),),
        "q_p2": ((p_p / 2.0, perp_h),),
        "powers": (p1, p2, p_c, p_p),
    }


def _matrix_of(components):
    total = 0.0
    for coeff, w in components:
        total = total + coeff * projector(w)
    return np.asarray(total, dtype=complex)


def default_policy(cfg, sample):
    """The fixed precoding/power/distortion choices of the proposed scheme.

    ``sample`` may be a ChannelSample or a ChannelBatch; covariances are
    built from the estimates only.  Zero estimates (no-CSIT regime) fall
    back to the fixed orthonormal pair (e1, e2), under which the phase-1
    covariances become isotropic because p1 == p2 there.
    """
    comps = _policy_components(cfg, sample.h_hat, sample.g_hat)
    p1, p2, p_c, p_p = comps["powers"]
    d_tilde = _distortion(cfg)
    return PowerPolicy(
        q_u=_matrix_of(comps["q_u"]), q_v=_matrix_of(comps["q_v"]),
        q_c=_matrix_of(comps["q_c"]), q_p1=_matrix_of(comps["q_p1"]),
        q_p2=_matrix_of(comps["q_p2"]),
        p1=p1, p2=p2, p_c=p_c, p_p=p_p,
        d1_tilde=d_tilde, d2_tilde=d_tilde,
    )


def default_phase2_policy(cfg, h_hat, g_hat):
    """Policy map for the common-message phase: (q_c, q_p1, q_p2) matrices."""
    comps = _policy_components(cfg, h_hat, g_hat)
    return _matrix_of(comps["q_c"]), _matrix_of(comps["q_p1"]), _matrix_of(comps["q_p2"])


def _phase2_component_policy(cfg, h_hat, g_hat):
    comps = _policy_components(cfg, h_hat, g_hat)
    return comps["q_c"], comps["q_p1"], comps["q_p2"]


def interference_power(h, q_v):
    """Quadratic form h^H Q h: received power of a covariance at channel h."""
    h = np.asarray(h, dtype=complex)
    val = np.einsum("...i,...ij,...j->...", np.conj(h), np.asarray(q_v, dtype=complex), h)
    return val.real


def quantization_rate(d_tilde):
    """Bits per symbol needed to quantize a unit source at distortion d_tilde."""
    if not 0.0 < d_tilde <= 1.0:
        raise ValueError(f"normalized distortion must lie in (0, 1], got {d_tilde}")
    return -math.log2(d_tilde)


def _side_gain(sig, d_tilde):
    # Effective gain of the decoded-interference observation:
    # (1 - d)/(sig * d).  Zero when nothing is overheard (sig == 0) or the
    # quantizer conveys nothing (d == 1).
    sig = np.asarray(sig, dtype=float)
    useless = (sig <= 0.0) | (d_tilde >= 1.0)
    den = np.where(useless, 1.0, sig * d_tilde)
    return np.where(useless, 0.0, (1.0 - d_tilde) / den)


def _det_rowscaled(m00, m11, m01, r0, r1):
    # det(I + diag(r0, r1) @ M) for Hermitian M given by its entries
    off = m01.real ** 2 + m01.imag ** 2 if np.iscomplexobj(m01) else m01 ** 2
    return (1.0 + r0 * m00) * (1.0 + r1 * m11) - r0 * r1 * off


def _mimo_pair(h, g, q_u, q_v, d1, d2):
    """Per-sample rates of both users' equivalent 2x2 channels (phase 1).

    Each receiver stacks its direct observation (aligned interference
    removed, residual quantization noise folded into the noise floor) with
    the decoded quantized version of what the other receiver overheard.
    """
    u00, u11, u01 = _pair_entries(h, g, q_u)
    v00, v11, v01 = _pair_entries(h, g, q_v)
    sig1 = np.maximum(v00, 0.0)   # interference power seen by user 1
    sig2 = np.maximum(u11, 0.0)   # interference power seen by user 2
    det1 = _det_rowscaled(u00, u11, u01, 1.0 / (1.0 + sig1 * d1), _side_gain(sig2, d2))
    det2 = _det_rowscaled(v00, v11, v01, _side_gain(sig1, d1), 1.0 / (1.0 + sig2 * d2))
    return np.log2(np.maximum(det1, 1.0)), np.log2(np.maximum(det2, 1.0))


def mimo_rate(sample, policy, user):
    """Equivalent-MIMO rate of one user for a single channel sample."""
    if user not in (1, 2):
        raise ValueError(f"user must be 1 or 2, got {user}")
    for q in (policy.q_u, policy.q_v):
        _check_psd(q)
    m1, m2 = _mimo_pair(sample.h, sample.g, np.asarray(policy.q_u),
                        np.asarray(policy.q_v), policy.d1_tilde, policy.d2_tilde)
    return float(m1 if user == 1 else m2)


def _phase2_terms(batch, q_c, q_p1, q_p2):
    # Per-sample log terms of the common-message region: common message
    # decoded under both privates, then each private under the other.
    ch = np.maximum(_quad(batch.h, q_c), 0.0)
    ph1 = np.maximum(_quad(batch.h, q_p1), 0.0)
    ph2 = np.maximum(_quad(batch.h, q_p2), 0.0)
    cg = np.maximum(_quad(batch.g, q_c), 0.0)
    pg1 = np.maximum(_quad(batch.g, q_p1), 0.0)
    pg2 = np.maximum(_quad(batch.g, q_p2), 0.0)
    t_c_h = np.log2(1.0 + ch / (1.0 + ph1 + ph2))
    t_c_g = np.log2(1.0 + cg / (1.0 + pg1 + pg2))
    t_p1 = np.log2(1.0 + ph1 / (1.0 + ph2))
    t_p2 = np.log2(1.0 + pg2 / (1.0 + pg1))
    return np.stack([t_c_h, t_c_g, t_p1, t_p2], axis=-1)


def _phase2_triple(pol):
    if isinstance(pol, PowerPolicy):
        return pol.q_c, pol.q_p1, pol.q_p2
    q_c, q_p1, q_p2 = pol
    return q_c, q_p1, q_p2


def rate_common_message(cfg, policy_map, mc_cfg):
    """Ergodic rate triple of superposition coding with a common message.

    ``policy_map(cfg, h_hat, g_hat)`` must build the covariances
    (q_c, q_p1, q_p2) from the estimates only; it receives batched estimate
    arrays (n, 2) and may return (2, 2) or (n, 2, 2) matrices (or a full
    PowerPolicy).  The common-message rate takes the outer min of the two
    users' expectations.
    """

    def f(batch):
        q_c, q_p1, q_p2 = _phase2_triple(policy_map(cfg, batch.h_hat, batch.g_hat))
        return _phase2_terms(batch, q_c, q_p1, q_p2)

    est = mc.estimate(f, mc_cfg, cfg)
    mean, se = est.mean, est.std_error
    branch = 0 if mean[0] <= mean[1] else 1
    return CommonMessageRates(
        r_c=float(mean[branch]), se_r_c=float(se[branch]),
        r_p1=float(mean[2]), se_r_p1=float(se[2]),
        r_p2=float(mean[3]), se_r_p2=float(se[3]),
    )


def _combine_rate(r_c, se_c, r_m, se_m, r_p, se_p, r_eta):
    # Slot-ratio-eliminated combination; the common phase carries the
    # quantized interference, so its share is r_eta/(r_c + r_eta).
    den = r_c + r_eta
    if den <= 0.0:
        return r_m, se_m
    val = (r_c * r_m + r_eta * r_p) / den
    d_c = r_eta * (r_m - r_p) / den ** 2
    se = math.sqrt((d_c * se_c) ** 2 + (r_c / den * se_m) ** 2 + (r_eta / den * se_p) ** 2)
    return val, se


def rate_proposed(cfg, mc_cfg, policy_cfg=None):
    """Ergodic rate pair of the two-phase quantize-and-multicast scheme.

    ``policy_cfg`` optionally overrides the config used to derive powers and
    distortions (the channel itself still follows ``cfg``); it is how the
    no-current-CSIT (MAT-style) variant is evaluated.
    """
    pcfg = cfg if policy_cfg is None else policy_cfg
    if pcfg.snr_p != cfg.snr_p:
        raise ValueError("policy config must use the same transmit power")
    d_tilde = _distortion(pcfg)
    r_eta1 = r_eta2 = quantization_rate(d_tilde)
    r_eta = r_eta1 + r_eta2

    def f(batch):
        comps = _policy_components(pcfg, batch.h_hat, batch.g_hat)
        terms = _phase2_terms(batch, comps["q_c"], comps["q_p1"], comps["q_p2"])
        m1, m2 = _mimo_pair(batch.h, batch.g, comps["q_u"], comps["q_v"],
                            d_tilde, d_tilde)
        return np.concatenate([terms, np.stack([m1, m2], axis=-1)], axis=-1)

    est = mc.estimate(f, mc_cfg, cfg)
    mean, se = est.mean, est.std_error
    branch = 0 if mean[0] <= mean[1] else 1
    r_c, se_c = float(mean[branch]), float(se[branch])
    r_p1, r_p2 = float(mean[2]), float(mean[3])
    r_m1, r_m2 = float(mean[4]), float(mean[5])
    r1, se1 = _combine_rate(r_c, se_c, r_m1, float(se[4]), r_p1, float(se[2]), r_eta)
    r2, se2 = _combine_rate(r_c, se_c, r_m2, float(se[5]), r_p2, float(se[3]), r_eta)
    return RateResult(
        r1=r1, r2=r2, se_r1=se1, se_r2=se2,
        r_c=r_c, r_p1=r_p1, r_p2=r_p2,
        r_mimo1=r_m1, r_mimo2=r_m2,
        r_eta1=r_eta1, r_eta2=r_eta2,
        se_r_c=se_c, se_r_p1=float(se[2]), se_r_p2=float(se[3]),
        se_r_mimo1=float(se[4]), se_r_mimo2=float(se[5]),
    )


def _rate_tdma(cfg, mc_cfg):
    # Alternating single-user slots, full power beamformed along the
    # estimated channel (fixed direction when the estimate is zero).
    p = cfg.snr_p

    def f(batch):
        beam_h = _unit_or(batch.h_hat, _E1)
        beam_g = _unit_or(batch.g_hat, _E1)
        t1 = np.log2(1.0 + p * _inner_mag_sq(batch.h, beam_h))
        t2 = np.log2(1.0 + p * _inner_mag_sq(batch.g, beam_g))
        return np.stack([t1, t2], axis=-1)

    est = mc.estimate(f, mc_cfg, cfg)
    mean, se = est.mean, est.std_error
    return RateResult(
        r1=float(mean[0]) / 2.0, r2=float(mean[1]) / 2.0,
        se_r1=float(se[0]) / 2.0, se_r2=float(se[1]) / 2.0,
    )


def _rate_zf(cfg, mc_cfg):
    # Equal-power beams orthogonal to the other user's estimate; the
    # residual leakage is treated as noise.
    half_p = cfg.snr_p / 2.0

    def f(batch):
        w1 = _perp_unit(batch.g_hat, _E1)
        w2 = _perp_unit(batch.h_hat, _E2)
        t1 = np.log2(1.0 + half_p * _inner_mag_sq(batch.h, w1)
                     / (1.0 + half_p * _inner_mag_sq(batch.h, w2)))
        t2 = np.log2(1.0 + half_p * _inner_mag_sq(batch.g, w2)
                     / (1.0 + half_p * _inner_mag_sq(batch.g, w1)))
        return np.stack([t1, t2], axis=-1)

    est = mc.estimate(f, mc_cfg, cfg)
    mean, se = est.mean, est.std_error
    return RateResult(r1=float(mean[0]), r2=float(mean[1]),
                      se_r1=float(se[0]), se_r2=float(se[1]))


def _rate_rs_zf(cfg, mc_cfg):
    # Equal time-sharing of the two one-sided rate-splitting corners: each
    # user gets common + private in one slot and private-only in the other.
    cm = rate_common_message(cfg, _phase2_component_policy, mc_cfg)
    r1 = 0.5 * cm.r_c + cm.r_p1
    r2 = 0.5 * cm.r_c + cm.r_p2
    se1 = math.sqrt((0.5 * cm.se_r_c) ** 2 + cm.se_r_p1 ** 2)
    se2 = math.sqrt((0.5 * cm.se_r_c) ** 2 + cm.se_r_p2 ** 2)
    return RateResult(
        r1=r1, r2=r2, se_r1=se1, se_r2=se2,
        r_c=cm.r_c, r_p1=cm.r_p1, r_p2=cm.r_p2,
        se_r_c=cm.se_r_c, se_r_p1=cm.se_r_p1, se_r_p2=cm.se_r_p2,
    )


def rate_baseline(scheme, cfg, mc_cfg):
    """Ergodic rates of a baseline scheme: TDMA, ZF, MAT, or RS_ZF.

    MAT is the no-current-CSIT variant of the proposed scheme: powers and
    distortions are derived as if sigma_sq were 1, which makes the phase-1
    covariances isotropic and disables the private phase-2 messages.
    """
    scheme = Scheme(scheme)
    if scheme is Scheme.TDMA:
        return _rate_tdma(cfg, mc_cfg)
    if scheme is Scheme.ZF:
        return _rate_zf(cfg, mc_cfg)
    if scheme is Scheme.MAT:
        forced = CsitConfig.from_sigma_sq(cfg.snr_p, 1.0)
        return rate_proposed(cfg, mc_cfg, policy_cfg=forced)
    if scheme is Scheme.RS_ZF:
        return _rate_rs_zf(cfg, mc_cfg)
    raise ValueError(f"{scheme} is not a baseline; use rate_proposed")


def rate_scheme(scheme, cfg, mc_cfg):
    """Dispatch over all schemes, including the proposed one."""
    scheme = Scheme(scheme)
    if scheme is Scheme.PROPOSED:
        return rate_proposed(cfg, mc_cfg)
    return rate_baseline(scheme, cfg, mc_cfg)
