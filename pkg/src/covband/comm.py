"""Two-detector signalling under the covariant cutoff.

The acausal term ``I_Lambda(r, t)`` is computed three ways:

* ``acausal_term``: the two frequency integrals over ``omega`` with
  ``sqrt(omega^2 -+ Lambda^2)`` (denominators ``t^2 - r^2`` finite off-cone);
* ``acausal_term_pv_oracle``: the principal-value form over the band
  intervals, an independent route used as an oracle;
* ``acausal_closed_form``: ``4 r g(Lambda s) / (pi^2 s^2)`` with
  ``s = sqrt|t^2 - r^2|`` and ``g(x) = (pi/2) Y0(x) + K0(x)``, obtained by
  evaluating both frequency integrals in terms of Bessel functions.  It is
  vectorized and is what the smeared-signal and Monte-Carlo code consume.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from typing import Literal, Sequence

import numpy as np
from scipy.special import k0 as bessel_k0
from scipy.special import y0 as bessel_y0

from .field import (
    BandRegion,
    DetectorSpec,
    SingularPointError,
    in_lightcone_zone,
    nu_band_intervals,
)
from .quadrature import (
    PVSpec,
    QuadConfig,
    QuadEstimate,
    integrate_adaptive,
    integrate_panels,
    integrate_principal_value,
    integrate_semi_infinite_oscillatory,
    integrate_sqrt_endpoint,
    phase_zeros,
    uniform_zeros,
)

__all__ = [
    "ChannelSample",
    "SignalAmplitude",
    "acausal_term",
    "acausal_term_pv_oracle",
    "acausal_closed_form",
    "decay_profile",
    "zero_crossings",
    "oscillation_wavelength",
    "distance_density",
    "temporal_factor",
    "smeared_signal",
    "smeared_signal_mc",
]

Method = Literal["lambda_form", "pv_oracle", "closed_form"]


@dataclass(frozen=True)
class ChannelSample:
    r: float
    t: float
    lambda_cutoff: float
    value: float
    method: Method
    estimate: QuadEstimate
    imag_residual: float = 0.0


@dataclass(frozen=True)
class SignalAmplitude:
    """Leading-order channel amplitude split into lightlike and acausal parts.

    ``causal_scale`` is the causal integral with ``|T(r)| + |T(-r)|`` in place
    of ``T(r) - T(-r)``; it stays finite when the two parts cancel (equal gaps).
    """

    causal: complex
    acausal: complex
    total: complex
    causal_scale: float
    estimates: dict = field(default_factory=dict)
    overlap_warning: bool = False


def _check_point(r: float, t: float, lam: float):
    if not r > 0:
        raise ValueError(f"r must be > 0, got {r}")
    BandRegion(lam)
    if math.isinf(lam):
        raise ValueError("I_Lambda vanishes identically without a cutoff; pass a finite Lambda")
    if in_lightcone_zone(t, r):
        raise SingularPointError(f"I_Lambda is singular on the lightcone (r={r}, t={t})")


def acausal_closed_form(r, t, lam):
    """Vectorized ``I_Lambda(r, t) = 4 r g(Lambda s)/(pi^2 s^2)``, ``s^2 = |t^2 - r^2|``."""
    r = np.asarray(r, dtype=float)
    t = np.asarray(t, dtype=float)
    s2 = np.abs(t * t - r * r)
    x = lam * np.sqrt(s2)
    with np.errstate(divide="ignore", invalid="ignore"):
        g = 0.5 * math.pi * bessel_y0(x) + bessel_k0(x)
        out = 4.0 * r * g / (math.pi ** 2 * s2)
    return out


def _tail_config(cfg: QuadConfig, scale: float) -> QuadConfig:
    """Tail tolerance measured against the head magnitude, not the (small) tail itself."""
    return cfg.with_(abs_tol=max(cfg.abs_tol, 0.1 * cfg.rel_tol * scale))


def _tail(amplitude_sqrt, sign_lam: float, r: float, at: float, lam: float, start: float,
          cfg: QuadConfig) -> QuadEstimate:
    """Tail ``int_start^inf cos(w r) cos(q(w) |t|)/q(w) dw``, ``q = sqrt(w^2 + sign_lam Lambda^2)``.

    Split into ``cos(phi+)`` and ``cos(phi-)`` with ``phi(+-) = w r +- |t| q(w)``,
    each summed over its own pi-advances of phase.
    """
    if at == 0.0:
        def f0(w):
            return np.cos(w * r) / amplitude_sqrt(w)
        return integrate_semi_infinite_oscillatory(f0, phase_zeros(lambda w: w * r, start, r), start, cfg)
    total = QuadEstimate.exact(0.0)
    for pm in (1.0, -1.0):
        def phase(w, pm=pm):
            return w * r + pm * at * math.sqrt(w * w + sign_lam * lam * lam)

        def f(w, pm=pm):
            q = amplitude_sqrt(w)
            return 0.5 * np.cos(w * r + pm * at * q) / q

        slope = abs(r + pm * at)
        total = total + integrate_semi_infinite_oscillatory(f, phase_zeros(phase, start, slope), start, cfg)
    return total


def acausal_term(r: float, t: float, lam: float, cfg: QuadConfig | None = None) -> ChannelSample:
    """``I_Lambda(r, t)`` from the two frequency integrals with ``epsilon = 0``.

    ``I = 4 r/(pi^2 (t^2 - r^2)) * (A - B)`` where
    ``A = int_Lambda^inf cos(w r) cos(sqrt(w^2-L^2) t)/sqrt(w^2-L^2) dw`` and
    ``B = int_0^inf cos(w r) cos(sqrt(w^2+L^2) t)/sqrt(w^2+L^2) dw``.

    ``A`` starts with the square-root endpoint rule at ``w = Lambda``.  Both
    tails are lobe-summed along the exact phases ``w r +- |t| sqrt(w^2 -+ L^2)``.
    Only ``|t|`` enters, so the result is bit-exactly even in ``t``.

    Raises
    ------
    SingularPointError
        Inside the lightcone exclusion zone ``| |t| - r | <= 1e-3 max(r, 1)``.
    """
    cfg = cfg or QuadConfig()
    r = float(r)
    t = float(t)
    lam = float(lam)
    _check_point(r, t, lam)
    at = abs(t)
    a_max = r + at
    a_min = min(abs(r - at), a_max) if at > 0 else r

    def qa(w):
        w = np.asarray(w, dtype=float)
        return np.sqrt((w - lam) * (w + lam))

    def qb(w):
        return np.hypot(w, lam)

    def head_a(w):
        q = qa(w)
        bracket = np.exp(-1j * w * r) + np.exp(1j * w * r)
        return bracket * np.cos(q * at) / q

    def head_b(w):
        q = qb(w)
        bracket = np.exp(1j * w * r) + np.exp(-1j * w * r)
        return bracket * np.cos(q * at) / q

    # Tail starts past the stationary point of the slow phase.
    spacelike = r > at
    crit = lam * r / math.sqrt(abs(r * r - at * at))
    start_a = max(3.0 * lam, 3.0 * crit if spacelike else 0.0, lam + 8.0 * math.pi / a_min)
    start_b = max(3.0 * lam, 0.0 if spacelike else 3.0 * crit, 8.0 * math.pi / a_min)

    step = 4.0 * math.pi / a_max
    edge = min(lam + step, start_a)
    ha = integrate_sqrt_endpoint(head_a, lam, edge, cfg)
    if start_a > edge:
        n = int(math.ceil((start_a - edge) / step))
        ha = ha + integrate_panels(head_a, np.linspace(edge, start_a, n + 1), cfg)
    n = max(1, int(math.ceil(start_b / step)))
    hb = integrate_panels(head_b, np.linspace(0.0, start_b, n + 1), cfg)

    tail_cfg = _tail_config(cfg, abs(ha.value) + abs(hb.value))
    ta = _tail(qa, -1.0, r, at, lam, start_a, tail_cfg)
    tb = _tail(qb, +1.0, r, at, lam, start_b, tail_cfg)
    # head integrals carry the factor-2 bracket, tails carry cos only
    a_val = complex(ha.value) / 2.0 + ta.value
    b_val = complex(hb.value) / 2.0 + tb.value
    pref = 4.0 * r / (math.pi ** 2 * (t * t - r * r))
    value = pref * (a_val - b_val)
    err = abs(pref) * (ha.abs_error / 2 + hb.abs_error / 2 + ta.abs_error + tb.abs_error)
    resid = abs(value.imag)
    if resid > 1e-8 * abs(value.real):
        raise ArithmeticError(f"I_Lambda imaginary residual {resid:.3g} too large at (r={r}, t={t})")
    est = QuadEstimate(value.real, err, ha.evaluations + hb.evaluations + ta.evaluations + tb.evaluations,
                       ha.converged and hb.converged and ta.converged and tb.converged)
    return ChannelSample(r, t, lam, value.real, "lambda_form", est, resid)


def _inner_pv(omega: float, t: float, band: BandRegion, cfg: QuadConfig) -> QuadEstimate:
    """``P.V. int_band cos((omega - nu) t)/nu d nu`` over the band intervals of ``omega``."""
    total = QuadEstimate.exact(0.0)

    def f(nu):
        return np.cos((omega - nu) * t) / nu

    for lo, hi in nu_band_intervals(omega, band):
        if lo < 0.0 < hi:
            total = total + integrate_principal_value(f, PVSpec(0.0, (lo, hi)), cfg)
        else:
            total = total + integrate_adaptive(f, lo, hi, cfg)
    return total


def _inner_split(omega: float, t: float, band: BandRegion, cfg: QuadConfig):
    """Near and far band pieces for omega > Lambda: ``P0`` and carrier-free ``P2``."""
    (lo, rm), (rp, hi) = nu_band_intervals(omega, band)
    p0 = integrate_principal_value(lambda nu: np.exp(-1j * nu * t) / nu, PVSpec(0.0, (lo, rm)), cfg)
    p2 = integrate_adaptive(lambda nu: np.exp(-1j * (nu - 2.0 * omega) * t) / nu, rp, hi, cfg)
    return p0, p2


def acausal_term_pv_oracle(r: float, t: float, lam: float, cfg: QuadConfig | None = None) -> ChannelSample:
    """``I_Lambda(r, t)`` from the principal-value band form.

    ``I = (2/pi^2) int_0^inf d omega sin(omega r) P.V. int_band cos((omega-nu) t)/nu d nu``
    with the band of ``omega`` from ``nu_band_intervals``.  Past the tail start the
    inner integral is split into a near-zero piece ``P0`` and a piece around
    ``nu = 2 omega``, giving two carriers ``omega (r +- t)`` that are lobe-summed
    separately.
    """
    cfg = cfg or QuadConfig()
    inner_cfg = cfg.with_(rel_tol=min(cfg.rel_tol, 1e-10), abs_tol=min(cfg.abs_tol, 1e-13))
    r = float(r)
    t = float(t)
    lam = float(lam)
    _check_point(r, t, lam)
    band = BandRegion(lam)
    at = abs(t)
    a_max = r + at
    a_min = min(abs(r - at), a_max) if at > 0 else r
    stats = {"evals": 0, "err": 0.0, "ok": True}

    def head(ws):
        out = np.empty(len(ws))
        for i, w in enumerate(ws):
            est = _inner_pv(float(w), t, band, inner_cfg)
            stats["evals"] += est.evaluations
            stats["ok"] &= est.converged
            out[i] = math.sin(w * r) * float(np.real(est.value))
        return out

    start = max(10.0 * lam, 3.0 * lam * math.sqrt(at / a_min), 8.0 * math.pi / a_min)
    step = 4.0 * math.pi / a_max
    h = integrate_adaptive(head, 0.0, lam, cfg)
    edge = min(lam + step, start)
    h = h + integrate_sqrt_endpoint(head, lam, edge, cfg)
    n = int(math.ceil((start - edge) / step))
    if n > 0:
        h = h + integrate_panels(head, np.linspace(edge, start, n + 1), cfg)

    def comp(alpha, near_sign):
        # Re[(e^{i w a} X - e^{-i w a} Y)/(2i)], X/Y the near/far pieces as appropriate.
        def g(ws):
            out = np.empty(len(ws))
            for i, w in enumerate(ws):
                p0, p2 = _inner_split(float(w), t, band, inner_cfg)
                stats["evals"] += p0.evaluations + p2.evaluations
                stats["ok"] &= p0.converged and p2.converged
                x, y = (p0.value, p2.value) if near_sign > 0 else (p2.value, p0.value)
                val = (np.exp(1j * w * alpha) * x - np.exp(-1j * w * alpha) * y) / 2j
                out[i] = val.real
            return out
        return integrate_semi_infinite_oscillatory(g, uniform_zeros(start, math.pi / abs(alpha)), start, tail_cfg)

    tail_cfg = _tail_config(cfg, abs(h.value))

    if at == 0.0:
        tail = comp(r, +1) + comp(r, -1)
    else:
        tail = comp(r + t, +1) + comp(r - t, -1)
    total = h + tail
    pref = 2.0 / math.pi ** 2
    value = pref * float(np.real(total.value))
    err = pref * total.abs_error
    est = QuadEstimate(value, err, total.evaluations + stats["evals"], total.converged and stats["ok"])
    return ChannelSample(r, t, lam, value, "pv_oracle", est, 0.0)


def decay_profile(r_grid: Sequence[float], lam: float, cfg: QuadConfig | None = None) -> list[ChannelSample]:
    """``I_Lambda(r, 0)`` along ``r_grid``; plot ``r * sample.value`` for the decay profile."""
    return [acausal_term(float(r), 0.0, lam, cfg) for r in r_grid]


def zero_crossings(x, y) -> np.ndarray:
    """Linearly interpolated sign changes of ``y(x)``."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    idx = np.flatnonzero(np.sign(y[:-1]) * np.sign(y[1:]) < 0)
    return x[idx] - y[idx] * (x[idx + 1] - x[idx]) / (y[idx + 1] - y[idx])


def oscillation_wavelength(x, y) -> float:
    """Wavelength estimate: twice the median spacing of consecutive zero crossings."""
    z = zero_crossings(x, y)
    if len(z) < 2:
        return math.inf
    return 2.0 * float(np.median(np.diff(z)))


def distance_density(r, d: float, sigma_bar2: float):
    """Density of ``|x - y|`` for Gaussian smearings a distance ``d`` apart.

    ``sigma_bar2 = (sigma_A^2 + sigma_B^2) / 2``.
    """
    r = np.asarray(r, dtype=float)
    four_s = 4.0 * sigma_bar2
    pref = r / (2.0 * d * math.sqrt(math.pi * sigma_bar2))
    return pref * (np.exp(-(r - d) ** 2 / four_s) - np.exp(-(r + d) ** 2 / four_s))


def temporal_factor(t, det_a: DetectorSpec, det_b: DetectorSpec):
    """``T(t) = int ds chi_A(s) chi_B(s - t) exp(i Omega_A s + i Omega_B (s - t))``."""
    t = np.asarray(t, dtype=float)
    ta2, tb2 = det_a.tau ** 2, det_b.tau ** 2
    a = 0.5 / ta2 + 0.5 / tb2
    big = det_a.omega + det_b.omega
    b = t / tb2 + 1j * big
    norm = 1.0 / (2.0 * math.pi * det_a.tau * det_b.tau)
    return norm * math.sqrt(math.pi / a) * np.exp(b * b / (4.0 * a) - t * t / (2.0 * tb2)
                                                  - 1j * det_b.omega * t)


def _smearing(det_a: DetectorSpec, det_b: DetectorSpec):
    sb2 = 0.5 * (det_a.sigma ** 2 + det_b.sigma ** 2)
    width = 2.0 * math.sqrt(sb2) * 7.0
    return sb2, width


def smeared_signal(det_a: DetectorSpec, det_b: DetectorSpec, d: float, lam: float,
                   cfg: QuadConfig | None = None) -> SignalAmplitude:
    """Causal and acausal channel amplitudes for Gaussian detectors ``d`` apart.

    The internal-dynamics factor is fixed to ``exp(i Omega_A s + i Omega_B s')``.
    Spatial smearing is reduced exactly to the distance density ``p(r)``.  The
    lightlike part is

        causal = i lA lB int dr p(r)/r [T(r) - T(-r)],

    and the acausal part is

        acausal = -i lA lB int dt T(t) int dr p(r)/r I_Lambda(r, t),

    done as an iterated (t, r) quadrature on the closed form of ``I_Lambda``,
    with breakpoints at ``r = |t|`` for its logarithmic lightcone singularity.
    """
    cfg = cfg or QuadConfig(rel_tol=1e-6, abs_tol=1e-14)
    d = float(d)
    if not d > 0:
        raise ValueError("d must be > 0")
    lam = float(lam)
    BandRegion(lam)
    overlap = d <= 4.0 * max(det_a.sigma, det_b.sigma)
    if overlap:
        warnings.warn(f"detector smearings overlap strongly at d = {d} (<= 4 sigma)", stacklevel=2)
    coupling = det_a.coupling * det_b.coupling
    sb2, width = _smearing(det_a, det_b)
    r_lo, r_hi = max(0.0, d - width), d + width
    # r p(r)/r -> finite at 0; start slightly above zero to avoid 0/0
    r_lo = max(r_lo, 1e-300)

    def p_over_r(r):
        return distance_density(r, d, sb2) / r

    def causal_f(r):
        return p_over_r(r) * (temporal_factor(r, det_a, det_b) - temporal_factor(-r, det_a, det_b))

    def scale_f(r):
        return p_over_r(r) * (np.abs(temporal_factor(r, det_a, det_b)) + np.abs(temporal_factor(-r, det_a, det_b)))

    c_est = integrate_adaptive(causal_f, r_lo, r_hi, cfg)
    s_est = integrate_adaptive(scale_f, r_lo, r_hi, cfg)
    causal = 1j * coupling * complex(c_est.value)
    scale = abs(coupling) * s_est.real

    if math.isinf(lam):
        acausal = 0j
        a_est = QuadEstimate.exact(0.0)
    else:
        inner_cfg = cfg.with_(rel_tol=cfg.rel_tol / 10)
        stats = {"evals": 0, "ok": True}

        def inner(t):
            at = abs(float(t))
            pts = [at] if r_lo < at < r_hi else []
            est = integrate_adaptive(lambda r: p_over_r(r) * acausal_closed_form(r, at, lam),
                                     r_lo, r_hi, inner_cfg, points=pts)
            stats["evals"] += est.evaluations
            stats["ok"] &= est.converged
            return est.real

        def outer(ts):
            ts = np.asarray(ts, dtype=float)
            vals = np.array([inner(t) for t in ts])
            return temporal_factor(ts, det_a, det_b) * vals

        t2 = det_a.tau ** 2 + det_b.tau ** 2
        t_max = math.sqrt(2.0 * t2 * 40.0)
        pts = sorted({0.0, *(s * v for s in (-1, 1) for v in (r_lo, d, r_hi) if v < t_max)})
        a_est = integrate_adaptive(outer, -t_max, t_max, cfg, points=pts)
        a_est = QuadEstimate(a_est.value, a_est.abs_error, a_est.evaluations + stats["evals"],
                             a_est.converged and stats["ok"])
        acausal = -1j * coupling * complex(a_est.value)
    return SignalAmplitude(causal, acausal, causal + acausal, scale,
                           {"causal": c_est, "causal_scale": s_est, "acausal": a_est}, overlap)


def smeared_signal_mc(det_a: DetectorSpec, det_b: DetectorSpec, d: float, lam: float,
                      samples: int = 10_000_000, seed: int = 0, chunk: int = 1_000_000):
    """Monte-Carlo estimate of the acausal amplitude over all 8 variables.

    Samples ``s, s'`` from the switchings and ``x, y`` from the smearings (with
    centres ``d`` apart along z), so the estimator is the mean of
    ``-i lA lB exp(i Omega_A s + i Omega_B s') I_Lambda(|x-y|, s-s')/|x-y|``.

    Returns
    -------
    (complex, float)
        Estimate and its standard error (modulus of the complex standard error).
    """
    rng = np.random.default_rng(seed)
    remaining = int(samples)
    n_tot = 0
    s1 = 0j
    s2 = 0.0
    while remaining > 0:
        m = min(chunk, remaining)
        s = rng.normal(0.0, det_a.tau, m)
        sp = rng.normal(0.0, det_b.tau, m)
        x = rng.normal(0.0, det_a.sigma, (m, 3))
        y = rng.normal(0.0, det_b.sigma, (m, 3))
        y[:, 2] += d
        r = np.linalg.norm(x - y, axis=1)
        vals = np.exp(1j * (det_a.omega * s + det_b.omega * sp)) * acausal_closed_form(r, s - sp, lam) / r
        s1 += vals.sum()
        s2 += float(np.sum(np.abs(vals) ** 2))
        n_tot += m
        remaining -= m
    mean = s1 / n_tot
    var = max(s2 / n_tot - abs(mean) ** 2, 0.0)
    coupling = det_a.coupling * det_b.coupling
    return -1j * coupling * mean, abs(coupling) * math.sqrt(var / n_tot)
