"""Massless scalar correlators in 3+1 D and the covariant band projector.

Units: tau = 1, c = 1.  A cutoff of ``math.inf`` means no band restriction.

The band region admits four-momenta with ``|k0^2 - |k|^2| < Lambda^2``.  In the
time-ordered kernel the integration variable is ``nu = k0 + k`` (the Fourier
conjugate of ``t`` in the step-function representation), for which the
condition reads ``|nu (nu - 2k)| < Lambda^2``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np
from scipy.special import sici

from .quadrature import (
    QuadConfig,
    QuadEstimate,
    integrate_adaptive,
    integrate_panels,
    integrate_semi_infinite_oscillatory,
    integrate_sqrt_endpoint,
    uniform_zeros,
)

__all__ = [
    "BandRegion",
    "SpacetimeSeparation",
    "DetectorSpec",
    "CorrelatorValue",
    "SingularPointError",
    "InvalidBandError",
    "LIGHTCONE_ZONE",
    "in_lightcone_zone",
    "wightman_massless",
    "nu_band_intervals",
    "band_pv_exponential",
    "bandlimited_timeordered_kernel",
    "gaussian_spectrum",
    "apply_band_projector",
    "apply_band_projector_gaussian",
]

LIGHTCONE_ZONE = 1e-3
_FOUR_PI2 = 4.0 * math.pi ** 2
_EULER_GAMMA = 0.57721566490153286061


class SingularPointError(ValueError):
    """Evaluation requested on the lightcone where the kernel diverges."""


class InvalidBandError(ValueError):
    """Cutoff must be a positive number (or inf)."""


@dataclass(frozen=True)
class BandRegion:
    """Covariant cutoff ``Lambda`` (``math.inf`` for the unrestricted field)."""

    lambda_cutoff: float

    def __post_init__(self):
        lam = float(self.lambda_cutoff)
        if not lam > 0 or math.isnan(lam):
            raise InvalidBandError(f"cutoff must be > 0, got {self.lambda_cutoff!r}")
        object.__setattr__(self, "lambda_cutoff", lam)

    @property
    def unbounded(self) -> bool:
        return math.isinf(self.lambda_cutoff)

    def admits(self, k0, k):
        """Indicator of ``|k0^2 - k^2| < Lambda^2``; even in both arguments."""
        k0 = np.asarray(k0, dtype=float)
        k = np.asarray(k, dtype=float)
        if self.unbounded:
            return np.ones(np.broadcast(k0, k).shape)
        return (np.abs(k0 * k0 - k * k) < self.lambda_cutoff ** 2).astype(float)

    def admits_nu(self, nu, k):
        """Same indicator in the shifted variable ``nu = k0 + k``."""
        nu = np.asarray(nu, dtype=float)
        k = np.asarray(k, dtype=float)
        return self.admits(nu - k, k)

    def project(self, spectrum: Callable) -> Callable:
        """Multiply a Fourier-domain function ``spectrum(k0, k)`` by the band indicator."""
        def projected(k0, k):
            return spectrum(k0, k) * self.admits(k0, k)
        return projected


@dataclass(frozen=True)
class SpacetimeSeparation:
    """Time difference ``t``, spatial distance ``r > 0`` and Wightman regulator ``epsilon``."""

    t: float
    r: float
    epsilon: float = 0.0

    def __post_init__(self):
        if not self.r > 0:
            raise ValueError(f"r must be > 0, got {self.r}")
        if not self.epsilon >= 0:
            raise ValueError(f"epsilon must be >= 0, got {self.epsilon}")


@dataclass(frozen=True)
class DetectorSpec:
    """Gaussian Unruh-DeWitt detector.

    Switching ``chi(t) = exp(-t^2/(2 tau^2)) / sqrt(2 pi tau^2)`` and smearing
    ``F(x) = exp(-|x - center|^2/(2 sigma^2)) / (2 pi sigma^2)^(3/2)``.
    """

    omega: float = 0.0
    tau: float = 1.0
    sigma: float = 0.5
    coupling: float = 1.0
    center: tuple[float, float, float] = (0.0, 0.0, 0.0)

    def __post_init__(self):
        if not self.tau > 0:
            raise ValueError(f"tau must be > 0, got {self.tau}")
        if not self.sigma > 0:
            raise ValueError(f"sigma must be > 0, got {self.sigma}")
        if not self.omega >= 0:
            raise ValueError(f"omega must be >= 0, got {self.omega}")
        object.__setattr__(self, "center", tuple(float(c) for c in self.center))


@dataclass(frozen=True)
class CorrelatorValue:
    value: complex
    estimate: QuadEstimate


def in_lightcone_zone(t: float, r: float) -> bool:
    return abs(abs(t) - r) <= LIGHTCONE_ZONE * max(r, 1.0)


def wightman_massless(sep: SpacetimeSeparation) -> complex:
    """Vacuum Wightman function ``D+(t, r) = 1 / (4 pi^2 (r^2 - (t - i eps)^2))``.

    Raises
    ------
    SingularPointError
        On the lightcone ``|t| = r`` with ``epsilon = 0``.
    """
    t, r, eps = float(sep.t), float(sep.r), float(sep.epsilon)
    if eps == 0.0 and abs(t) == r:
        raise SingularPointError(f"D+ diverges on the lightcone (t={t}, r={r})")
    s = complex(t, -eps)
    return 1.0 / (_FOUR_PI2 * (r * r - s * s))


def nu_band_intervals(k: float, band: BandRegion) -> list[tuple[float, float]]:
    """Admissible ``nu`` set ``{|nu (nu - 2k)| < Lambda^2}`` as disjoint closed intervals.

    Examples
    --------
    >>> nu_band_intervals(0.0, BandRegion(1.0))
    [(-1.0, 1.0)]
    """
    if not isinstance(band, BandRegion):
        band = BandRegion(band)
    k = float(k)
    if k < 0:
        raise ValueError(f"k must be >= 0, got {k}")
    lam = band.lambda_cutoff
    if band.unbounded:
        return [(-math.inf, math.inf)]
    outer = math.hypot(k, lam)
    lo, hi = k - outer, k + outer
    if k <= lam:
        return [(lo, hi)]
    inner = math.sqrt((k - lam) * (k + lam))
    rho_minus = lam * lam / (k + inner)
    return [(lo, rho_minus), (k + inner, hi)]


def _cin(x):
    """Entire cosine integral ``Cin(x) = gamma + ln x - Ci(x)`` for x >= 0."""
    x = np.asarray(x, dtype=float)
    out = np.empty_like(x)
    small = x < 1.0
    xs = x[small]
    term = xs * xs / 4.0
    acc = term.copy()
    x2 = xs * xs
    for n in range(2, 12):
        term = -term * x2 * (2 * n - 2) / ((2 * n - 1) * (2 * n) * (2 * n))
        acc += term
    out[small] = acc
    xl = x[~small]
    out[~small] = _EULER_GAMMA + np.log(xl) - sici(xl)[1]
    return out


def _exp_over_nu(lo, hi, t, straddles: bool):
    """``int_lo^hi exp(i nu t)/nu d nu`` (principal value when lo < 0 < hi)."""
    lo = np.asarray(lo, dtype=float)
    hi = np.asarray(hi, dtype=float)
    alo = np.abs(lo)
    log_part = np.log(hi / alo)
    if t == 0.0:
        return log_part + 0j
    at = abs(t)
    re = log_part - _cin(hi * at) + _cin(alo * at)
    si_hi = sici(hi * at)[0]
    si_lo = sici(alo * at)[0]
    im = (si_hi + si_lo) if straddles else (si_hi - si_lo)
    return re + 1j * math.copysign(1.0, t) * im


def _band_pieces(k, lam):
    """Stable interval endpoints for an array of k > Lambda (near and far piece)."""
    k = np.asarray(k, dtype=float)
    outer = np.hypot(k, lam)
    inner = np.sqrt((k - lam) * (k + lam))
    neg = lam * lam / (k + outer)          # |k - outer|
    rho_minus = lam * lam / (k + inner)
    return -neg, rho_minus, k + inner, k + outer


def band_pv_exponential(k, t: float, band: BandRegion, split: bool = False):
    """``P.V. int_band exp(i nu t)/nu d nu`` over ``nu_band_intervals(k)``, vectorized in k.

    With ``split=True`` (requires every k > Lambda) returns the near-zero piece
    and the piece around ``nu = 2k`` separately, the latter with its carrier
    ``exp(2ikt)`` removed.
    """
    k = np.atleast_1d(np.asarray(k, dtype=float))
    lam = band.lambda_cutoff
    if band.unbounded:
        return np.full(k.shape, 1j * math.pi * np.sign(t))
    if split:
        if np.any(k <= lam):
            raise ValueError("split form needs k > Lambda")
        lo, rm, rp, hi = _band_pieces(k, lam)
        near = _exp_over_nu(lo, rm, t, True)
        far = _exp_over_nu(rp, hi, t, False) * np.exp(-2j * k * t)
        return near, far
    outer = np.hypot(k, lam)
    lo = -lam * lam / (k + outer)
    out = _exp_over_nu(lo, k + outer, t, True)
    gap = k > lam
    if np.any(gap):
        kg = k[gap]
        inner = np.sqrt((kg - lam) * (kg + lam))
        out[gap] -= _exp_over_nu(lam * lam / (kg + inner), kg + inner, t, False)
    return out


def _pv_part(t: float, r: float, eps: float, lam: float, cfg: QuadConfig) -> QuadEstimate:
    """Principal-value half of K: ``(1/4pi^2 r) int dk sin(kr) e^{-ik(t - i eps)} J(k)/(2 pi i)``."""
    band = BandRegion(lam)
    pref = 1.0 / (_FOUR_PI2 * r * 2j * math.pi)

    def full(k):
        return np.sin(k * r) * np.exp(-1j * k * t - eps * k) * band_pv_exponential(k, t, band)

    a_minus = abs(r - t)
    a_plus = abs(r + t)
    a_min = min(a_minus, a_plus)
    a_max = max(a_minus, a_plus)
    k0 = max(4.0 * lam, 2.0 * lam * math.sqrt(abs(t) / a_min), 8.0 * math.pi / a_min)
    # Head: [0, Lambda] plus sqrt-substituted start past the kink, then chunks.
    head = integrate_adaptive(full, 0.0, lam, cfg)
    step = 4.0 * math.pi / a_max
    k1 = min(lam + step, k0)
    head = head + integrate_sqrt_endpoint(full, lam, k1, cfg)
    if k0 > k1:
        n = int(math.ceil((k0 - k1) / step))
        head = head + integrate_panels(full, np.linspace(k1, k0, n + 1), cfg)

    def comp(sign_r):
        alpha = r - t if sign_r > 0 else r + t

        def f(k):
            near, far = band_pv_exponential(k, t, band, split=True)
            damp = np.exp(-eps * k)
            if sign_r > 0:
                return (np.exp(1j * k * alpha) * near - np.exp(-1j * k * alpha) * far) * damp / 2j
            return (np.exp(1j * k * alpha) * far - np.exp(-1j * k * alpha) * near) * damp / 2j

        spacing = math.pi / max(abs(alpha), 1e-300)
        if eps > 0:
            spacing = min(spacing, 2.0 / eps)
        return integrate_semi_infinite_oscillatory(f, uniform_zeros(k0, spacing), k0, tail_cfg)

    tail_cfg = cfg.with_(abs_tol=max(cfg.abs_tol, 0.1 * cfg.rel_tol * abs(head.value)))
    tail = comp(+1) + comp(-1)
    return (head + tail).scaled(pref)


def bandlimited_timeordered_kernel(sep: SpacetimeSeparation, band: BandRegion,
                                   cfg: QuadConfig | None = None) -> CorrelatorValue:
    """Band-projected time-ordered Wightman kernel ``K_Lambda(t, r)``.

    The step function is written as ``(1/2 pi i) int d nu e^{i nu t}/(nu - i0)``
    and split into ``P.V.(1/nu) + i pi delta(nu)``.  The delta part gives
    ``D+/2`` for every cutoff because ``nu = 0`` always lies in the band.  The
    principal-value part restricts ``nu`` to ``nu_band_intervals(k)``; its inner
    integral has a closed form in sine and cosine integrals, and the outer
    k-integral is done by quadrature with an accelerated lobe-summed tail.

    Near the lightcone with ``epsilon = 0`` the principal-value part is
    extrapolated linearly from ``epsilon = 1e-2 r`` and ``1e-3 r``.
    """
    cfg = cfg or QuadConfig()
    t, r, eps = float(sep.t), float(sep.r), float(sep.epsilon)
    if eps == 0.0 and abs(t) == r:
        raise SingularPointError(f"K diverges on the lightcone (t={t}, r={r})")
    half_d = 0.5 * wightman_massless(sep)
    if band.unbounded:
        value = half_d * (1.0 + np.sign(t))
        return CorrelatorValue(complex(value), QuadEstimate(complex(value), 0.0, 0, True))
    if eps == 0.0 and in_lightcone_zone(t, r):
        e1, e2 = 1e-2 * r, 1e-3 * r
        p1 = _pv_part(t, r, e1, band.lambda_cutoff, cfg)
        p2 = _pv_part(t, r, e2, band.lambda_cutoff, cfg)
        w = e2 / (e1 - e2)
        value = p2.value + (p2.value - p1.value) * w
        pv = QuadEstimate(value, p2.abs_error * (1 + w) + p1.abs_error * w + abs(p2.value - p1.value),
                          p1.evaluations + p2.evaluations, p1.converged and p2.converged)
    else:
        pv = _pv_part(t, r, eps, band.lambda_cutoff, cfg)
    total = complex(pv.value) + half_d
    est = QuadEstimate(total, pv.abs_error, pv.evaluations, pv.converged)
    return CorrelatorValue(total, est)


def gaussian_spectrum(width: float) -> Callable:
    """4-D Fourier transform of ``f(t, x) = exp(-(t^2 + |x|^2)/(2 w^2))``."""
    w2 = float(width) ** 2
    pref = (2.0 * math.pi * w2) ** 2

    def spectrum(k0, k):
        return pref * np.exp(-0.5 * w2 * (np.asarray(k0) ** 2 + np.asarray(k) ** 2))
    return spectrum


def apply_band_projector(spectrum: Callable, x: tuple[float, float], band: BandRegion,
                         k_max: float, cfg: QuadConfig | None = None) -> float:
    """Inverse Fourier transform of ``spectrum`` restricted to the band, at ``x = (t, r)``.

    ``spectrum(k0, k)`` must be even in ``k0`` and depend on the spatial
    momentum only through ``k = |k|``; it is assumed negligible beyond
    ``k_max`` in both variables.  The integral is iterated: the inner k0
    integral runs over ``sqrt(max(0, k^2 - Lambda^2)) < |k0| < sqrt(k^2 + Lambda^2)``.
    """
    cfg = cfg or QuadConfig(rel_tol=1e-10, abs_tol=1e-14)
    t, r = (float(v) for v in x)
    lam = band.lambda_cutoff

    def k0_limits(k):
        if band.unbounded:
            return 0.0, k_max
        lo = math.sqrt(max(0.0, (k - lam) * (k + lam)))
        return lo, min(math.sqrt(k * k + lam * lam), k_max)

    def inner(k):
        lo, hi = k0_limits(k)
        if hi <= lo:
            return 0.0
        est = integrate_adaptive(lambda q: np.cos(q * t) * spectrum(q, np.full_like(q, k)), lo, hi, cfg)
        return 2.0 * est.real

    def radial(kk):
        kk = np.asarray(kk, dtype=float)
        j0 = np.sinc(kk * r / math.pi)
        vals = np.array([inner(k) for k in kk])
        return kk * kk * j0 * vals

    pts = [lam] if (not band.unbounded and lam < k_max) else []
    est = integrate_adaptive(radial, 0.0, k_max, cfg, points=pts)
    # (2 pi)^-4 from the transform, 4 pi from the angular integral.
    return est.real * 4.0 * math.pi / (2.0 * math.pi) ** 4


def apply_band_projector_gaussian(width: float, x: tuple[float, float], band: BandRegion,
                                  cfg: QuadConfig | None = None, passes: int = 1) -> float:
    """``Pi_Lambda[f](x)`` for the 4-D Gaussian of ``gaussian_spectrum(width)``.

    ``passes`` applies the band indicator repeatedly in the Fourier domain,
    which must leave the result unchanged.
    """
    spec = gaussian_spectrum(width)
    for _ in range(passes):
        spec = band.project(spec)
    k_max = math.sqrt(2.0 * 40.0) / float(width)
    return apply_band_projector(spec, x, band, k_max, cfg)
