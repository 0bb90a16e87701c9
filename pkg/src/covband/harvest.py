"""Entanglement harvesting with two identical Gaussian detectors.

With unit-area Gaussian switching and smearing, the local term is

    L = lambda^2/(4 pi^2) int_0^inf k exp(-sigma^2 k^2) exp(-tau^2 (k + Omega)^2) dk

and the nonlocal term factorizes as ``M = exp(-tau^2 Omega^2) * M_s(r)`` with

    M_s = -lambda^2/(2 pi^2 r) int_0^inf exp(-sigma^2 k^2) sin(k r) Q(k) dk,
    Q(k) = (1/2 pi i) P.V. int_band exp(-tau^2 (nu - k)^2)/nu d nu + exp(-tau^2 k^2)/2.

The band enters only through ``Q``.  Without a cutoff the principal value is a
Dawson function and ``Q = exp(-tau^2 k^2)/2 - i F(tau k)/sqrt(pi)``.

Large gaps underflow ``exp(-tau^2 Omega^2)`` (Omega = 40 gives e^-1600), so the
sign-bearing quantities are carried scaled by ``exp(+tau^2 Omega^2)`` with
``log_scale = -tau^2 Omega^2`` alongside.
"""

from __future__ import annotations

import functools
import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from scipy.special import dawsn, erfcx

from .field import BandRegion, DetectorSpec, nu_band_intervals
from .quadrature import (
    PVSpec,
    QuadConfig,
    QuadEstimate,
    gauss_kronrod_nodes,
    integrate_adaptive,
    integrate_principal_value,
)

__all__ = [
    "HarvestPoint",
    "BoundaryResult",
    "MCEstimate",
    "BoundaryNotFoundError",
    "local_noise",
    "local_noise_scaled",
    "local_noise_closed_form",
    "q_factor",
    "nonlocal_M",
    "nonlocal_M_infinite",
    "nonlocal_M_scaled",
    "monte_carlo_M_oracle",
    "negativity",
    "harvest_point",
    "harvesting_boundary",
    "range_difference",
    "range_difference_detail",
    "default_scan",
]

_GAUSS_REACH = 8.5      # exp(-8.5^2) ~ 3e-32: Gaussian window half-width in units of 1/tau
_SMEAR_REACH = 6.5      # exp(-6.5^2) ~ 5e-19: k cut-off in units of 1/sigma


class BoundaryNotFoundError(RuntimeError):
    """No outermost sign change of N2 on the scan grid."""

    def __init__(self, message: str, n2_min: float, n2_max: float):
        super().__init__(message)
        self.n2_min = n2_min
        self.n2_max = n2_max


@dataclass(frozen=True)
class HarvestPoint:
    """Negativity ingredients at one separation.

    ``L``, ``M``, ``N2``, ``N`` are physical values (they may underflow to 0 at
    large gaps); the ``*_scaled`` fields are multiplied by ``exp(-log_scale)``.
    """

    r: float
    omega: float
    lambda_cutoff: float
    L: float
    M: complex
    N2: float
    N: float
    estimates: tuple = ()
    log_scale: float = 0.0
    L_scaled: float = 0.0
    M_scaled: complex = 0j
    N2_scaled: float = 0.0


@dataclass(frozen=True)
class BoundaryResult:
    omega: float
    lambda_cutoff: float
    r_star: float
    bracket: tuple[float, float]
    iterations: int
    scan_points: int
    n2_bracket: tuple[float, float] = (math.nan, math.nan)


@dataclass(frozen=True)
class MCEstimate:
    value: complex
    stderr_re: float
    stderr_im: float
    samples: int

    @property
    def stderr(self) -> float:
        return math.hypot(self.stderr_re, self.stderr_im)


def _cutoff(lam) -> float:
    lam = float(lam)
    BandRegion(lam)
    return lam


# ----------------------------------------------------------------------------- local noise

def local_noise_scaled(det: DetectorSpec, cfg: QuadConfig | None = None) -> QuadEstimate:
    """``L * exp(tau^2 Omega^2)`` by adaptive quadrature (never consults a cutoff)."""
    cfg = cfg or QuadConfig(rel_tol=1e-12, abs_tol=1e-300)
    s2, t2, om = det.sigma ** 2, det.tau ** 2, det.omega
    a = s2 + t2
    b = 2.0 * t2 * om
    k_max = (math.sqrt(b * b + 4.0 * a * 45.0) - b) / (2.0 * a)
    peak = 1.0 / (b + math.sqrt(b * b + 8.0 * a)) * 2.0

    def f(k):
        return k * np.exp(-a * k * k - b * k)

    est = integrate_adaptive(f, 0.0, k_max, cfg, points=[p for p in (peak, 4 * peak) if p < k_max])
    return est.scaled(det.coupling ** 2 / (4.0 * math.pi ** 2))


def local_noise(det: DetectorSpec, cfg: QuadConfig | None = None) -> float:
    """Local noise ``L`` of a single Gaussian detector."""
    est = local_noise_scaled(det, cfg)
    return est.real * math.exp(-det.tau ** 2 * det.omega ** 2)


def local_noise_closed_form(det: DetectorSpec, scaled: bool = True) -> float:
    """Same integral through ``erfcx``; kept as an oracle for ``local_noise``."""
    a = det.sigma ** 2 + det.tau ** 2
    b = 2.0 * det.tau ** 2 * det.omega
    val = 1.0 / (2.0 * a) - b * math.sqrt(math.pi) / (4.0 * a ** 1.5) * erfcx(b / (2.0 * math.sqrt(a)))
    val *= det.coupling ** 2 / (4.0 * math.pi ** 2)
    if not scaled:
        val *= math.exp(-det.tau ** 2 * det.omega ** 2)
    return val


# ----------------------------------------------------------------------------- Q(k)

def _q_pv(k: float, lam: float, tau: float, cfg: QuadConfig) -> QuadEstimate:
    """``P.V. int_band exp(-tau^2 (nu-k)^2)/nu d nu``, clipped to the Gaussian window."""
    reach = _GAUSS_REACH / tau
    w_lo, w_hi = k - reach, k + reach

    def g(nu):
        return np.exp(-(tau * (nu - k)) ** 2) / nu

    total = QuadEstimate.exact(0.0)
    for lo, hi in nu_band_intervals(k, BandRegion(lam)):
        lo, hi = max(lo, w_lo), min(hi, w_hi)
        if hi <= lo:
            continue
        if lo < 0.0 < hi:
            total = total + integrate_principal_value(g, PVSpec(0.0, (lo, hi)), cfg)
        else:
            total = total + integrate_adaptive(g, lo, hi, cfg)
    return total


def q_factor(k, lam, tau: float = 1.0, cfg: QuadConfig | None = None):
    """``Q_Lambda(k)`` for an array of k; returns ``(values, abs_errors)``."""
    k = np.atleast_1d(np.asarray(k, dtype=float))
    lam = _cutoff(lam)
    half = 0.5 * np.exp(-(tau * k) ** 2)
    if math.isinf(lam):
        return half - 1j * dawsn(tau * k) / math.sqrt(math.pi), np.zeros(k.shape)
    cfg = cfg or QuadConfig(rel_tol=1e-11, abs_tol=1e-15)
    vals = np.empty(k.shape, dtype=complex)
    errs = np.empty(k.shape)
    for i, kk in enumerate(k):
        est = _q_pv(float(kk), lam, tau, cfg)
        vals[i] = half[i] + complex(est.value) / (2j * math.pi)
        errs[i] = est.abs_error / (2.0 * math.pi)
    return vals, errs


@dataclass(frozen=True)
class _KGrid:
    k: np.ndarray
    wk: np.ndarray
    wg: np.ndarray
    q: np.ndarray
    qerr: np.ndarray


def _panel_nodes(edges, sqrt_start: float | None = None):
    """Kronrod/Gauss nodes and weights over consecutive panels.

    A panel starting at ``sqrt_start`` uses ``k = sqrt_start + u^2`` to absorb
    the square-root kink of Q there.
    """
    x, wk, wg = gauss_kronrod_nodes()
    ks, wks, wgs = [], [], []
    for lo, hi in zip(edges[:-1], edges[1:]):
        if sqrt_start is not None and lo == sqrt_start:
            top = math.sqrt(hi - lo)
            u = 0.5 * top * (x + 1.0)
            ks.append(lo + u * u)
            wks.append(wk * 0.5 * top * 2.0 * u)
            wgs.append(wg * 0.5 * top * 2.0 * u)
        else:
            h = 0.5 * (hi - lo)
            ks.append(lo + h * (x + 1.0))
            wks.append(wk * h)
            wgs.append(wg * h)
    return np.concatenate(ks), np.concatenate(wks), np.concatenate(wgs)


def _uniform_edges(lo: float, hi: float, h: float):
    n = max(1, int(math.ceil((hi - lo) / h)))
    return list(np.linspace(lo, hi, n + 1))


@functools.lru_cache(maxsize=64)
def _k_grid(lam: float, tau: float, sigma: float, r_bucket: float, resolution: int) -> _KGrid:
    k_max = _SMEAR_REACH / sigma
    h = 2.0 * math.pi / r_bucket / resolution
    if math.isinf(lam) or lam >= k_max:
        k, wk, wg = _panel_nodes(_uniform_edges(0.0, k_max, h))
    else:
        left = _uniform_edges(0.0, lam, h)
        first = min(lam + h, k_max)
        right = [lam] + _uniform_edges(first, k_max, h) if first < k_max else [lam, k_max]
        kl, wkl, wgl = _panel_nodes(left)
        kr, wkr, wgr = _panel_nodes(right, sqrt_start=lam)
        k, wk, wg = np.concatenate([kl, kr]), np.concatenate([wkl, wkr]), np.concatenate([wgl, wgr])
    tol = 10.0 ** (-11 - 2 * (resolution - 1))
    q, qerr = q_factor(k, lam, tau, QuadConfig(rel_tol=tol, abs_tol=tol * 1e-4))
    for arr in (k, wk, wg, q, qerr):
        arr.setflags(write=False)
    return _KGrid(k, wk, wg, q, qerr)


def _r_bucket(r_max: float) -> float:
    return float(2.0 ** math.ceil(math.log2(max(r_max, 16.0))))


def nonlocal_M_scaled(r, lam, det: DetectorSpec, resolution: int = 1, r_max: float | None = None):
    """``M * exp(tau^2 Omega^2)`` at one or many separations.

    Returns ``(values, abs_errors)`` as arrays shaped like ``r``.  The error is the
    Kronrod-minus-Gauss difference plus the propagated error of Q on the nodes.
    """
    r_arr = np.atleast_1d(np.asarray(r, dtype=float))
    if np.any(r_arr <= 0):
        raise ValueError("r must be > 0")
    lam = _cutoff(lam)
    bucket = _r_bucket(r_max if r_max is not None else float(r_arr.max()))
    if r_arr.max() > bucket:
        bucket = _r_bucket(float(r_arr.max()))
    grid = _k_grid(lam, float(det.tau), float(det.sigma), bucket, int(resolution))
    damp = np.exp(-(det.sigma * grid.k) ** 2)
    sines = np.sin(np.outer(r_arr, grid.k)) * damp
    fk = sines @ (grid.wk * grid.q)
    fg = sines @ (grid.wg * grid.q)
    ferr = np.abs(fk - fg) + np.abs(sines) @ (np.abs(grid.wk) * grid.qerr)
    pref = -det.coupling ** 2 / (2.0 * math.pi ** 2 * r_arr)
    vals = pref * fk
    errs = np.abs(pref) * ferr
    shape = np.shape(r)
    return vals.reshape(shape), errs.reshape(shape)


def nonlocal_M(r: float, omega: float, lam, det: DetectorSpec, cfg: QuadConfig | None = None,
               resolution: int = 1) -> complex:
    """Nonlocal matrix element ``M_Lambda(r)`` for gap ``omega``.

    ``lam = math.inf`` dispatches to :func:`nonlocal_M_infinite`.  The detector's
    own ``omega`` field is ignored in favour of the explicit argument.
    """
    lam = _cutoff(lam)
    if math.isinf(lam):
        return nonlocal_M_infinite(r, omega, det, cfg, resolution)
    val, _ = nonlocal_M_scaled(float(r), lam, det, resolution)
    return complex(val) * math.exp(-(det.tau * omega) ** 2)


def nonlocal_M_infinite(r: float, omega: float, det: DetectorSpec, cfg: QuadConfig | None = None,
                        resolution: int = 1) -> complex:
    """``M`` without the cutoff (Dawson-function principal value)."""
    val, _ = nonlocal_M_scaled(float(r), math.inf, det, resolution)
    return complex(val) * math.exp(-(det.tau * omega) ** 2)


# ----------------------------------------------------------------------------- Monte Carlo

def monte_carlo_M_oracle(r: float, omega: float, lam, det: DetectorSpec, samples: int = 1_000_000,
                         seed: int = 0, chunk: int = 250_000) -> MCEstimate:
    """Importance-sampled estimate of ``M`` from the unreduced (s, s', k, nu) integral.

    ``s, s'`` are drawn from the switching Gaussians, ``k`` from the half-normal
    ``~ exp(-sigma^2 k^2)`` and ``nu`` uniformly on ``[0, nu_max(k)]`` of the band.
    The principal value is symmetrized: on ``0 < nu < m`` (``m`` the negative
    reach of the band) the pair gives ``2i sin(nu u)/nu``; beyond ``m`` the
    integrand is ``exp(i nu u)/nu`` outside the band hole.  The delta part gives
    ``exp(-iku)/2`` exactly.  Without a cutoff the nu integral is ``i pi sgn(u)``.
    """
    if samples < 100_000:
        raise ValueError("samples must be >= 1e5")
    lam = _cutoff(lam)
    rng = np.random.default_rng(seed)
    tau, sig = det.tau, det.sigma
    c_k = math.sqrt(math.pi) / (2.0 * sig)
    pref = -2.0 * det.coupling ** 2 * c_k / (4.0 * math.pi ** 2)
    acc = np.zeros(2)
    acc2 = np.zeros(2)
    done = 0
    while done < samples:
        n = min(chunk, samples - done)
        s = rng.normal(0.0, tau, n)
        sp = rng.normal(0.0, tau, n)
        k = np.abs(rng.normal(0.0, 1.0 / (math.sqrt(2.0) * sig), n))
        u = s - sp
        base = np.exp(1j * omega * (s + sp)) * k * np.sinc(k * r / math.pi) * np.exp(-1j * k * u)
        if math.isinf(lam):
            step = 0.5 + 0.5 * np.sign(u)
        else:
            outer = np.hypot(k, lam)
            m = lam * lam / (k + outer)
            hi = k + outer
            nu = rng.uniform(0.0, 1.0, n) * hi
            gap = k > lam
            inner = np.sqrt(np.where(gap, (k - lam) * (k + lam), 0.0))
            rho_m = np.where(gap, lam * lam / (k + inner), np.inf)
            rho_p = np.where(gap, k + inner, -np.inf)
            in_hole = gap & (nu > rho_m) & (nu < rho_p)
            with np.errstate(divide="ignore", invalid="ignore"):
                near = 2j * np.sin(nu * u) / nu
                far = np.exp(1j * nu * u) / nu
            pv = hi * np.where(nu < m, near, np.where(in_hole, 0.0, far))
            step = 0.5 + pv / (2j * math.pi)
        vals = pref * base * step
        acc += [vals.real.sum(), vals.imag.sum()]
        acc2 += [np.square(vals.real).sum(), np.square(vals.imag).sum()]
        done += n
    mean = acc / samples
    var = np.maximum(acc2 / samples - mean ** 2, 0.0)
    se = np.sqrt(var / samples)
    return MCEstimate(complex(mean[0], mean[1]), float(se[0]), float(se[1]), int(samples))


# ----------------------------------------------------------------------------- negativity

def negativity(L_aa: float, L_bb: float, M: complex) -> tuple[float, float]:
    """``N2 = -(L_aa + L_bb - sqrt((L_aa - L_bb)^2 + 4|M|^2))/2`` and ``N = max(0, N2)``."""
    if L_aa < 0 or L_bb < 0:
        raise ValueError(f"local noise terms must be >= 0, got {L_aa}, {L_bb}")
    m = abs(M)
    if L_aa == L_bb:
        n2 = m - L_aa
    else:
        n2 = -0.5 * (L_aa + L_bb - math.sqrt((L_aa - L_bb) ** 2 + 4.0 * m * m))
    return n2, max(0.0, n2)


def harvest_point(r: float, lam, det: DetectorSpec, resolution: int = 1) -> HarvestPoint:
    """L, M and negativity for identical detectors with gap ``det.omega``."""
    lam = _cutoff(lam)
    l_est = local_noise_scaled(det)
    m_val, m_err = nonlocal_M_scaled(float(r), lam, det, resolution)
    m_val = complex(m_val)
    log_scale = -(det.tau * det.omega) ** 2
    scale = math.exp(log_scale)
    l_s = l_est.real
    n2_s = abs(m_val) - l_s
    L = l_s * scale
    M = m_val * scale
    n2, n = negativity(L, L, M)
    m_est = QuadEstimate(m_val, float(m_err), 0, True)
    return HarvestPoint(float(r), float(det.omega), lam, L, M, n2, n, (l_est, m_est),
                        log_scale, l_s, m_val, n2_s)


# ----------------------------------------------------------------------------- boundary

def default_scan(omega: float, det: DetectorSpec) -> tuple[float, float, int]:
    """Scan ``[4 sigma, r_hi]`` with step ~0.25 where ``r_hi`` comfortably exceeds ``2 Omega``."""
    r_lo = 4.0 * det.sigma
    r_hi = max(24.0, 3.0 * omega + 20.0)
    return r_lo, r_hi, int(math.ceil((r_hi - r_lo) / 0.25)) + 1


def harvesting_boundary(omega: float, lam, det: DetectorSpec, r_scan: Sequence | None = None,
                        cfg: QuadConfig | None = None, rel_width: float = 1e-4,
                        resolution: int = 1) -> BoundaryResult:
    """Largest separation ``r*`` at which the detectors still harvest entanglement.

    Scans ``N2`` on ``r_scan = (r_min, r_max, n)``, takes the outermost sign change
    (positive to non-positive), and bisects it to relative width ``rel_width``.

    Raises
    ------
    BoundaryNotFoundError
        If the scan shows no such sign change.
    """
    lam = _cutoff(lam)
    det = DetectorSpec(omega, det.tau, det.sigma, det.coupling, det.center)
    r_min, r_max, n = r_scan if r_scan is not None else default_scan(omega, det)
    n = int(n)
    if r_min < 4.0 * det.sigma * (1 - 1e-12):
        raise ValueError(f"r_min must be >= 4 sigma = {4 * det.sigma}, got {r_min}")
    if n < 8:
        raise ValueError("scan needs at least 8 points")
    l_s = local_noise_scaled(det).real

    def n2(rv):
        m, _ = nonlocal_M_scaled(rv, lam, det, resolution, r_max=r_max)
        return np.abs(m) - l_s

    rs = np.linspace(r_min, r_max, n)
    vals = n2(rs)
    idx = np.flatnonzero((vals[:-1] > 0) & (vals[1:] <= 0))
    if idx.size == 0:
        raise BoundaryNotFoundError(
            f"no harvesting boundary on [{r_min}, {r_max}] (Omega={omega}, Lambda={lam})",
            float(vals.min()), float(vals.max()))
    i = int(idx[-1])
    lo, hi = float(rs[i]), float(rs[i + 1])
    f_lo, f_hi = float(vals[i]), float(vals[i + 1])
    it = 0
    while hi - lo > rel_width * 0.5 * (lo + hi):
        mid = 0.5 * (lo + hi)
        f_mid = float(n2(mid))
        if f_mid > 0:
            lo, f_lo = mid, f_mid
        else:
            hi, f_hi = mid, f_mid
        it += 1
    return BoundaryResult(float(omega), lam, 0.5 * (lo + hi), (lo, hi), it, n, (f_lo, f_hi))


def range_difference_detail(omega: float, lam, det: DetectorSpec, cfg: QuadConfig | None = None,
                            r_scan: Sequence | None = None, rel_width: float = 1e-7,
                            resolution: int = 1) -> tuple[BoundaryResult, BoundaryResult]:
    """Boundaries with cutoff ``lam`` and without; see :func:`range_difference`.

    The default bracket is far tighter than for a single boundary: differences
    can be a few 1e-3 at r* ~ 40, below a 1e-4 relative bracket.
    """
    b_lam = harvesting_boundary(omega, lam, det, r_scan, cfg, rel_width, resolution)
    b_inf = harvesting_boundary(omega, math.inf, det, r_scan, cfg, rel_width, resolution)
    return b_lam, b_inf


def range_difference(omega: float, lam, det: DetectorSpec, cfg: QuadConfig | None = None,
                     r_scan: Sequence | None = None, rel_width: float = 1e-7,
                     resolution: int = 1) -> float:
    """``r*(Omega, Lambda) - r*(Omega, inf)``."""
    b_lam, b_inf = range_difference_detail(omega, lam, det, cfg, r_scan, rel_width, resolution)
    return b_lam.r_star - b_inf.r_star
