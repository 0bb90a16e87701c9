"""Numerics for a massless scalar field under a covariant (Lorentz-invariant) UV cutoff.

Modules
-------
quadrature
    Adaptive Gauss-Kronrod, oscillatory-tail, principal-value and
    square-root-endpoint integrators.
field
    Wightman function, band intervals, band-projected time-ordered kernel.
comm
    Acausal signalling term ``I_Lambda`` and smeared two-detector amplitude.
harvest
    Local noise, nonlocal term, negativity and harvesting boundaries.
cli
    Batch sweeps with CSV/JSON output and caching.
"""

__version__ = "0.1.0"
