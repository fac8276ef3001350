"""Bessel J_mu, I_mu and the scaled variants z^{-mu} J_mu(z), z^{-mu} I_mu(z).

Every kernel formula downstream is built from these few functions. Orders
are restricted to mu >= -1/2, the range on which z^{-mu} J_mu(z) stays
bounded on (0, inf). The scaled variants evaluate by power series through
z = 0, where the common limit is 1/(2^mu Gamma(mu+1)), and by scipy's
routines away from 0. Half-integer orders -1/2 and 1/2 short-circuit to
closed trigonometric/hyperbolic forms in the cancellation-free
combinations; these are the exact oracles for every alpha = 0 reduction.

Derivative relations used by the test-suite cross checks:

    d/dz [z^-mu J_mu(z)] = -z * (z^-(mu+1) J_{mu+1}(z))
    d/dz [z^-mu I_mu(z)] = +z * (z^-(mu+1) I_{mu+1}(z))
"""

import numpy as np
from scipy import special as sp

__all__ = [
    "bessel_j",
    "bessel_i",
    "scaled_j",
    "scaled_i",
    "scaled_i_exp",
    "scaled_limit_at_zero",
]

# Below this argument the power series takes over for the scaled variants.
# At z = 0.5 the 14-term tail is ~ (z^2/4)^14 / 14! ~ 1e-28, far below
# double roundoff, so the crossover cannot be felt by the derivative tests.
_SERIES_CROSSOVER = 0.5
_SERIES_TERMS = 14

# scipy's ive returns NaN past z ~ 1.8e9; from z = 1e6 the three-term
# large-argument expansion of e^-z I_mu(z) already agrees with ive to the
# last bit for every order this package uses (mu <= 4.5), so switch early.
_ASYMPTOTIC_CROSSOVER = 1e6

_SQRT_2_OVER_PI = np.sqrt(2.0 / np.pi)


def _check_order(mu):
    mu = float(mu)
    if not np.isfinite(mu) or mu < -0.5:
        raise ValueError("order mu must be finite and >= -1/2, got %r" % mu)
    return mu


def _check_arg(z):
    z = np.asarray(z, dtype=float)
    if not np.all(np.isfinite(z)):
        raise ValueError("argument z must be finite")
    if np.any(z < 0):
        raise ValueError("argument z must be >= 0")
    return z


def _is(mu, value):
    return abs(mu - value) < 1e-14


def _scalar_like(out, z_in):
    if np.ndim(z_in) == 0:
        return float(out.reshape(())[()])
    return out


def _series_scaled(mu, z, sign):
    # sum_k (sign)^k (z^2/4)^k / (k! Gamma(mu+k+1)), times 2^-mu, equals
    # z^-mu J_mu (sign=-1) resp. z^-mu I_mu (sign=+1).
    q = sign * 0.25 * z * z
    term = np.ones_like(z)
    total = np.ones_like(z)
    for k in range(_SERIES_TERMS):
        term = term * q / ((k + 1.0) * (mu + k + 1.0))
        total = total + term
    return total * (2.0 ** (-mu) / sp.gamma(mu + 1.0))


def scaled_limit_at_zero(mu):
    """Common z -> 0 limit of z^-mu J_mu(z) and z^-mu I_mu(z)."""
    mu = _check_order(mu)
    return 1.0 / (2.0**mu * sp.gamma(mu + 1.0))


def bessel_j(mu, z):
    """Bessel function of the first kind, J_mu(z).

    Parameters
    ----------
    mu : float, order, must be >= -1/2.
    z : float or ndarray, argument(s), must be >= 0.

    Note J_{-1/2} diverges like z^{-1/2} at z = 0; the divergence is
    genuine and returned as inf there. Use scaled_j for the bounded
    combination.
    """
    mu = _check_order(mu)
    z = _check_arg(z)
    za = np.atleast_1d(z)
    if _is(mu, -0.5):
        with np.errstate(divide="ignore"):
            out = _SQRT_2_OVER_PI * np.cos(za) / np.sqrt(za)
    elif _is(mu, 0.5):
        safe = np.where(za > 0, za, 1.0)
        out = np.where(za > 0, _SQRT_2_OVER_PI * np.sin(safe) / np.sqrt(safe), 0.0)
    else:
        out = sp.jv(mu, za)
    if np.any(np.isnan(out)):
        raise FloatingPointError("bessel_j produced NaN (mu=%g)" % mu)
    return _scalar_like(out, z)


def bessel_i(mu, z, scaled=False):
    """Modified Bessel function of the first kind, I_mu(z).

    With scaled=True returns exp(-z) I_mu(z) instead, which never
    overflows. Unscaled overflow (z beyond the exponent range) raises
    OverflowError rather than returning inf silently.
    """
    mu = _check_order(mu)
    z = _check_arg(z)
    za = np.atleast_1d(z)
    if _is(mu, -0.5):
        safe = np.where(za > 0, za, 1.0)
        if scaled:
            out = _SQRT_2_OVER_PI * 0.5 * (1.0 + np.exp(-2.0 * safe)) / np.sqrt(safe)
        else:
            out = _SQRT_2_OVER_PI * np.cosh(safe) / np.sqrt(safe)
        out = np.where(za > 0, out, np.inf)
    elif _is(mu, 0.5):
        safe = np.where(za > 0, za, 1.0)
        if scaled:
            out = _SQRT_2_OVER_PI * 0.5 * (-np.expm1(-2.0 * safe)) / np.sqrt(safe)
        else:
            out = _SQRT_2_OVER_PI * np.sinh(safe) / np.sqrt(safe)
        out = np.where(za > 0, out, 0.0)
    else:
        out = sp.ive(mu, za) if scaled else sp.iv(mu, za)
    if np.any(np.isnan(out)):
        raise FloatingPointError("bessel_i produced NaN (mu=%g)" % mu)
    if not scaled and np.any(np.isinf(out) & (za > 0)):
        raise OverflowError(
            "I_mu overflow at z up to %g; request the scaled variant" % za.max()
        )
    return _scalar_like(out, z)


def scaled_j(mu, z):
    """z^-mu J_mu(z), evaluated stably through z = 0."""
    mu = _check_order(mu)
    z = _check_arg(z)
    za = np.atleast_1d(z)
    if _is(mu, -0.5):
        out = _SQRT_2_OVER_PI * np.cos(za) * np.ones_like(za)
    elif _is(mu, 0.5):
        small = za < 1e-4
        safe = np.where(small, 1.0, za)
        out = np.where(small, _series_scaled(mu, za, -1.0),
                       _SQRT_2_OVER_PI * np.sin(safe) / safe)
    else:
        small = za <= _SERIES_CROSSOVER
        safe = np.where(small, 1.0, za)
        out = np.where(small, _series_scaled(mu, za, -1.0),
                       sp.jv(mu, safe) * safe ** (-mu))
    return _scalar_like(out, z)


def scaled_i(mu, z):
    """z^-mu I_mu(z), evaluated stably through z = 0.

    Grows like e^z for large z; OverflowError past the exponent range.
    """
    mu = _check_order(mu)
    z = _check_arg(z)
    za = np.atleast_1d(z)
    if np.any(za > 708.0):
        raise OverflowError("z^-mu I_mu overflows for z > 708; use scaled_i_exp")
    if _is(mu, -0.5):
        out = _SQRT_2_OVER_PI * np.cosh(za) * np.ones_like(za)
    elif _is(mu, 0.5):
        small = za < 1e-4
        safe = np.where(small, 1.0, za)
        out = np.where(small, _series_scaled(mu, za, 1.0),
                       _SQRT_2_OVER_PI * np.sinh(safe) / safe)
    else:
        small = za <= _SERIES_CROSSOVER
        safe = np.where(small, 1.0, za)
        out = np.where(small, _series_scaled(mu, za, 1.0),
                       sp.iv(mu, safe) * safe ** (-mu))
    return _scalar_like(out, z)


def scaled_i_exp(mu, z):
    """exp(-z) z^-mu I_mu(z): the bounded heat-kernel combination.

    Decays like z^-(mu+1/2)/sqrt(2 pi) for large z and tends to
    1/(2^mu Gamma(mu+1)) at z = 0; safe at every double-precision z.
    """
    mu = _check_order(mu)
    z = _check_arg(z)
    za = np.atleast_1d(z)
    if _is(mu, -0.5):
        out = _SQRT_2_OVER_PI * 0.5 * (1.0 + np.exp(-2.0 * za))
    elif _is(mu, 0.5):
        small = za < 1e-4
        safe = np.where(small, 1.0, za)
        zs = np.where(small, za, 0.0)
        out = np.where(small, _series_scaled(mu, zs, 1.0) * np.exp(-zs),
                       _SQRT_2_OVER_PI * 0.5 * (-np.expm1(-2.0 * safe)) / safe)
    else:
        small = za <= _SERIES_CROSSOVER
        huge = za >= _ASYMPTOTIC_CROSSOVER
        safe = np.where(small | huge, 1.0, za)
        zs = np.where(small, za, 0.0)
        zb = np.where(huge, za, 1.0)
        q = (4.0 * mu * mu - 1.0) / (8.0 * zb)
        asym = (1.0 - q + q * (4.0 * mu * mu - 9.0) / (16.0 * zb)) \
            / np.sqrt(2.0 * np.pi * zb) * zb ** (-mu)
        out = np.where(small, _series_scaled(mu, zs, 1.0) * np.exp(-zs),
                       np.where(huge, asym, sp.ive(mu, safe) * safe ** (-mu)))
    return _scalar_like(out, z)
