"""Scalar special functions used by the samplers.

Log-gamma, digamma, trigamma, tetragamma and log-beta over positive real
arguments. The polygamma family is computed by shifting the argument upward
with the standard recurrences until it is large enough for the Bernoulli
asymptotic series to converge to double precision.

All functions raise :class:`DomainError` on non-positive or non-finite
input instead of returning NaN, so that corrupted sampler state fails
loudly rather than silently poisoning a chain.
"""

import math


class DomainError(ValueError):
    """Argument outside the (0, inf) domain of the gamma-family functions."""


# Argument above which the asymptotic series is used directly.
_SHIFT = 6.0

# Bernoulli numbers B_2, B_4, ..., B_18.
_BERNOULLI = (
    1.0 / 6.0,
    -1.0 / 30.0,
    1.0 / 42.0,
    -1.0 / 30.0,
    5.0 / 66.0,
    -691.0 / 2730.0,
    7.0 / 6.0,
    -3617.0 / 510.0,
    43867.0 / 798.0,
)


def _check_positive(x, name="x"):
    x = float(x)
    if not math.isfinite(x) or x <= 0.0:
        raise DomainError(f"{name} must be a positive finite real, got {x!r}")
    return x


def log_gamma(x):
    """Natural log of the gamma function, ln Gamma(x), for x > 0."""
    x = _check_positive(x)
    return math.lgamma(x)


def digamma(x):
    """First derivative of ln Gamma: psi(x) = d/dx ln Gamma(x), x > 0.

    Absolute error below 1e-10 on [0.01, 200].
    """
    x = _check_positive(x)
    acc = 0.0
    # psi(x) = psi(x + 1) - 1/x, applied until the series range is reached.
    while x < _SHIFT:
        acc -= 1.0 / x
        x += 1.0
    inv2 = 1.0 / (x * x)
    series = 0.0
    power = inv2
    for k, b2k in enumerate(_BERNOULLI, start=1):
        series += b2k / (2 * k) * power
        power *= inv2
    return acc + math.log(x) - 0.5 / x - series


def trigamma(x):
    """Second derivative of ln Gamma: psi'(x), x > 0.

    Absolute error below 1e-10 on [0.01, 200].
    """
    x = _check_positive(x)
    acc = 0.0
    # psi'(x) = psi'(x + 1) + 1/x^2
    while x < _SHIFT:
        acc += 1.0 / (x * x)
        x += 1.0
    inv = 1.0 / x
    inv2 = inv * inv
    series = 0.0
    power = inv2 * inv
    for b2k in _BERNOULLI:
        series += b2k * power
        power *= inv2
    return acc + inv + 0.5 * inv2 + series


def tetragamma(x):
    """Third derivative of ln Gamma: psi''(x), x > 0.

    Relative error below 1e-8 on [0.01, 200]; used in the Jacobian of the
    logit-moment inversion.
    """
    x = _check_positive(x)
    acc = 0.0
    # psi''(x) = psi''(x + 1) - 2/x^3
    while x < _SHIFT:
        acc -= 2.0 / (x * x * x)
        x += 1.0
    inv = 1.0 / x
    inv2 = inv * inv
    series = 0.0
    power = inv2 * inv2
    for k, b2k in enumerate(_BERNOULLI, start=1):
        series += (2 * k + 1) * b2k * power
        power *= inv2
    return acc - inv2 - inv2 * inv - series


def log_beta(a, b):
    """Log of the Euler beta function: ln B(a, b) for a, b > 0."""
    a = _check_positive(a, "a")
    b = _check_positive(b, "b")
    return math.lgamma(a) + math.lgamma(b) - math.lgamma(a + b)
