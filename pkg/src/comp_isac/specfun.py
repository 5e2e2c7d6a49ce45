"""Scalar special functions for detection probabilities.

Everything here is built from elementary functions only. The module
deliberately avoids numpy/scipy: the callers need scalar evaluations of
the log-gamma function, the regularized upper incomplete gamma function
of integer order, the Marcum-Q function of integer order, and numerical
inverses of the last two. Integer order keeps every series finite or
rapidly convergent, so no continued-fraction or asymptotic machinery is
needed.

Accuracy targets (validated in the test suite):

* ``ln_gamma``: absolute error <= 1e-12 on [0.5, 200].
* ``upper_gamma_regularized``: absolute error at the few-ulp level.
* ``marcum_q``: series truncated when the remaining Poisson tail mass
  is below 1e-14; agrees with an adaptive-quadrature oracle to 1e-8 or
  better over the tested grid.
* inverses: forward/inverse round trips to 1e-8 or better.
"""

import math
import operator

from .errors import AccuracyError, DomainError, InfeasibleTargetError

__all__ = [
    "ln_gamma",
    "upper_gamma_regularized",
    "inv_upper_gamma_regularized",
    "marcum_q",
    "inv_marcum_q_a",
]

# Stirling series coefficients B_{2n} / (2n (2n - 1)) for n = 1..8.
# Eight terms give ~1e-16 truncation error once the argument has been
# shifted above 12 by the recurrence ln Gamma(x) = ln Gamma(x+1) - ln x.
_STIRLING = (
    1.0 / 12.0,
    -1.0 / 360.0,
    1.0 / 1260.0,
    -1.0 / 1680.0,
    1.0 / 1188.0,
    -691.0 / 360360.0,
    1.0 / 156.0,
    -3617.0 / 122400.0,
)
_HALF_LN_TWO_PI = 0.5 * math.log(2.0 * math.pi)

# Stop summing a Poisson-weighted series once the geometric bound on the
# remaining weight mass drops below this.
_TAIL_TOL = 1e-14


def _check_order(order):
    """Validate an integer order >= 1 and return it as a Python int."""
    try:
        order = operator.index(order)
    except TypeError:
        raise DomainError(f"order must be an integer, got {order!r}") from None
    if order < 1:
        raise DomainError(f"order must be >= 1, got {order}")
    return order


def _check_real(name, value, minimum=None):
    value = float(value)
    if math.isnan(value):
        raise DomainError(f"{name} must not be NaN")
    if minimum is not None and value < minimum:
        raise DomainError(f"{name} must be >= {minimum}, got {value}")
    return value


def ln_gamma(x):
    """Natural log of the gamma function for real x > 0.

    Uses the Stirling series after shifting the argument above 12 with
    the recurrence Gamma(x) = Gamma(x+1)/x.
    """
    x = _check_real("x", x)
    if x <= 0.0:
        raise DomainError(f"x must be positive, got {x}")
    shift = 0.0
    while x < 12.0:
        shift += math.log(x)
        x += 1.0
    inv2 = 1.0 / (x * x)
    series = 0.0
    for c in reversed(_STIRLING):
        series = series * inv2 + c
    series /= x
    return (x - 0.5) * math.log(x) - x + _HALF_LN_TWO_PI + series - shift


def upper_gamma_regularized(order, x):
    """Regularized upper incomplete gamma Gamma(order, x) / Gamma(order).

    For integer order this is the finite Poisson sum
    ``e^{-x} sum_{k=0}^{order-1} x^k / k!``, equivalently the CDF of a
    Poisson(x) variable at order - 1. Monotone nonincreasing in x, with
    values 1 at x = 0 and 0 in the limit.
    """
    order = _check_order(order)
    x = _check_real("x", x, minimum=0.0)
    if x == 0.0:
        return 1.0
    if x <= 700.0:
        term = math.exp(-x)
        total = term
        for k in range(1, order):
            term *= x / k
            total += term
    else:
        # e^{-x} underflows; accumulate each term in log space instead.
        total = 0.0
        for k in range(order):
            total += math.exp(-x + k * math.log(x) - ln_gamma(k + 1.0))
    # clamp to absorb last-bit rounding; the sum is a probability
    return min(1.0, max(0.0, total))


def inv_upper_gamma_regularized(order, p):
    """Solve upper_gamma_regularized(order, x) = p for x.

    Bracketing plus safeguarded Newton. The derivative has the closed
    form d/dx = -e^{-x} x^{order-1} / Gamma(order); whenever a Newton
    step lands outside the current bracket the step falls back to
    bisection, so convergence is guaranteed.
    """
    order = _check_order(order)
    p = _check_real("p", p)
    if not 0.0 < p < 1.0:
        raise DomainError(f"p must lie strictly inside (0, 1), got {p}")
    lo, hi = 0.0, float(order)
    while upper_gamma_regularized(order, hi) > p:
        hi *= 2.0
    lg = ln_gamma(float(order))
    x = 0.5 * (lo + hi)
    for _ in range(200):
        f = upper_gamma_regularized(order, x) - p
        if f == 0.0:
            return x
        if f > 0.0:
            lo = x
        else:
            hi = x
        if hi - lo <= 1e-15 * max(1.0, hi):
            break
        moved = False
        if x > 0.0:
            df = -math.exp(-x + (order - 1) * math.log(x) - lg)
            if df < 0.0:
                xn = x - f / df
                if lo < xn < hi:
                    x = xn
                    moved = True
        if not moved:
            x = 0.5 * (lo + hi)
    return 0.5 * (lo + hi)


def _poisson_pmf(k, mu):
    """Poisson(mu) probability mass at k, computed in log space."""
    if mu == 0.0:
        return 1.0 if k == 0 else 0.0
    return math.exp(-mu + k * math.log(mu) - ln_gamma(k + 1.0))


def marcum_q(order, a, b):
    """Generalized Marcum-Q function Q_order(a, b) of integer order.

    This is the tail probability P{chi'^2_{2*order}(a^2) >= b^2} of a
    noncentral chi-squared variable with 2*order degrees of freedom and
    noncentrality a^2. Computed by the canonical series

        Q_L(a, b) = sum_k Poisson(k; a^2/2) * UpperGamma(L + k, b^2/2)

    where UpperGamma is the regularized upper incomplete gamma. The sum
    starts near the Poisson mode for large a (the weights below the mode
    are negligible by the same tail bound used to stop), each incomplete
    gamma value is obtained from its predecessor by one recurrence term,
    and summation stops once a geometric bound on the remaining Poisson
    mass drops below 1e-14. Exceeding the hard term cap of
    10*(a^2/2) + 200 raises AccuracyError rather than truncating.

    Monotone nondecreasing in a and nonincreasing in b.
    """
    order = _check_order(order)
    a = _check_real("a", a, minimum=0.0)
    b = _check_real("b", b, minimum=0.0)
    x = 0.5 * a * a  # Poisson mean of the mixing weights
    y = 0.5 * b * b  # incomplete-gamma argument
    if x == 0.0:
        return upper_gamma_regularized(order, y)
    if y == 0.0:
        return 1.0
    cap = int(10.0 * x) + 200
    k_lo = 0
    if x > 30.0:
        # mass below mode - 12*sqrt(mode) is < 1e-30; skip straight there
        k_lo = max(0, int(x - 12.0 * math.sqrt(x) - 5.0))
    w = _poisson_pmf(k_lo, x)
    gamma_tail = upper_gamma_regularized(order + k_lo, y)
    # Poisson(y) mass at order + k, feeding the recurrence
    # UpperGamma(L+k+1, y) = UpperGamma(L+k, y) + e^{-y} y^{L+k}/(L+k)!
    py = _poisson_pmf(order + k_lo, y)
    total = 0.0
    k = k_lo
    while True:
        total += w * gamma_tail
        if k + 1 > x:
            # past the mode the weights decay at least geometrically
            ratio = x / (k + 1)
            if w * ratio / (1.0 - ratio) < _TAIL_TOL:
                break
        if k - k_lo > cap:
            raise AccuracyError(
                f"marcum_q series exceeded {cap} terms at order={order}, a={a}, b={b}"
            )
        k += 1
        w *= x / k
        gamma_tail = min(1.0, gamma_tail + py)
        py *= y / (order + k)
    return min(1.0, max(0.0, total))


def inv_marcum_q_a(order, b, p):
    """Solve marcum_q(order, a, b) = p for the noncentrality argument a.

    Q_order(a, b) increases from the central chi-squared tail at a = 0
    toward 1, so a solution exists only for p above that floor; below it
    the request is an infeasible target. Bracketing plus safeguarded
    Newton using the derivative identity

        d/da Q_L(a, b) = a * (Q_{L+1}(a, b) - Q_L(a, b)).
    """
    order = _check_order(order)
    b = _check_real("b", b, minimum=0.0)
    p = _check_real("p", p)
    if not 0.0 < p < 1.0:
        raise DomainError(f"p must lie strictly inside (0, 1), got {p}")
    floor = marcum_q(order, 0.0, b)
    if p <= floor:
        raise InfeasibleTargetError(
            f"target p={p} is not above the zero-noncentrality floor {floor:.6g}; "
            "a = 0 already meets it"
        )
    lo, hi = 0.0, max(1.0, b)
    while marcum_q(order, hi, b) < p:
        hi *= 2.0
    a = 0.5 * (lo + hi)
    for _ in range(200):
        qa = marcum_q(order, a, b)
        f = qa - p
        if f == 0.0:
            return a
        if f < 0.0:
            lo = a
        else:
            hi = a
        if hi - lo <= 1e-15 * max(1.0, hi):
            break
        moved = False
        if a > 0.0:
            df = a * (marcum_q(order + 1, a, b) - qa)
            if df > 0.0:
                an = a - f / df
                if lo < an < hi:
                    a = an
                    moved = True
        if not moved:
            a = 0.5 * (lo + hi)
    return 0.5 * (lo + hi)
