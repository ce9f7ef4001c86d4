"""
Bachet duplication map on y^2 = x^3 + c and the commuting family B_n.

B_n is the x-coordinate of multiplication by n, built from the division
polynomials of the curve (a = 0, b = c). B_2 is the Bachet map itself.
"""
import json
import logging
from fractions import Fraction
from typing import Dict, List, Optional, Sequence

import sympy as sym
from sympy.polys.domains import QQ

from models.curve import (INFINITY, X, BachetCurve, CurvePoint, RationalLike,
                          RationalMap1D, rational_to_str, to_rational)
from numerics.errors import BudgetExceeded, UnsupportedDegree

logger = logging.getLogger(__name__)

DEFAULT_BIT_BUDGET = 1_000_000
SUPPORTED_DEGREES = range(2, 7)


def bachet_x(x: RationalLike, c: RationalLike):
    """B(x) = (x^4 - 8cx) / (4(x^3 + c)); a pole returns INFINITY."""
    if x is INFINITY:
        return INFINITY
    x, c = to_rational(x), to_rational(c)
    den = 4 * (x ** 3 + c)
    if den == 0:
        return INFINITY
    return (x ** 4 - 8 * c * x) / den


def bachet_point(P: CurvePoint) -> CurvePoint:
    """
    (x, y) -> ((x^4 - 8cx) / 4y^2, (-x^6 - 20cx^3 + 8c^2) / 8y^3).

    This is the negative of the group-law double 2P: the x-coordinates agree
    and the y-coordinates differ in sign.
    """
    curve = P.curve
    if P.is_infinity or P.y == 0:
        return curve.infinity()
    x, y, c = P.x, P.y, curve.c
    new_x = (x ** 4 - 8 * c * x) / (4 * y * y)
    new_y = (-x ** 6 - 20 * c * x ** 3 + 8 * c * c) / (8 * y ** 3)
    return curve.point(new_x, new_y)


def on_curve(P: CurvePoint) -> bool:
    return P.is_infinity or P.curve.contains(P.x, P.y)


def chord_tangent_add(P: CurvePoint, Q: CurvePoint) -> CurvePoint:
    # Group law on y^2 = x^3 + c with identity at infinity
    if P.curve != Q.curve:
        raise ValueError("Points lie on different curves")
    if P.is_infinity:
        return Q
    if Q.is_infinity:
        return P
    curve = P.curve
    if P.x == Q.x:
        if P.y != Q.y or P.y == 0:
            return curve.infinity()
        slope = 3 * P.x * P.x / (2 * P.y)
    else:
        slope = (Q.y - P.y) / (Q.x - P.x)
    x3 = slope * slope - P.x - Q.x
    y3 = slope * (P.x - x3) - P.y
    return curve.point(x3, y3)


def multiply_point(n: int, P: CurvePoint) -> CurvePoint:
    # Double-and-add
    if n < 0:
        return multiply_point(-n, -P)
    result = P.curve.infinity()
    addend = P
    while n:
        if n & 1:
            result = chord_tangent_add(result, addend)
        addend = chord_tangent_add(addend, addend)
        n >>= 1
    return result


class DivisionPolynomials:
    """
    Division polynomials of y^2 = x^3 + c with the y factor of the even
    ones removed: psi_n = f_n for odd n, psi_n = y f_n for even n.
    Every f_n is a polynomial in x alone.
    """

    def __init__(self, c: RationalLike):
        self._c = sym.Rational(rational_to_str(to_rational(c)))
        c = self._c
        x = sym.Poly(X, X, domain=QQ)
        self._curve_poly = x ** 3 + sym.Poly(c, X, domain=QQ)
        self._cache: Dict[int, sym.Poly] = {
            0: sym.Poly(0, X, domain=QQ),
            1: sym.Poly(1, X, domain=QQ),
            2: sym.Poly(2, X, domain=QQ),
            3: sym.Poly(3 * X ** 4 + 12 * c * X, X, domain=QQ),
            4: sym.Poly(4 * (X ** 6 + 20 * c * X ** 3 - 8 * c ** 2), X, domain=QQ),
        }

    @property
    def curve_poly(self) -> sym.Poly:
        return self._curve_poly

    def __getitem__(self, index: int) -> sym.Poly:
        if index not in self._cache:
            m = index // 2
            if index % 2 == 1:
                if m % 2 == 0:
                    result = (self._curve_poly ** 2 * self[m + 2] * self[m] ** 3
                              - self[m - 1] * self[m + 1] ** 3)
                else:
                    result = (self[m + 2] * self[m] ** 3
                              - self._curve_poly ** 2 * self[m - 1] * self[m + 1] ** 3)
            else:
                inner = self[m + 2] * self[m - 1] ** 2 - self[m - 2] * self[m + 1] ** 2
                result = (self[m] * inner).quo_ground(2)
            self._cache[index] = result
        return self._cache[index]

    def x_multiple(self, n: int) -> RationalMap1D:
        # x(nP) = x - psi_{n-1} psi_{n+1} / psi_n^2
        x = sym.Poly(X, X, domain=QQ)
        Y = self._curve_poly
        f_prev, f_n, f_next = self[n - 1], self[n], self[n + 1]
        if n % 2 == 0:
            return RationalMap1D(x * Y * f_n ** 2 - f_prev * f_next, Y * f_n ** 2)
        return RationalMap1D(x * f_n ** 2 - Y * f_prev * f_next, f_n ** 2)


def division_poly_map(n: int, c: RationalLike) -> RationalMap1D:
    if n not in SUPPORTED_DEGREES:
        raise UnsupportedDegree(f"B_n is supported for 2 <= n <= 6, got n = {n}")
    result = DivisionPolynomials(c).x_multiple(n)
    logger.debug("B_%d for c=%s has degrees %s", n, c, result.degrees)
    return result


def bachet_map(c: RationalLike) -> RationalMap1D:
    # (x^4 - 8cx) / (4x^3 + 4c) straight from the formula
    c = sym.Rational(rational_to_str(to_rational(c)))
    return RationalMap1D(X ** 4 - 8 * c * X, 4 * X ** 3 + 4 * c)


def _check_budget(bits: int, budget: Optional[int]) -> None:
    if budget is not None and bits > budget:
        raise BudgetExceeded(bits, budget)


def compose_maps(f: RationalMap1D, g: RationalMap1D,
                 bit_budget: Optional[int] = DEFAULT_BIT_BUDGET) -> RationalMap1D:
    """
    f o g for f = P/Q, g = R/S. With d = max(deg P, deg Q),
    f(g) = sum p_i R^i S^(d-i) / sum q_i R^i S^(d-i).
    """
    R, S = g.numerator, g.denominator
    d = f.degree
    p = list(reversed(f.numerator.all_coeffs()))
    q = list(reversed(f.denominator.all_coeffs()))
    R_powers = [sym.Poly(1, X, domain=QQ)]
    S_powers = [sym.Poly(1, X, domain=QQ)]
    for _ in range(d):
        R_powers.append(R_powers[-1] * R)
        S_powers.append(S_powers[-1] * S)

    def homogenised(coeffs) -> sym.Poly:
        total = sym.Poly(0, X, domain=QQ)
        for i, coeff in enumerate(coeffs):
            if coeff != 0:
                total += R_powers[i] * S_powers[d - i] * coeff
        return total

    result = RationalMap1D(homogenised(p), homogenised(q))
    _check_budget(result.bit_length(), bit_budget)
    return result


def height_bits(value: Fraction) -> int:
    return max(value.numerator.bit_length(), value.denominator.bit_length())


def point_bits(P: CurvePoint) -> Dict[str, int]:
    if P.is_infinity:
        return {'x_numerator': 0, 'x_denominator': 0, 'y_numerator': 0, 'y_denominator': 0}
    return {
        'x_numerator': abs(P.x.numerator).bit_length(),
        'x_denominator': P.x.denominator.bit_length(),
        'y_numerator': abs(P.y.numerator).bit_length(),
        'y_denominator': P.y.denominator.bit_length(),
    }


class BachetChain:
    """Successive Bachet images of a starting point, with their bit lengths."""

    def __init__(self, points: List[CurvePoint]):
        self._points = list(points)

    @property
    def points(self) -> List[CurvePoint]:
        return list(self._points)

    @property
    def curve(self) -> BachetCurve:
        return self._points[0].curve

    @property
    def bit_lengths(self) -> List[Dict[str, int]]:
        return [point_bits(P) for P in self._points]

    @property
    def total_bits(self) -> int:
        return sum(sum(bits.values()) for bits in self.bit_lengths)

    def growth_ratios(self) -> List[float]:
        """Denominator bit-length ratio between consecutive affine x-coordinates."""
        dens = [b['x_denominator'] for b, P in zip(self.bit_lengths, self._points) if not P.is_infinity]
        return [dens[k + 1] / dens[k] for k in range(len(dens) - 1) if dens[k] > 0]

    def __len__(self) -> int:
        return len(self._points)

    def __getitem__(self, index: int) -> CurvePoint:
        return self._points[index]

    def to_dict(self) -> Dict:
        return {
            'c': rational_to_str(self.curve.c),
            'points': [P.to_dict() for P in self._points],
            'bits': self.bit_lengths,
        }

    @classmethod
    def from_dict(cls, data: Dict) -> 'BachetChain':
        curve = BachetCurve(data['c'])
        return cls([CurvePoint.from_dict(curve, p) for p in data['points']])


def chain(P0: CurvePoint, k: int, bit_budget: Optional[int] = DEFAULT_BIT_BUDGET) -> BachetChain:
    """
    P0 followed by k Bachet images. Raises BudgetExceeded once the total
    bit count of the chain passes the budget.
    """
    points = [P0]
    total = sum(point_bits(P0).values())
    for step in range(k):
        image = bachet_point(points[-1])
        total += sum(point_bits(image).values())
        _check_budget(total, bit_budget)
        points.append(image)
        logger.debug("Bachet step %d: %s bits so far", step + 1, total)
    return BachetChain(points)


def chain_to_json(result: BachetChain) -> str:
    return json.dumps(result.to_dict(), indent=2)


def chain_from_json(text: str) -> BachetChain:
    return BachetChain.from_dict(json.loads(text))


def commutator_is_zero(n: int, m: int, c: RationalLike,
                       bit_budget: Optional[int] = DEFAULT_BIT_BUDGET) -> bool:
    B_n, B_m = division_poly_map(n, c), division_poly_map(m, c)
    return compose_maps(B_n, B_m, bit_budget) == compose_maps(B_m, B_n, bit_budget)


def parse_point(curve: BachetCurve, text: str) -> CurvePoint:
    # "3,5" or "129/100,383/1000"
    parts = [part.strip() for part in text.split(',')]
    if len(parts) != 2:
        raise ValueError(f"Expected 'x,y', got {text!r}")
    return curve.point(parts[0], parts[1])


def sample_points(curve: BachetCurve, xs: Sequence[Fraction]) -> List[CurvePoint]:
    """Affine points over the given x whose y^2 = x^3 + c is a rational square."""
    found = []
    for x in xs:
        y = _rational_sqrt(x ** 3 + curve.c)
        if y is not None:
            found.append(curve.point(x, y))
    return found


def _rational_sqrt(value: Fraction) -> Optional[Fraction]:
    if value < 0:
        return None
    num, den = sym.integer_nthroot(value.numerator, 2), sym.integer_nthroot(value.denominator, 2)
    if num[1] and den[1]:
        return Fraction(int(num[0]), int(den[0]))
    return None
