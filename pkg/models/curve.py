"""
Exact rational points on the curves y^2 - x^3 = c and one-variable rational maps.
"""
from fractions import Fraction
from typing import Dict, List, Optional, Union

import sympy as sym
from sympy.polys.domains import QQ

# Arbitrary precision rationals, always reduced with a positive denominator
BigRational = Fraction

RationalLike = Union[Fraction, int, str]

X = sym.Symbol('x')


def to_rational(value: RationalLike) -> Fraction:
    # Floats are refused: their binary expansion is never what the caller meant
    if isinstance(value, float):
        raise ValueError(f"Refusing float {value!r}; pass an int, Fraction or 'p/q' string")
    if isinstance(value, sym.Rational):
        return Fraction(int(value.p), int(value.q))
    return Fraction(value)


def rational_to_str(value: Fraction) -> str:
    return str(value.numerator) if value.denominator == 1 else f"{value.numerator}/{value.denominator}"


class BachetCurve:
    """Curve y^2 = x^3 + c over the rationals, c != 0."""

    def __init__(self, c: RationalLike):
        c = to_rational(c)
        if c == 0:
            raise ValueError("c = 0 gives the singular cusp y^2 = x^3")
        self._c = c

    @property
    def c(self) -> Fraction:
        return self._c

    def contains(self, x: Fraction, y: Fraction) -> bool:
        return y * y - x ** 3 == self._c

    def point(self, x: RationalLike, y: RationalLike) -> 'CurvePoint':
        return CurvePoint(self, to_rational(x), to_rational(y))

    def infinity(self) -> 'CurvePoint':
        return CurvePoint(self, None, None)

    def __eq__(self, other) -> bool:
        return isinstance(other, BachetCurve) and self._c == other._c

    def __hash__(self) -> int:
        return hash(('BachetCurve', self._c))

    def __repr__(self) -> str:
        return f"BachetCurve(y^2 = x^3 + {rational_to_str(self._c)})"


class CurvePoint:
    # Affine point or the point at infinity (x = y = None)

    def __init__(self, curve: BachetCurve, x: Optional[Fraction], y: Optional[Fraction]):
        if (x is None) != (y is None):
            raise ValueError("Both coordinates or neither must be given")
        if x is not None and not curve.contains(x, y):
            raise ValueError(f"({x}, {y}) is not on {curve!r}")
        self._curve = curve
        self._x = x
        self._y = y

    @property
    def curve(self) -> BachetCurve:
        return self._curve

    @property
    def x(self) -> Optional[Fraction]:
        return self._x

    @property
    def y(self) -> Optional[Fraction]:
        return self._y

    @property
    def is_infinity(self) -> bool:
        return self._x is None

    def __neg__(self) -> 'CurvePoint':
        if self.is_infinity:
            return self
        return CurvePoint(self._curve, self._x, -self._y)

    def __eq__(self, other) -> bool:
        return (isinstance(other, CurvePoint) and self._curve == other._curve
                and self._x == other._x and self._y == other._y)

    def __hash__(self) -> int:
        return hash((self._curve, self._x, self._y))

    def __repr__(self) -> str:
        if self.is_infinity:
            return "CurvePoint(Infinity)"
        return f"CurvePoint({rational_to_str(self._x)}, {rational_to_str(self._y)})"

    def to_dict(self) -> Dict[str, Optional[str]]:
        if self.is_infinity:
            return {'x': None, 'y': None, 'infinity': True}
        return {'x': rational_to_str(self._x), 'y': rational_to_str(self._y), 'infinity': False}

    @classmethod
    def from_dict(cls, curve: BachetCurve, data: Dict) -> 'CurvePoint':
        if data.get('infinity') or data.get('x') is None:
            return curve.infinity()
        return curve.point(data['x'], data['y'])


class _Infinity:
    # Value of a rational map at a pole

    def __repr__(self) -> str:
        return "Infinity"


INFINITY = _Infinity()


def _poly(expr_or_coeffs) -> sym.Poly:
    if isinstance(expr_or_coeffs, sym.Poly):
        return sym.Poly(expr_or_coeffs.as_expr(), X, domain=QQ)
    if isinstance(expr_or_coeffs, (list, tuple)):
        coeffs = [sym.Rational(str(to_rational(c))) for c in expr_or_coeffs]
        return sym.Poly(coeffs, X, domain=QQ)
    return sym.Poly(expr_or_coeffs, X, domain=QQ)


class RationalMap1D:
    """
    numerator / denominator in Q[x], reduced by their gcd, with a monic denominator.
    Two maps compare equal exactly when they are the same rational function.
    """

    def __init__(self, numerator, denominator=None):
        num = _poly(numerator)
        den = _poly(denominator if denominator is not None else 1)
        if den.is_zero:
            raise ValueError("Denominator must be a nonzero polynomial")
        g = num.gcd(den)
        if not g.is_zero and g.degree() > 0:
            num = num.exquo(g)
            den = den.exquo(g)
        lead = den.LC()
        self._num = sym.Poly(num.as_expr() / lead, X, domain=QQ)
        self._den = sym.Poly(den.as_expr() / lead, X, domain=QQ)
        self._num_coeffs = [to_rational(c) for c in self._num.all_coeffs()]
        self._den_coeffs = [to_rational(c) for c in self._den.all_coeffs()]

    @classmethod
    def identity(cls) -> 'RationalMap1D':
        return cls(X, 1)

    @property
    def numerator(self) -> sym.Poly:
        return self._num

    @property
    def denominator(self) -> sym.Poly:
        return self._den

    @property
    def degrees(self):
        num_degree = self._num.degree() if not self._num.is_zero else -1
        return num_degree, self._den.degree()

    @property
    def degree(self) -> int:
        return max(self.degrees)

    def bit_length(self) -> int:
        # Largest numerator-plus-denominator bit count over all coefficients
        coeffs = self._num_coeffs + self._den_coeffs
        return max(c.numerator.bit_length() + c.denominator.bit_length() for c in coeffs)

    @staticmethod
    def _horner(coeffs: List[Fraction], x: Fraction) -> Fraction:
        acc = Fraction(0)
        for c in coeffs:
            acc = acc * x + c
        return acc

    def __call__(self, x):
        if x is INFINITY:
            num_degree, den_degree = self.degrees
            if num_degree > den_degree:
                return INFINITY
            if num_degree < den_degree:
                return Fraction(0)
            return self._num_coeffs[0] / self._den_coeffs[0]
        x = to_rational(x)
        den = self._horner(self._den_coeffs, x)
        if den == 0:
            return INFINITY
        return self._horner(self._num_coeffs, x) / den

    def __eq__(self, other) -> bool:
        return (isinstance(other, RationalMap1D)
                and self._num == other._num and self._den == other._den)

    def __hash__(self) -> int:
        return hash((tuple(self._num_coeffs), tuple(self._den_coeffs)))

    def __repr__(self) -> str:
        return f"RationalMap1D(({self._num.as_expr()}) / ({self._den.as_expr()}))"

    def to_dict(self) -> Dict[str, List[str]]:
        return {
            'numerator': [rational_to_str(c) for c in self._num_coeffs],
            'denominator': [rational_to_str(c) for c in self._den_coeffs],
        }

    @classmethod
    def from_dict(cls, data: Dict) -> 'RationalMap1D':
        return cls(list(data['numerator']), list(data['denominator']))
