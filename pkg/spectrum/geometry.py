from __future__ import annotations

from dataclasses import dataclass
from decimal import Decimal
from fractions import Fraction
import math


class InvalidGeometry(ValueError):
    pass


def _to_exact(value) -> Fraction | None:
    """Exact rational for int/Fraction/Decimal/str inputs; None for floats."""
    if isinstance(value, bool):
        raise InvalidGeometry("Circumferences must be numbers, not booleans")
    if isinstance(value, (int, Fraction, Decimal)):
        return Fraction(value)
    if isinstance(value, str):
        try:
            return Fraction(value.strip())
        except (ValueError, ZeroDivisionError) as exc:
            raise InvalidGeometry(f"Cannot parse circumference {value!r}") from exc
    return None


@dataclass(frozen=True)
class EigenIndex:
    m: int
    n: int

    def __post_init__(self):
        if self.m < 0 or self.n < 0:
            raise ValueError("Mode indices must be non-negative")

    def __str__(self) -> str:
        return f"({self.m},{self.n})"

    @property
    def multiplicity(self) -> int:
        if self.m == 0 and self.n == 0:
            return 1
        if self.m == 0 or self.n == 0:
            return 2
        return 4


@dataclass(frozen=True)
class RationalEigenvalue:
    """lambda / (4 pi^2) = coeff_m2 * m^2 + coeff_n2 * n^2 with exact coefficients."""

    coeff_m2: Fraction
    coeff_n2: Fraction

    def __post_init__(self):
        if self.coeff_m2 <= 0 or self.coeff_n2 <= 0:
            raise ValueError("Coefficients must be positive")

    def value(self, m: int, n: int) -> Fraction:
        return self.coeff_m2 * m * m + self.coeff_n2 * n * n

    def integer_weights(self) -> tuple[int, int, int]:
        """(cm, cn, scale) with cm*m^2 + cn*n^2 = scale * value(m, n), all integers."""
        scale = math.lcm(self.coeff_m2.denominator, self.coeff_n2.denominator)
        cm = self.coeff_m2.numerator * (scale // self.coeff_m2.denominator)
        cn = self.coeff_n2.numerator * (scale // self.coeff_n2.denominator)
        return cm, cn, scale


@dataclass(frozen=True)
class TorusGeometry:
    """The flat torus T(a, b): horizontal circumference a, vertical circumference b.

    ``a_exact`` / ``b_exact`` hold exact values when the geometry was built from
    ints, Fractions, Decimals or numeric strings; eigenvalue comparison is then exact.
    """

    a: float
    b: float
    a_exact: Fraction | None = None
    b_exact: Fraction | None = None
    swapped: bool = False

    def __post_init__(self):
        for name in ("a", "b"):
            value = getattr(self, name)
            if not math.isfinite(value) or value <= 0:
                raise InvalidGeometry(f"Circumference {name} must be positive and finite, got {value}")

    @classmethod
    def of(cls, a, b) -> TorusGeometry:
        a_exact, b_exact = _to_exact(a), _to_exact(b)
        return cls(
            a=float(a_exact if a_exact is not None else a),
            b=float(b_exact if b_exact is not None else b),
            a_exact=a_exact,
            b_exact=b_exact,
        )

    @classmethod
    def normalized(cls, a, b) -> TorusGeometry:
        """Build T(a, b) with a >= b, swapping the axes (and recording it) when needed."""
        geom = cls.of(a, b)
        if geom.a >= geom.b:
            return geom
        return cls(a=geom.b, b=geom.a, a_exact=geom.b_exact, b_exact=geom.a_exact, swapped=True)

    @property
    def is_exact(self) -> bool:
        return self.a_exact is not None and self.b_exact is not None

    @property
    def area(self) -> float:
        return self.a * self.b

    def rational_eigenvalue(self) -> RationalEigenvalue | None:
        if not self.is_exact:
            return None
        return RationalEigenvalue(1 / self.a_exact**2, 1 / self.b_exact**2)

    def scaled(self, factor) -> TorusGeometry:
        exact = _to_exact(factor)
        if exact is not None and self.is_exact:
            return TorusGeometry(
                a=float(self.a_exact * exact),
                b=float(self.b_exact * exact),
                a_exact=self.a_exact * exact,
                b_exact=self.b_exact * exact,
                swapped=self.swapped,
            )
        factor = float(factor)
        return TorusGeometry(a=self.a * factor, b=self.b * factor, swapped=self.swapped)

    def covering(self, fx: int = 2, fy: int = 2) -> TorusGeometry:
        """The fx*fy-fold covering torus T(fx*a, fy*b)."""
        return TorusGeometry(
            a=self.a * fx,
            b=self.b * fy,
            a_exact=self.a_exact * fx if self.a_exact is not None else None,
            b_exact=self.b_exact * fy if self.b_exact is not None else None,
            swapped=self.swapped,
        )

    def unit_width(self) -> tuple[TorusGeometry, Fraction | float]:
        """Normalize then rescale to a = 1; returns (T(1, b/a), scale applied)."""
        geom = TorusGeometry.normalized(
            self.a_exact if self.a_exact is not None else self.a,
            self.b_exact if self.b_exact is not None else self.b,
        )
        scale = 1 / geom.a_exact if geom.a_exact is not None else 1.0 / geom.a
        return geom.scaled(scale), scale

    def __str__(self) -> str:
        return f"T({self.a:g},{self.b:g})"
