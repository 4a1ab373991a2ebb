"""Exact Gaussian-rational scalars and small dense linear algebra over them."""

from __future__ import annotations

from fractions import Fraction
from numbers import Rational

__all__ = ["Qi", "I", "qi", "rref", "rank", "nullspace", "solve", "inverse", "det"]


class Qi:
    """Complex number with rational real and imaginary parts."""

    __slots__ = ("re", "im")

    def __init__(self, re=0, im=0):
        self.re = Fraction(re)
        self.im = Fraction(im)

    @staticmethod
    def coerce(x) -> "Qi":
        if isinstance(x, Qi):
            return x
        if isinstance(x, (int, Rational)):
            return Qi(x)
        if isinstance(x, str):
            return Qi(Fraction(x))
        raise TypeError(f"cannot convert {type(x).__name__} to an exact complex rational")

    def __add__(self, other):
        try:
            o = Qi.coerce(other)
        except TypeError:
            return NotImplemented
        return Qi(self.re + o.re, self.im + o.im)

    __radd__ = __add__

    def __sub__(self, other):
        try:
            o = Qi.coerce(other)
        except TypeError:
            return NotImplemented
        return Qi(self.re - o.re, self.im - o.im)

    def __rsub__(self, other):
        return Qi.coerce(other) - self

    def __mul__(self, other):
        try:
            o = Qi.coerce(other)
        except TypeError:
            return NotImplemented
        return Qi(self.re * o.re - self.im * o.im, self.re * o.im + self.im * o.re)

    __rmul__ = __mul__

    def __truediv__(self, other):
        try:
            o = Qi.coerce(other)
        except TypeError:
            return NotImplemented
        n = o.re * o.re + o.im * o.im
        if n == 0:
            raise ZeroDivisionError("division by exact zero")
        return Qi((self.re * o.re + self.im * o.im) / n, (self.im * o.re - self.re * o.im) / n)

    def __rtruediv__(self, other):
        return Qi.coerce(other) / self

    def __pow__(self, n: int):
        if not isinstance(n, int):
            return NotImplemented
        if n < 0:
            return Qi(1) / self ** (-n)
        out, base = Qi(1), self
        while n:
            if n & 1:
                out = out * base
            base = base * base
            n >>= 1
        return out

    def __neg__(self):
        return Qi(-self.re, -self.im)

    def __pos__(self):
        return self

    def conjugate(self) -> "Qi":
        return Qi(self.re, -self.im)

    def abs2(self) -> Fraction:
        return self.re * self.re + self.im * self.im

    def is_real(self) -> bool:
        return self.im == 0

    def __bool__(self):
        return bool(self.re) or bool(self.im)

    def __eq__(self, other):
        try:
            o = Qi.coerce(other)
        except TypeError:
            if isinstance(other, complex):
                return complex(self) == other
            return NotImplemented
        return self.re == o.re and self.im == o.im

    def __hash__(self):
        if self.im == 0:
            return hash(self.re)
        return hash((self.re, self.im))

    def __complex__(self):
        return complex(float(self.re), float(self.im))

    def __repr__(self):
        return f"Qi({self})"

    def __str__(self):
        def frac(x: Fraction) -> str:
            return str(x.numerator) if x.denominator == 1 else f"{x.numerator}/{x.denominator}"

        if self.im == 0:
            return frac(self.re)
        im = abs(self.im)
        if im == 1:
            ipart = "i"
        elif im.numerator == 1:
            ipart = f"i/{im.denominator}"
        else:
            ipart = f"{frac(im)}*i"
        if self.re == 0:
            return ipart if self.im > 0 else f"-{ipart}"
        return f"{frac(self.re)}{'+' if self.im > 0 else '-'}{ipart}"


I = Qi(0, 1)


def qi(x) -> Qi:
    return Qi.coerce(x)


def _copy(m):
    return [[qi(x) for x in row] for row in m]


def rref(m):
    """Reduced row echelon form. Returns (matrix, pivot columns)."""
    a = _copy(m)
    rows = len(a)
    cols = len(a[0]) if rows else 0
    pivots = []
    r = 0
    for c in range(cols):
        if r == rows:
            break
        p = next((i for i in range(r, rows) if a[i][c]), None)
        if p is None:
            continue
        a[r], a[p] = a[p], a[r]
        inv = Qi(1) / a[r][c]
        a[r] = [x * inv for x in a[r]]
        for i in range(rows):
            if i != r and a[i][c]:
                f = a[i][c]
                a[i] = [x - f * y for x, y in zip(a[i], a[r])]
        pivots.append(c)
        r += 1
    return a, pivots


def rank(m) -> int:
    if not m or not m[0]:
        return 0
    return len(rref(m)[1])


def nullspace(m, ncols: int | None = None):
    """Basis of the right kernel as a list of column vectors."""
    if not m:
        return [[Qi(1) if j == i else Qi(0) for j in range(ncols)] for i in range(ncols)]
    a, piv = rref(m)
    n = len(a[0])
    free = [c for c in range(n) if c not in piv]
    basis = []
    for f in free:
        v = [Qi(0)] * n
        v[f] = Qi(1)
        for r, p in enumerate(piv):
            v[p] = -a[r][f]
        basis.append(v)
    return basis


def solve(m, b):
    """Solve m x = b for square invertible m; b is a vector or a list of columns."""
    n = len(m)
    vector = not isinstance(b[0], (list, tuple))
    cols = [b] if vector else b
    aug = [list(m[i]) + [c[i] for c in cols] for i in range(n)]
    red, piv = rref(aug)
    if piv[:n] != list(range(n)):
        raise ZeroDivisionError("singular matrix")
    sols = [[red[i][n + j] for i in range(n)] for j in range(len(cols))]
    return sols[0] if vector else sols


def inverse(m):
    n = len(m)
    eye = [[Qi(1) if i == j else Qi(0) for i in range(n)] for j in range(n)]
    cols = solve(m, eye)
    return [[cols[j][i] for j in range(n)] for i in range(n)]


def det(m) -> Qi:
    a = _copy(m)
    n = len(a)
    out = Qi(1)
    for c in range(n):
        p = next((i for i in range(c, n) if a[i][c]), None)
        if p is None:
            return Qi(0)
        if p != c:
            a[c], a[p] = a[p], a[c]
            out = -out
        out = out * a[c][c]
        inv = Qi(1) / a[c][c]
        for i in range(c + 1, n):
            if a[i][c]:
                f = a[i][c] * inv
                a[i] = [x - f * y for x, y in zip(a[i], a[c])]
    return out
