"""Truncated bivariate Taylor jets in (r, x) with exact rational coefficients.

Used to evaluate curvature quantities exactly at a single point without
expanding any polynomial in r and x: a jet of order n stores the Taylor
coefficients c[i, j] of (r - r0)^i (x - x0)^j for i + j <= n.
"""

from __future__ import annotations

from typing import Dict

from .poly import SparsePoly, VARS, BITS, _MASK, rational

_IR = VARS.index("r")
_IX = VARS.index("x")


class Jet:
    __slots__ = ("c", "order")

    def __init__(self, c: Dict[tuple, object], order: int):
        self.c = c
        self.order = order

    @classmethod
    def const(cls, v, order: int) -> "Jet":
        return cls({(0, 0): rational(v)}, order)

    @classmethod
    def from_poly(cls, p: SparsePoly, r0, x0, order: int) -> "Jet":
        """Taylor jet of a polynomial in r and x only (other variables already substituted)."""
        r0, x0 = rational(r0), rational(x0)
        c: Dict[tuple, object] = {}
        for key, coef in p.terms.items():
            if key & ~((_MASK << (BITS * _IR)) | (_MASK << (BITS * _IX))):
                raise ValueError("polynomial still contains parameter variables")
            er = (key >> (BITS * _IR)) & _MASK
            ex = (key >> (BITS * _IX)) & _MASK
            # (r0 + dr)^er (x0 + dx)^ex truncated
            for i in range(min(er, order) + 1):
                br = _binom(er, i) * r0 ** (er - i)
                if not br:
                    continue
                for j in range(min(ex, order - i) + 1):
                    bx = _binom(ex, j) * x0 ** (ex - j)
                    if bx:
                        c[(i, j)] = c.get((i, j), 0) + coef * br * bx
        return cls({k: v for k, v in c.items() if v}, order)

    def value(self):
        return self.c.get((0, 0), rational(0))

    def __add__(self, o: "Jet") -> "Jet":
        order = min(self.order, o.order)
        c = {k: v for k, v in self.c.items() if sum(k) <= order}
        for k, v in o.c.items():
            if sum(k) <= order:
                c[k] = c.get(k, 0) + v
        return Jet(c, order)

    def __neg__(self) -> "Jet":
        return Jet({k: -v for k, v in self.c.items()}, self.order)

    def __sub__(self, o: "Jet") -> "Jet":
        return self + (-o)

    def __mul__(self, o) -> "Jet":
        if not isinstance(o, Jet):
            o = rational(o)
            return Jet({k: v * o for k, v in self.c.items()}, self.order)
        order = min(self.order, o.order)
        c: Dict[tuple, object] = {}
        for (i1, j1), v1 in self.c.items():
            if i1 + j1 > order:
                continue
            for (i2, j2), v2 in o.c.items():
                if i1 + j1 + i2 + j2 <= order:
                    k = (i1 + i2, j1 + j2)
                    c[k] = c.get(k, 0) + v1 * v2
        return Jet(c, order)

    __rmul__ = __mul__

    def reciprocal(self) -> "Jet":
        c0 = self.value()
        if not c0:
            raise ZeroDivisionError("jet has zero constant term")
        inv0 = 1 / c0
        # 1/(c0 (1 + e)) = inv0 * sum (-e)^n with e of zero constant term
        e = Jet({k: v * inv0 for k, v in self.c.items() if k != (0, 0)}, self.order)
        result = Jet.const(1, self.order)
        term = Jet.const(1, self.order)
        for _ in range(self.order):
            term = -(term * e)
            result = result + term
        return result * inv0

    def __truediv__(self, o: "Jet") -> "Jet":
        return self * o.reciprocal()

    def pow(self, n: int) -> "Jet":
        if n < 0:
            return self.reciprocal().pow(-n)
        out = Jet.const(1, self.order)
        for _ in range(n):
            out = out * self
        return out

    def diff(self, var: str) -> "Jet":
        if self.order < 1:
            raise ValueError("cannot differentiate an order-0 jet")
        c = {}
        for (i, j), v in self.c.items():
            if var == "r" and i:
                c[(i - 1, j)] = v * i
            elif var == "x" and j:
                c[(i, j - 1)] = v * j
        return Jet(c, self.order - 1)


def _binom(n: int, k: int) -> int:
    from math import comb

    return comb(n, k)
