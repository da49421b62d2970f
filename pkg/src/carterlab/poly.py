"""Sparse multivariate polynomials over the rationals, and rational functions
whose denominators are products of powers of rho^2, Delta_r and Delta_x.

Monomials are packed into a single Python int (``BITS`` bits per variable), so
monomial multiplication is integer addition and a polynomial is a plain
``dict`` from packed exponent to coefficient.
"""

from __future__ import annotations

from fractions import Fraction
from typing import Dict, Iterable, Mapping, Sequence

try:  # gmpy2 rationals are several times faster than Fraction
    from gmpy2 import mpq as _Q
except ImportError:  # pragma: no cover
    _Q = Fraction

from .errors import TermLimitExceeded

VARS: tuple[str, ...] = ("a", "k", "Lambda", "M", "C1", "C2", "C3", "C4", "C5", "r", "x")
BITS = 12
_MASK = (1 << BITS) - 1
_SHIFT = {v: BITS * i for i, v in enumerate(VARS)}
# the sum of all per-variable "high bits"; a packed key with any of these set
# means some exponent overflowed its field
_HIGH = sum(1 << (BITS * (i + 1) - 1) for i in range(len(VARS)))

#: ceiling on the number of stored terms in any single polynomial
TERM_LIMIT = 2_000_000


def rational(value) -> "_Q":
    """Coerce ints, Fractions, decimal strings like ``'1/3'`` to an exact rational."""
    if isinstance(value, float):
        value = Fraction(value)
    if isinstance(value, str):
        value = Fraction(value)
    if isinstance(value, Fraction):
        return _Q(value.numerator, value.denominator)
    return _Q(value)


def pack(exps: Mapping[str, int]) -> int:
    key = 0
    for v, e in exps.items():
        if e < 0 or e > (_MASK >> 1):
            raise ValueError(f"exponent {e} for {v} out of range")
        key |= e << _SHIFT[v]
    return key


def unpack(key: int) -> Dict[str, int]:
    return {v: (key >> _SHIFT[v]) & _MASK for v in VARS if (key >> _SHIFT[v]) & _MASK}


class SparsePoly:
    """Polynomial in the fixed variable set :data:`VARS` with exact rational coefficients.

    Zero coefficients are never stored.  Instances are treated as immutable.
    """

    __slots__ = ("terms",)

    def __init__(self, terms: Dict[int, object] | None = None):
        self.terms: Dict[int, object] = terms if terms is not None else {}

    # construction -----------------------------------------------------
    @classmethod
    def const(cls, c) -> "SparsePoly":
        c = rational(c)
        return cls({0: c} if c else {})

    @classmethod
    def var(cls, name: str, power: int = 1) -> "SparsePoly":
        return cls({pack({name: power}): _Q(1)})

    @classmethod
    def from_terms(cls, items: Iterable[tuple[Mapping[str, int], object]]) -> "SparsePoly":
        out: Dict[int, object] = {}
        for exps, c in items:
            key = pack(exps)
            s = out.get(key, 0) + rational(c)
            if s:
                out[key] = s
            else:
                out.pop(key, None)
        return cls(out)

    # queries ----------------------------------------------------------
    def __len__(self) -> int:
        return len(self.terms)

    def is_zero(self) -> bool:
        return not self.terms

    def __bool__(self) -> bool:
        return bool(self.terms)

    def degree(self, name: str) -> int:
        sh = _SHIFT[name]
        return max(((k >> sh) & _MASK for k in self.terms), default=0)

    def items(self):
        """Iterate ``(exponent-dict, coefficient)`` pairs in canonical (sorted key) order."""
        for key in sorted(self.terms):
            yield unpack(key), self.terms[key]

    def first_term(self):
        """The nonzero term with the smallest packed key, or ``None``."""
        if not self.terms:
            return None
        key = min(self.terms)
        return unpack(key), self.terms[key]

    def __eq__(self, other) -> bool:
        if not isinstance(other, SparsePoly):
            other = SparsePoly.const(other)
        return self.terms == other.terms

    def __hash__(self):  # pragma: no cover - value type, rarely hashed
        return hash(frozenset(self.terms.items()))

    def __repr__(self) -> str:
        if not self.terms:
            return "SparsePoly(0)"
        parts = []
        for exps, c in list(self.items())[:8]:
            mono = "*".join(f"{v}^{e}" if e > 1 else v for v, e in exps.items())
            parts.append(f"{c}" + (f"*{mono}" if mono else ""))
        more = " + ..." if len(self.terms) > 8 else ""
        return f"SparsePoly({' + '.join(parts)}{more})"

    # arithmetic -------------------------------------------------------
    def __add__(self, other) -> "SparsePoly":
        if not isinstance(other, SparsePoly):
            other = SparsePoly.const(other)
        if len(other.terms) > len(self.terms):
            self, other = other, self
        out = dict(self.terms)
        get = out.get
        for k, c in other.terms.items():
            s = get(k, 0) + c
            if s:
                out[k] = s
            else:
                del out[k]
        return SparsePoly(out)

    __radd__ = __add__

    def __neg__(self) -> "SparsePoly":
        return SparsePoly({k: -c for k, c in self.terms.items()})

    def __sub__(self, other) -> "SparsePoly":
        if not isinstance(other, SparsePoly):
            other = SparsePoly.const(other)
        return self + (-other)

    def __rsub__(self, other) -> "SparsePoly":
        return SparsePoly.const(other) - self

    def scale(self, c) -> "SparsePoly":
        c = rational(c)
        if not c:
            return SparsePoly()
        return SparsePoly({k: v * c for k, v in self.terms.items()})

    def __mul__(self, other) -> "SparsePoly":
        if not isinstance(other, SparsePoly):
            return self.scale(other)
        a, b = self.terms, other.terms
        if not a or not b:
            return SparsePoly()
        if len(a) < len(b):
            a, b = b, a
        out: Dict[int, object] = {}
        get = out.get
        b_items = list(b.items())
        for kb, cb in b_items:
            for ka, ca in a.items():
                k = ka + kb
                out[k] = get(k, 0) + ca * cb
        if len(out) > TERM_LIMIT:
            raise TermLimitExceeded(len(out), TERM_LIMIT)
        for k in [k for k, c in out.items() if not c]:
            del out[k]
        if out and any(k & _HIGH for k in out):
            raise OverflowError("packed exponent overflow; raise BITS")
        return SparsePoly(out)

    __rmul__ = __mul__

    def __pow__(self, n: int) -> "SparsePoly":
        if n < 0:
            raise ValueError("negative power")
        result = SparsePoly.const(1)
        base = self
        while n:
            if n & 1:
                result = result * base
            n >>= 1
            if n:
                base = base * base
        return result

    def diff(self, name: str) -> "SparsePoly":
        sh = _SHIFT[name]
        one = 1 << sh
        out = {}
        for k, c in self.terms.items():
            e = (k >> sh) & _MASK
            if e:
                out[k - one] = c * e
        return SparsePoly(out)

    def subs(self, values: Mapping[str, object]) -> "SparsePoly":
        """Substitute exact rational values for some variables."""
        vals = {v: rational(x) for v, x in values.items()}
        out: Dict[int, object] = {}
        for k, c in self.terms.items():
            coef = c
            key = k
            for v, val in vals.items():
                sh = _SHIFT[v]
                e = (k >> sh) & _MASK
                if e:
                    coef = coef * val ** e
                    key -= e << sh
            if coef:
                s = out.get(key, 0) + coef
                if s:
                    out[key] = s
                else:
                    del out[key]
        return SparsePoly(out)

    def evaluate(self, values: Mapping[str, object]):
        """Exact value at a point; every variable that occurs must be assigned."""
        vals = [(i, rational(values[v])) if v in values else (i, None) for i, v in enumerate(VARS)]
        total = _Q(0)
        for k, c in self.terms.items():
            term = c
            for i, val in vals:
                e = (k >> (BITS * i)) & _MASK
                if e:
                    if val is None:
                        raise KeyError(f"no value for variable {VARS[i]}")
                    term *= val ** e
            total += term
        return total


def poly_sum(polys: Iterable[SparsePoly]) -> SparsePoly:
    out: Dict[int, object] = {}
    get = out.get
    for p in polys:
        for k, c in p.terms.items():
            out[k] = get(k, 0) + c
    return SparsePoly({k: c for k, c in out.items() if c})


# ---------------------------------------------------------------------------
# structured rational functions


class DenominatorBasis:
    """The three structured denominator factors and cached powers of each."""

    def __init__(self, rho2: SparsePoly, dr: SparsePoly, dx: SparsePoly):
        self.factors = (rho2, dr, dx)
        self._powers: Dict[tuple[int, int], SparsePoly] = {}
        # d factor / d var, only r and x ever occur
        self.dfactor = {v: tuple(f.diff(v) for f in self.factors) for v in ("r", "x")}

    def power(self, which: int, n: int) -> SparsePoly:
        key = (which, n)
        p = self._powers.get(key)
        if p is None:
            if n == 0:
                p = SparsePoly.const(1)
            elif n == 1:
                p = self.factors[which]
            else:
                p = self.power(which, n // 2) * self.power(which, n - n // 2)
            self._powers[key] = p
        return p

    def product(self, pows: Sequence[int]) -> SparsePoly:
        out = SparsePoly.const(1)
        for i, n in enumerate(pows):
            if n:
                out = out * self.power(i, n)
        return out


class RatFun:
    """``num / (rho2^p * Delta_r^q * Delta_x^s)`` with ``den_pows = (p, q, s)``.

    The denominator is never expanded.  Sums are taken over the componentwise
    maximum of the denominator powers, multiplying numerators by the missing
    factors, so every cancellation happens in numerators.
    """

    __slots__ = ("num", "den_pows", "basis")

    def __init__(self, num: SparsePoly, den_pows: Sequence[int], basis: DenominatorBasis):
        self.num = num
        self.den_pows = tuple(int(p) for p in den_pows)
        self.basis = basis

    def __repr__(self) -> str:
        return f"RatFun(terms={len(self.num)}, den_pows={self.den_pows})"

    def is_zero(self) -> bool:
        return self.num.is_zero()

    def _lift(self, target: Sequence[int]) -> SparsePoly:
        extra = [t - p for t, p in zip(target, self.den_pows)]
        if not any(extra):
            return self.num
        return self.num * self.basis.product(extra)

    def __add__(self, other: "RatFun") -> "RatFun":
        return ratfun_sum([self, other], self.basis)

    def __neg__(self) -> "RatFun":
        return RatFun(-self.num, self.den_pows, self.basis)

    def __sub__(self, other: "RatFun") -> "RatFun":
        return ratfun_sum([self, -other], self.basis)

    def __mul__(self, other) -> "RatFun":
        if isinstance(other, RatFun):
            pows = [p + q for p, q in zip(self.den_pows, other.den_pows)]
            return RatFun(self.num * other.num, pows, self.basis)
        if isinstance(other, SparsePoly):
            return RatFun(self.num * other, self.den_pows, self.basis)
        return RatFun(self.num.scale(other), self.den_pows, self.basis)

    __rmul__ = __mul__

    def times_factor(self, which: int, n: int) -> "RatFun":
        """Multiply by ``factor**n`` (n may be negative), lowering the denominator first."""
        pows = list(self.den_pows)
        take = min(n, pows[which]) if n > 0 else n
        pows[which] -= take
        num = self.num
        if n - take > 0:
            num = num * self.basis.power(which, n - take)
        return RatFun(num, pows, self.basis)

    def diff(self, var: str) -> "RatFun":
        """Exact derivative in ``r`` or ``x`` by the quotient rule.

        Each denominator power that depends on ``var`` and is positive goes up
        by exactly one.
        """
        if var not in ("r", "x"):
            raise ValueError("only r and x derivatives occur")
        dfac = self.basis.dfactor[var]
        active = [i for i in range(3) if self.den_pows[i] and dfac[i]]
        if not active:
            return RatFun(self.num.diff(var), self.den_pows, self.basis)
        pows = list(self.den_pows)
        for i in active:
            pows[i] += 1
        parts = []
        # N' * prod(active factors)
        lead = self.num.diff(var)
        for i in active:
            lead = lead * self.basis.factors[i]
        parts.append(lead)
        # - N * sum_i p_i f_i' prod_{j != i} f_j
        for i in active:
            t = self.num * dfac[i]
            for j in active:
                if j != i:
                    t = t * self.basis.factors[j]
            parts.append(t.scale(-self.den_pows[i]))
        return RatFun(poly_sum(parts), pows, self.basis)

    def evaluate(self, values: Mapping[str, object]):
        """Exact value; raises ZeroDivisionError at a structured pole."""
        den = _Q(1)
        for f, p in zip(self.basis.factors, self.den_pows):
            if p:
                den *= f.evaluate(values) ** p
        if not den:
            raise ZeroDivisionError("structured denominator vanishes")
        return self.num.evaluate(values) / den


def ratfun_sum(items: Sequence[RatFun], basis: DenominatorBasis, counter: list | None = None) -> RatFun:
    """Sum over the common structured denominator.

    ``counter``, if given, accumulates the total number of numerator terms fed
    into the final combination (the pre-cancellation size).
    """
    items = [f for f in items if not f.is_zero()]
    if not items:
        return RatFun(SparsePoly(), (0, 0, 0), basis)
    target = [max(f.den_pows[i] for f in items) for i in range(3)]
    lifted = [f._lift(target) for f in items]
    if counter is not None:
        counter[0] += sum(len(p) for p in lifted)
    return RatFun(poly_sum(lifted), target, basis)
