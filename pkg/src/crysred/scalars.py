"""Base scalar rings and series plumbing.

Three coefficient worlds show up in the reduction machinery:

* ``PAdicScalar``: elements of the ramified field F = Q_p(varpi) with
  varpi^e = p, stored as exact rational coordinate vectors over the basis
  {1, varpi, ..., varpi^(e-1)}.  Arithmetic is exact; a pessimistic
  absolute-precision claim rides along so downstream consumers can gate on
  it.  Valuations are exact rationals in (1/e)Z.

* ``ResidueElem``: elements of the residue-side finite field F_{p^r} with
  the p-power Frobenius.  The defining polynomial is found by a
  deterministic search, so two runs always agree on coordinates.

* ``USeries``: truncated (Laurent) series in u over any coefficient type
  above, plus plain ``Fraction`` for the exact unramified layer and duck
  typed symbolic coefficients.

``reduce_mod_varpi`` is the only bridge from the p-adic world to the
residue world: it checks integrality coefficient by coefficient and then
reduces modulo the maximal ideal (varpi).
"""

from __future__ import annotations

from fractions import Fraction
from functools import lru_cache


class NonIntegralCoefficient(Exception):
    """Raised when a residue is requested of a non-integral element."""


class InsufficientPrecision(Exception):
    """Raised when the tracked precision claim cannot support a request."""


def pval(q, p: int):
    """p-adic valuation of a Fraction or int; None for exact zero."""
    if q == 0:
        return None
    q = Fraction(q)
    v = 0
    n = q.numerator
    while n % p == 0:
        n //= p
        v += 1
    d = q.denominator
    while d % p == 0:
        d //= p
        v -= 1
    return v


def fraction_residue(q, p: int) -> int:
    """Reduce a p-integral Fraction modulo p, into {0, ..., p-1}."""
    q = Fraction(q)
    if q.denominator % p == 0:
        raise NonIntegralCoefficient(f"{q} has p in the denominator")
    return (q.numerator * pow(q.denominator, -1, p)) % p


def default_abs_prec(e: int) -> Fraction:
    # generous default: enough for every certificate the chains emit
    return Fraction(12) + Fraction(2, e)


# Coordinates are stored modulo p^(max(ceil(prec), 0) + guard + 2p): the
# floor at 2p + guard keeps the reduction error below every threshold the
# membership checks read (the Fil^(2p) profiles reach 2p), whatever the
# pessimistic claim has degraded to, so a valuation read off a stored
# representative is always conclusive.
REDUCTION_GUARD = 8

# Values whose numerator and denominator both fit in this many bits pass
# through unreduced; exact identities between small quantities therefore
# stay exact, and reduction only fires when coefficient growth sets in.
# The bound comfortably exceeds every working modulus in range, so a
# canonical representative is never reduced twice.
_REDUCE_BIT_THRESHOLD = 320


def _reduce_coord(x: Fraction, p: int, nexp: int) -> Fraction:
    """Canonical representative of x modulo p^nexp * Z_p.

    The output has a pure p-power denominator and a numerator below the
    matching modulus, so repeated arithmetic cannot blow up coefficient
    sizes.  Replacing x by the representative changes it by an element
    of p^nexp * Z_p, which sits far below the claimed precision the
    guard protects.
    """
    num, den = x.numerator, x.denominator
    if (num.bit_length() <= _REDUCE_BIT_THRESHOLD
            and den.bit_length() <= _REDUCE_BIT_THRESHOLD):
        return x
    m = 0
    while den % p == 0:
        den //= p
        m += 1
    modulus = p ** (nexp + m)
    r = (num * pow(den, -1, modulus)) % modulus
    return Fraction(r, p ** m)


# ---------------------------------------------------------------------------
# PAdicScalar
# ---------------------------------------------------------------------------


def _poly_divmod(a, b):
    # division with remainder in Q[X], coefficient lists low-to-high
    a = list(a)
    b = list(b)
    while b and b[-1] == 0:
        b.pop()
    assert b, "division by the zero polynomial"
    q = [Fraction(0)] * max(0, len(a) - len(b) + 1)
    while len(a) >= len(b) and any(a):
        while a and a[-1] == 0:
            a.pop()
        if len(a) < len(b):
            break
        c = a[-1] / b[-1]
        d = len(a) - len(b)
        q[d] = c
        for i, bc in enumerate(b):
            a[i + d] -= c * bc
        a.pop()
    return q, a


def _poly_invert(c, e: int, p: int):
    # invert the polynomial c (deg < e) in Q[X]/(X^e - p) via extended gcd;
    # X^e - p is irreducible (Eisenstein), so any nonzero c is invertible
    mod = [Fraction(-p)] + [Fraction(0)] * (e - 1) + [Fraction(1)]
    r0, r1 = mod, [Fraction(x) for x in c]
    s0, s1 = [Fraction(0)], [Fraction(1)]
    while any(r1):
        q, r = _poly_divmod(r0, r1)
        r0, r1 = r1, r
        t = list(s0)
        for i, qc in enumerate(q):
            for j, sc in enumerate(s1):
                while len(t) <= i + j:
                    t.append(Fraction(0))
                t[i + j] -= qc * sc
        s0, s1 = s1, t
    while r0 and r0[-1] == 0:
        r0.pop()
    assert len(r0) == 1, "gcd with an irreducible modulus must be a unit"
    g = r0[0]
    out = [sc / g for sc in s0]
    _, rem = _poly_divmod(out, mod)
    rem += [Fraction(0)] * (e - len(rem))
    return rem[:e]


class PAdicScalar:
    """An element of F = Q_p(varpi), varpi^e = p, as a coordinate vector.

    The vector ``c`` holds Fractions: the element is sum(c[t] * varpi^t).
    ``prec`` is the claimed absolute precision (a Fraction, in the same
    normalisation as valuations, so varpi has valuation 1/e); it only
    ever shrinks, following the pessimistic propagation rules, and gates
    residue extraction.  Coordinates are kept canonical modulo
    p^(ceil(prec) + guard): small values pass through exactly, large
    ones are reduced, so arithmetic is exact up to an error far below
    the claimed precision and coefficient sizes stay bounded.

    EXAMPLES::

        w = PAdicScalar.varpi_pow(1, p=7, e=2)
        assert (w * w).valuation() == 1          # varpi^2 = 7
        assert (w * w).c[0] == 7
    """

    __slots__ = ("p", "e", "c", "prec")

    def __init__(self, p: int, e: int, c, prec=None):
        self.p = p
        self.e = e
        self.prec = default_abs_prec(e) if prec is None else Fraction(prec)
        nexp = max(0, int(-((-self.prec) // 1))) + REDUCTION_GUARD + 2 * p
        self.c = tuple(_reduce_coord(Fraction(x), p, nexp) for x in c)
        assert len(self.c) == e, "coordinate vector must have length e"

    # -- constructors -------------------------------------------------

    @classmethod
    def from_rational(cls, q, p: int, e: int, prec=None) -> "PAdicScalar":
        c = [Fraction(q)] + [Fraction(0)] * (e - 1)
        return cls(p, e, c, prec)

    @classmethod
    def zero(cls, p: int, e: int) -> "PAdicScalar":
        return cls.from_rational(0, p, e)

    @classmethod
    def one(cls, p: int, e: int) -> "PAdicScalar":
        return cls.from_rational(1, p, e)

    @classmethod
    def varpi_pow(cls, t: int, p: int, e: int, prec=None) -> "PAdicScalar":
        """varpi^t for any integer t (negative powers divide by p)."""
        q, s = divmod(t, e)
        c = [Fraction(0)] * e
        c[s] = Fraction(p) ** q
        return cls(p, e, c, prec)

    # -- structure ----------------------------------------------------

    def is_zero(self) -> bool:
        return all(x == 0 for x in self.c)

    def is_effective_zero(self) -> bool:
        """Indistinguishable from zero at the claimed precision."""
        v = self.valuation()
        return v is None or v >= self.prec

    def valuation(self):
        """Exact valuation in (1/e)Z as a Fraction, or None for zero."""
        best = None
        for t, x in enumerate(self.c):
            v = pval(x, self.p)
            if v is None:
                continue
            w = Fraction(v) + Fraction(t, self.e)
            if best is None or w < best:
                best = w
        return best

    def _compat(self, other) -> "PAdicScalar":
        if isinstance(other, PAdicScalar):
            assert (other.p, other.e) == (self.p, self.e), "mixed fields"
            return other
        return PAdicScalar.from_rational(other, self.p, self.e, prec=self.prec)

    # -- arithmetic ---------------------------------------------------

    def __add__(self, other):
        o = self._compat(other)
        c = tuple(a + b for a, b in zip(self.c, o.c))
        return PAdicScalar(self.p, self.e, c, min(self.prec, o.prec))

    __radd__ = __add__

    def __neg__(self):
        return PAdicScalar(self.p, self.e, tuple(-a for a in self.c), self.prec)

    def __sub__(self, other):
        return self + (-self._compat(other))

    def __rsub__(self, other):
        return self._compat(other) + (-self)

    def __mul__(self, other):
        o = self._compat(other)
        e = self.e
        c = [Fraction(0)] * e
        for i, a in enumerate(self.c):
            if a == 0:
                continue
            for j, b in enumerate(o.c):
                if b == 0:
                    continue
                k = i + j
                if k >= e:
                    c[k - e] += a * b * self.p
                else:
                    c[k] += a * b
        va, vb = self.valuation(), o.valuation()
        if va is None or vb is None:
            prec = min(self.prec, o.prec)
        else:
            prec = min(self.prec + vb, o.prec + va)
        return PAdicScalar(self.p, self.e, c, prec)

    __rmul__ = __mul__

    def inv(self) -> "PAdicScalar":
        assert not self.is_zero(), "division by zero"
        if self.e == 1:
            c = [1 / self.c[0]]
        else:
            c = _poly_invert(self.c, self.e, self.p)
        v = self.valuation()
        return PAdicScalar(self.p, self.e, c, self.prec - 2 * v)

    def __truediv__(self, other):
        return self * self._compat(other).inv()

    def __rtruediv__(self, other):
        return self._compat(other) * self.inv()

    def __pow__(self, n: int):
        if n < 0:
            return self.inv() ** (-n)
        out = PAdicScalar.one(self.p, self.e)
        base = self
        while n:
            if n & 1:
                out = out * base
            base = base * base
            n >>= 1
        return out

    def __eq__(self, other):
        if isinstance(other, PAdicScalar):
            return (self.p, self.e) == (other.p, other.e) and self.c == other.c
        if isinstance(other, (int, Fraction)):
            return self == self._compat(other)
        return NotImplemented

    def __hash__(self):
        return hash((self.p, self.e, self.c))

    def frobenius(self) -> "PAdicScalar":
        # the Frobenius lift fixes F pointwise
        return self

    # -- residue ------------------------------------------------------

    def residue(self) -> int:
        """Image in F_p = O_F/(varpi), as an int in {0, ..., p-1}."""
        if self.prec <= 0:
            raise InsufficientPrecision(f"claimed precision {self.prec} <= 0")
        for t, x in enumerate(self.c):
            v = pval(x, self.p)
            if v is not None and v < 0:
                raise NonIntegralCoefficient(
                    f"coordinate {x}*varpi^{t} is not integral"
                )
        return fraction_residue(self.c[0], self.p)

    def __repr__(self):
        terms = []
        for t, x in enumerate(self.c):
            if x == 0:
                continue
            terms.append(str(x) if t == 0 else f"({x})*w^{t}" if t > 1 else f"({x})*w")
        body = " + ".join(terms) if terms else "0"
        return f"PAdic[{self.p},{self.e}]({body})"


# ---------------------------------------------------------------------------
# ResidueElem
# ---------------------------------------------------------------------------


def _fp_polmul(a, b, p):
    out = [0] * (len(a) + len(b) - 1)
    for i, x in enumerate(a):
        if x:
            for j, y in enumerate(b):
                out[i + j] = (out[i + j] + x * y) % p
    return out


def _fp_polmod(a, m, p):
    # m monic, coefficient lists low-to-high
    a = list(a)
    dm = len(m) - 1
    while len(a) > dm:
        c = a[-1] % p
        if c:
            d = len(a) - 1 - dm
            for i in range(dm):
                a[d + i] = (a[d + i] - c * m[i]) % p
        a.pop()
    while len(a) < dm:
        a.append(0)
    return a


def _fp_powmod(a, n, m, p):
    out = [1] + [0] * (len(m) - 2)
    base = _fp_polmod(a, m, p)
    while n:
        if n & 1:
            out = _fp_polmod(_fp_polmul(out, base, p), m, p)
        base = _fp_polmod(_fp_polmul(base, base, p), m, p)
        n >>= 1
    return out


def _fp_gcd(a, b, p):
    a, b = list(a), list(b)
    while any(b):
        while b and b[-1] % p == 0:
            b.pop()
        if not b:
            break
        inv = pow(b[-1], -1, p)
        r = list(a)
        db = len(b) - 1
        while len(r) - 1 >= db and any(r):
            while r and r[-1] % p == 0:
                r.pop()
            if len(r) - 1 < db:
                break
            c = (r[-1] * inv) % p
            d = len(r) - 1 - db
            for i in range(len(b)):
                r[d + i] = (r[d + i] - c * b[i]) % p
            r.pop()
        a, b = b, r
    while a and a[-1] % p == 0:
        a.pop()
    return a


def _irreducible(m, p) -> bool:
    # m monic of degree r, low-to-high
    r = len(m) - 1
    x = [0, 1]
    xp = _fp_powmod(x, p ** r, m, p)
    # x^(p^r) == x mod m
    t = list(xp)
    t[1] = (t[1] - 1) % p
    if any(t):
        return False
    for q in _prime_divisors(r):
        xq = _fp_powmod(x, p ** (r // q), m, p)
        t = list(xq)
        t[1] = (t[1] - 1) % p
        g = _fp_gcd(m, t, p)
        if len(g) != 1:
            return False
    return True


def _prime_divisors(n):
    out = []
    d = 2
    while d * d <= n:
        if n % d == 0:
            out.append(d)
            while n % d == 0:
                n //= d
        d += 1
    if n > 1:
        out.append(n)
    return out


@lru_cache(maxsize=None)
def residue_modulus(p: int, r: int):
    """Defining polynomial of F_{p^r}: the first monic irreducible of
    degree r over F_p, "first" meaning smallest lower-coefficient tuple
    read as a base-p number.  Deterministic, so coordinates are portable
    across runs."""
    if r == 1:
        return (0, 1)
    for code in range(p ** r):
        lower = []
        t = code
        for _ in range(r):
            lower.append(t % p)
            t //= p
        m = lower + [1]
        if _irreducible(m, p):
            return tuple(m)
    raise AssertionError("no irreducible polynomial found, impossible")


class ResidueElem:
    """An element of k = F_{p^r} in coordinates over the fixed modulus."""

    __slots__ = ("p", "r", "c")

    def __init__(self, p: int, r: int, c):
        self.p = p
        self.r = r
        self.c = tuple(x % p for x in c)
        assert len(self.c) == r

    @classmethod
    def from_int(cls, v: int, p: int, r: int) -> "ResidueElem":
        return cls(p, r, [v % p] + [0] * (r - 1))

    @classmethod
    def zero(cls, p: int, r: int) -> "ResidueElem":
        return cls.from_int(0, p, r)

    @classmethod
    def one(cls, p: int, r: int) -> "ResidueElem":
        return cls.from_int(1, p, r)

    @classmethod
    def gen(cls, p: int, r: int) -> "ResidueElem":
        c = [0] * r
        if r == 1:
            c[0] = 1
        else:
            c[1] = 1
        return cls(p, r, c)

    def is_zero(self) -> bool:
        return all(x == 0 for x in self.c)

    def _compat(self, other) -> "ResidueElem":
        if isinstance(other, ResidueElem):
            assert (other.p, other.r) == (self.p, self.r), "mixed residue fields"
            return other
        return ResidueElem.from_int(other, self.p, self.r)

    def __add__(self, other):
        o = self._compat(other)
        return ResidueElem(self.p, self.r, [a + b for a, b in zip(self.c, o.c)])

    __radd__ = __add__

    def __neg__(self):
        return ResidueElem(self.p, self.r, [-a for a in self.c])

    def __sub__(self, other):
        return self + (-self._compat(other))

    def __rsub__(self, other):
        return self._compat(other) + (-self)

    def __mul__(self, other):
        o = self._compat(other)
        m = residue_modulus(self.p, self.r)
        c = _fp_polmod(_fp_polmul(list(self.c), list(o.c), self.p), list(m), self.p)
        return ResidueElem(self.p, self.r, c)

    __rmul__ = __mul__

    def inv(self) -> "ResidueElem":
        assert not self.is_zero(), "division by zero in residue field"
        return self ** (self.p ** self.r - 2)

    def __truediv__(self, other):
        return self * self._compat(other).inv()

    def __pow__(self, n: int):
        if n < 0:
            return self.inv() ** (-n)
        out = ResidueElem.one(self.p, self.r)
        base = self
        while n:
            if n & 1:
                out = out * base
            base = base * base
            n >>= 1
        return out

    def frobenius(self) -> "ResidueElem":
        return self ** self.p

    def __eq__(self, other):
        if isinstance(other, ResidueElem):
            return (self.p, self.r) == (other.p, other.r) and self.c == other.c
        if isinstance(other, int):
            return self == self._compat(other)
        return NotImplemented

    def __hash__(self):
        return hash((self.p, self.r, self.c))

    def __repr__(self):
        if self.r == 1 or all(x == 0 for x in self.c[1:]):
            return f"k({self.c[0]})"
        return f"k{list(self.c)}"


# ---------------------------------------------------------------------------
# USeries
# ---------------------------------------------------------------------------


def _is0(v) -> bool:
    z = getattr(v, "is_zero", None)
    return z() if z is not None else v == 0


def _inv_coeff(v):
    i = getattr(v, "inv", None)
    return i() if i is not None else 1 / Fraction(v)


def _frob_coeff(v):
    f = getattr(v, "frobenius", None)
    return f() if f is not None else v


KINDS = ("rational", "padic", "residue", "sym")


class USeries:
    """A truncated series sum_n c_n u^n, exact below the cutoff u_prec.

    Coefficients live in a sparse dict.  Negative exponents are allowed
    (Laurent tails appear on the residue side after scaling by powers of
    u); everything above or equal to u_prec is dropped by every
    operation, and equality comparisons only look below the common
    cutoff.
    """

    __slots__ = ("c", "u_prec", "kind")

    def __init__(self, c: dict, u_prec: int, kind: str):
        assert kind in KINDS, f"unknown coefficient kind {kind!r}"
        self.c = {n: v for n, v in c.items() if n < u_prec and not _is0(v)}
        self.u_prec = u_prec
        self.kind = kind

    # -- constructors -------------------------------------------------

    @classmethod
    def zero(cls, u_prec: int, kind: str) -> "USeries":
        return cls({}, u_prec, kind)

    @classmethod
    def monomial(cls, coeff, n: int, u_prec: int, kind: str) -> "USeries":
        return cls({n: coeff}, u_prec, kind)

    def coeff(self, n: int):
        return self.c.get(n)

    def support(self):
        return sorted(self.c)

    def is_zero(self) -> bool:
        return not self.c

    def effectively_zero(self) -> bool:
        """Zero to claimed precision in every coefficient.

        Coefficient types without a precision claim are held to exact
        zero, so for rational series this agrees with is_zero.
        """
        for v in self.c.values():
            ez = getattr(v, "is_effective_zero", None)
            if ez is not None:
                if not ez():
                    return False
            elif v != 0:
                return False
        return True

    def min_exp(self):
        return min(self.c) if self.c else None

    # -- arithmetic ---------------------------------------------------

    def _check(self, other: "USeries"):
        assert self.kind == other.kind, "mixed series kinds"

    def __add__(self, other: "USeries") -> "USeries":
        self._check(other)
        u = min(self.u_prec, other.u_prec)
        c = dict(self.c)
        for n, v in other.c.items():
            c[n] = c[n] + v if n in c else v
        return USeries(c, u, self.kind)

    def __neg__(self) -> "USeries":
        return USeries({n: -v for n, v in self.c.items()}, self.u_prec, self.kind)

    def __sub__(self, other: "USeries") -> "USeries":
        return self + (-other)

    def __mul__(self, other: "USeries") -> "USeries":
        self._check(other)
        u = min(self.u_prec, other.u_prec)
        acc: dict = {}
        for i, a in self.c.items():
            for j, b in other.c.items():
                k = i + j
                if k < u:
                    acc[k] = acc[k] + a * b if k in acc else a * b
        return USeries(acc, u, self.kind)

    def scalar_mul(self, s) -> "USeries":
        return USeries({n: s * v for n, v in self.c.items()}, self.u_prec, self.kind)

    def shift(self, m: int) -> "USeries":
        """Multiply by u^m (m may be negative)."""
        return USeries({n + m: v for n, v in self.c.items()}, self.u_prec, self.kind)

    def truncate(self, u_prec: int) -> "USeries":
        return USeries(self.c, min(self.u_prec, u_prec), self.kind)

    def map_coeffs(self, fn, kind=None) -> "USeries":
        return USeries({n: fn(v) for n, v in self.c.items()}, self.u_prec,
                       kind or self.kind)

    def inverse_unit(self) -> "USeries":
        """Invert a series whose lowest term is c0 * u^0 with c0 a unit."""
        assert self.c, "cannot invert zero"
        assert self.min_exp() == 0, "inverse_unit needs a unit constant term"
        c0i = _inv_coeff(self.c[0])
        out = {0: c0i}
        sup = sorted(n for n in self.c if n > 0)
        for n in range(1, self.u_prec):
            s = None
            for i in sup:
                if i > n:
                    break
                q = out.get(n - i)
                if q is None:
                    continue
                t = self.c[i] * q
                s = t if s is None else s + t
            if s is not None and not _is0(s):
                out[n] = c0i * (-s)
        return USeries(out, self.u_prec, self.kind)

    def same(self, other: "USeries") -> bool:
        """Equality of all coefficients below the common cutoff."""
        self._check(other)
        u = min(self.u_prec, other.u_prec)
        keys = {n for n in self.c if n < u} | {n for n in other.c if n < u}
        for n in keys:
            a, b = self.c.get(n), other.c.get(n)
            if a is None or b is None:
                # constructors drop exact zeros, so a lone entry is nonzero
                return False
            if a != b:
                return False
        return True

    def __eq__(self, other):
        if isinstance(other, USeries):
            return self.same(other)
        return NotImplemented

    def __repr__(self):
        terms = [f"({v})*u^{n}" for n, v in sorted(self.c.items())[:8]]
        more = " + ..." if len(self.c) > 8 else ""
        return f"USeries[{self.kind},<{self.u_prec}]({' + '.join(terms) or '0'}{more})"


def series_inverse(s: USeries) -> USeries:
    """Invert a series: a single monomial, a unit, or u^m * unit.

    The monomial and unit cases are exact below the cutoff.  The Laurent
    branch (min_exp != 0 with several terms) is only sound when the
    operand is an exact polynomial, which is how the residue-field stage
    uses it; truncated operands should never reach that branch.
    """
    if not s.c:
        raise ZeroDivisionError("cannot invert the zero series")
    if len(s.c) == 1:
        ((n, v),) = s.c.items()
        return USeries.monomial(_inv_coeff(v), -n, s.u_prec, s.kind)
    m = s.min_exp()
    if m == 0:
        return s.inverse_unit()
    return s.shift(-m).inverse_unit().shift(-m)


def frobenius(s: USeries, p: int, out_uprec=None) -> USeries:
    """Apply the Frobenius lift u -> u^p coefficientwise-trivially on F.

    The input must be known far enough: to trust the output below
    out_uprec, the input needs coefficients below ceil(out_uprec / p).
    """
    out = s.u_prec if out_uprec is None else out_uprec
    need = -(-out // p)
    assert s.u_prec >= need, (
        f"input truncated at {s.u_prec}, need {need} for output cutoff {out}"
    )
    c = {}
    for n, v in s.c.items():
        m = n * p
        if m < out:
            c[m] = _frob_coeff(v)
    return USeries(c, out, s.kind)


def reduce_mod_varpi(s: USeries, r: int = 1) -> USeries:
    """Reduce a p-adic series modulo varpi, onto F_{p^r} coefficients.

    Raises NonIntegralCoefficient if any coefficient has negative
    valuation and InsufficientPrecision if a coefficient's tracked
    precision claim has been exhausted.
    """
    assert s.kind == "padic", "reduce_mod_varpi expects p-adic coefficients"
    c = {}
    p = None
    for n, v in s.c.items():
        p = v.p
        try:
            res = v.residue()
        except NonIntegralCoefficient:
            raise NonIntegralCoefficient(
                f"coefficient of u^{n} is not integral: {v!r}"
            )
        if res:
            c[n] = ResidueElem.from_int(res, v.p, r)
    return USeries(c, s.u_prec, "residue")


# ---------------------------------------------------------------------------
# 2x2 matrices over a coefficient ring of series
# ---------------------------------------------------------------------------


class Matrix2:
    """A 2x2 matrix of USeries (or anything with ring ops)."""

    __slots__ = ("a",)

    def __init__(self, a00, a01, a10, a11):
        self.a = (a00, a01, a10, a11)

    def __getitem__(self, rc):
        r, c = rc
        return self.a[2 * r + c]

    def __mul__(self, other: "Matrix2") -> "Matrix2":
        (a, b, c, d) = self.a
        (e, f, g, h) = other.a
        return Matrix2(a * e + b * g, a * f + b * h,
                       c * e + d * g, c * f + d * h)

    def __add__(self, other: "Matrix2") -> "Matrix2":
        return Matrix2(*(x + y for x, y in zip(self.a, other.a)))

    def __sub__(self, other: "Matrix2") -> "Matrix2":
        return Matrix2(*(x - y for x, y in zip(self.a, other.a)))

    def det(self):
        (a, b, c, d) = self.a
        return a * d - b * c

    def transpose(self) -> "Matrix2":
        (a, b, c, d) = self.a
        return Matrix2(a, c, b, d)

    def map(self, fn) -> "Matrix2":
        return Matrix2(*(fn(x) for x in self.a))

    def inverse_unit_det(self) -> "Matrix2":
        """Inverse when det is a unit series (constant term invertible)."""
        (a, b, c, d) = self.a
        di = self.det().inverse_unit()
        return Matrix2(d * di, (-b) * di, (-c) * di, a * di)

    def inverse(self) -> "Matrix2":
        """Inverse via the adjugate, allowing monomial and Laurent dets."""
        (a, b, c, d) = self.a
        di = series_inverse(self.det())
        return Matrix2(d * di, (-b) * di, (-c) * di, a * di)

    def same(self, other: "Matrix2") -> bool:
        return all(x.same(y) for x, y in zip(self.a, other.a))

    def __repr__(self):
        return f"Matrix2({self.a[0]!r}, {self.a[1]!r}; {self.a[2]!r}, {self.a[3]!r})"
