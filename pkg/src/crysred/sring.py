"""The big coefficient ring and its certificates.

Everything downstream works over S_F = W(k)[[u]][E^p/p] (inside F[[u]]),
where E = u + p, T = E^p/p, gamma = phi(E)/p = 1 + u^p/p, and
lambda_b = prod_{n >= 0} phi^{bn}(gamma).  With the series cutoff below
p^3 (the default is 4p^2), any lambda power collapses to a finite product
of factors (1 + u^{p^{m+1}}/p)^{c_m}, so the whole layer is exact
rational arithmetic with p-power denominators.

Membership statements come in two strengths:

* necessary coefficientwise profiles (``sf_profile_ok``,
  ``fil_profile_check``): fast, sound as rejectors, deliberately not
  complete as acceptors;
* ``IdealWitness``: an explicit decomposition x = varpi*p*s1 + varpi*g2
  + E*g3 against the ideal varpi*p*S_F + varpi*Fil^{2p} + E*Fil^{2p},
  validated by exact recombination plus the profiles.  Chain error terms
  always come with one of these attached.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from functools import lru_cache

from .scalars import PAdicScalar, USeries, pval


class WitnessMismatch(Exception):
    """An ideal-membership witness failed to recombine or to validate."""


# ---------------------------------------------------------------------------
# basic series: E, T, gamma powers, lambda powers
# ---------------------------------------------------------------------------


def gen_binomial(c: int, j: int) -> Fraction:
    """binomial(c, j) for any integer c (negative allowed), j >= 0."""
    out = Fraction(1)
    for i in range(j):
        out *= Fraction(c - i, i + 1)
    return out


def E_pow_rational(k: int, p: int, u_prec: int) -> USeries:
    """(u + p)^k as an exact rational series, k >= 0."""
    assert k >= 0
    c = {}
    for n in range(0, min(k, u_prec - 1) + 1):
        c[n] = gen_binomial(k, n) * Fraction(p) ** (k - n)
    return USeries(c, u_prec, "rational")


def T_rational(p: int, u_prec: int) -> USeries:
    return E_pow_rational(p, p, u_prec).scalar_mul(Fraction(1, p))


def gamma_pow(c: int, p: int, u_prec: int, level: int = 0) -> USeries:
    """(1 + u^{p^{level+1}} / p)^c, truncated; c any integer.

    level 0 is gamma itself, level m is phi^m(gamma).
    """
    step = p ** (level + 1)
    out = {}
    j = 0
    while j * step < u_prec:
        out[j * step] = gen_binomial(c, j) * Fraction(1, p) ** j
        j += 1
    return USeries(out, u_prec, "rational")


def lambda_power(g: dict, b: int, p: int, u_prec: int) -> USeries:
    """lambda_b raised to the twisted exponent g = sum_j g[j] * phi^j.

    lambda_b = prod_{n>=0} phi^{bn}(gamma), and phi^m(gamma) is congruent
    to 1 below the cutoff once p^{m+1} >= u_prec, so only finitely many
    levels survive.  Returns an exact rational series.

    EXAMPLES::

        lambda_power({0: 1}, 2, 7, 300)   # lambda_2 itself, = gamma here
        lambda_power({0: 3, 1: -2}, 4, 7, 300)
    """
    # exponent of phi^m(gamma) in the product
    levels: dict = {}
    m = 0
    while p ** (m + 1) < u_prec:
        acc = 0
        for j, cj in g.items():
            if cj == 0:
                continue
            assert j >= 0, "negative Frobenius powers make no sense here"
            if j <= m and (m - j) % b == 0:
                acc += cj
        if acc:
            levels[m] = acc
        m += 1
    out = USeries({0: Fraction(1)}, u_prec, "rational")
    for lvl, c in sorted(levels.items()):
        out = out * gamma_pow(c, p, u_prec, level=lvl)
    return out


def alpha_coefficients(g: dict, b: int | None = None):
    """Leading T-expansion data of lambda_b^g: (alpha_0, alpha_1) = (1, g(0)).

    The T-degree >= 2 tail (and every unramified correction hiding in it)
    is absorbed by the first-step corrections, so these two integers are
    all the chain displays consume.
    """
    return 1, int(g.get(0, 0))


def lift_series(s: USeries, p: int, e: int, prec=None) -> USeries:
    """Lift a rational-coefficient series into the p-adic world."""
    assert s.kind == "rational"
    return s.map_coeffs(
        lambda v: PAdicScalar.from_rational(v, p, e, prec), kind="padic")


def rationalize(s: USeries) -> USeries:
    """Drop a slot-0-only p-adic series back to rational coefficients."""
    assert s.kind == "padic"
    out = {}
    for n, v in s.c.items():
        assert all(x == 0 for x in v.c[1:]), "series has ramified coordinates"
        out[n] = v.c[0]
    return USeries(out, s.u_prec, "rational")


# ---------------------------------------------------------------------------
# membership profiles
# ---------------------------------------------------------------------------


def _coeff_val(v, p: int):
    if isinstance(v, PAdicScalar):
        return v.valuation()
    return pval(v, p)


def sf_profile_ok(s: USeries, p: int, shift=0) -> bool:
    """Necessary coefficientwise test for membership in p^shift * S_F.

    An element sum_b f_b T^b with integral f_b has its u^n coefficient of
    valuation at least -floor(n/p); that bound is tight (T^b attains it).
    shift may be any rational (varpi powers give 1/e steps).
    """
    shift = Fraction(shift)
    for n, v in s.c.items():
        if n < 0:
            return False
        w = _coeff_val(v, p)
        if w is None:
            continue
        if w < shift - Fraction(n // p):
            return False
    return True


@lru_cache(maxsize=None)
def fil_profile(p: int, m: int, nmax: int):
    """Minimum-valuation profile of Fil^m S_F below u^nmax, brute force.

    Fil^m is generated over S_F by the monomials E^a T^b with a + pb >= m.
    For each u-exponent n the table holds the least possible coefficient
    valuation of g * s with g a generator and s integral.  Computed by
    enumerating generators directly (with the binomial carries), not from
    a closed form, so it can serve as an independent check.
    """
    dmax = 3 * (nmax + m) + 3 * p
    # nu_p(binomial(D, m')) via Legendre
    def vbinom(D, mm):
        out = 0
        q = p
        while q <= D:
            out += D // q - mm // q - (D - mm) // q
            q *= p
        return out

    table = [None] * nmax
    for D in range(m, dmax + 1):
        # among generators with a + pb = D the largest b is the worst case
        b_best = D // p
        run = None
        for mm in range(0, min(nmax - 1, D) + 1):
            cand = vbinom(D, mm) + (D - mm)
            run = cand if run is None else min(run, cand)
            val = run - b_best
            if table[mm] is None or val < table[mm]:
                table[mm] = val
    # a generator term at u^{m'} reaches every n >= m' after multiplying
    # by an integral series, so the profile is the running minimum
    out = []
    best = None
    for n in range(nmax):
        v = table[n]
        if v is not None:
            best = v if best is None else min(best, v)
        out.append(best)
    return tuple(out)


def fil_profile_check(s: USeries, m: int, p: int, shift=0) -> bool:
    """Necessary test for membership in p^shift * Fil^m S_F."""
    shift = Fraction(shift)
    if not s.c:
        return True
    table = fil_profile(p, m, s.u_prec)
    for n, v in s.c.items():
        if n < 0:
            return False
        w = _coeff_val(v, p)
        if w is None:
            continue
        if w < shift + Fraction(table[n]):
            return False
    return True


# ---------------------------------------------------------------------------
# ideal I = varpi p S_F + varpi Fil^{2p} S_F + E Fil^{2p} S_F
# ---------------------------------------------------------------------------


@dataclass
class ConservativeFail:
    """The conservative membership check could not produce a witness."""
    reason: str


@dataclass
class IdealWitness:
    """Certificate that x = varpi*p*s1 + varpi*g2 + E*g3 with s1 in S_F
    and g2, g3 in Fil^{2p} S_F.  The chains only ever populate s1; the
    other two slots exist for the general-purpose checker."""

    s1: USeries
    g2: USeries
    g3: USeries
    provenance: str = ""

    def scaled_integral(self, s: USeries, provenance: str = "") -> "IdealWitness":
        """Multiply the witnessed element by an integral series."""
        return IdealWitness(self.s1 * s, self.g2 * s, self.g3 * s,
                            provenance or self.provenance)

    def plus(self, other: "IdealWitness") -> "IdealWitness":
        return IdealWitness(self.s1 + other.s1, self.g2 + other.g2,
                            self.g3 + other.g3,
                            f"{self.provenance} + {other.provenance}")


def witness_total(w: IdealWitness, p: int, e: int) -> USeries:
    """The element the witness claims to decompose, reassembled."""
    wp = PAdicScalar.varpi_pow(e + 1, p, e)   # varpi * p
    varpi = PAdicScalar.varpi_pow(1, p, e)
    E = lift_series(E_pow_rational(1, p, w.s1.u_prec), p, e)
    out = w.s1.scalar_mul(wp)
    if not w.g2.is_zero():
        out = out + w.g2.scalar_mul(varpi)
    if not w.g3.is_zero():
        out = out + E * w.g3
    return out


def validate_witness(x: USeries, w: IdealWitness, p: int, e: int) -> bool:
    """Recombination at working precision plus the membership profiles.

    Raises WitnessMismatch on any failure; returns True otherwise.
    """
    if not (witness_total(w, p, e) - x).effectively_zero():
        raise WitnessMismatch(
            f"witness does not recombine to the element ({w.provenance})")
    if not sf_profile_ok(w.s1, p):
        raise WitnessMismatch(
            f"s1 slot fails the S_F profile ({w.provenance})")
    for name, g in (("g2", w.g2), ("g3", w.g3)):
        if not fil_profile_check(g, 2 * p, p):
            raise WitnessMismatch(
                f"{name} slot fails the Fil^(2p) profile ({w.provenance})")
    return True


def ideal_I_check(x: USeries, p: int, e: int):
    """Try to certify x in I = varpi p S_F + varpi Fil^{2p} + E Fil^{2p}.

    Conservative: attempts the single-slot routes in order and returns a
    ConservativeFail when none of the necessary profiles supports one.
    A returned witness always validates.
    """
    if x.is_zero():
        z = USeries.zero(x.u_prec, x.kind)
        return IdealWitness(z, z, z, "zero element")
    inv_wp = PAdicScalar.varpi_pow(-(e + 1), p, e)
    z = USeries.zero(x.u_prec, x.kind)
    s1 = x.scalar_mul(inv_wp)
    if sf_profile_ok(s1, p):
        w = IdealWitness(s1, z, z, "varpi*p*S_F route")
        validate_witness(x, w, p, e)
        return w
    g2 = x.scalar_mul(PAdicScalar.varpi_pow(-1, p, e))
    if fil_profile_check(g2, 2 * p, p):
        w = IdealWitness(z, g2, z, "varpi*Fil^(2p) route")
        validate_witness(x, w, p, e)
        return w
    return ConservativeFail(
        "no single-slot decomposition passes the necessary profiles")
