"""Base-change chains carrying a two-dimensional Frobenius tuple down to
an integral model with certified error terms.

The working object is an f-tuple of 2x2 matrices over truncated series
in u with exact coefficients in F = Q_p(varpi), varpi^e = p.  A chain
applies named twisted conjugations

    A^(i)  |->  X^(i) * A^(i) * phi(X^(i-1))^(-1)     (slot indices mod f)

until the tuple agrees with a closed-form polynomial target up to the
ideal

    I = varpi*p*S_F  +  varpi*Fil^(2p)(S_F)  +  E*Fil^(2p)(S_F).

Nothing is discarded along the way: every correction term is carried
through the whole chain, and at the end each entry of the difference
from the target is certified with an explicit ideal-membership witness
(or the run fails loudly).  All identities are exact below the series
cutoff u_prec; the default cutoff 4p^2 sits far above every exponent
the closed forms involve.

Slot conventions.  A Type I slot holds [[0, E^k*a1], [1, a2*lam]] and a
Type II slot holds [[E^k*a1, 0], [a2*lam, 1]], where lam is a twisted
power of the distinguished unit lambda_b.  Every closed form is driven
by the base-E^p digit split of lam: writing lam = d0 + d1*E^p + q2*E^(2p)
with d0, d1 polynomials of degree below p (exact long division), the
leading data are the series alpha_0 = d0 and alpha_1 = p*d1.  Both are
integral, alpha_0 has unit constant term 1 + O(p), and alpha_1 has unit
constant term congruent to the twisted-exponent value g(0) mod p, so
both invert as series over the model.  Weights obey the labeled
convention: k_0 in [p+2, 2p-4] at slot 0, k_i in [2, p-3] elsewhere.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from fractions import Fraction
from random import Random

from .scalars import (
    InsufficientPrecision,
    Matrix2,
    PAdicScalar,
    USeries,
    frobenius,
)
from .sring import (
    ConservativeFail,
    E_pow_rational,
    IdealWitness,
    WitnessMismatch,
    alpha_coefficients,
    fil_profile_check,
    gamma_pow,
    gen_binomial,
    lambda_power,
    lift_series,
    validate_witness,
)
from .typesets import TYPE_I, TYPE_II, Profile, build_W, validate


class UnsupportedRegime(Exception):
    """The slope pattern matches none of the implemented chain regimes."""


class UnsupportedExponentData(Exception):
    """No exact twisted-exponent table is available for this shape."""


class NonInvertibleBaseChange(Exception):
    """A base-change matrix (or a scalar it needs) failed to invert."""


class CertificateFailure(Exception):
    """A final-state entry could not be certified against the target."""


# ---------------------------------------------------------------------------
# exponent data
# ---------------------------------------------------------------------------


def exponent_data(profile: Profile, exact=None):
    """Per-slot twisted exponents (g, b, synthetic) for the lambda factors.

    For f = 2 the exact tables are available for the Type combinations
    (I,I), (I,II) and (II,I); the all-II combination never reaches this
    code because such tuples are reducible and the validator rejects
    them.  For other f there is no exact table here, so exact=True
    raises UnsupportedExponentData and the default falls back to a
    synthetic constant-term-only exponent that preserves g(0).  The
    chain is exact for whichever lambda the exponent produces; g(0)
    pins the residue data the reduction step reads off.

    EXAMPLES::

        exponent_data(prof_II_I)[0][0]   # {0: -k1, 1: k0, 2: k1, 3: -k0}
    """
    f = profile.f
    if exact is None:
        exact = f == 2
    if exact:
        if f != 2:
            raise UnsupportedExponentData(
                f"no exact exponent table for f = {f}; "
                "pass exact=False for the constant-term-only fallback")
        k0, k1 = profile.k
        tt = tuple(profile.types)
        if tt == (TYPE_I, TYPE_I):
            return [({0: k1, 1: -k0}, 2, False),
                    ({0: k0, 1: -k1}, 2, False)]
        if tt == (TYPE_I, TYPE_II):
            return [({0: k1, 1: k0, 2: -k1, 3: -k0}, 4, False),
                    ({0: -k0, 1: k1, 2: k0, 3: -k1}, 4, False)]
        if tt == (TYPE_II, TYPE_I):
            return [({0: -k1, 1: k0, 2: k1, 3: -k0}, 4, False),
                    ({0: k0, 1: k1, 2: -k0, 3: -k1}, 4, False)]
        raise UnsupportedRegime(
            "the all-Type-II pair is reducible and carries no exponent data")
    S = profile.S()
    out = []
    for i in range(f):
        kn = profile.k[(i + 1) % f]
        out.append(({0: kn if i in S else -kn}, 2 * f, True))
    return out


# ---------------------------------------------------------------------------
# random lifts
# ---------------------------------------------------------------------------


def random_unit(rng: Random, p: int, e: int, prec=None, digits: int = 3):
    """A seeded unit of O_F: three base-p digits per varpi-coordinate,
    constant coordinate a unit.  Deliberately non-special."""
    c = []
    for t in range(e):
        x = rng.randrange(1, p) if t == 0 else rng.randrange(p)
        for j in range(1, digits):
            x += rng.randrange(p) * p ** j
        c.append(Fraction(x))
    return PAdicScalar(p, e, tuple(c), prec)


def _invert_scalar(x: PAdicScalar, what: str) -> PAdicScalar:
    if x.is_zero():
        raise NonInvertibleBaseChange(f"{what} must be invertible")
    return x.inv()


# ---------------------------------------------------------------------------
# the Frobenius tuple
# ---------------------------------------------------------------------------


class FrobTuple:
    """An f-tuple of 2x2 matrices plus the slot data used to build it.

    ``ring`` tags where the entries live: "model" for the p-adic
    series model of S_F[1/p], "integral" for a polynomial target with
    O_F coefficients, "residue" after reduction mod varpi.  The
    auxiliary slots (a1, a2, alpha1, lam, digits, gdata) are populated
    by initial_frobenius; ``digits`` holds the per-slot base-E^p digit
    split of lam (see epow_divmod), which every closed form consumes.
    A chain's final tuple additionally carries residuals (full
    difference honest - target per entry), witnesses (ideal-membership
    certificates for the non-slack part) and slack (the p-integral part
    split off at a slack-marked entry).
    """

    __slots__ = ("profile", "mats", "ring", "a1", "a2", "alpha1", "lam",
                 "digits", "gdata", "residuals", "witnesses", "slack")

    def __init__(self, profile, mats, ring, a1=None, a2=None, alpha1=None,
                 lam=None, digits=None, gdata=None, residuals=None,
                 witnesses=None, slack=None):
        self.profile = profile
        self.mats = tuple(mats)
        self.ring = ring
        self.a1 = a1
        self.a2 = a2
        self.alpha1 = alpha1
        self.lam = lam
        self.digits = digits
        self.gdata = gdata
        self.residuals = residuals
        self.witnesses = witnesses
        self.slack = slack

    def copy_with(self, mats=None, ring=None) -> "FrobTuple":
        return FrobTuple(self.profile,
                         self.mats if mats is None else mats,
                         self.ring if ring is None else ring,
                         self.a1, self.a2, self.alpha1, self.lam,
                         self.digits, self.gdata)

    def height_quotients(self):
        """Per slot, det / E^{k_i} when the determinant is c * E^{k_i}.

        Returns a list of scalars (or None where the shape fails); a
        well-formed tuple of this shape always gives units, which is the
        height bound the chain preserves: every base change multiplies a
        slot determinant by a sign only.
        """
        p = self.profile.p
        out = []
        for i, m in enumerate(self.mats):
            q = m.det()
            for _ in range(self.profile.k[i]):
                q = divide_by_E(q, p)
            supp = [n for n, v in sorted(q.c.items())
                    if not getattr(v, "is_effective_zero", lambda: v == 0)()]
            if supp == [0]:
                out.append(q.coeff(0))
            else:
                out.append(None)
        return out

    def height_ok(self) -> bool:
        qs = self.height_quotients()
        return all(q is not None and q.valuation() == 0 for q in qs)


def initial_frobenius(profile: Profile, exact=None, a2_values=None,
                      prec=None) -> FrobTuple:
    """Build the starting tuple over the p-adic series model.

    a1 is a seeded random unit per slot; a2 is a seeded random unit
    times varpi^(e * nu_i).  ``a2_values`` overrides a2 slotwise (None
    entries keep the random draw); a zero override is allowed for the
    degenerate split-at-a-slot example, and a nonzero override must
    match the declared slope.  The random stream is consumed the same
    way with or without overrides, so a1 never moves.

    EXAMPLES::

        ft = initial_frobenius(prof)
        assert ft.height_ok()
    """
    bad = validate(profile)
    if bad:
        raise ValueError("invalid profile: " + "; ".join(bad))
    p, e, f, u_prec = profile.p, profile.e, profile.f, profile.u_prec
    gd = exponent_data(profile, exact)
    rng = Random(profile.seed)
    a1, a2, alpha1, lam, digits, mats = [], [], [], [], [], []
    one = USeries.monomial(PAdicScalar.one(p, e), 0, u_prec, "padic")
    zero = USeries.zero(u_prec, "padic")
    for i in range(f):
        a1.append(random_unit(rng, p, e, prec))
        unit = random_unit(rng, p, e, prec)
        t = profile.nu[i] * e
        assert t.denominator == 1
        a2v = unit * PAdicScalar.varpi_pow(int(t), p, e, prec)
        if a2_values is not None and a2_values[i] is not None:
            o = a2_values[i]
            a2v = o if isinstance(o, PAdicScalar) else \
                PAdicScalar.from_rational(o, p, e, prec)
            if not a2v.is_zero() and a2v.valuation() != profile.nu[i]:
                raise ValueError(
                    f"slot {i}: override valuation {a2v.valuation()} "
                    f"does not match the declared slope {profile.nu[i]}")
        a2.append(a2v)
        g, b, _ = gd[i]
        lam.append(lambda_power(g, b, p, u_prec))
        alpha1.append(alpha_coefficients(g, b)[1])
        q1, d0 = epow_divmod(lam[i], p)
        entry = {"alpha0": d0, "q1": q1}
        if i == 0:
            q2, d1 = epow_divmod(q1, p)
            entry["alpha1"] = d1.scalar_mul(Fraction(p))
            entry["q2"] = q2
        digits.append(entry)
        lead = lift_series(E_pow_rational(profile.k[i], p, u_prec),
                           p, e, prec).scalar_mul(a1[i])
        body = lift_series(lam[i], p, e, prec).scalar_mul(a2[i])
        if profile.types[i] == TYPE_I:
            mats.append(Matrix2(zero, lead, one, body))
        else:
            mats.append(Matrix2(lead, zero, body, one))
    return FrobTuple(profile, mats, "model", a1=a1, a2=a2, alpha1=alpha1,
                     lam=lam, digits=digits, gdata=gd)


# ---------------------------------------------------------------------------
# series division helpers
# ---------------------------------------------------------------------------


def divide_by_E(s: USeries, p: int) -> USeries:
    """The unique series quotient s / (u + p), exact below the cutoff.

    E has constant term p, hence is invertible over F[[u]]; whether the
    quotient is integral is a separate question the membership profiles
    answer.  Works for rational and p-adic coefficients, Laurent tails
    included.
    """
    assert s.kind in ("rational", "padic"), \
        "divide_by_E needs characteristic-zero coefficients"
    lo = s.min_exp()
    if lo is None:
        return s
    if s.kind == "padic":
        sample = next(iter(s.c.values()))
        zero = PAdicScalar.zero(sample.p, sample.e)
        pinv = PAdicScalar.from_rational(Fraction(1, p), sample.p, sample.e)
    else:
        zero = Fraction(0)
        pinv = Fraction(1, p)
    q = {}
    prev = None
    for n in range(lo, s.u_prec):
        acc = s.c.get(n, zero)
        if prev is not None:
            acc = acc - prev
        qn = acc * pinv
        prev = qn
        q[n] = qn
    return USeries({n: v for n, v in q.items() if not _z(v)}, s.u_prec, s.kind)


def divide_by_E_pow(t: USeries, k: int, p: int) -> USeries:
    """Exact rational quotient t / E^k, solved bottom up in one pass."""
    assert t.kind == "rational" and k >= 0
    if k == 0:
        return t
    binoms = [gen_binomial(k, i) * Fraction(p) ** (k - i) for i in range(k + 1)]
    q: dict = {}
    for n in range(t.u_prec):
        acc = t.c.get(n, Fraction(0))
        for i in range(1, min(k, n) + 1):
            prev = q.get(n - i)
            if prev is not None:
                acc -= binoms[i] * prev
        if acc:
            q[n] = acc / binoms[0]
    return USeries(q, t.u_prec, "rational")


def epow_divmod(s: USeries, p: int):
    """Polynomial long division by E^p: returns (q, r), s = q*E^p + r.

    E^p is monic of degree p in u, so on a polynomial (a rational-
    coefficient series with no negative exponents, read as exact below
    its cutoff) the division terminates with deg r < p and everything
    stays exact.  Applied to a lambda power it produces the base-E^p
    digits: alpha_0 = r, and one more division of q yields d1 with
    alpha_1 = p * d1 plus the final quotient q2, so that

        lam = alpha_0 + alpha_1 * E^p / p + q2 * E^(2p).

    The digit coefficients are integral: the S_F profile of lam puts
    valuation at least -floor(n/p) on u^n, and each digit has degree
    below p.
    """
    assert s.kind == "rational", "epow_divmod needs rational coefficients"
    lo = s.min_exp()
    assert lo is None or lo >= 0, "epow_divmod needs a polynomial"
    ecoef = [gen_binomial(p, i) * Fraction(p) ** (p - i) for i in range(p)]
    cur = dict(s.c)
    q: dict = {}
    for n in range(s.u_prec - 1, p - 1, -1):
        c = cur.get(n)
        if not c:
            continue
        m = n - p
        q[m] = c
        del cur[n]
        for i in range(p):
            lo_i = m + i
            v = cur.get(lo_i, Fraction(0)) - c * ecoef[i]
            if v:
                cur[lo_i] = v
            elif lo_i in cur:
                del cur[lo_i]
    return (USeries(q, s.u_prec, "rational"),
            USeries({n: v for n, v in cur.items() if v}, s.u_prec,
                    "rational"))


def _z(v) -> bool:
    zz = getattr(v, "is_zero", None)
    return zz() if zz is not None else v == 0


# ---------------------------------------------------------------------------
# the first correction
# ---------------------------------------------------------------------------


def x_series(ft: FrobTuple, i: int) -> USeries:
    """The slot-i entry of the first base change, as a p-adic series.

    With lam_i = alpha_0 + q1 * E^p (digit split), the tail past the
    displayed head is q1 * E^p away from slot 0 and q2 * E^(2p) at slot
    0 (where also the alpha_1 * E^p / p term stays in the display), so

        x^(i) = -(a2/a1) * q1 * E^(p - k_i)        (i != 0),
        x^(0) = -(a2/a1) * q2 * E^(2p - k_0).

    Both exponents are positive under the weight windows, so x is a
    polynomial; its coefficients need not be integral, but phi(x) lands
    in a2 * p^2 * S_F, which is what the chain uses.
    """
    prof = ft.profile
    p, e = prof.p, prof.e
    if i == 0:
        num = ft.digits[0]["q2"]
        m = 2 * p - prof.k[0]
    else:
        num = ft.digits[i]["q1"]
        m = p - prof.k[i]
    assert m > 0
    q = num * E_pow_rational(m, p, prof.u_prec)
    c = (-ft.a2[i]) * ft.a1[i].inv()
    return lift_series(q, p, e).scalar_mul(c)


def phi_x_structural(ft: FrobTuple, i: int) -> USeries:
    """phi(x^(i)) computed without ever applying phi to the product.

    Since phi(E) = p * gamma, the structural route is
    -(a2/a1) * p^m * gamma^m * phi(numerator) with m = p - k_i (resp.
    2p - k_0 at slot 0); it must agree with the coefficientwise
    Frobenius of x_series, which makes it an oracle for the split, and
    it exhibits the p^m factor behind the a2 * p^2 * S_F bound.
    """
    prof = ft.profile
    p, e, u_prec = prof.p, prof.e, prof.u_prec
    if i == 0:
        num = ft.digits[0]["q2"]
        m = 2 * p - prof.k[0]
    else:
        num = ft.digits[i]["q1"]
        m = p - prof.k[i]
    out = gamma_pow(m, p, u_prec) * frobenius(num, p, u_prec)
    c = (-ft.a2[i]) * ft.a1[i].inv() \
        * PAdicScalar.from_rational(Fraction(p) ** m, p, e)
    return lift_series(out, p, e).scalar_mul(c)


def x1_correction(profile: Profile = None, ft: FrobTuple = None):
    """The first base change: lower unipotent with the x-series."""
    if ft is None:
        ft = initial_frobenius(profile)
    mk = _Mk(ft.profile.p, ft.profile.e, ft.profile.u_prec)
    return [mk.lower(x_series(ft, i)) for i in range(ft.profile.f)]


def alpha_lifts(ft: FrobTuple, i: int):
    """(alpha_0, alpha_1) for slot i as lifted p-adic series.

    alpha_1 is None away from slot 0, where the second digit is not
    taken.  Both series are integral with unit constant terms, so they
    invert through inverse_unit.
    """
    prof = ft.profile
    d = ft.digits[i]
    a0 = lift_series(d["alpha0"], prof.p, prof.e)
    a1 = (lift_series(d["alpha1"], prof.p, prof.e)
          if "alpha1" in d else None)
    return a0, a1


def _invert_series_unit(s: USeries, what: str) -> USeries:
    """Series inverse of a unit, wrapped for base-change error reporting."""
    try:
        return s.inverse_unit()
    except AssertionError as exc:
        raise NonInvertibleBaseChange(
            f"{what} is not a unit series: {exc}") from exc


# ---------------------------------------------------------------------------
# twisted conjugation
# ---------------------------------------------------------------------------


def _phi_mat(m: Matrix2, p: int) -> Matrix2:
    return m.map(lambda s: frobenius(s, p))


def _conjugate_mats(xs, mats, p: int):
    f = len(mats)
    out = []
    for i in range(f):
        prev = xs[(i - 1) % f]
        try:
            inv = _phi_mat(prev, p).inverse()
        except (AssertionError, ZeroDivisionError) as exc:
            raise NonInvertibleBaseChange(
                f"slot {(i - 1) % f}: {exc}") from exc
        out.append(xs[i] * mats[i] * inv)
    return out


def twisted_conjugate(xs, ft: FrobTuple) -> FrobTuple:
    """Apply A |-> X * A * phi(X_prev)^(-1) slotwise.

    The slot-i matrix acts on slot i's rows and, through the Frobenius
    of its inverse, on slot i+1's columns.

    EXAMPLES::

        # f = 1 over the residue field, X = Diag(1, u):
        # [[0, u^k], [1, 0]]  ->  [[0, u^(k-p)], [u, 0]]
    """
    return ft.copy_with(mats=_conjugate_mats(xs, ft.mats, ft.profile.p))


# ---------------------------------------------------------------------------
# matrix factory over the model
# ---------------------------------------------------------------------------


class _Mk:
    """Builders for the small base-change and target matrices."""

    def __init__(self, p: int, e: int, u_prec: int):
        self.p, self.e, self.u_prec = p, e, u_prec

    def scalar(self, c) -> PAdicScalar:
        if isinstance(c, PAdicScalar):
            return c
        return PAdicScalar.from_rational(c, self.p, self.e)

    def zero(self) -> USeries:
        return USeries.zero(self.u_prec, "padic")

    def const(self, c) -> USeries:
        return USeries.monomial(self.scalar(c), 0, self.u_prec, "padic")

    def one(self) -> USeries:
        return self.const(1)

    def Epow(self, k: int, c=1) -> USeries:
        s = lift_series(E_pow_rational(k, self.p, self.u_prec), self.p, self.e)
        return s.scalar_mul(self.scalar(c))

    def ident(self) -> Matrix2:
        return Matrix2(self.one(), self.zero(), self.zero(), self.one())

    def diag(self, x, y) -> Matrix2:
        return Matrix2(self.const(x), self.zero(), self.zero(), self.const(y))

    def swap(self) -> Matrix2:
        return Matrix2(self.zero(), self.one(), self.one(), self.zero())

    def anti(self, c) -> Matrix2:
        """[[0, 1], [c, 0]] = Diag(1, c) * swap."""
        return Matrix2(self.zero(), self.one(), self.const(c), self.zero())

    def lower(self, s: USeries) -> Matrix2:
        return Matrix2(self.one(), self.zero(), s, self.one())

    def upper(self, s: USeries) -> Matrix2:
        return Matrix2(self.one(), s, self.zero(), self.one())


# ---------------------------------------------------------------------------
# regimes
# ---------------------------------------------------------------------------


def classify_regime(profile: Profile):
    """Pick the chain for the slope pattern; returns (name, notes).

    large-slope   nu_0 >= 1: the first correction already lands.
    even-sandwich |S| even and nu_i >= 1 - nu_0 on the sandwich set.
    odd-sandwich  |S| odd and nu_i >= 1 on the sandwich set.
    merge-pair    f = 2, Types (I,I), nu_1 < 1 - nu_0: merge the slots.
    merge-swap    f = 2, Types (II,I), nu_1 < 1: merge with a swap.

    Anything else raises UnsupportedRegime.
    """
    nu0 = profile.nu[0]
    if nu0 >= 1:
        return "large-slope", [f"slot-0 slope {nu0} >= 1"]
    S = profile.S()
    W = build_W(profile.types)
    tt = tuple(profile.types)
    if len(S) % 2 == 0:
        if all(profile.nu[i] >= 1 - nu0 for i in W):
            return "even-sandwich", [
                f"slot-0 slope {nu0} < 1",
                f"|S| = {len(S)} even",
                f"sandwich slopes all >= 1 - nu0 = {1 - nu0}"]
        if profile.f == 2 and tt == (TYPE_I, TYPE_I):
            return "merge-pair", [
                f"slot-0 slope {nu0} < 1",
                f"partner slope {profile.nu[1]} < 1 - nu0 = {1 - nu0}"]
        raise UnsupportedRegime(
            "even Type I count but a sandwich slope drops below "
            f"1 - nu0 = {1 - nu0} and no f = 2 merge applies")
    if all(profile.nu[i] >= 1 for i in W):
        return "odd-sandwich", [
            f"slot-0 slope {nu0} < 1",
            f"|S| = {len(S)} odd",
            "sandwich slopes all >= 1"]
    if profile.f == 2 and tt == (TYPE_II, TYPE_I):
        return "merge-swap", [
            f"slot-0 slope {nu0} < 1",
            f"partner slope {profile.nu[1]} < 1"]
    raise UnsupportedRegime(
        "odd Type I count but a sandwich slope drops below 1 "
        "and no f = 2 merge applies")


def _chain_steps(regime: str, ft: FrobTuple):
    """The named base changes for a regime, in application order.

    All series coefficients are built from the digit lifts: where a
    closed form divides by alpha_0 or alpha_1, the step carries the
    series inverse (exact below the cutoff), so every cancellation the
    targets rely on happens exactly in the arithmetic.
    """
    prof = ft.profile
    p, e, f = prof.p, prof.e, prof.f
    mk = _Mk(p, e, prof.u_prec)
    k0 = prof.k[0]
    steps = [("kill-lambda-tails", "unipotent", x1_correction(ft=ft))]
    if regime == "large-slope":
        return steps
    al0, al1 = alpha_lifts(ft, 0)
    al1_inv = _invert_series_unit(al1, "slot-0 alpha1")
    a1_0, a2_0 = ft.a1[0], ft.a2[0]
    c2 = (-(a1_0 * p)) * _invert_scalar(a2_0, "slot-0 a2")
    s2 = mk.Epow(k0 - p, c2) * al1_inv
    X2 = [mk.upper(s2) if i == 0 else mk.ident() for i in range(f)]
    steps.append(("clear-slot-zero-column", "unipotent", X2))
    W = build_W(prof.types)
    X3 = [mk.swap() if i in W else mk.ident() for i in range(f)]
    steps.append(("align-antidiagonal", "permutation", X3))
    if regime == "even-sandwich":
        d = mk.scalar(p) * _invert_scalar(a2_0, "slot-0 a2")
        steps.append(("rescale-bottom", "diagonal",
                      [mk.diag(1, d) for _ in range(f)]))
    elif regime == "odd-sandwich":
        steps.append(("rescale-bottom", "diagonal",
                      [mk.diag(1, p) for _ in range(f)]))
        c5 = a2_0 * _invert_scalar(a1_0 * p, "slot-0 a1")
        w5 = mk.Epow(2 * p - k0, c5) * al1 * al1 \
            * _invert_series_unit(al0, "slot-0 alpha0")
        X5 = [mk.lower(w5) if i == 0 else mk.ident() for i in range(f)]
        steps.append(("integralize-corner", "unipotent", X5))
    elif regime == "merge-pair":
        b1, b2 = ft.a1[1], ft.a2[1]
        b0_inv = _invert_series_unit(alpha_lifts(ft, 1)[0],
                                     "partner alpha0")
        steps.append(("rescale-bottom", "diagonal",
                      [mk.diag(1, b2), mk.diag(1, b2)]))
        steps.append(("clear-partner-corner", "unipotent",
                      [mk.ident(),
                       mk.lower(mk.Epow(prof.k[1], -b1) * b0_inv)]))
        steps.append(("merge-partner", "monomial",
                      [mk.diag(1, p), mk.anti(p)]))
        c7 = a2_0 * b2 * _invert_scalar(a1_0 * p, "slot-0 a1")
        w7 = mk.Epow(2 * p - k0, c7) * al1 * al1 \
            * _invert_series_unit(al0, "slot-0 alpha0")
        steps.append(("integralize-corner", "unipotent",
                      [mk.lower(w7), mk.ident()]))
    elif regime == "merge-swap":
        b1, b2 = ft.a1[1], ft.a2[1]
        b0_inv = _invert_series_unit(alpha_lifts(ft, 1)[0],
                                     "partner alpha0")
        steps.append(("rescale-bottom", "diagonal",
                      [mk.diag(1, b2), mk.diag(1, b2)]))
        steps.append(("clear-partner-corner", "unipotent",
                      [mk.ident(),
                       mk.lower(mk.Epow(prof.k[1], -b1) * b0_inv)]))
        d = mk.scalar(p) * _invert_scalar(a2_0, "slot-0 a2")
        steps.append(("merge-partner", "monomial",
                      [mk.diag(1, d), mk.anti(d)]))
    else:
        raise UnsupportedRegime(regime)
    return steps


def _target_mats(regime: str, ft: FrobTuple):
    """Closed-form integral target and the slack-marked positions.

    Entries are polynomials in the digit series alpha_0, alpha_1 (and
    the partner's alpha_0 for the merges) and their unit inverses, with
    scalar prefactors whose valuations are nonnegative exactly under
    the regime's slope conditions.  Slack positions tolerate an extra
    p-integral summand on top of the ideal membership.
    """
    prof = ft.profile
    p, e, f = prof.p, prof.e, prof.f
    mk = _Mk(p, e, prof.u_prec)
    S = prof.S()
    W = build_W(prof.types)
    k, a1, a2 = prof.k, ft.a1, ft.a2
    pinv = mk.scalar(Fraction(1, p))
    sp = mk.scalar(p)
    one, zero = mk.one(), mk.zero()
    slack: set = set()
    mats = []
    if regime == "large-slope":
        for i in range(f):
            lead = mk.Epow(k[i], a1[i])
            body = alpha_lifts(ft, i)[0]
            if i == 0:
                al0, al1 = alpha_lifts(ft, 0)
                body = al0 + al1 * mk.Epow(p, Fraction(1, p))
            body = body.scalar_mul(a2[i])
            if i in S:
                mats.append(Matrix2(zero, lead, one, body))
            else:
                mats.append(Matrix2(lead, zero, body, one))
        return mats, slack
    a1_0, a2_0, k0 = a1[0], a2[0], k[0]
    al0, al1 = alpha_lifts(ft, 0)
    al1_inv = _invert_series_unit(al1, "slot-0 alpha1")
    if regime == "even-sandwich":
        mats.append(Matrix2(
            mk.Epow(k0 - p, -(a1_0 * p)) * al0 * al1_inv,
            mk.Epow(k0 - p, -a1_0) * al1_inv,
            al0.scalar_mul(sp) + al1 * mk.Epow(p, 1),
            one))
        a2_0_inv = _invert_scalar(a2_0, "slot-0 a2")
        for i in range(1, f):
            b0i = alpha_lifts(ft, i)[0]
            if i in W:
                mats.append(Matrix2(
                    one, b0i.scalar_mul(a2_0 * a2[i] * pinv),
                    zero, mk.Epow(k[i], a1[i])))
            else:
                mats.append(Matrix2(
                    mk.Epow(k[i], a1[i]), zero,
                    b0i.scalar_mul(sp * a2[i] * a2_0_inv), one))
        return mats, slack
    al0_inv = _invert_series_unit(al0, "slot-0 alpha0")
    if regime == "odd-sandwich":
        mats.append(Matrix2(
            mk.Epow(k0 - p,
                    (-(a1_0 * p)) * _invert_scalar(a2_0, "slot-0 a2"))
            * al1_inv,
            mk.Epow(k0 - p, -a1_0) * al0 * al1_inv,
            mk.const(p) - al1 * al0_inv * mk.Epow(p, 1),
            al0.scalar_mul(a2_0)))
        for i in range(1, f):
            b0i = alpha_lifts(ft, i)[0]
            if i in W:
                mats.append(Matrix2(
                    one, b0i.scalar_mul(a2[i] * pinv),
                    zero, mk.Epow(k[i], a1[i])))
            else:
                mats.append(Matrix2(
                    mk.Epow(k[i], a1[i]), zero,
                    b0i.scalar_mul(sp * a2[i]), one))
        return mats, slack
    b1, b2 = a1[1], a2[1]
    b0 = alpha_lifts(ft, 1)[0]
    b0_inv = _invert_series_unit(b0, "partner alpha0")
    if regime == "merge-pair":
        a2m = a2_0 * b2
        mats.append(Matrix2(
            mk.Epow(k0 - p,
                    (-(a1_0 * p)) * _invert_scalar(a2m, "merged a2"))
            * al1_inv,
            mk.Epow(k0 - p, -a1_0) * al0 * al1_inv,
            mk.const(p) - al1 * al0_inv * mk.Epow(p, 1),
            al0.scalar_mul(a2m)))
        mats.append(Matrix2(mk.Epow(k[1], -b1) * b0_inv, zero,
                            mk.const(p), b0))
        slack = {(0, 0, 0), (1, 0, 1)}
        return mats, slack
    if regime == "merge-swap":
        mats.append(Matrix2(
            mk.Epow(k0 - p,
                    (-(a1_0 * p)) * _invert_scalar(b2, "partner a2"))
            * al0 * al1_inv,
            mk.Epow(k0 - p, -a1_0) * al1_inv,
            al0.scalar_mul(sp) + al1 * mk.Epow(p, 1),
            mk.const(b2)))
        mats.append(Matrix2(
            mk.Epow(k[1], -b1) * b0_inv, zero,
            mk.const(sp * _invert_scalar(a2_0, "slot-0 a2")), b0))
        return mats, slack
    raise UnsupportedRegime(regime)


# ---------------------------------------------------------------------------
# certification
# ---------------------------------------------------------------------------


def p_integral_split(x: USeries):
    """Split off the monomials that individually lie in p * O_F[[u]]."""
    keep, rest = {}, {}
    for n, v in x.c.items():
        w = v.valuation()
        if n >= 0 and w is not None and w >= 1:
            keep[n] = v
        else:
            rest[n] = v
    return (USeries(keep, x.u_prec, x.kind),
            USeries(rest, x.u_prec, x.kind))


def p_integral_ok(x: USeries) -> bool:
    """Exact membership in p * O_F[[u]] (coefficient valuations >= 1)."""
    for n, v in x.c.items():
        if n < 0:
            return False
        w = v.valuation()
        if w is not None and w < 1:
            return False
    return True


def integral_polynomial_ok(x: USeries) -> bool:
    """Membership in O_F[u]: O_F coefficients, no Laurent tail."""
    for n, v in x.c.items():
        if n < 0:
            return False
        w = v.valuation()
        if w is not None and w < 0:
            return False
    return True


def ideal_witness_split(x: USeries, p: int, e: int, provenance=""):
    """Certify x in I, splitting off the varpi*p*S_F-profile monomials.

    Each bucketed monomial meets the varpi*p*S_F coefficient bound on
    its own (valuation at least 1 + 1/e - floor(n/p)), so the bucket is
    sound termwise; the remainder must then pass one Fil^(2p) route
    whole, either divided by varpi or divided exactly by E.  Returns an
    IdealWitness (always validated before it leaves) or a
    ConservativeFail.
    """
    u_prec = x.u_prec
    z = USeries.zero(u_prec, x.kind)
    if x.is_zero():
        return IdealWitness(z, z, z, provenance or "zero element")
    thresh = 1 + Fraction(1, e)
    bucket, rest = {}, {}
    for n, v in x.c.items():
        w = v.valuation()
        if n >= 0 and w is not None and w >= thresh - (n // p):
            bucket[n] = v
        else:
            rest[n] = v
    inv_wp = PAdicScalar.varpi_pow(-(e + 1), p, e)
    s1 = USeries(bucket, u_prec, x.kind).scalar_mul(inv_wp)
    restS = USeries(rest, u_prec, x.kind)
    if restS.is_zero():
        w = IdealWitness(s1, z, z, provenance)
        validate_witness(x, w, p, e)
        return w
    g2 = restS.scalar_mul(PAdicScalar.varpi_pow(-1, p, e))
    if fil_profile_check(g2, 2 * p, p):
        w = IdealWitness(s1, g2, z, provenance)
        validate_witness(x, w, p, e)
        return w
    g3 = divide_by_E(restS, p)
    if fil_profile_check(g3, 2 * p, p):
        w = IdealWitness(s1, z, g3, provenance)
        validate_witness(x, w, p, e)
        return w
    return ConservativeFail(
        f"{provenance}: remainder fits no Fil^(2p) route")


def _certify(state_mats, target_mats, slack_pos, profile: Profile):
    p, e, f = profile.p, profile.e, profile.f
    cert, witnesses, residuals, slackparts, fails = [], {}, {}, {}, []
    for i in range(f):
        for r in (0, 1):
            for c in (0, 1):
                label = f"slot{i}[{r}{c}]"
                d = state_mats[i][r, c] - target_mats[i][r, c]
                if d.is_zero():
                    cert.append({"entry": label, "status": "exact"})
                    continue
                residuals[(i, r, c)] = d
                pieces = []
                work = d
                if (i, r, c) in slack_pos:
                    sl, work = p_integral_split(d)
                    if not sl.is_zero():
                        slackparts[(i, r, c)] = sl
                        pieces.append("p-integral slack")
                if work.is_zero():
                    status = " + ".join(pieces)
                else:
                    w = ideal_witness_split(work, p, e, provenance=label)
                    if isinstance(w, ConservativeFail):
                        fails.append(f"{label}: {w.reason}")
                        status = "FAILED"
                    else:
                        witnesses[(i, r, c)] = w
                        route = "s1"
                        if not w.g2.is_zero():
                            route += "+g2"
                        if not w.g3.is_zero():
                            route += "+g3"
                        pieces.append(f"in-ideal ({route})")
                        status = " + ".join(pieces)
                cert.append({"entry": label, "status": status})
    if fails:
        raise CertificateFailure("; ".join(fails))
    return cert, witnesses, residuals, slackparts


def _precision_floor(mats):
    """Graded precision floor: min over coefficients of prec + n // p.

    The membership checks compare the valuation of a degree-n
    coefficient against thresholds that fall off like -n/p (the S_F
    grading), so that is the scale on which precision claims must stay
    conclusive; a uniform floor would be miscalibrated at high degree.
    """
    floor = None
    for m in mats:
        for s in m.a:
            for n, v in s.c.items():
                g = v.prec + Fraction(n // v.p)
                if floor is None or g < floor:
                    floor = g
    return floor


# ---------------------------------------------------------------------------
# trace
# ---------------------------------------------------------------------------


@dataclass
class ChainStep:
    name: str
    kind: str
    xs: tuple
    mats: tuple


@dataclass
class ChainTrace:
    """Ordered record of a chain run; serializes deterministically."""

    profile: Profile
    regime: str
    initial: tuple
    steps: list
    cert_lines: list
    notes: list

    def to_text(self) -> str:
        out = ["base-change chain trace",
               "profile " + json.dumps(self.profile.to_dict(),
                                       sort_keys=True),
               f"regime {self.regime}"]
        out.append("initial:")
        for i, m in enumerate(self.initial):
            out.append(f"  A[{i}] = {render_matrix(m)}")
        for n, st in enumerate(self.steps, start=1):
            out.append(f"step {n} {st.name} ({st.kind}):")
            for i, m in enumerate(st.xs):
                out.append(f"  X[{i}] = {render_matrix(m)}")
            for i, m in enumerate(st.mats):
                out.append(f"  A[{i}] = {render_matrix(m)}")
        out.append("certificates:")
        for line in self.cert_lines:
            out.append(f"  {line}")
        out.append("notes:")
        for line in self.notes:
            out.append(f"  - {line}")
        return "\n".join(out) + "\n"


def render_scalar(v) -> str:
    if isinstance(v, PAdicScalar):
        if all(x == 0 for x in v.c[1:]):
            return str(v.c[0])
        return "[" + ",".join(str(x) for x in v.c) + "]"
    return str(v)


def render_series(s: USeries) -> str:
    if s.is_zero():
        return "0"
    return " + ".join(f"({render_scalar(v)})u^{n}"
                      for n, v in sorted(s.c.items()))


def render_matrix(m: Matrix2) -> str:
    (a, b, c, d) = m.a
    return (f"[[{render_series(a)}, {render_series(b)}], "
            f"[{render_series(c)}, {render_series(d)}]]")


def replay_trace(trace: ChainTrace):
    """Reapply the recorded base changes from the recorded start."""
    state = list(trace.initial)
    for st in trace.steps:
        state = _conjugate_mats(st.xs, state, trace.profile.p)
    return state


# ---------------------------------------------------------------------------
# the chain driver
# ---------------------------------------------------------------------------


def run_chain(profile: Profile, exact=None, a2_values=None):
    """Run the full base-change chain for the profile's regime.

    Returns (final, trace, cert): the integral target tuple (carrying
    residuals, witnesses and slack parts for every entry that needed
    them), a deterministic trace, and the per-entry certificate list.
    Raises UnsupportedRegime when no chain applies, CertificateFailure
    when an entry cannot be certified, and InsufficientPrecision when
    the tracked precision claims are exhausted.
    """
    ft = initial_frobenius(profile, exact=exact, a2_values=a2_values)
    regime, conds = classify_regime(profile)
    steps = _chain_steps(regime, ft)
    state = list(ft.mats)
    trace = ChainTrace(profile=profile, regime=regime,
                       initial=tuple(ft.mats), steps=[], cert_lines=[],
                       notes=list(conds))
    for name, kind, xs in steps:
        state = _conjugate_mats(xs, state, profile.p)
        trace.steps.append(ChainStep(name, kind, tuple(xs), tuple(state)))
    target, slack_pos = _target_mats(regime, ft)
    cert, witnesses, residuals, slackparts = _certify(
        state, target, slack_pos, profile)
    trace.cert_lines = [f"{c['entry']}: {c['status']}" for c in cert]
    floor = _precision_floor(state)
    if floor is not None and floor <= 0:
        raise InsufficientPrecision(
            f"graded precision floor {floor} exhausted during the chain")
    trace.notes.append(f"graded precision floor {floor}")
    final = FrobTuple(profile, target, "integral", a1=ft.a1, a2=ft.a2,
                      alpha1=ft.alpha1, lam=ft.lam, gdata=ft.gdata,
                      residuals=residuals, witnesses=witnesses,
                      slack=slackparts)
    return final, trace, cert


# ---------------------------------------------------------------------------
# the report-only assumption check
# ---------------------------------------------------------------------------


def _entry_const(s: USeries):
    """(is zero-or-constant, the constant or None)."""
    if s.is_zero():
        return True, None
    if s.support() == [0]:
        return True, s.coeff(0)
    return False, None


def _base_change_shape(X: Matrix2, p: int, e: int):
    """Classify one base-change matrix against the allowed shapes.

    Allowed: anything of determinant 1 over the model, or a diagonal
    matrix over F.  A swap (or the anti-diagonal [[0,1],[c,0]]) is
    reported through its factorization diagonal * determinant-one, with
    the note spelling the factors out.
    """
    mk_one = USeries.monomial(PAdicScalar.one(p, e), 0, X.a[0].u_prec,
                              "padic")
    (a, b, c, d) = X.a
    ca, va = _entry_const(a)
    cb, vb = _entry_const(b)
    cc, vc = _entry_const(c)
    cd, vd = _entry_const(d)
    if ca and cb and cc and cd:
        if vb is None and vc is None and va is not None and vd is not None:
            return True, f"diagonal over F: Diag({render_scalar(va)}, " \
                         f"{render_scalar(vd)})"
        if va is None and vd is None and vb is not None and vc is not None:
            return True, (f"anti-diagonal: factors as "
                          f"Diag({render_scalar(vb)}, {render_scalar(-vc)}) "
                          f"* [[0,1],[-1,0]] (determinant one)")
    if X.det().same(mk_one):
        return True, "determinant 1 over the model"
    return False, "shape outside the allowed base-change classes"


def verify_descent_assumptions(trace: ChainTrace, final: FrobTuple):
    """Report-only check of the three standing assumptions.

    (a) every labeled weight is at most 2p - 4;
    (b) every base change is det-1 over the model or diagonal over F,
        with swaps reported through their diagonal * det-1 split;
    (c) the final state decomposes as (integral polynomial target) +
        (certified ideal member), re-validating every stored witness
        and flagging any entry whose correction carries none.

    Returns a dict report; never raises.
    """
    prof = final.profile
    p, e = prof.p, prof.e
    weights = {"ok": True, "detail": []}
    for i, kk in enumerate(prof.k):
        good = kk <= 2 * p - 4
        weights["ok"] = weights["ok"] and good
        weights["detail"].append(
            f"slot {i}: k = {kk} <= 2p-4 = {2 * p - 4}: "
            + ("ok" if good else "FAIL"))
    base_changes = []
    for st in trace.steps:
        ok = True
        detail = []
        for i, X in enumerate(st.xs):
            good, note = _base_change_shape(X, p, e)
            ok = ok and good
            detail.append(f"slot {i}: {note}")
        base_changes.append({"step": st.name, "kind": st.kind, "ok": ok,
                             "detail": detail})
    decomposition = {"ok": True, "detail": []}
    for i in range(prof.f):
        for r in (0, 1):
            for c in (0, 1):
                key = (i, r, c)
                label = f"slot{i}[{r}{c}]"
                line = f"{label}: "
                ent = final.mats[i][r, c]
                if integral_polynomial_ok(ent):
                    line += "main term integral"
                else:
                    line += "main term NOT integral: FAIL"
                    decomposition["ok"] = False
                resd = (final.residuals or {}).get(key)
                if resd is not None and not resd.is_zero():
                    sl = (final.slack or {}).get(key)
                    rem = resd
                    if sl is not None:
                        rem = resd - sl
                        if p_integral_ok(sl):
                            line += "; p-integral slack part"
                        else:
                            line += "; slack part NOT p-integral: FAIL"
                            decomposition["ok"] = False
                    if rem.is_zero():
                        pass
                    elif (final.witnesses or {}).get(key) is None:
                        line += "; correction carries no ideal witness: FAIL"
                        decomposition["ok"] = False
                    else:
                        try:
                            validate_witness(rem, final.witnesses[key], p, e)
                            line += "; correction certified in the ideal"
                        except WitnessMismatch as exc:
                            line += f"; witness rejected ({exc}): FAIL"
                            decomposition["ok"] = False
                decomposition["detail"].append(line)
    all_ok = (weights["ok"] and decomposition["ok"]
              and all(b["ok"] for b in base_changes))
    return {"weights": weights, "base_changes": base_changes,
            "decomposition": decomposition, "all_ok": all_ok}
