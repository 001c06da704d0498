"""Base-change chains: digit split, first correction, regimes, certificates.

The chain identities are exact below the series cutoff, so most cases
run at a reduced cutoff (still above p^2) to keep the suite fast; one
case runs at the default cutoff.
"""

import dataclasses
import random
from fractions import Fraction

import pytest

from conftest import random_profile
from crysred.descent import (
    CertificateFailure,
    FrobTuple,
    NonInvertibleBaseChange,
    UnsupportedExponentData,
    UnsupportedRegime,
    _Mk,
    _certify,
    _conjugate_mats,
    alpha_lifts,
    classify_regime,
    divide_by_E,
    divide_by_E_pow,
    epow_divmod,
    exponent_data,
    ideal_witness_split,
    initial_frobenius,
    p_integral_ok,
    p_integral_split,
    phi_x_structural,
    replay_trace,
    run_chain,
    twisted_conjugate,
    verify_descent_assumptions,
    x1_correction,
    x_series,
)
from crysred.scalars import (
    Matrix2,
    PAdicScalar,
    USeries,
    fraction_residue,
    frobenius,
    pval,
)
from crysred.sring import (
    ConservativeFail,
    E_pow_rational,
    IdealWitness,
    T_rational,
    WitnessMismatch,
    lift_series,
    sf_profile_ok,
    validate_witness,
    witness_total,
)
from crysred.typesets import Profile, build_W

P = 7
UP = 64  # fast cutoff, still above p^2 = 49


def prof(types=("I",), k=None, nu=None, seed=3, u_prec=UP, p=P, e=2):
    f = len(types)
    if k is None:
        k = (10,) + (3,) * (f - 1)
    if nu is None:
        nu = (Fraction(1, 2),) * f
    return Profile(p=p, f=f, types=types, k=k, nu=nu, e=e,
                   u_prec=u_prec, seed=seed)


CASES = {
    "large-slope": prof(nu=(Fraction(1),)),
    "odd-f1": prof(k=(9,)),
    "even-f2": prof(types=("I", "I"), seed=5),
    "merge-pair": prof(types=("I", "I"), nu=(Fraction(1, 2), Fraction(0)),
                       seed=5),
    "merge-swap": prof(types=("II", "I"), seed=5),
    "odd-f2": prof(types=("I", "II"), seed=5),
}

REGIME_OF = {
    "large-slope": "large-slope",
    "odd-f1": "odd-sandwich",
    "even-f2": "even-sandwich",
    "merge-pair": "merge-pair",
    "merge-swap": "merge-swap",
    "odd-f2": "odd-sandwich",
}


# -- digit split ------------------------------------------------------------


def rand_poly(rng, u_prec, degree=40):
    c = {}
    for _ in range(12):
        n = rng.randrange(degree)
        c[n] = Fraction(rng.randrange(-50, 50), P ** rng.randrange(3))
    return USeries(c, u_prec, "rational")


def test_epow_divmod_recombines():
    rng = random.Random(17)
    E_p = E_pow_rational(P, P, UP)
    for _ in range(25):
        s = rand_poly(rng, UP)
        q, r = epow_divmod(s, P)
        assert all(n < P for n in r.support())
        assert (q * E_p + r).same(s)


def test_epow_divmod_rejects_laurent_tails():
    s = USeries({-1: Fraction(1)}, UP, "rational")
    with pytest.raises(AssertionError):
        epow_divmod(s, P)


def test_digit_tower_rebuilds_lambda():
    for pr in CASES.values():
        ft = initial_frobenius(pr)
        E_p = E_pow_rational(P, P, pr.u_prec)
        E_2p = E_pow_rational(2 * P, P, pr.u_prec)
        for i in range(pr.f):
            d = ft.digits[i]
            back = d["alpha0"] + d["q1"] * E_p
            assert back.same(ft.lam[i])
            if i == 0:
                d1 = d["alpha1"].scalar_mul(Fraction(1, P))
                back0 = d["alpha0"] + d1 * E_p + d["q2"] * E_2p
                assert back0.same(ft.lam[0])


def test_digit_leading_terms():
    # alpha_0 = 1 + (multiples of p); alpha_1 has constant term g(0) mod p
    for pr in CASES.values():
        ft = initial_frobenius(pr)
        for i in range(pr.f):
            a0 = ft.digits[i]["alpha0"]
            assert fraction_residue(a0.coeff(0), P) == 1
            for n, v in a0.c.items():
                assert pval(v, P) >= (0 if n == 0 else 1)
            if i == 0:
                a1 = ft.digits[0]["alpha1"]
                g0 = ft.gdata[0][0].get(0, 0)
                assert fraction_residue(a1.coeff(0), P) == g0 % P
                assert all(pval(v, P) >= 0 for v in a1.c.values())


def test_digit_quotient_profiles():
    # q1 and q2 are lam shifted down by one resp. two E^p digits, so they
    # obey the S_F profile loosened by the matching power of p
    for pr in CASES.values():
        ft = initial_frobenius(pr)
        for i in range(pr.f):
            assert sf_profile_ok(ft.digits[i]["q1"], P, shift=-1)
        assert sf_profile_ok(ft.digits[0]["q2"], P, shift=-2)


def test_alpha_lifts_invert():
    # the products return to 1 up to coordinate-reduction error, which
    # sits far below every precision claim
    pr = CASES["even-f2"]
    ft = initial_frobenius(pr)
    one = USeries.monomial(PAdicScalar.one(P, pr.e), 0, pr.u_prec, "padic")
    for i in range(pr.f):
        a0, a1 = alpha_lifts(ft, i)
        assert (a0 * a0.inverse_unit() - one).effectively_zero()
        if i == 0:
            assert a1 is not None
            assert (a1 * a1.inverse_unit() - one).effectively_zero()
        else:
            assert a1 is None


# -- the initial tuple ------------------------------------------------------


def test_initial_shapes_and_height():
    rng = random.Random(23)
    for _ in range(8):
        pr = dataclasses.replace(random_profile(rng), u_prec=UP)
        ft = initial_frobenius(pr, exact=False)
        assert ft.ring == "model"
        assert ft.height_ok()
        for i in range(pr.f):
            m = ft.mats[i]
            if pr.types[i] == "I":
                assert m[0, 0].is_zero()
                assert m[1, 0].support() == [0]
            else:
                assert m[0, 1].is_zero()
                assert m[1, 1].support() == [0]
            assert ft.a1[i].valuation() == 0
            assert ft.a2[i].valuation() == pr.nu[i]


def test_initial_a2_override():
    pr = CASES["large-slope"]
    plain = initial_frobenius(pr)
    # a nonzero override must match the declared slope
    with pytest.raises(ValueError):
        initial_frobenius(pr, a2_values=[Fraction(3)])
    ft = initial_frobenius(pr, a2_values=[Fraction(21)])
    assert ft.a2[0].valuation() == 1
    # the random stream is consumed identically, so a1 never moves
    assert ft.a1[0].c == plain.a1[0].c


def test_initial_a2_zero_degenerate():
    pr = CASES["large-slope"]
    ft = initial_frobenius(pr, a2_values=[0])
    assert ft.a2[0].is_zero()
    assert ft.mats[0][1, 1].is_zero()
    final, trace, cert = run_chain(pr, a2_values=[0])
    assert all(c["status"] == "exact" for c in cert)
    assert final.height_ok()


def test_initial_rejects_invalid_profile():
    bad = prof(k=(2 * P - 3,))
    with pytest.raises(ValueError):
        initial_frobenius(bad)


# -- exponent data ----------------------------------------------------------


def test_exponent_tables_f2():
    k0, k1 = 10, 3
    pr = prof(types=("I", "I"), k=(k0, k1))
    assert exponent_data(pr) == [({0: k1, 1: -k0}, 2, False),
                                 ({0: k0, 1: -k1}, 2, False)]
    pr = prof(types=("I", "II"), k=(k0, k1))
    assert exponent_data(pr) == [
        ({0: k1, 1: k0, 2: -k1, 3: -k0}, 4, False),
        ({0: -k0, 1: k1, 2: k0, 3: -k1}, 4, False)]
    pr = prof(types=("II", "I"), k=(k0, k1))
    assert exponent_data(pr) == [
        ({0: -k1, 1: k0, 2: k1, 3: -k0}, 4, False),
        ({0: k0, 1: k1, 2: -k0, 3: -k1}, 4, False)]


def test_exponent_fallback_preserves_g0():
    pr = prof(types=("I", "I"), k=(10, 3))
    exact = exponent_data(pr, exact=True)
    synth = exponent_data(pr, exact=False)
    for (ge, be, se), (gs, bs, ss) in zip(exact, synth):
        assert not se and ss
        assert gs == {0: ge[0]}
        assert bs == 4
    pr3 = prof(types=("I", "I", "I"), k=(10, 3, 4))
    synth3 = exponent_data(pr3)
    assert synth3[0][0] == {0: 3}
    assert synth3[1][0] == {0: 4}
    assert synth3[2][0] == {0: 10}
    assert all(b == 6 for _, b, _ in synth3)


def test_exponent_exact_unavailable():
    pr3 = prof(types=("I", "I", "I"), k=(10, 3, 4))
    with pytest.raises(UnsupportedExponentData):
        exponent_data(pr3, exact=True)


# -- the first correction ---------------------------------------------------


def test_x_series_frobenius_oracle():
    # the coefficientwise Frobenius of the polynomial x must agree with
    # the structural route through phi(E) = p * gamma
    for name in ("large-slope", "even-f2", "odd-f2"):
        pr = CASES[name]
        ft = initial_frobenius(pr)
        for i in range(pr.f):
            direct = frobenius(x_series(ft, i), P)
            structural = phi_x_structural(ft, i)
            assert direct.same(structural)


def test_phi_x_depth():
    # phi(x) / (a2 * p^2) lies in S_F; below degree p the margin is exact
    for name in ("large-slope", "even-f2", "merge-swap"):
        pr = CASES[name]
        ft = initial_frobenius(pr)
        for i in range(pr.f):
            y = phi_x_structural(ft, i)
            nu2 = ft.a2[i].valuation()
            scale = (ft.a2[i]
                     * PAdicScalar.from_rational(Fraction(P * P), P, pr.e))
            assert sf_profile_ok(y.scalar_mul(scale.inv()), P)
            for n, v in y.c.items():
                if n < P:
                    assert v.valuation() >= nu2 + 2


def test_x1_kills_lambda_tail_exactly():
    pr = CASES["large-slope"]
    ft = initial_frobenius(pr)
    xs = x1_correction(ft=ft)
    assert xs[0][0, 1].is_zero() and xs[0][0, 0].support() == [0]
    state = _conjugate_mats(xs, ft.mats, P)
    d = ft.digits[0]
    head = d["alpha0"] + d["alpha1"].scalar_mul(Fraction(1, P)) \
        * E_pow_rational(P, P, pr.u_prec)
    want = lift_series(head, P, pr.e).scalar_mul(ft.a2[0])
    assert state[0][1, 1].same(want)


def test_x1_from_profile():
    xs = x1_correction(profile=CASES["even-f2"])
    assert len(xs) == 2
    for X in xs:
        assert X[0, 1].is_zero()
        assert X.det().support() == [0]


# -- twisted conjugation ----------------------------------------------------


def test_twisted_conjugate_identity_and_group():
    pr = CASES["even-f2"]
    ft = initial_frobenius(pr)
    mk = _Mk(P, pr.e, pr.u_prec)
    ident = [mk.ident() for _ in range(pr.f)]
    same_ft = twisted_conjugate(ident, ft)
    for i in range(pr.f):
        assert same_ft.mats[i].same(ft.mats[i])
    rng = random.Random(41)
    xs = [mk.lower(mk.Epow(2, rng.randrange(1, P))) for _ in range(pr.f)]
    ys = [mk.upper(mk.Epow(3, rng.randrange(1, P))) for _ in range(pr.f)]
    once = twisted_conjugate(xs, twisted_conjugate(ys, ft))
    prod = [xs[i] * ys[i] for i in range(pr.f)]
    both = twisted_conjugate(prod, ft)
    for i in range(pr.f):
        assert once.mats[i].same(both.mats[i])


def test_twisted_conjugate_det_law():
    pr = CASES["odd-f2"]
    ft = initial_frobenius(pr)
    mk = _Mk(P, pr.e, pr.u_prec)
    xs = [mk.diag(2, 3), mk.lower(mk.Epow(1, 5))]
    out = twisted_conjugate(xs, ft)
    for i in range(pr.f):
        prev = xs[(i - 1) % pr.f]
        scale = xs[i].det() * frobenius(prev.det(), P).inverse_unit()
        assert out.mats[i].det().same(ft.mats[i].det() * scale)


def test_twisted_conjugate_weight_shift_example():
    # f = 1 with rational entries: X = Diag(1, u) moves u^k to u^(k-p)
    k = 10
    zero = USeries.zero(UP, "rational")
    one = USeries.monomial(Fraction(1), 0, UP, "rational")
    A = Matrix2(zero, USeries.monomial(Fraction(1), k, UP, "rational"),
                one, zero)
    X = Matrix2(one, zero, zero,
                USeries.monomial(Fraction(1), 1, UP, "rational"))
    (out,) = _conjugate_mats([X], [A], P)
    assert out[0, 1].same(USeries.monomial(Fraction(1), k - P, UP, "rational"))
    assert out[1, 0].same(USeries.monomial(Fraction(1), 1, UP, "rational"))
    assert out[0, 0].is_zero() and out[1, 1].is_zero()


def test_twisted_conjugate_rejects_singular():
    pr = CASES["large-slope"]
    ft = initial_frobenius(pr)
    mk = _Mk(P, pr.e, pr.u_prec)
    bad = Matrix2(mk.one(), mk.one(), mk.one(), mk.one())
    with pytest.raises(NonInvertibleBaseChange):
        twisted_conjugate([bad], ft)


# -- regime dispatch --------------------------------------------------------


def test_classify_regime_dispatch():
    for name, pr in CASES.items():
        assert classify_regime(pr)[0] == REGIME_OF[name]
    # (I, II) has an empty sandwich set, so the odd chain never needs a
    # slope condition there
    assert build_W(("I", "II")) == frozenset()


def test_classify_regime_unsupported():
    # odd Type I count with a sandwich slope below 1 and no merge
    pr3 = prof(types=("I", "I", "I"), k=(10, 3, 4))
    assert build_W(pr3.types)
    with pytest.raises(UnsupportedRegime):
        classify_regime(pr3)
    # even Type I count, a sandwich slope below 1 - nu0, f > 2
    pr4 = prof(types=("I", "I", "I", "I"), k=(10, 3, 4, 2),
               nu=(Fraction(1, 2), Fraction(0), Fraction(1), Fraction(1)))
    with pytest.raises(UnsupportedRegime):
        classify_regime(pr4)


# -- full chains, one per regime -------------------------------------------


EXPECTED_STEPS = {
    "large-slope": ["kill-lambda-tails"],
    "odd-f1": ["kill-lambda-tails", "clear-slot-zero-column",
               "align-antidiagonal", "rescale-bottom",
               "integralize-corner"],
    "even-f2": ["kill-lambda-tails", "clear-slot-zero-column",
                "align-antidiagonal", "rescale-bottom"],
    "merge-pair": ["kill-lambda-tails", "clear-slot-zero-column",
                   "align-antidiagonal", "rescale-bottom",
                   "clear-partner-corner", "merge-partner",
                   "integralize-corner"],
    "merge-swap": ["kill-lambda-tails", "clear-slot-zero-column",
                   "align-antidiagonal", "rescale-bottom",
                   "clear-partner-corner", "merge-partner"],
    "odd-f2": ["kill-lambda-tails", "clear-slot-zero-column",
               "align-antidiagonal", "rescale-bottom",
               "integralize-corner"],
}

EXPECTED_STATUSES = {
    "large-slope": {"exact", "in-ideal (s1)"},
    "odd-f1": {"in-ideal (s1)"},
    "even-f2": {"exact", "in-ideal (s1)"},
    "merge-pair": {"in-ideal (s1)", "p-integral slack + in-ideal (s1)"},
    "merge-swap": {"in-ideal (s1)"},
    "odd-f2": {"in-ideal (s1)"},
}


def run_case(name):
    pr = CASES[name]
    final, trace, cert = run_chain(pr)
    assert trace.regime == REGIME_OF[name]
    assert [st.name for st in trace.steps] == EXPECTED_STEPS[name]
    assert set(c["status"] for c in cert) == EXPECTED_STATUSES[name]
    # the target is an integral polynomial tuple of the same height
    assert final.ring == "integral"
    assert final.height_ok()
    for m in final.mats:
        for s in m.a:
            assert all(n >= 0 for n in s.support())
    # the report-only assumption check agrees
    rep = verify_descent_assumptions(trace, final)
    assert rep["all_ok"], rep
    # replay reproduces the recorded final state
    state = replay_trace(trace)
    last = trace.steps[-1].mats
    for i in range(pr.f):
        assert state[i].same(last[i])
    return final, trace, cert


def test_chain_large_slope():
    final, trace, cert = run_case("large-slope")
    # slot 0 keeps the polynomial head a2 * (d0 + d1 * E^p) in the corner
    assert not final.mats[0][1, 1].is_zero()
    assert final.slack == {}


def test_chain_odd_f1():
    run_case("odd-f1")


def test_chain_even_f2():
    final, trace, cert = run_case("even-f2")
    # slot 1 sits in the sandwich set and ends upper triangular
    assert final.mats[1][1, 0].is_zero()
    assert not final.mats[1][0, 1].is_zero()


def test_chain_merge_pair_slack():
    final, trace, cert = run_case("merge-pair")
    assert sorted(final.slack.keys()) == [(0, 0, 0), (1, 0, 1)]
    for s in final.slack.values():
        assert p_integral_ok(s)


def test_chain_merge_swap():
    run_case("merge-swap")


def test_chain_odd_f2():
    run_case("odd-f2")


def test_chain_default_cutoff():
    pr = dataclasses.replace(CASES["large-slope"], u_prec=0)
    assert pr.u_prec == 4 * P * P
    final, trace, cert = run_chain(pr)
    assert set(c["status"] for c in cert) == {"exact", "in-ideal (s1)"}
    assert verify_descent_assumptions(trace, final)["all_ok"]


def test_chain_trace_deterministic():
    pr = CASES["even-f2"]
    _, t1, _ = run_chain(pr)
    _, t2, _ = run_chain(pr)
    assert t1.to_text() == t2.to_text()
    text = t1.to_text()
    assert "regime even-sandwich" in text
    assert "graded precision floor" in text


def test_chain_precision_note():
    _, trace, _ = run_chain(CASES["odd-f1"])
    assert trace.notes[-1] == "graded precision floor 23/2"


def test_chain_witnesses_revalidate():
    pr = CASES["merge-swap"]
    final, trace, cert = run_chain(pr)
    assert final.witnesses
    for key, w in final.witnesses.items():
        assert validate_witness(final.residuals[key], w, P, pr.e)


# -- certificate machinery, positive and negative --------------------------


def test_ideal_witness_split_routes():
    e = 2
    # a term-by-term varpi * p * S_F member: varpi * p * T
    x = lift_series(T_rational(P, UP), P, e).scalar_mul(
        PAdicScalar.varpi_pow(3, P, e))
    w = ideal_witness_split(x, P, e)
    assert isinstance(w, IdealWitness)
    assert w.g2.is_zero() and w.g3.is_zero()
    # varpi * T^2: the deep low-degree terms bucket, the shallow tail
    # must ride the varpi * Fil^(2p) route
    t2 = T_rational(P, UP) * T_rational(P, UP)
    x2 = lift_series(t2, P, e).scalar_mul(PAdicScalar.varpi_pow(1, P, e))
    w2 = ideal_witness_split(x2, P, e)
    assert isinstance(w2, IdealWitness)
    assert not w2.g2.is_zero()
    assert (witness_total(w2, P, e) - x2).effectively_zero()


def test_ideal_witness_split_is_conservative():
    e = 2
    # E * T^2 is a genuine product member, but after the termwise bucket
    # eats its deep head neither whole-remainder route fits; a declined
    # certificate is the contract, never a wrong one
    t2 = T_rational(P, UP) * T_rational(P, UP)
    x = lift_series(E_pow_rational(1, P, UP) * t2, P, e)
    out = ideal_witness_split(x, P, e)
    assert isinstance(out, ConservativeFail)


def test_witness_g3_route_validates():
    e = 2
    t2 = T_rational(P, UP) * T_rational(P, UP)
    g3 = lift_series(t2, P, e)
    z = USeries.zero(UP, "padic")
    w = IdealWitness(z, z, g3, "direct E * Fil route")
    x = witness_total(w, P, e)
    assert validate_witness(x, w, P, e)


def test_ideal_witness_split_refuses_constant():
    one = USeries.monomial(PAdicScalar.one(P, 2), 0, UP, "padic")
    out = ideal_witness_split(one, P, 2)
    assert isinstance(out, ConservativeFail)
    assert "no Fil" in out.reason


def test_validate_witness_rejects_corruption():
    e = 2
    t2 = T_rational(P, UP) * T_rational(P, UP)
    x = lift_series(t2, P, e).scalar_mul(PAdicScalar.varpi_pow(1, P, e))
    w = ideal_witness_split(x, P, e)
    two = PAdicScalar.from_rational(2, P, e)
    bad = IdealWitness(w.s1.scalar_mul(two), w.g2, w.g3, w.provenance)
    with pytest.raises(WitnessMismatch):
        validate_witness(x, bad, P, e)


def test_p_integral_split():
    e = 2
    c_deep = PAdicScalar.from_rational(Fraction(P * 3), P, e)
    c_flat = PAdicScalar.from_rational(Fraction(2), P, e)
    s = USeries({0: c_deep, 4: c_flat}, UP, "padic")
    keep, rest = p_integral_split(s)
    assert keep.support() == [0] and rest.support() == [4]
    assert p_integral_ok(keep) and not p_integral_ok(rest)


def test_certify_rejects_tampered_state():
    # corrupting the final state by a unit constant leaves a difference
    # no witness can cover
    pr = CASES["large-slope"]
    final, trace, cert = run_chain(pr)
    state = replay_trace(trace)
    one = USeries.monomial(PAdicScalar.one(P, pr.e), 0, pr.u_prec, "padic")
    bad = Matrix2(state[0].a[0] + one, state[0].a[1],
                  state[0].a[2], state[0].a[3])
    with pytest.raises(CertificateFailure):
        _certify([bad], list(final.mats), set(), pr)


def test_verify_flags_missing_witness():
    pr = CASES["even-f2"]
    final, trace, cert = run_chain(pr)
    key = sorted(final.witnesses.keys())[0]
    del final.witnesses[key]
    rep = verify_descent_assumptions(trace, final)
    assert not rep["all_ok"]
    assert any("no ideal witness" in line
               for line in rep["decomposition"]["detail"])


def test_verify_flags_bad_weight():
    pr = CASES["large-slope"]
    final, trace, cert = run_chain(pr)
    bad_prof = dataclasses.replace(pr, k=(2 * P - 3,))
    bad = FrobTuple(bad_prof, final.mats, "integral")
    rep = verify_descent_assumptions(trace, bad)
    assert not rep["weights"]["ok"]
    assert not rep["all_ok"]


# -- series division helpers ------------------------------------------------


def test_divide_by_E_roundtrip():
    rng = random.Random(59)
    e = 2
    E1 = lift_series(E_pow_rational(1, P, UP), P, e)
    for _ in range(10):
        s = lift_series(rand_poly(rng, UP), P, e)
        q = divide_by_E(s, P)
        assert (q * E1).same(s)


def test_divide_by_E_pow_roundtrip():
    rng = random.Random(61)
    for k in (1, 2, 5):
        Ek = E_pow_rational(k, P, UP)
        s = rand_poly(rng, UP)
        q = divide_by_E_pow(s, k, P)
        assert (q * Ek).same(s)
