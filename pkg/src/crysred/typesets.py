"""Weight/valuation profiles and the index-set combinatorics.

A reduction problem is described by a ``Profile``: the prime, the number
of embeddings f, a Type vector (each slot I or II), the labeled weights,
and the slope of each slot's a_2 coefficient.  The descent and reduction
machinery is steered by a handful of subsets of Z/fZ derived from that
data:

* S and T: the Type I / Type II slots;
* W: the "sandwich" subset that lines up anti-diagonals before scaling;
* V_eq / V_gt: slots sitting exactly at, or above, a slope threshold;
* X and Y: the row-swap patterns that make every slot triangularizable
  before semisimplification (cyclic walk for the large-slope regime,
  clipped linear walk for the boundary regime).

The walks are implemented literally, step by step.  A closed-form
second reading and a brute-force triangularization search act as
independent checks in the test-suite.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from fractions import Fraction


TYPE_I = "I"
TYPE_II = "II"


def _frac(x) -> Fraction:
    if isinstance(x, str):
        if "/" in x:
            a, b = x.split("/")
            return Fraction(int(a), int(b))
        return Fraction(int(x))
    return Fraction(x)


@dataclass(frozen=True)
class Profile:
    """Input datum for one reduction run.

    nu[i] is the p-adic slope of the a_2 coefficient in slot i, a
    Fraction with denominator dividing e.  Weights follow the labeled
    convention: k[0] in [p+2, 2p-4] and k[i] in [2, p-3] for i >= 1.
    """

    p: int
    f: int
    types: tuple
    k: tuple
    nu: tuple
    e: int = 2
    r: int = 0          # 0 means the default 2f
    u_prec: int = 0     # 0 means the default 4p^2
    seed: int = 0

    def __post_init__(self):
        object.__setattr__(self, "types", tuple(self.types))
        object.__setattr__(self, "k", tuple(int(x) for x in self.k))
        object.__setattr__(self, "nu", tuple(_frac(x) for x in self.nu))
        if self.r == 0:
            object.__setattr__(self, "r", 2 * self.f)
        if self.u_prec == 0:
            object.__setattr__(self, "u_prec", 4 * self.p * self.p)

    # -- derived sets -------------------------------------------------

    def S(self) -> frozenset:
        return frozenset(i for i, t in enumerate(self.types) if t == TYPE_I)

    def T(self) -> frozenset:
        return frozenset(i for i, t in enumerate(self.types) if t == TYPE_II)

    def nu0(self) -> Fraction:
        return self.nu[0]

    def to_dict(self) -> dict:
        return {
            "p": self.p, "f": self.f, "types": list(self.types),
            "k": list(self.k),
            "nu": [f"{x.numerator}/{x.denominator}" for x in self.nu],
            "e": self.e, "r": self.r, "u_prec": self.u_prec,
            "seed": self.seed,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "Profile":
        return cls(p=int(d["p"]), f=int(d["f"]), types=tuple(d["types"]),
                   k=tuple(d["k"]), nu=tuple(_frac(x) for x in d["nu"]),
                   e=int(d.get("e", 2)), r=int(d.get("r", 0)),
                   u_prec=int(d.get("u_prec", 0)),
                   seed=int(d.get("seed", 0)))


def validate(profile: Profile) -> list:
    """Collect every rule violation; an empty list means well-formed.

    Never raises: callers decide what to do with the report.
    """
    v = []
    p, f = profile.p, profile.f
    if p < 7:
        v.append(f"p = {p} is too small, the weight windows need p >= 7")
    if f < 1:
        v.append("f must be at least 1")
    if len(profile.types) != f or len(profile.k) != f or len(profile.nu) != f:
        v.append("types, k and nu must all have length f")
        return v
    for i, t in enumerate(profile.types):
        if t not in (TYPE_I, TYPE_II):
            v.append(f"slot {i}: unknown Type {t!r}")
    if all(t == TYPE_II for t in profile.types):
        v.append("all slots are Type II, the tuple must contain a Type I slot")
    k0 = profile.k[0]
    if not (p + 2 <= k0 <= 2 * p - 4):
        v.append(f"k_0 = {k0} outside [p+2, 2p-4] = [{p+2}, {2*p-4}]")
    for i in range(1, f):
        if not (2 <= profile.k[i] <= p - 3):
            v.append(f"k_{i} = {profile.k[i]} outside [2, p-3] = [2, {p-3}]")
    if profile.e < 1:
        v.append("ramification index e must be positive")
    for i, s in enumerate(profile.nu):
        if (s * profile.e).denominator != 1:
            v.append(f"slot {i}: slope {s} is not in (1/e)Z with e = {profile.e}")
        if s < 0:
            v.append(f"slot {i}: negative slope {s}")
    Tset = profile.T()
    for i in sorted(Tset):
        if profile.nu[i] <= 0:
            v.append(f"slot {i} is Type II but its slope is not positive")
    Sset = profile.S()
    if Sset and sum((profile.nu[i] for i in Sset), Fraction(0)) <= 0:
        v.append("the total slope over the Type I slots must be positive")
    if profile.r % profile.f != 0:
        v.append(f"residue degree r = {profile.r} is not a multiple of f")
    if profile.u_prec < p * p:
        v.append(f"series cutoff {profile.u_prec} is too small to see u^(p^2)")
    return v


# ---------------------------------------------------------------------------
# W: the sandwich subset
# ---------------------------------------------------------------------------


def build_W(types) -> frozenset:
    """Anti-diagonal alignment subset from the Type vector.

    Label the Type I slots other than 0 as r_1 < ... < r_d; take the
    half-open stretches [r_1, r_2), [r_3, r_4), ... and, when d is odd,
    the closed tail [r_d, f-1].

    EXAMPLES::

        build_W(("I","I","II","II","I","II","I","I","I"))  # {1,2,3,6,8}
    """
    f = len(types)
    rs = [i for i in range(1, f) if types[i] == TYPE_I]
    out = set()
    d = len(rs)
    j = 0
    while j + 1 < d:
        out.update(range(rs[j], rs[j + 1]))
        j += 2
    if d % 2 == 1:
        out.update(range(rs[-1], f))
    return frozenset(out)


def build_W_parity(types) -> frozenset:
    """Second reading of the same subset: i belongs exactly when an odd
    number of nonzero Type I slots sit at or below i."""
    f = len(types)
    out = set()
    count = 0
    for i in range(f):
        if i >= 1 and types[i] == TYPE_I:
            count += 1
        if count % 2 == 1:
            out.add(i)
    return frozenset(out)


# ---------------------------------------------------------------------------
# V_eq / V_gt at a threshold
# ---------------------------------------------------------------------------


def build_V(profile: Profile, threshold_kind: str):
    """Split a base set of slots by comparing slopes to a threshold.

    threshold_kind is one of:

    * "zero": base set S, threshold 0 (the large/boundary slope walks);
    * "one": base set W, threshold 1 (small slope, odd sandwich count);
    * "one_minus_nu0": base set W, threshold 1 - nu_0 (small, even count).

    Returns (V_eq, V_gt) as frozensets.
    """
    if threshold_kind == "zero":
        base, thr = profile.S(), Fraction(0)
    elif threshold_kind == "one":
        base, thr = build_W(profile.types), Fraction(1)
    elif threshold_kind == "one_minus_nu0":
        base, thr = build_W(profile.types), Fraction(1) - profile.nu0()
    else:
        raise ValueError(f"unknown threshold kind {threshold_kind!r}")
    veq = frozenset(i for i in base if profile.nu[i] == thr)
    vgt = frozenset(i for i in base if profile.nu[i] > thr)
    return veq, vgt


# ---------------------------------------------------------------------------
# X: cyclic swap walk anchored at a slope-zero slot
# ---------------------------------------------------------------------------


def _cyclic_arc(start: int, stop: int, f: int):
    """Residues start, start+1, ..., stop-1 walked cyclically."""
    out = []
    i = start % f
    while i != stop % f:
        out.append(i)
        i = (i + 1) % f
    return out


def build_X(profile: Profile, anchor: int | None = None) -> frozenset:
    """Row-swap subset for the large-slope regime, by the literal walk.

    Starting from an anchor in V_eq, repeatedly find the next V_gt slot
    (cyclically), swap the stretch from it to the following Type I slot,
    and continue from that slot; stop on returning to the anchor.  The
    slot closing a swapped stretch is consumed: even when it lies in
    V_gt itself it does not open a new swap.  The result does not depend
    on the anchor (the tests assert this over every choice).
    """
    veq, vgt = build_V(profile, "zero")
    if not vgt:
        return frozenset()
    assert veq, "the cyclic swap walk needs an anchor slot with slope zero"
    f = profile.f
    s_sorted = sorted(profile.S())
    if anchor is None:
        anchor = min(veq)
    assert anchor in veq, "anchor must lie in V_eq"

    def next_in_S(i):
        for s in s_sorted:
            if s > i:
                return s
        return s_sorted[0]

    out = set()
    current = anchor
    while True:
        # first V_gt slot strictly after current, cyclically, before
        # coming back around to the anchor
        r = None
        j = next_in_S(current)
        while True:
            if j == anchor:
                break
            if j in vgt:
                r = j
                break
            j = next_in_S(j)
        if r is None:
            break
        closer = next_in_S(r)
        out.update(_cyclic_arc(r, closer, f))
        current = closer
        if current == anchor:
            break
    return frozenset(out)


def build_X_closed(profile: Profile) -> frozenset:
    """Closed-form second reading of the same subset.

    Break the cyclic order of S at the slope-zero slots; inside every
    maximal run of V_gt slots the 1st, 3rd, 5th, ... open swapped
    stretches reaching to the next Type I slot.
    """
    veq, vgt = build_V(profile, "zero")
    if not vgt:
        return frozenset()
    assert veq
    f = profile.f
    s_sorted = sorted(profile.S())

    def next_in_S(i):
        for s in s_sorted:
            if s > i:
                return s
        return s_sorted[0]

    out = set()
    # walk the full cyclic order of S once, tracking the position inside
    # the current V_gt run (slope-zero slots reset it)
    start = min(veq)
    order = []
    i = start
    while True:
        order.append(i)
        i = next_in_S(i)
        if i == start:
            break
    pos = 0
    for s in order:
        if s in veq:
            pos = 0
            continue
        pos += 1
        if pos % 2 == 1:
            out.update(_cyclic_arc(s, next_in_S(s), f))
    return frozenset(out)


# ---------------------------------------------------------------------------
# Y: clipped linear swap walk for the boundary regime
# ---------------------------------------------------------------------------


def build_Y(profile: Profile) -> frozenset:
    """Row-swap subset for the slope-one regime.

    Same consumption rule as the cyclic walk, but linear on 1..f-1: slot
    0 is handled by its own corner-killing step and never swaps.  A
    final V_gt slot with no Type I slot after it swaps the closed tail
    up to f-1.
    """
    veq, vgt = build_V(profile, "zero")
    s1 = [i for i in sorted(profile.S()) if i >= 1]
    vgt1 = [i for i in s1 if i in vgt]
    if not vgt1:
        return frozenset()
    out = set()
    floor = 0   # everything at or below this is consumed
    while True:
        r = None
        for c in vgt1:
            if c > floor:
                r = c
                break
        if r is None:
            break
        nxt = None
        for s in s1:
            if s > r:
                nxt = s
                break
        if nxt is None:
            out.update(range(r, profile.f))   # closed tail through f-1
            break
        out.update(range(r, nxt))
        floor = nxt
    return frozenset(out)


# ---------------------------------------------------------------------------
# brute-force triangularization oracle
# ---------------------------------------------------------------------------

# symbolic entry shapes: 0 absent, "M" the u^k term, "U" a unit, "C" a
# corner that is nonzero but divisible by u (the slope-one slot 0 corner)


def _slot_shape(profile: Profile, i: int, walk: str):
    veq, vgt = build_V(profile, "zero")
    if i == 0 and walk == "Y":
        if 0 in profile.S():
            return [["0", "M"], ["U", "C"]]
        return [["M", "0"], ["C", "U"]]
    if i in veq:
        return [["0", "M"], ["U", "U"]]
    if i in vgt:
        return [["0", "M"], ["U", "0"]]
    return [["M", "0"], ["0", "U"]]


def _swap_rows(m):
    return [list(m[1]), list(m[0])]


def _swap_cols(m):
    return [[m[0][1], m[0][0]], [m[1][1], m[1][0]]]


def _acceptable(m, i: int, walk: str) -> bool:
    # lower triangular is always fine
    if m[0][1] == "0":
        return True
    # the straightenable shape: u^k over a unit in the same column
    if m == [["0", "M"], ["U", "U"]]:
        return True
    # slot 0 of the boundary walk keeps its corner for the later kill
    if walk == "Y" and i == 0 and m in ([["0", "M"], ["U", "C"]],):
        return True
    return False


def triangularizable_patterns(profile: Profile, walk: str = "X"):
    """All swap patterns (subsets of Z/fZ) every slot of which lands in
    an acceptable shape.  Exponential search, intended for f <= 5."""
    f = profile.f
    assert f <= 5, "the exhaustive search is only meant for tiny f"
    good = []
    for mask in range(1 << f):
        pat = {i for i in range(f) if mask >> i & 1}
        if walk == "Y" and 0 in pat:
            continue
        ok = True
        for i in range(f):
            m = _slot_shape(profile, i, walk)
            if i in pat:
                m = _swap_rows(m)
            if (i - 1) % f in pat:
                m = _swap_cols(m)
            if not _acceptable(m, i, walk):
                ok = False
                break
        if ok:
            good.append(frozenset(pat))
    return good
