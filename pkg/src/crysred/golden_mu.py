"""Golden reduction-data templates.

The summarized per-subcase answer for the monomial reduction data,
shipped as a structured data file (``golden_mu.json``) and evaluated
here without touching any matrix arithmetic.  The pipeline derives the
same data by explicit row operations on the reduced tuple; comparing
the two, slot by slot, is the conformance check the test suite and
the sweep command both run.

Templates are stored pre-rescale: a slot-0 override plus an in/out
entry pair keyed by membership in the subcase's index set.  The final
diagonal rescale at slot f - 1 acts on exponents by one uniform rule,
applied by ``mu_table``: the row multiplication bumps one exponent of
slot f - 1 and the induced column division at slot 0 lowers one
exponent of slot 0 by p (for f = 1 both hit the same slot).
"""

import json
from pathlib import Path

from .redengine import ReductionData, classify_subcase
from .typesets import Profile

_DATA = json.loads(
    (Path(__file__).parent / "golden_mu.json").read_text())
TEMPLATES = _DATA["templates"]


def _exponent(expr: str, k_i: int, p: int) -> int:
    table = {"0": 0, "1": 1, "p": p, "k": k_i, "k-p": k_i - p}
    return table[expr]


def _entry(tpl, k_i: int, p: int):
    shape, n, m = tpl
    return [shape, _exponent(n, k_i, p), _exponent(m, k_i, p)]


def _in_set(membership: str, i: int, info: dict):
    if membership == "S":
        return i in info["S"]
    if membership == "window":
        return i in info["window"]
    if membership == "W":
        return i in info["W"]
    if membership == "W-flip-below-r":
        base = i in info["W"]
        return (not base) if 1 <= i < info["r"] else base
    assert membership == "none"
    return False


def _resolve_scale(rule: str, info: dict):
    if rule == "left":
        return (0, 1)
    if rule == "right":
        return (1, 0)
    if rule == "left-if-0-in-S":
        return (0, 1) if 0 in info["S"] else (1, 0)
    assert rule == "left-if-0-in-window"
    return (0, 1) if 0 in info["window"] else (1, 0)


def _apply_rescale(rows, scale, p: int, f: int):
    # row multiplication at slot f - 1
    shape, n, m = rows[f - 1]
    if scale == (0, 1):
        if shape == "S":
            n += 1
        else:
            m += 1
    else:
        if shape == "S":
            m += 1
        else:
            n += 1
    rows[f - 1] = [shape, n, m]
    # induced column division at slot 0
    shape, n, m = rows[0]
    if scale == (0, 1):
        m -= p
    else:
        n -= p
    rows[0] = [shape, n, m]
    return rows


def mu_table(profile: Profile) -> ReductionData:
    """Evaluate the golden template for the profile's subcase.

    Returns the same ReductionData the pipeline extracts (data mode),
    derived purely from the stored per-slot answers.  Asserts the
    exponent window [0, p - 1] and that the template's reducibility
    claim matches the anti-diagonal count parity.
    """
    subcase, info = classify_subcase(profile)
    t = TEMPLATES[subcase]
    p, f, k = profile.p, profile.f, profile.k
    rows = []
    for i in range(f):
        tpl = t["in"] if _in_set(t["membership"], i, info) else t["out"]
        rows.append(_entry(tpl, k[i], p))
    if t["slot0"] is not None:
        rows[0] = _entry(t["slot0"], k[0], p)
    rows = _apply_rescale(rows, _resolve_scale(t["scale"], info), p, f)
    for i, (shape, n, m) in enumerate(rows):
        assert 0 <= n <= p - 1 and 0 <= m <= p - 1, \
            f"slot {i}: template exponent ({n}, {m}) outside [0, {p - 1}]"
    entries = tuple((shape, (n, m)) for shape, n, m in rows)
    data = ReductionData(p=p, f=f, entries=entries, subcase=subcase)
    claim = t["reducibility"]
    if claim == "reducible":
        assert data.is_reducible(), f"{subcase}: claim contradicts parity"
    elif claim == "irreducible":
        assert not data.is_reducible(), \
            f"{subcase}: claim contradicts parity"
    else:
        assert claim == "parity"
    return data
