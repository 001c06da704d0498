import random
from fractions import Fraction

from crysred.typesets import Profile, validate


def random_profile(rng: random.Random, p=7, f=None, e=2, nu_pool=None,
                   require_valid=True):
    """Draw a well-formed profile; the draw is deterministic in rng."""
    for _ in range(500):
        ff = f or rng.choice([1, 2, 3])
        types = [rng.choice(["I", "II"]) for _ in range(ff)]
        if all(t == "II" for t in types):
            types[rng.randrange(ff)] = "I"
        pool = nu_pool or [Fraction(0), Fraction(1, 2), Fraction(1),
                           Fraction(3, 2), Fraction(2)]
        nu = []
        for i, t in enumerate(types):
            if t == "II":
                nu.append(rng.choice([s for s in pool if s > 0]))
            else:
                nu.append(rng.choice(pool))
        k = [rng.randrange(p + 2, 2 * p - 3)]
        k += [rng.randrange(2, p - 2) for _ in range(ff - 1)]
        prof = Profile(p=p, f=ff, types=tuple(types), k=tuple(k),
                       nu=tuple(nu), e=e, seed=rng.randrange(10 ** 6))
        if not require_valid or not validate(prof):
            return prof
    raise AssertionError("could not draw a valid profile")
