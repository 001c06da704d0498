"""crysred: semisimple mod-p reductions of two-dimensional crystalline
representations of Gal(Qbar_p / Q_{p^f}) with small labeled weights.

The package walks the whole pipeline: build the Frobenius tuple of a
Kisin module attached to a weight/valuation profile, run the descent
base-change chain down to a form with integral entries, certify every
step with explicit ideal-membership witnesses, reduce modulo varpi, and
read off the semisimplified representation in terms of fundamental
characters.  A separate exhaustive-table route for f = 2 cross-checks
the generic machinery symbol by symbol.
"""

__version__ = "0.1.0"
