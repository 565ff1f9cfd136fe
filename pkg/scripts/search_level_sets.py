#!/usr/bin/env python3
"""Search for encounter level sets hitting the target mean exactly.

The Mt. Moon table fixes the species weights (0.79 / 0.15 / 0.05 / 0.01)
and draws levels uniformly from each species' list, so the expected
encounter level is the weight-dot-mean of the per-species level means.
This enumerates contiguous level ranges for the two common species and
single levels for the two rare ones, keeping combinations whose expected
level equals 8.18 exactly (as a fraction, no float comparisons), and
marks the combination committed in data/encounters/mt_moon.json.

Usage: python3 scripts/search_level_sets.py
"""

from __future__ import annotations

from fractions import Fraction
from itertools import product

TARGET = Fraction(818, 100)
WEIGHTS = {
    "zubat": Fraction(79, 100),
    "geodude": Fraction(15, 100),
    "paras": Fraction(5, 100),
    "clefairy": Fraction(1, 100),
}
COMMITTED = {
    "zubat": (7, 8, 9),
    "geodude": (7, 8, 9),
    "paras": (11,),
    "clefairy": (11,),
}

LEVEL_MIN, LEVEL_MAX = 3, 14
COMMON_WIDTHS = (1, 3, 5)  # symmetric ranges keep the mean an integer


def common_ranges():
    for width in COMMON_WIDTHS:
        half = width // 2
        for center in range(LEVEL_MIN + half, LEVEL_MAX - half + 1):
            yield tuple(range(center - half, center + half + 1))


def mean(levels: tuple[int, ...]) -> Fraction:
    return Fraction(sum(levels), len(levels))


def main() -> int:
    solutions = []
    rare_levels = [(lvl,) for lvl in range(LEVEL_MIN, LEVEL_MAX + 1)]
    for zubat, geodude, paras, clefairy in product(
        common_ranges(), common_ranges(), rare_levels, rare_levels
    ):
        expected = (
            WEIGHTS["zubat"] * mean(zubat)
            + WEIGHTS["geodude"] * mean(geodude)
            + WEIGHTS["paras"] * mean(paras)
            + WEIGHTS["clefairy"] * mean(clefairy)
        )
        if expected == TARGET:
            solutions.append(
                {"zubat": zubat, "geodude": geodude,
                 "paras": paras, "clefairy": clefairy}
            )

    print(f"{len(solutions)} level sets give an expected level of {float(TARGET)}")
    for solution in solutions:
        marker = "  <- committed" if solution == COMMITTED else ""
        parts = ", ".join(
            f"{name} {list(levels)}" for name, levels in solution.items()
        )
        print(f"  {parts}{marker}")
    if COMMITTED not in solutions:
        print("committed table is NOT among the solutions")
        return 1
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
