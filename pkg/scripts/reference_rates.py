#!/usr/bin/env python3
"""Recompute the same-swara pair misclassification rates from the reference
2x2 count tables and show them beside the printed percentages."""

from ragakit.evaluation import misclassification_rate
from ragakit.reference_results import PAIR_COUNTS, PAIR_RATES_PERCENT

TOL_PP = 0.1


def main() -> int:
    worst = 0.0
    print(f"{'model':<7}{'pair':<9}{'counts':<22}{'computed':>10}{'printed':>9}{'diff':>8}")
    for model, pairs in PAIR_COUNTS.items():
        for pair, counts in pairs.items():
            got = 100 * misclassification_rate(counts)
            printed = PAIR_RATES_PERCENT[model][pair]
            diff = got - printed
            worst = max(worst, abs(diff))
            flag = "" if abs(diff) <= TOL_PP + 1e-9 else "  <- outside tolerance"
            print(f"{model:<7}{'/'.join(pair):<9}{str(counts):<22}{got:>9.2f}%{printed:>8.2f}%{diff:>+8.2f}{flag}")
    print(f"worst |diff| {worst:.2f} pp (tolerance {TOL_PP} pp)")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
