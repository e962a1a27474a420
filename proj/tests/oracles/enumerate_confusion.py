#!/usr/bin/env python3
"""Enumerate every confusion matrix over 100 instances that matches the
published metric table at its printed rounding.

Uses exact rational arithmetic. Writes tests/fixtures/reported_metrics_matrices.json.
"""
import json
import sys
from fractions import Fraction
from pathlib import Path

TOTAL = 100
# printed value, decimals shown
PRINTED = {
    "accuracy": (Fraction(99, 100), 2),      # 99%
    "precision": (Fraction(9808, 10000), 4),  # 98.08%
    "recall": (Fraction(1), 2),               # 100%
    "f1": (Fraction(9904, 10000), 4),         # 99.04%
}
TOLERANCE = Fraction(5, 10000)


def metrics(tp, fp, fn, tn):
    out = {"accuracy": Fraction(tp + tn, TOTAL)}
    out["precision"] = Fraction(tp, tp + fp) if tp + fp else None
    out["recall"] = Fraction(tp, tp + fn) if tp + fn else None
    out["f1"] = Fraction(2 * tp, 2 * tp + fp + fn) if 2 * tp + fp + fn else None
    return out


def rounds_to(value, printed, decimals):
    # Round-half-up at the printed number of decimal places (as a fraction of 1).
    scale = 10 ** decimals
    return value is not None and Fraction(int(value * scale + Fraction(1, 2)), scale) == printed


def main():
    strict, near = [], []
    for tp in range(TOTAL + 1):
        for fp in range(TOTAL + 1 - tp):
            for fn in range(TOTAL + 1 - tp - fp):
                tn = TOTAL - tp - fp - fn
                m = metrics(tp, fp, fn, tn)
                hits = {k: rounds_to(m[k], *PRINTED[k]) for k in PRINTED}
                row = {
                    "tp": tp, "fp": fp, "fn": fn, "tn": tn,
                    "vulnerable": tp + fn, "secure": fp + tn,
                    "metrics": {k: (None if v is None else float(v)) for k, v in m.items()},
                    "exact": {k: (None if v is None else f"{v.numerator}/{v.denominator}") for k, v in m.items()},
                }
                if all(hits.values()):
                    strict.append(row)
                if (hits["accuracy"] and hits["precision"] and hits["recall"] and m["f1"] is not None
                        and abs(m["f1"] - PRINTED["f1"][0]) <= TOLERANCE):
                    near.append(row)
    doc = {
        "schema_version": 1,
        "total": TOTAL,
        "printed": {k: float(v) for k, (v, _) in PRINTED.items()},
        "tolerance": float(TOLERANCE),
        "all_four_at_printed_rounding": strict,
        "three_at_rounding_f1_within_tolerance": near,
    }
    out = Path(sys.argv[1]) if len(sys.argv) > 1 else Path(__file__).resolve().parent.parent / "fixtures" / "reported_metrics_matrices.json"
    out.write_text(json.dumps(doc, indent=2) + "\n")
    print(f"strict matches: {len(strict)}; within tolerance: {len(near)}")
    for r in near:
        print(f"  tp={r['tp']} fp={r['fp']} fn={r['fn']} tn={r['tn']} f1={r['exact']['f1']} ({r['metrics']['f1']:.6f})")


if __name__ == "__main__":
    main()
