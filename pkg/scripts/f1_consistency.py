"""Recompute F1 from published precision/recall pairs.

The printed F1 of each model should be the harmonic mean of its printed
precision and recall, up to two-decimal rounding. Rows that disagree are
flagged.
"""

from losml.evaluation import f1_score

# model: (accuracy, precision, recall, printed F1)
TABLE = {
    "Logistic Regression": (0.73, 0.76, 0.98, 0.86),
    "Decision Tree": (0.61, 0.93, 0.70, 0.80),
    "Random Forest": (0.65, 0.92, 0.74, 0.82),
    "AdaBoost": (0.76, 0.84, 0.80, 0.82),
    "LightGBM": (0.78, 0.89, 0.84, 0.83),
}
TOL = 0.005


def main():
    print(f"{'model':<20} {'P':>5} {'R':>5} {'F1 calc':>8} {'printed':>8}  status")
    bad = 0
    for name, (_, p, r, printed) in TABLE.items():
        f1 = f1_score(p, r)
        ok = abs(f1 - printed) <= TOL
        bad += not ok
        print(f"{name:<20} {p:>5.2f} {r:>5.2f} {f1:>8.4f} {printed:>8.2f}  {'ok' if ok else 'INCONSISTENT'}")
    print(f"{bad} inconsistent row(s)")


if __name__ == "__main__":
    main()
