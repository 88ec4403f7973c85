"""Fit every model family with its published preset on one synthetic table.

    python3 scripts/benchmark_synthetic.py --rows 20000 --out runs/bench

Each family gets its own run directory; a combined Table-layout CSV is
written to <out>/metrics_table.csv.
"""

import argparse
import time
from pathlib import Path

from losml.models import DISPLAY_NAMES, FAMILIES
from losml.pipeline import PipelineConfig, combine_metrics, run_pipeline
from losml.synth import SynthSpec, synthesize_dataset


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--rows", type=int, default=20_000)
    ap.add_argument("--seed", type=int, default=2024)
    ap.add_argument("--families", nargs="+", default=list(FAMILIES), choices=FAMILIES)
    ap.add_argument("--pca", action="store_true", help="standardize + PCA before every model")
    ap.add_argument("--out", default="runs/bench")
    args = ap.parse_args()

    out = Path(args.out)
    ds = synthesize_dataset(SynthSpec(args.rows, seed=args.seed))
    dirs = []
    for family in args.families:
        cfg = PipelineConfig.from_dict({
            "model.family": family,
            "pca.enabled": args.pca,
            "seed": args.seed,
            "output.dir": str(out / family),
        })
        t = time.perf_counter()
        art = run_pipeline(cfg, dataset=ds)
        h = art.report.headline()
        print(f"{DISPLAY_NAMES[family]:<20} acc={h['accuracy']:.4f} f1={h['f1']:.4f} "
              f"kappa={h['kappa']:.4f} mcc={h['mcc']:.4f}  ({time.perf_counter() - t:.1f}s)")
        dirs.append(out / family)
    print(combine_metrics(dirs, out / "metrics_table.csv"))


if __name__ == "__main__":
    main()
