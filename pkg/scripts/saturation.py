"""Width sweep on the default synthetic corpus.

    python scripts/saturation.py --readout mean_pool --out results/
    python scripts/saturation.py --readout flatten_concat --widths 4 8 16

Writes ``sweep_<readout>.csv`` and prints the curve.
"""

import argparse
import os
import time

from gchp import pipeline as pl
from gchp.config import parse_config
from gchp.model import READOUTS
from gchp.train import baseline_metrics, saturation_sweep, sweep_csv


def main():
    ap = argparse.ArgumentParser(description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    ap.add_argument("--config", default=None)
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--readout", choices=READOUTS, default=None, help="defaults to saturate.readout")
    ap.add_argument("--widths", type=int, nargs="+", default=None)
    ap.add_argument("--workers", type=int, default=1)
    ap.add_argument("--out", default="results")
    args = ap.parse_args()

    cfg = parse_config(args.config)
    readout = args.readout or cfg["saturate.readout"]
    widths = args.widths or cfg["saturate.widths"]
    _, data = pl.simulate(cfg, args.seed)
    tr, te = pl.split_data(cfg, data, args.seed)
    _, majority = baseline_metrics(tr, te)
    print(f"train {len(tr)} sequences / {tr.n_events} events, test {len(te)} / {te.n_events}; majority {majority:.3f}")

    start = time.perf_counter()
    rows = saturation_sweep(tr, te, pl.train_config(cfg, args.seed, readout=readout), widths,
                            pl.sweep_seeds(cfg, args.seed), workers=args.workers)
    for r in rows:
        print(f"width {r.width:4d}  d={r.d_xi:6d}  accuracy {r.mean_accuracy:.4f} +- {r.std_accuracy:.4f}  "
              f"rmse {r.mean_rmse:.4f}")
    acc = [r.mean_accuracy for r in rows]
    if len(acc) >= 2:
        print(f"top-two spread {abs(acc[-1] - acc[-2]) * 100:.2f} pts, smallest-width gap "
              f"{(max(acc[-2:]) - acc[0]) * 100:.2f} pts, {time.perf_counter() - start:.0f}s")
    os.makedirs(args.out, exist_ok=True)
    with open(os.path.join(args.out, f"sweep_{readout}.csv"), "w", newline="") as fh:
        fh.write(sweep_csv(rows))


if __name__ == "__main__":
    main()
