"""Per-epoch wall time as the event count N and window length m grow.

    python scripts/complexity.py --sequences 40 80 160 --m 5 10 20
"""

import argparse

import numpy as np

from gchp.events import Dataset
from gchp.hawkes import sample_params, simulate_corpus
from gchp.model import GchpConfig
from gchp.train import TrainConfig, train


def epoch_seconds(data, m, hidden, epochs):
    K = data.mark_kind.size
    cfg = TrainConfig(GchpConfig(hidden=hidden, m=m, p_feat=K + 1, K=K), epochs=epochs, seed=0)
    return float(np.median([r.seconds for r in train(data, data, cfg).records[1:]]))


def main():
    ap = argparse.ArgumentParser(description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    ap.add_argument("--sequences", type=int, nargs="+", default=[40, 80, 160])
    ap.add_argument("--m", type=int, nargs="+", default=[5, 10, 20])
    ap.add_argument("--hidden", type=int, default=16)
    ap.add_argument("--epochs", type=int, default=3)
    args = ap.parse_args()

    full = simulate_corpus(sample_params(10, 0), 30.0, max(args.sequences), 1)
    print("N sweep (m = 10)")
    prev = None
    for n in args.sequences:
        data = Dataset(full.sequences[:n], full.mark_kind)
        t = epoch_seconds(data, 10, args.hidden, args.epochs)
        ratio = f"  x{t / prev:.2f}" if prev else ""
        print(f"  events {data.n_events:7d}  {t:.3f}s/epoch{ratio}")
        prev = t
    print(f"m sweep (N = {full.n_events})")
    prev = None
    for m in args.m:
        t = epoch_seconds(full, m, args.hidden, args.epochs)
        ratio = f"  x{t / prev:.2f}" if prev else ""
        print(f"  m {m:3d}  {t:.3f}s/epoch{ratio}")
        prev = t


if __name__ == "__main__":
    main()
