"""Default model against the constant-mean and majority-class baselines.

    python scripts/prediction_quality.py --seed 0 --epochs 20
"""

import argparse
from dataclasses import replace

from gchp import pipeline as pl
from gchp.config import parse_config
from gchp.train import baseline_metrics, train


def main():
    ap = argparse.ArgumentParser(description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    ap.add_argument("--config", default=None)
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--epochs", type=int, default=None, help="defaults to train.epochs")
    args = ap.parse_args()

    cfg = parse_config(args.config)
    _, data = pl.simulate(cfg, args.seed)
    tr, te = pl.split_data(cfg, data, args.seed)
    tc = pl.train_config(cfg, args.seed)
    if args.epochs is not None:
        tc = replace(tc, epochs=args.epochs)
    base_rmse, base_acc = baseline_metrics(tr, te)
    report = train(tr, te, tc)
    for r in report.records:
        print(f"epoch {r.epoch:3d}  loss {r.train_loss:.4f}  rmse {r.test_rmse:.4f}  accuracy {r.test_accuracy:.4f}")
    f = report.final()
    print(f"baseline: rmse {base_rmse:.4f}, majority accuracy {base_acc:.4f}")
    print(f"model:    rmse {f.test_rmse:.4f} (ratio {f.test_rmse / base_rmse:.3f}), "
          f"accuracy {f.test_accuracy:.4f} (+{(f.test_accuracy - base_acc) * 100:.1f} pts)")
    if report.lr is not None:
        print(f"likelihood-ratio score {report.lr.score:.2f} (d = {report.lr.d_xi}, N = {report.lr.N})")


if __name__ == "__main__":
    main()
