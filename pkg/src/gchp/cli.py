"""Command-line entry point.

    gchp simulate --out run/            # run/events.jsonl + run/params.json
    gchp train --out run/               # run/model.json + run/metrics.csv
    gchp evaluate --out run/
    gchp predict --out run/             # run/predictions.csv
    gchp select --out run/              # run/select.csv
    gchp saturate --out run/            # run/sweep.csv
    gchp verify

Exit codes: 0 success, 1 validation error, 2 runtime failure, 3 verify failure.
Errors print one line to stderr: ``error: <Category>: <message>``.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import os
import sys
import time
import warnings
from dataclasses import replace

import numpy as np

from gchp import pipeline as pl
from gchp.config import RunConfig, parse_config, require_file
from gchp.errors import GchpError, ValidationError
from gchp.events import write_jsonl
from gchp.graph import build_batch
from gchp.losses import lr_score, model_loglik, null_loglik
from gchp.model import load_model, param_count, predict_batch, save_model
from gchp.train import evaluate, metrics_csv, saturation_sweep, sweep_csv, train

EXIT_OK, EXIT_VALIDATION, EXIT_RUNTIME, EXIT_VERIFY = 0, 1, 2, 3
COMMANDS = ("simulate", "train", "evaluate", "predict", "select", "saturate", "verify")


def _write(path: str, text: str) -> None:
    os.makedirs(os.path.dirname(os.path.abspath(path)), exist_ok=True)
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write(text)


def _data_path(cfg: RunConfig, out: str, must_exist=True) -> str:
    path = cfg.path("io.data", os.path.abspath(os.path.join(out, "events.jsonl")))
    return require_file(cfg, "io.data", path) if must_exist else path


def _checkpoint_path(cfg: RunConfig, out: str) -> str:
    return cfg.path("io.checkpoint", os.path.abspath(os.path.join(out, "model.json")))


def _splits(cfg, out, seed):
    data = pl.load(cfg, _data_path(cfg, out))
    return pl.split_data(cfg, data, seed)


def cmd_simulate(cfg: RunConfig, seed: int, out: str) -> int:
    params, data = pl.simulate(cfg, seed)
    path = _data_path(cfg, out, must_exist=False)
    os.makedirs(os.path.dirname(os.path.abspath(path)), exist_ok=True)
    write_jsonl(data, path)
    sidecar = {**params.to_dict(), "seed": seed, "params_seed": pl.derive_seed(seed, pl.PARAMS_STREAM),
               "corpus_seed": pl.derive_seed(seed, pl.CORPUS_STREAM), "horizon": cfg["sim.horizon"]}
    _write(os.path.join(out, "params.json"), json.dumps(sidecar, indent=2) + "\n")
    print(f"simulated {len(data)} sequences, {data.n_events} events -> {path}")
    return EXIT_OK


def cmd_train(cfg: RunConfig, seed: int, out: str) -> int:
    tr, te = _splits(cfg, out, seed)
    report = train(tr, te, pl.train_config(cfg, seed))
    ckpt = _checkpoint_path(cfg, out)
    os.makedirs(os.path.dirname(os.path.abspath(ckpt)), exist_ok=True)
    save_model(report.model, ckpt)
    _write(os.path.join(out, "metrics.csv"), metrics_csv(report.records, include_seconds=cfg["io.record_timing"]))
    # wall-clock lives outside the CSV so reruns stay byte-identical
    _write(os.path.join(out, "timing.json"), json.dumps({"epoch_seconds": [r.seconds for r in report.records]}) + "\n")
    f = report.final()
    line = f"epochs={f.epoch} test_rmse={f.test_rmse:.6g} test_accuracy={f.test_accuracy:.6g}"
    if report.lr is not None:
        line += f" lr_score={report.lr.score:.6g}"
    print(line)
    return EXIT_OK


def cmd_evaluate(cfg: RunConfig, seed: int, out: str) -> int:
    model = load_model(require_file(cfg, "io.checkpoint", _checkpoint_path(cfg, out)))
    _, te = _splits(cfg, out, seed)
    rmse, acc = evaluate(model, te)
    print(f"rmse={rmse!r} accuracy={acc!r} events={te.n_events}")
    return EXIT_OK


def cmd_predict(cfg: RunConfig, seed: int, out: str) -> int:
    model = load_model(require_file(cfg, "io.checkpoint", _checkpoint_path(cfg, out)))
    _, te = _splits(cfg, out, seed)
    batch = build_batch(te, model.graph)
    tau_hat, logp = predict_batch(model, batch)
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(("seq_id", "index", "tau", "tau_hat", "mark", "mark_hat"))
    for i in range(len(batch)):
        w.writerow((te[batch.seq_index[i]].id, int(batch.event_index[i]), repr(float(batch.tau[i])),
                    repr(float(tau_hat[i])), int(batch.marks[i]), int(np.argmax(logp[i]))))
    _write(os.path.join(out, "predictions.csv"), buf.getvalue())
    print(f"wrote {len(batch)} predictions")
    return EXIT_OK


def _structure_name(s: dict) -> str:
    name = f"{s.get('layers', 2)}-layer h={s.get('hidden', 32)}"
    if s.get("readout", "flatten_concat") != "flatten_concat":
        name += f" {s['readout']}"
    if s.get("head_depth", 1) != 1:
        name += f" depth={s['head_depth']}"
    return name


def cmd_select(cfg: RunConfig, seed: int, out: str) -> int:
    tr, te = _splits(cfg, out, seed)
    N = tr.n_events
    l0 = null_loglik(tr)
    alpha = cfg["lr_test.alpha"]
    scored, skipped = [], []
    for s in cfg["select.structures"]:
        base = pl.train_config(cfg, seed, **s)
        d = param_count(base.model)
        for family in cfg["select.families"]:
            row = (_structure_name(s), family, d)
            if N <= d:
                skipped.append(row)
                continue
            tc = pl.with_family(base, family)
            report = train(tr, te, tc)
            with warnings.catch_warnings():
                warnings.simplefilter("ignore", RuntimeWarning)
                l1 = model_loglik(report.model, tr, tc.loss)
            scored.append((*row, l1, lr_score(l1, l0, N, d, alpha).score))
    # lower score wins; ties go to the smaller model, then the family name
    scored.sort(key=lambda r: (r[4], r[2], r[1]))
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(("rank", "structure", "family", "d_xi", "loglik", "score", "status"))
    for rank, (name, fam, d, l1, score) in enumerate(scored, 1):
        w.writerow((rank, name, fam, d, repr(l1), repr(score), "ok"))
    for name, fam, d in skipped:
        w.writerow(("", name, fam, d, "", "", "overparameterized"))
    text = buf.getvalue()
    _write(os.path.join(out, "select.csv"), text)
    sys.stdout.write(text)
    return EXIT_OK


def cmd_saturate(cfg: RunConfig, seed: int, out: str) -> int:
    tr, te = _splits(cfg, out, seed)
    base = pl.train_config(cfg, seed, readout=cfg["saturate.readout"])
    rows = saturation_sweep(tr, te, base, cfg["saturate.widths"], pl.sweep_seeds(cfg, seed),
                            workers=cfg["saturate.workers"])
    text = sweep_csv(rows)
    _write(os.path.join(out, "sweep.csv"), text)
    sys.stdout.write(text)
    return EXIT_OK


def cmd_verify(cfg: RunConfig, seed: int, out: str) -> int:
    from gchp.verify import run_suite

    results = run_suite(seed)
    width = max(len(r.name) for r in results)
    for r in results:
        print(f"{'PASS' if r.ok else 'FAIL'}  {r.name:<{width}}  {r.detail}")
    failed = sum(not r.ok for r in results)
    print(f"{len(results) - failed}/{len(results)} checks passed")
    return EXIT_VERIFY if failed else EXIT_OK


HANDLERS = {
    "simulate": cmd_simulate,
    "train": cmd_train,
    "evaluate": cmd_evaluate,
    "predict": cmd_predict,
    "select": cmd_select,
    "saturate": cmd_saturate,
    "verify": cmd_verify,
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="gchp", description="Graph-convolutional point-process toolkit.")
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", default=None, help="TOML run configuration")
    common.add_argument("--seed", type=int, default=0, help="run seed fanned out to every random stream")
    common.add_argument("--out", default=".", help="output directory")
    sub = parser.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        sub.add_parser(name, parents=[common], help=HANDLERS[name].__doc__)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_OK if exc.code == 0 else EXIT_VALIDATION
    try:
        if args.seed < 0:
            raise ValidationError("--seed must be nonnegative")
        cfg = parse_config(args.config)
        return HANDLERS[args.command](cfg, args.seed, args.out)
    except ValidationError as exc:
        print(f"error: {getattr(exc, 'category', 'ValidationError')}: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    except GchpError as exc:
        print(f"error: {exc.category}: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    except OSError as exc:
        print(f"error: IoFailure: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
