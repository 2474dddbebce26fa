"""Command-line entry point.

Exit codes: 0 success, 1 usage error, 2 data error, 3 numerical failure.
"""
from __future__ import annotations

import argparse
import csv
import logging
import sys
import warnings
from contextlib import nullcontext
from pathlib import Path

from threadpoolctl import threadpool_limits

from .config import EVAL_PARAMS, load_config
from .context import ContextEncoder
from .evaluation import run_evaluation, write_mean_variance_csv, write_token_steps_csv
from .exceptions import ContextDistanceWarning, DataError, IoError, NFTProjError
from .ingest import IngestConfig, fetch_events, load_events, write_events
from .metrics import market_caps
from .nn.checkpoint import load_checkpoint, save_checkpoint
from .pipeline import NFTProjector
from .series import build_series, read_series_csv, write_series_csv
from .synth import dump_manifest, make_benchmark_suite, suite_manifest

logger = logging.getLogger("nftproj")

SERIES_HELP = "series CSV: token_id,day,value_eth,count (collection id = file stem)"
EVENTS_HELP = "event CSV: collection_id,token_id,timestamp,price_eth"
TRAIN_FLAGS = ("hidden", "window", "epochs", "batch_size", "dropout", "lr", "samples_per_epoch")


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(1, f"{self.prog}: error: {message}\n")


def _existing(path) -> Path:
    p = Path(path)
    if not p.is_file():
        raise IoError(f"file not found: {p}")
    return p


def _read_series(paths):
    return [read_series_csv(_existing(p)) for p in paths]


def _token_list(text: str) -> list[int]:
    out = []
    for part in text.split(","):
        if "-" in part:
            lo, hi = part.split("-", 1)
            out.extend(range(int(lo), int(hi) + 1))
        elif part.strip():
            out.append(int(part))
    return out


def _write_rows(path, header, rows):
    try:
        with open(path, "w", newline="", encoding="utf-8") as fh:
            writer = csv.writer(fh, lineterminator="\n")
            writer.writerow(header)
            writer.writerows(rows)
    except OSError as exc:
        raise IoError(f"cannot write {path}: {exc}") from exc


def _context_rows(table: dict):
    return [[cid] + [repr(float(x)) for x in vec] for cid, vec in table.items()]


CONTEXT_HEADER = ["collection_id", "c1", "c2", "c3", "c4", "c5", "c6"]


def _train_params(args, config) -> dict:
    params = dict(config.train) if config else {}
    for name in TRAIN_FLAGS:
        value = getattr(args, name, None)
        if value is not None:
            params[name] = value
    return params


def _seed(args, config) -> int:
    if args.seed is not None:
        return args.seed
    if config is not None:
        return config.seed
    raise UsageError("a seed is required (--seed or a config file)")


def _threshold(args, config):
    if getattr(args, "threshold", None) is not None:
        return args.threshold
    return config.distance_threshold if config else None


def _report_warning(w):
    print(f"warning: {w.category.__name__}: {w.message}", file=sys.stderr)


# subcommands
def cmd_ingest(args, config):
    if args.source == "load":
        events = load_events(_existing(args.input), args.format)
    else:
        cfg = IngestConfig(args.base_url, page_size=args.page_size, max_retries=args.max_retries)
        events = fetch_events(cfg, args.address, args.from_block, args.to_block)
    write_events(events, args.out)
    print(f"{len(events)} events -> {args.out}")


def cmd_synth(args, config):
    seed = _seed(args, config)
    out = Path(args.out)
    (out / "events").mkdir(parents=True, exist_ok=True)
    (out / "series").mkdir(parents=True, exist_ok=True)
    for corpus in make_benchmark_suite(seed):
        write_events(corpus.events, out / "events" / f"{corpus.collection_id}.csv")
        write_series_csv(corpus.truth, out / "series" / f"{corpus.collection_id}.csv")
    (out / "manifest.json").write_text(dump_manifest(suite_manifest(seed)), encoding="utf-8")
    print(f"benchmark suite (seed {seed}) -> {out}")


def cmd_series(args, config):
    events = load_events(_existing(args.events), args.format)
    if args.collection:
        events = [e for e in events if e.collection_id == args.collection]
    tokens = _token_list(args.tokens) if args.tokens else sorted({e.token_id for e in events})
    cs = build_series(events, args.inception, tokens, args.collection)
    write_series_csv(cs, args.out)
    if cs.dropped_events:
        print(f"note: {cs.dropped_events} events after day 364 dropped", file=sys.stderr)
    print(f"{cs.n_tokens} tokens x {cs.n_days} days -> {args.out}")


def cmd_context(args, config):
    if args.action == "fit":
        enc = ContextEncoder().fit(_read_series(args.train))
        _write_rows(args.out, CONTEXT_HEADER, _context_rows(enc.contexts_))
        if args.checkpoint:
            save_checkpoint(None, enc.pca_, enc.norm_, enc.contexts_, {"kind": "context"}, args.checkpoint)
        print(f"threshold (max pairwise training distance): {enc.threshold_!r}")
        return
    ckpt = load_checkpoint(_existing(args.checkpoint))
    enc = ContextEncoder.from_fitted(ckpt.pca, ckpt.norm, ckpt.contexts)
    collections = _read_series(args.series)
    if args.action == "embed":
        table = {cs.collection_id: enc.embed(cs) for cs in collections}
        rows = _context_rows(table)
        if args.out:
            _write_rows(args.out, CONTEXT_HEADER, rows)
        else:
            writer = csv.writer(sys.stdout, lineterminator="\n")
            writer.writerow(CONTEXT_HEADER)
            writer.writerows(rows)
        return
    threshold = _threshold(args, config)
    threshold = enc.threshold_ if threshold is None else threshold
    writer = csv.writer(sys.stdout, lineterminator="\n")
    writer.writerow(["collection_id", "distance", "nearest", "threshold", "warning"])
    for cs in collections:
        dist, nearest = enc.distance(enc.embed(cs))
        far = dist > threshold
        writer.writerow([cs.collection_id, repr(dist), nearest, repr(float(threshold)), int(far)])
        if far:
            print(f"warning: ContextDistanceWarning: {cs.collection_id}: distance {dist:.4f} to nearest "
                  f"training collection {nearest} exceeds threshold {threshold:.4f}", file=sys.stderr)


def cmd_train(args, config):
    params = _train_params(args, config)
    params["seed"] = _seed(args, config)
    proj = NFTProjector(**params).fit(_read_series(args.train))
    proj.save(args.out)
    if args.loss_out:
        _write_rows(args.loss_out, ["epoch", "loss"],
                    [[i + 1, repr(float(x))] for i, x in enumerate(proj.loss_history_)])
    print(f"trained on {len(proj.training_ids_)} collections -> {args.out}")


def _load_projector(path, threshold):
    proj = NFTProjector.load(_existing(path))
    if threshold is not None:
        proj.set_params(distance_threshold=threshold)
    return proj


def cmd_generate(args, config):
    proj = _load_projector(args.checkpoint, _threshold(args, config))
    cs = read_series_csv(_existing(args.series))
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always", ContextDistanceWarning)
        result = proj.project(cs)
    for w in caught:
        _report_warning(w)
    write_series_csv(result.raw, args.out_raw)
    write_series_csv(result.stepped, args.out_step)
    print(f"{cs.collection_id}: distance {result.distance:.4f} (nearest {result.nearest}); "
          f"{result.n_clamped} negative plateau values clamped")


def cmd_evaluate(args, config):
    ckpt_path = Path(args.checkpoint)
    if not ckpt_path.is_file():
        raise IoError(f"checkpoint not found: {ckpt_path} (run `nftproj train` first)")
    proj = _load_projector(ckpt_path, _threshold(args, config))
    train = _read_series(args.train)
    test = _read_series(args.test)
    params = {k: v for k, v in proj.get_params().items()
              if k not in ("use_context", "distance_threshold", "seed", "n_components")}
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always", ContextDistanceWarning)
        report = run_evaluation(train, test, params, seed=_seed(args, config), contextual=proj)
    for w in caught:
        _report_warning(w)
    report.to_csv(args.out)
    if args.diagnostics:
        report.diagnostics_csv(args.diagnostics)
    print(f"{len(report.rows)} rows for {len(test)} collections -> {args.out}")


def cmd_report(args, config):
    labelled = {"actual": read_series_csv(_existing(args.actual))}
    for path in args.generated or []:
        p = _existing(path)
        labelled[p.stem] = read_series_csv(p)
    write_mean_variance_csv(labelled, args.out)
    if args.steps_out:
        if not args.tokens:
            raise UsageError("--steps-out needs --tokens")
        write_token_steps_csv(labelled, _token_list(args.tokens), args.steps_out)
    if args.caps_out:
        rows = [[label] + [repr(c) for c in market_caps(cs).values()] for label, cs in labelled.items()]
        _write_rows(args.caps_out, ["series", "q1", "q2", "q3", "q4"], rows)
    print(f"report -> {args.out}")


def _add_train_flags(p):
    g = p.add_argument_group("training hyper-parameters (override the config file)")
    g.add_argument("--hidden", type=int, help="LSTM hidden units (default 300)")
    g.add_argument("--window", type=int, help="sliding window length in days (default 20)")
    g.add_argument("--epochs", type=int, help="training epochs (default 50)")
    g.add_argument("--batch-size", type=int, help="mini-batch size (default 1024)")
    g.add_argument("--dropout", type=float, help="dropout rate (default 0.2)")
    g.add_argument("--lr", type=float, help="Adam learning rate (default 1e-3)")
    g.add_argument("--samples-per-epoch", type=int,
                   help="examples drawn per epoch from the shuffle (default: all)")
    g.add_argument("--eval-preset", action="store_true",
                   help=f"use the small benchmark preset {EVAL_PARAMS}")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="nftproj", description="Project NFT collection growth from first-quarter sales.")
    parser.add_argument("--config", help="JSON run config (seed, train, distance_threshold, ...)")
    parser.add_argument("--seed", type=int, help="master seed (overrides the config)")
    parser.add_argument("--threads", type=int, default=None,
                        help="BLAS thread cap; 1 gives bit-level determinism")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", metavar="command", required=True)

    p = sub.add_parser("ingest", help="load or fetch sale events into an event CSV",
                       description=f"Write sale events as {EVENTS_HELP}.")
    isub = p.add_subparsers(dest="source", required=True, metavar="source")
    pl = isub.add_parser("load", help="read a CSV or JSONL event file")
    pl.add_argument("--input", required=True, help="event file (same columns as the output)")
    pl.add_argument("--format", choices=("csv", "jsonl"), default="csv")
    pl.add_argument("--out", required=True, help="output event CSV")
    pf = isub.add_parser("fetch", help="page through an explorer API (key from NFTPROJ_API_KEY)")
    pf.add_argument("--base-url", required=True, help="API endpoint URL")
    pf.add_argument("--address", required=True, help="collection contract address")
    pf.add_argument("--from-block", type=int, required=True)
    pf.add_argument("--to-block", type=int, required=True)
    pf.add_argument("--page-size", type=int, default=1000)
    pf.add_argument("--max-retries", type=int, default=5)
    pf.add_argument("--out", required=True, help="output event CSV")
    p.set_defaults(func=cmd_ingest)

    p = sub.add_parser("synth", help="emit the synthetic benchmark suite",
                       description="Writes events/<id>.csv, series/<id>.csv and manifest.json under --out.")
    p.add_argument("--out", required=True, help="output directory")
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("series", help="turn events into a series CSV",
                       description=f"Input: {EVENTS_HELP}. Output: {SERIES_HELP}.")
    p.add_argument("--events", required=True)
    p.add_argument("--format", choices=("csv", "jsonl"), default="csv")
    p.add_argument("--inception", type=int, required=True, help="inception unix timestamp (day 0)")
    p.add_argument("--tokens", help="token ids, e.g. 0-9999 or 1,5,7 (default: tokens with sales)")
    p.add_argument("--collection", help="keep only this collection id")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_series)

    p = sub.add_parser("context", help="fit, embed or measure collection contexts",
                       description=f"Inputs are {SERIES_HELP}. Context tables are "
                                   "collection_id,c1,...,c6.")
    csub = p.add_subparsers(dest="action", required=True, metavar="action")
    pc = csub.add_parser("fit", help="fit PCA contexts on training series")
    pc.add_argument("--train", nargs="+", required=True, help="training series CSVs")
    pc.add_argument("--out", required=True, help="context table CSV")
    pc.add_argument("--checkpoint", help="also save a context-only checkpoint")
    pe = csub.add_parser("embed", help="embed series with a fitted checkpoint")
    pe.add_argument("--checkpoint", required=True)
    pe.add_argument("--series", nargs="+", required=True)
    pe.add_argument("--out", help="context table CSV (default: stdout)")
    pd = csub.add_parser("distance", help="distance to the nearest training context")
    pd.add_argument("--checkpoint", required=True)
    pd.add_argument("--series", nargs="+", required=True)
    pd.add_argument("--threshold", type=float, help="warning threshold (default: max pairwise training distance)")
    p.set_defaults(func=cmd_context)

    p = sub.add_parser("train", help="fit contexts and the conditional LSTM; write a checkpoint",
                       description=f"Inputs are full-year {SERIES_HELP}. Output is the binary checkpoint.")
    p.add_argument("--train", nargs="+", required=True, help="training series CSVs")
    p.add_argument("--out", required=True, help="checkpoint path")
    p.add_argument("--loss-out", help="loss history CSV epoch,loss")
    _add_train_flags(p)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("generate", help="project Q2-Q4 from a collection's Q1",
                       description=f"Input: {SERIES_HELP} (days 0-90 used). Outputs two 365-day series CSVs.")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--series", required=True)
    p.add_argument("--out-raw", required=True, help="projection without step-transform")
    p.add_argument("--out-step", required=True, help="projection with step-transform")
    p.add_argument("--threshold", type=float, help="context-distance warning threshold")
    p.set_defaults(func=cmd_generate)

    p = sub.add_parser("evaluate", help="baseline comparison report",
                       description="Trains the unconditional baselines with the checkpoint's hyper-parameters "
                                   "and writes collection,model,mae,mse,rmse,r2,q1,q2,q3,q4,tier.")
    p.add_argument("--checkpoint", required=True, help="trained contextual checkpoint")
    p.add_argument("--train", nargs="+", required=True)
    p.add_argument("--test", nargs="+", required=True)
    p.add_argument("--out", required=True, help="report CSV")
    p.add_argument("--diagnostics", help="context-distance diagnostics CSV")
    p.add_argument("--threshold", type=float, help="context-distance warning threshold")
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("report", help="per-day mean/variance and token step data",
                       description="Writes series,day,value_mean,value_var,count_mean,count_var; "
                                   "optionally series,token_id,day,value_eth,count and quarterly caps.")
    p.add_argument("--actual", required=True, help="actual series CSV")
    p.add_argument("--generated", nargs="*", help="generated series CSVs (labelled by file stem)")
    p.add_argument("--out", required=True)
    p.add_argument("--tokens", help="token ids for --steps-out")
    p.add_argument("--steps-out", help="per-token step data CSV")
    p.add_argument("--caps-out", help="quarterly market caps CSV")
    p.set_defaults(func=cmd_report)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        config = load_config(args.config) if args.config else None
        if getattr(args, "eval_preset", False):
            for k, v in EVAL_PARAMS.items():
                if getattr(args, k, None) is None:
                    setattr(args, k, v)
        limits = threadpool_limits(args.threads) if args.threads else nullcontext()
        with limits:
            args.func(args, config)
    except UsageError as exc:
        print(f"nftproj: error: {exc}", file=sys.stderr)
        return 1
    except NFTProjError as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return exc.exit_code
    except ValueError as exc:
        print(f"error: DataError: {exc}", file=sys.stderr)
        return DataError.exit_code
    return 0


if __name__ == "__main__":
    sys.exit(main())
