"""Command-line entry point: ``softdebias {debias,eval,ablate,make-fixture}``.

Exit codes: 0 success, 2 bad flags, 3 data error, 4 training divergence.
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
import time
from pathlib import Path

from threadpoolctl import threadpool_limits

from . import downstream, metrics
from .baseline import train_baseline
from .bias_space import build_subspace, default_spec, load_bias_spec, neutral_set
from .checkpoint import save_checkpoint
from .config import TrainConfig
from .datasets import load_corpus, load_crows, load_stereoset
from .dsd import train_dsd
from .embeddings import EmbeddingSet, load_word2vec_text, save_word2vec_text
from .errors import DataError, DivergenceError
from .manifest import THREADS_ENV, build_manifest, sha256_file, write_manifest
from .synthetic import write_fixture

log = logging.getLogger("softdebias")

EXIT_OK, EXIT_USAGE, EXIT_DATA, EXIT_DIVERGED = 0, 2, 3, 4
REPORT_FORMAT = "softdebias.report/1"
ABLATION_RUNS = (("baseline", "sgd"), ("baseline", "adam"), ("dsd", "sgd"), ("dsd", "adam"))
SHIPPED_SPECS = ("gender", "race", "religion")


def _lambda(text):
    val = float(text)
    if not 0.0 <= val <= 1.0:
        raise argparse.ArgumentTypeError(f"lambda must lie in [0, 1], got {val}")
    return val


def _positive_int(text):
    val = int(text)
    if val < 1:
        raise argparse.ArgumentTypeError(f"expected a positive integer, got {val}")
    return val


def _nonneg_int(text):
    val = int(text)
    if val < 0:
        raise argparse.ArgumentTypeError(f"expected a non-negative integer, got {val}")
    return val


def _nonneg_float(text):
    val = float(text)
    if not val >= 0:
        raise argparse.ArgumentTypeError(f"expected a non-negative number, got {text}")
    return val


def _add_train_flags(p, with_method=True):
    if with_method:
        p.add_argument("--method", choices=("baseline", "dsd"), required=True)
        p.add_argument("--optimizer", choices=("adam", "sgd"), help="default: sgd for baseline, adam for dsd")
    p.add_argument("--lambda", dest="lam", type=_lambda, default=0.2, help="bias-loss weight (default 0.2)")
    p.add_argument("--lr", type=_nonneg_float)
    p.add_argument("--batch", type=_positive_int)
    p.add_argument("--epochs", type=_nonneg_int)
    p.add_argument("--blocks", type=_positive_int)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--neutral-sample", type=_positive_int)
    p.add_argument("--loss", choices=("gram", "literal-orthonormal"), default="gram")
    p.add_argument("--holdout", type=float, default=0.0, help="fraction of neutral words withheld to measure Gram drift")
    p.add_argument("--transform-bias", action="store_true", help="baseline: project onto the transformed bias rows")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="softdebias", description="Debias word embeddings and measure bias.")
    parser.add_argument("-v", "--verbose", action="count", default=0)
    parser.add_argument("--threads", type=_positive_int, help=f"BLAS threads (default ${THREADS_ENV} or 1)")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("debias", help="train a debiasing transform and write debiased embeddings")
    p.add_argument("--embeddings", required=True)
    p.add_argument("--bias-spec", required=True, help="spec file, or one of: " + ", ".join(SHIPPED_SPECS))
    p.add_argument("--out", required=True)
    _add_train_flags(p)

    p = sub.add_parser("eval", help="compute bias metrics for one embedding set or a biased/debiased pair")
    p.add_argument("--embeddings", required=True, nargs="+", metavar="PATH")
    p.add_argument("--bias-spec", required=True)
    p.add_argument("--metrics", nargs="+", choices=("mac", "ss", "crows", "downstream"), default=["mac"])
    p.add_argument("--stereoset")
    p.add_argument("--crows")
    p.add_argument("--corpus")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--n-perm", type=_positive_int, default=10000)
    p.add_argument("--report", help="write the structured report here (a manifest is written next to it)")

    p = sub.add_parser("ablate", help="run baseline/dsd x sgd/adam and tabulate MAC")
    p.add_argument("--embeddings", required=True)
    p.add_argument("--bias-spec", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--force", action="store_true")
    _add_train_flags(p, with_method=False)

    p = sub.add_parser("make-fixture", help="write the synthetic gender fixture")
    p.add_argument("--out", required=True)
    p.add_argument("--seed", type=int, default=0)
    return parser


def _threads(args) -> int:
    if args.threads:
        return args.threads
    env = os.environ.get(THREADS_ENV)
    if env:
        try:
            n = int(env)
        except ValueError:
            raise SystemExit(f"softdebias: {THREADS_ENV} must be a positive integer") from None
        if n >= 1:
            return n
    return 1


def _load_spec(arg) -> tuple:
    """(spec, path or None)"""
    if not os.path.exists(arg) and arg in SHIPPED_SPECS:
        return default_spec(arg), None
    if not os.path.exists(arg):
        raise DataError(f"bias spec not found: {arg}")
    return load_bias_spec(arg), arg


def _load_embeddings(path) -> EmbeddingSet:
    if not os.path.exists(path):
        raise DataError(f"embeddings not found: {path}")
    return load_word2vec_text(path)


def _sibling(out: Path, suffix: str) -> Path:
    base = out.with_suffix("") if out.suffix else out
    return Path(str(base) + suffix)


def _train_config(args, method, optimizer) -> TrainConfig:
    return TrainConfig(
        lam=args.lam, lr=args.lr, batch_size=args.batch, epochs=args.epochs, blocks=args.blocks,
        optimizer=optimizer, seed=args.seed, neutral_sample=args.neutral_sample, loss=args.loss,
        holdout=args.holdout, transform_bias=args.transform_bias,
    )


def _run_training(emb, spec, method, cfg):
    subspace = build_subspace(emb, spec)
    neutral = neutral_set(emb, spec)
    for w in neutral.warnings:
        log.warning(w)
    trainer = train_dsd if method == "dsd" else train_baseline
    return trainer(emb, subspace, neutral, cfg), subspace, neutral


def _debias_one(argv, emb_path, spec_path, emb, spec, method, cfg, out: Path, threads):
    t0 = time.perf_counter()
    result, _, neutral = _run_training(emb, spec, method, cfg)
    ckpt = _sibling(out, ".ckpt.npz")
    save_word2vec_text(result.embeddings, out)
    save_checkpoint(ckpt, method, result)
    config = {"method": method, "train": result.config.to_dict(), "neutral_policy": neutral.policy,
              "n_neutral": len(neutral), "bias_category": spec.category}
    inputs = [emb_path] + ([spec_path] if spec_path else [])
    manifest = build_manifest(
        "debias", argv, config, cfg.seed, inputs, [out, ckpt],
        {"train_seconds": result.seconds, "total_seconds": time.perf_counter() - t0},
        result.history, threads, diagnostics=result.diagnostics,
    )
    write_manifest(manifest, _sibling(out, ".manifest.json"))
    return result


def cmd_debias(args, argv, threads) -> int:
    emb = _load_embeddings(args.embeddings)
    spec, spec_path = _load_spec(args.bias_spec)
    out = Path(args.out)
    if out.resolve() == Path(args.embeddings).resolve():
        raise _Usage("--out must differ from --embeddings")
    optimizer = args.optimizer or ("adam" if args.method == "dsd" else "sgd")
    cfg = _train_config(args, args.method, optimizer)
    result = _debias_one(argv, args.embeddings, spec_path, emb, spec, args.method, cfg, out, threads)
    final = result.history[-1] if result.history else None
    msg = f"wrote {out} ({args.method}, {result.config.epochs} epochs"
    if final:
        msg += f", final loss {final['total']:.6g}"
    print(msg + ")")
    return EXIT_OK


def _score_dict(rep) -> dict:
    out = {"score": rep.score, "counted": rep.counted, "excluded": rep.excluded, "ties": rep.ties}
    out.update(rep.details)
    return out


def evaluate(sets, spec, args) -> dict:
    names = ["biased", "debiased"][: len(sets)] if len(sets) <= 2 else [f"set{i}" for i in range(len(sets))]
    report = {"format": REPORT_FORMAT, "bias_category": spec.category, "sets": {}, "metrics": {}}
    for name, (path, emb) in zip(names, sets):
        report["sets"][name] = {"path": str(path), "sha256": sha256_file(path), "vocab": len(emb), "dim": emb.dim}
    embs = [emb for _, emb in sets]
    pair = len(embs) == 2

    if "mac" in args.metrics:
        reps = [metrics.mac(e, spec.targets, spec.attribute_sets) for e in embs]
        entry = {n: {"mac": r.mac, "n_pairs": r.n_pairs, "excluded_targets": list(r.excluded_targets),
                     "excluded_attributes": list(r.excluded_attributes)} for n, r in zip(names, reps)}
        if pair:
            entry["delta"] = reps[1].mac - reps[0].mac
            entry["p_value"] = metrics.mac_significance(reps[0], reps[1], args.n_perm, args.seed)
        report["metrics"]["mac"] = entry
    if "ss" in args.metrics:
        if not args.stereoset:
            raise _Usage("--metrics ss needs --stereoset")
        examples = load_stereoset(args.stereoset)
        entry = {n: _score_dict(metrics.stereotype_score(e, examples)) for n, e in zip(names, embs)}
        if pair:
            entry["delta"] = entry[names[1]]["score"] - entry[names[0]]["score"]
        report["metrics"]["ss"] = entry
    if "crows" in args.metrics:
        if not args.crows:
            raise _Usage("--metrics crows needs --crows")
        pairs = load_crows(args.crows)
        entry = {n: _score_dict(metrics.crows_score(e, pairs)) for n, e in zip(names, embs)}
        if pair:
            entry["delta"] = entry[names[1]]["score"] - entry[names[0]]["score"]
        report["metrics"]["crows"] = entry
    if "downstream" in args.metrics:
        if not args.corpus:
            raise _Usage("--metrics downstream needs --corpus")
        corpus = load_corpus(args.corpus)
        if pair:
            rep = downstream.delta(embs[0], embs[1], corpus, args.seed)
            report["metrics"]["downstream"] = {
                names[0]: {"accuracy": rep.acc_biased}, names[1]: {"accuracy": rep.acc_debiased},
                "delta": rep.delta, "excluded": rep.excluded,
            }
        else:
            acc, excl = downstream.train_eval(embs[0], corpus, args.seed)
            report["metrics"]["downstream"] = {names[0]: {"accuracy": acc}, "excluded": excl}
    return report


_HEADLINE = {"mac": "mac", "ss": "score", "crows": "score", "downstream": "accuracy"}


def format_table(report: dict) -> str:
    names = list(report["sets"])
    rows = []
    for metric, entry in report["metrics"].items():
        key = _HEADLINE[metric]
        row = [metric] + [f"{entry[n][key]:.6f}" for n in names]
        if "delta" in entry:
            row.append(f"{entry['delta']:+.6f}")
        if "p_value" in entry:
            row.append(f"p={entry['p_value']:.6g}")
        rows.append(row)
    header = ["metric"] + names + (["delta"] if len(names) == 2 else [])
    width = max([len(header)] + [len(r) for r in rows])
    header += [""] * (width - len(header))
    table = [header] + [r + [""] * (width - len(r)) for r in rows]
    widths = [max(len(r[i]) for r in table) for i in range(width)]
    return "\n".join("  ".join(c.ljust(w) for c, w in zip(r, widths)).rstrip() for r in table) + "\n"


def dump_report(report: dict) -> str:
    return json.dumps(report, indent=2, sort_keys=True) + "\n"


def cmd_eval(args, argv, threads) -> int:
    t0 = time.perf_counter()
    spec, spec_path = _load_spec(args.bias_spec)
    sets = [(p, _load_embeddings(p)) for p in args.embeddings]
    if len(sets) > 2:
        raise _Usage("--embeddings takes one or two paths")
    if len(sets) == 2 and sets[0][1].vocab != sets[1][1].vocab:
        raise DataError("biased and debiased embeddings have different vocabularies")
    report = evaluate(sets, spec, args)
    table = format_table(report)
    sys.stdout.write(table)
    if args.report:
        out = Path(args.report)
        out.write_text(dump_report(report), encoding="utf-8")
        table_path = _sibling(out, ".table.txt")
        table_path.write_text(table, encoding="utf-8")
        inputs = [p for p, _ in sets] + [p for p in (spec_path, args.stereoset, args.crows, args.corpus) if p]
        config = {"metrics": args.metrics, "n_perm": args.n_perm, "bias_category": spec.category}
        manifest = build_manifest("eval", argv, config, args.seed, inputs, [out, table_path],
                                  {"total_seconds": time.perf_counter() - t0}, threads=threads)
        write_manifest(manifest, _sibling(out, ".manifest.json"))
    return EXIT_OK


def cmd_ablate(args, argv, threads) -> int:
    out_dir = Path(args.out)
    if out_dir.exists() and not out_dir.is_dir():
        raise _Usage(f"--out {out_dir} exists and is not a directory")
    if out_dir.exists() and any(out_dir.iterdir()) and not args.force:
        raise _Usage(f"--out {out_dir} is not empty (pass --force to overwrite)")
    out_dir.mkdir(parents=True, exist_ok=True)
    emb = _load_embeddings(args.embeddings)
    spec, spec_path = _load_spec(args.bias_spec)

    biased = metrics.mac(emb, spec.targets, spec.attribute_sets).mac
    rows = {"biased": biased}
    for method, optimizer in ABLATION_RUNS:
        name = f"{method}-{optimizer}"
        cfg = _train_config(args, method, optimizer)
        result = _debias_one(argv, args.embeddings, spec_path, emb, spec, method, cfg, out_dir / f"{name}.txt", threads)
        rows[name] = metrics.mac(result.embeddings, spec.targets, spec.attribute_sets).mac

    columns = ["biased"] + [f"{m}-{o}" for m, o in ABLATION_RUNS]
    report = {"format": REPORT_FORMAT, "command": "ablate", "seed": args.seed, "bias_category": spec.category,
              "mac": {c: rows[c] for c in columns}}
    (out_dir / "ablation.json").write_text(dump_report(report), encoding="utf-8")
    tsv = "direction\t" + "\t".join(columns) + "\n" + spec.category + "\t" + "\t".join(f"{rows[c]:.6f}" for c in columns) + "\n"
    (out_dir / "ablation.tsv").write_text(tsv, encoding="utf-8")
    print(f"seed {args.seed}")
    widths = [max(len(c), 8) for c in columns]
    print("  ".join(["direction"] + [c.ljust(w) for c, w in zip(columns, widths)]).rstrip())
    print("  ".join([spec.category.ljust(9)] + [f"{rows[c]:.6f}".ljust(w) for c, w in zip(columns, widths)]).rstrip())
    return EXIT_OK


def cmd_make_fixture(args, argv, threads) -> int:
    paths = write_fixture(args.out, args.seed)
    for key, path in paths.items():
        print(f"{key}\t{path}")
    return EXIT_OK


class _Usage(Exception):
    pass


COMMANDS = {"debias": cmd_debias, "eval": cmd_eval, "ablate": cmd_ablate, "make-fixture": cmd_make_fixture}


def main(argv=None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code) if isinstance(exc.code, int) else EXIT_USAGE
    logging.basicConfig(level=logging.WARNING - 10 * min(args.verbose, 2), format="%(levelname)s %(name)s: %(message)s")
    if getattr(args, "holdout", 0.0) and not 0.0 <= args.holdout < 1.0:
        parser.print_usage(sys.stderr)
        print("softdebias: error: --holdout must lie in [0, 1)", file=sys.stderr)
        return EXIT_USAGE
    threads = _threads(args)
    try:
        with threadpool_limits(limits=threads):
            return COMMANDS[args.command](args, argv, threads)
    except _Usage as exc:
        parser.print_usage(sys.stderr)
        print(f"softdebias: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except DivergenceError as exc:
        print(f"softdebias: training diverged: {exc}", file=sys.stderr)
        return EXIT_DIVERGED
    except (DataError, OSError, ValueError) as exc:
        print(f"softdebias: data error: {exc}", file=sys.stderr)
        return EXIT_DATA


if __name__ == "__main__":
    sys.exit(main())
