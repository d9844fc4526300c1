"""Command-line entry point: gen-corpus, train-victim, attack, evaluate.

Every attack run writes a manifest next to its report; re-running the same
manifest against the toy victim reproduces the report byte for byte. Exit
codes: 0 success, 1 usage error, 2 runtime failure. Diagnostics go to stderr.
"""
from __future__ import annotations

import argparse
import csv
import json
import os
import sys
import time
from dataclasses import asdict
from pathlib import Path

from . import metrics
from .corpus import CorpusSpec, generate_synthetic_corpus, grammar_word_groups, load_jsonl, write_jsonl
from .errors import ConfigError, DgslowError, VersionError
from .perturber import (
    AntonymLexicon,
    RuleGrammarChecker,
    SentenceEncoder,
    StaticNeighborGenerator,
    StaticWordEmbeddings,
)
from .search import STRATEGY_PRESETS, AttackConfig, PerturbationPipeline, attack_all
from .victim import ToyVictim, ToyVictimConfig, connect_remote, mean_reference_confidence

MANIFEST_VERSION = 1
OUT_DIR_ENV = "DGSLOW_OUT_DIR"


class _Parser(argparse.ArgumentParser):
    def error(self, message):  # usage errors exit 1, not argparse's default 2
        self.print_usage(sys.stderr)
        sys.stderr.write(f"error: {message}\n")
        sys.exit(1)


def _log(message: str) -> None:
    print(message, file=sys.stderr)


def _positive_int(value: str) -> int:
    number = int(value)
    if number < 1:
        raise argparse.ArgumentTypeError(f"must be >= 1, got {number}")
    return number


def _default_out_dir() -> str:
    return os.environ.get(OUT_DIR_ENV, ".")


# -- gen-corpus --------------------------------------------------------------

def cmd_gen_corpus(args) -> int:
    spec = CorpusSpec(
        seed=args.seed,
        num_dialogues=args.n,
        turns_per_dialogue=args.turns,
        template_grammar=args.grammar,
    )
    instances = generate_synthetic_corpus(spec)
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    write_jsonl(instances, out)
    _log(f"wrote {len(instances)} instances ({args.n} dialogues x {args.turns} turns) to {out}")
    return 0


# -- train-victim ------------------------------------------------------------

def cmd_train_victim(args) -> int:
    instances = load_jsonl(args.corpus)
    if len(instances) < 10:
        raise ConfigError(f"corpus too small to train on ({len(instances)} instances, need >= 10)")
    n_holdout = max(1, int(len(instances) * args.holdout_fraction))
    train, held = instances[:-n_holdout], instances[-n_holdout:]
    config = ToyVictimConfig(
        embed_dim=args.embed_dim,
        hidden_dim=args.hidden_dim,
        max_decode_len=args.max_decode_len,
        train_epochs=args.epochs,
        learning_rate=args.lr,
        seed=args.seed,
    )
    victim = ToyVictim.build(instances, config)
    baseline = mean_reference_confidence(victim, held)
    t0 = time.time()
    final_loss = victim.train(train)
    trained = mean_reference_confidence(victim, held)
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    victim.save(out)
    _log(
        f"trained on {len(train)} instances in {time.time() - t0:.1f}s; final loss {final_loss:.4f}; "
        f"held-out TC {baseline:.4f} -> {trained:.4f} ({trained / max(baseline, 1e-12):.1f}x); saved {out}"
    )
    return 0


# -- attack --------------------------------------------------------------------

def _build_manifest(args) -> dict:
    config = AttackConfig.preset(
        args.strategy,
        eps=args.eps,
        tau=args.tau,
        beta=args.beta,
        c=args.candidates,
        delta=args.delta,
        k=args.beam_size,
        T=args.iterations,
        query_budget=args.query_budget,
        positions_per_candidate=args.positions,
    )
    manifest = {
        "manifest_version": MANIFEST_VERSION,
        "strategy": args.strategy,
        "config": asdict(config),
        "corpus": str(args.corpus),
        "victim": str(args.victim),
        "embeddings": str(args.embeddings) if args.embeddings else {"grammar": args.grammar, "dim": 32},
        "seed": args.seed,
        "limit": args.limit,
        "parallel": args.parallel,
        "output_dir": str(args.out),
        "timestamp": time.strftime("%Y-%m-%dT%H:%M:%S%z"),
    }
    return manifest


def _load_manifest(path: str) -> dict:
    with open(path, encoding="utf-8") as fh:
        manifest = json.load(fh)
    if manifest.get("manifest_version") != MANIFEST_VERSION:
        raise VersionError(f"unsupported manifest version {manifest.get('manifest_version')!r}")
    return manifest


def _pipeline_from_manifest(manifest: dict) -> PerturbationPipeline:
    source = manifest["embeddings"]
    if isinstance(source, str):
        embeddings = StaticWordEmbeddings.from_file(source, seed=manifest["seed"])
    else:
        groups = grammar_word_groups(source["grammar"])
        embeddings = StaticWordEmbeddings.from_categories(groups, dim=source.get("dim", 32), seed=7)
    return PerturbationPipeline(
        generator=StaticNeighborGenerator(embeddings, AntonymLexicon.builtin()),
        encoder=SentenceEncoder(embeddings),
        checker=RuleGrammarChecker(),
    )


def _victim_from_descriptor(descriptor: str):
    if descriptor.startswith("http://") or descriptor.startswith("https://"):
        return connect_remote(descriptor)
    return ToyVictim.load(descriptor)


def run_manifest(manifest: dict) -> tuple[dict, list]:
    """Execute an attack manifest; returns (report, outcomes)."""
    instances = load_jsonl(manifest["corpus"])
    if manifest.get("limit"):
        instances = instances[: manifest["limit"]]
    victim = _victim_from_descriptor(manifest["victim"])
    pipeline = _pipeline_from_manifest(manifest)
    config = AttackConfig(**{k: tuple(v) if k == "c_bounds" else v for k, v in manifest["config"].items()})
    outcomes = attack_all(
        instances, victim, config, pipeline, seed=manifest["seed"], parallel=manifest.get("parallel", 1)
    )
    report = metrics.aggregate([o.record for o in outcomes], outcomes)
    report["strategy"] = manifest["strategy"]
    return report, outcomes


def _write_outputs(manifest: dict, report: dict, outcomes_traces: list | None = None) -> Path:
    out_dir = Path(manifest["output_dir"])
    out_dir.mkdir(parents=True, exist_ok=True)
    with open(out_dir / "manifest.json", "w", encoding="utf-8") as fh:
        json.dump(manifest, fh, ensure_ascii=False, indent=2)
        fh.write("\n")
    metrics.write_report_json(report, out_dir / "report.json")
    metrics.write_report_csv(report, out_dir / "report.csv")
    metrics.write_records_csv(report, out_dir / "records.csv")
    return out_dir


def cmd_attack(args) -> int:
    if args.manifest:
        manifest = _load_manifest(args.manifest)
    else:
        manifest = _build_manifest(args)
    t0 = time.time()
    report, outcomes = run_manifest(manifest)
    out_dir = _write_outputs(manifest, report)
    with open(out_dir / "traces.jsonl", "w", encoding="utf-8") as fh:
        for i, outcome in enumerate(outcomes):
            fh.write(
                json.dumps(
                    {
                        "instance": i,
                        "trace": [vars(tr) for tr in outcome.trace],
                        "queries_used": outcome.queries_used,
                    },
                    ensure_ascii=False,
                )
                + "\n"
            )
    _log(
        f"attacked {report['n']} instances with {manifest['strategy']} in {time.time() - t0:.1f}s: "
        f"ASR {report['asr']:.3f}, mean GL {report['mean_gl']:.2f}; wrote {out_dir}/report.json"
    )
    print(json.dumps({k: report[k] for k in ("n", "asr", "mean_gl", "mean_cosine")}))
    return 0


# -- evaluate --------------------------------------------------------------------

_EVAL_COLUMNS = ("strategy", "n", "GL", "BLEU", "ROU.", "MET.", "ASR", "Cos.")


def cmd_evaluate(args) -> int:
    rows = []
    for path in args.reports:
        with open(path, encoding="utf-8") as fh:
            report = json.load(fh)
        if report.get("schema_version") != metrics.REPORT_SCHEMA_VERSION:
            raise VersionError(f"{path}: unsupported report schema {report.get('schema_version')!r}")
        rows.append(
            (
                report.get("strategy", Path(path).parent.name),
                report["n"],
                f"{report['mean_gl']:.2f}",
                f"{report['mean_bleu']:.4f}",
                f"{report['mean_rouge_l']:.4f}",
                f"{report['mean_meteor_lite']:.4f}",
                f"{report['asr']:.4f}",
                f"{report['mean_cosine']:.4f}",
            )
        )
    widths = [max(len(str(r[i])) for r in [_EVAL_COLUMNS, *rows]) for i in range(len(_EVAL_COLUMNS))]
    for row in [_EVAL_COLUMNS, *rows]:
        print("  ".join(str(v).ljust(w) for v, w in zip(row, widths)).rstrip())
    if args.csv:
        with open(args.csv, "w", encoding="utf-8", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(_EVAL_COLUMNS)
            writer.writerows(rows)
        _log(f"wrote {args.csv}")
    return 0


# -- parser ----------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="dgslow", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("gen-corpus", help="write a synthetic dialogue corpus as JSONL")
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--n", type=_positive_int, required=True, help="number of dialogues")
    p.add_argument("--turns", type=_positive_int, default=3)
    p.add_argument("--grammar", default="chitchat-v1")
    p.add_argument("--out", default=None)
    p.set_defaults(func=cmd_gen_corpus)

    p = sub.add_parser("train-victim", help="train the toy victim on a JSONL corpus")
    p.add_argument("--corpus", required=True)
    p.add_argument("--out", default=None)
    p.add_argument("--embed-dim", type=int, default=32)
    p.add_argument("--hidden-dim", type=int, default=48)
    p.add_argument("--max-decode-len", type=int, default=24)
    p.add_argument("--epochs", type=int, default=30)
    p.add_argument("--lr", type=float, default=0.008)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--holdout-fraction", type=float, default=0.1)
    p.set_defaults(func=cmd_train_victim)

    p = sub.add_parser("attack", help="attack a victim over a corpus and write a report")
    p.add_argument("--corpus")
    p.add_argument("--victim", help="toy checkpoint path or http(s) bridge URL")
    p.add_argument("--out", default=None)
    p.add_argument("--manifest", help="re-run a previously written manifest verbatim")
    p.add_argument("--strategy", choices=sorted(STRATEGY_PRESETS), default="dgslow")
    p.add_argument("--eps", type=float, default=0.7)
    p.add_argument("--tau", type=float, default=0.0)
    p.add_argument("--beta", type=float, default=1.0)
    p.add_argument("--candidates", type=int, default=50, metavar="C")
    p.add_argument("--delta", type=float, default=0.5)
    p.add_argument("--beam-size", type=int, default=2, metavar="K")
    p.add_argument("--iterations", type=int, default=5, metavar="T")
    p.add_argument("--query-budget", type=int, default=2000)
    p.add_argument("--positions", type=int, default=3, help="saliency positions expanded per candidate")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--limit", type=int, default=0, help="attack only the first N instances")
    p.add_argument("--parallel", type=int, default=1)
    p.add_argument("--embeddings", help="word-vector text file; default: grammar category embeddings")
    p.add_argument("--grammar", default="chitchat-v1")
    p.set_defaults(func=cmd_attack)

    p = sub.add_parser("evaluate", help="merge attack reports into a comparison table")
    p.add_argument("reports", nargs="+")
    p.add_argument("--csv", help="also write the table as CSV")
    p.set_defaults(func=cmd_evaluate)
    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if getattr(args, "out", None) is None and args.command in ("gen-corpus", "train-victim", "attack"):
        default_name = {"gen-corpus": "corpus.jsonl", "train-victim": "victim.json", "attack": "run"}
        args.out = str(Path(_default_out_dir()) / default_name[args.command])
    if args.command == "attack" and not args.manifest and (not args.corpus or not args.victim):
        parser.error("attack requires --corpus and --victim (or --manifest)")
    try:
        return args.func(args)
    except DgslowError as exc:
        _log(f"error: {exc}")
        return 2
    except OSError as exc:
        _log(f"io error: {exc}")
        return 2


if __name__ == "__main__":
    sys.exit(main())
