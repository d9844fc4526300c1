"""Sentence-level generation-accuracy metrics and attack-success accounting.

The combined accuracy score is the arithmetic mean of BLEU, ROUGE-L and a
simplified METEOR; an attack counts as successful when the crafted input stays
above the semantic-similarity threshold while the combined score of the
victim's response drops by more than the performance threshold.
"""
from __future__ import annotations

import csv
import json
import math
from collections import Counter
from dataclasses import dataclass
from pathlib import Path

from .errors import EmptyReport

REPORT_SCHEMA_VERSION = 1


@dataclass
class MetricScores:
    bleu: float
    rouge_l: float
    meteor_lite: float

    @property
    def combined(self) -> float:
        return (self.bleu + self.rouge_l + self.meteor_lite) / 3.0


@dataclass
class AttackSuccessRecord:
    cosine: float
    metric_drop: float
    success: bool


def _ngrams(tokens: list[str], n: int) -> Counter:
    return Counter(tuple(tokens[i : i + n]) for i in range(len(tokens) - n + 1))


def bleu(candidate: list[str], references: list[list[str]], max_n: int = 4) -> float:
    """Sentence BLEU with uniform weights, clipped counts and brevity penalty.

    Zero counts at order n >= 2 get add-one smoothing; a candidate with no
    unigram overlap at all scores 0 (smoothing never rescues total mismatch).
    Multi-reference clipping takes the per-n-gram max over references.
    """
    if not candidate or not references or any(not r for r in references):
        raise ValueError("candidate and references must be non-empty")
    log_precisions = []
    for n in range(1, max_n + 1):
        cand_counts = _ngrams(candidate, n)
        max_ref: Counter = Counter()
        for ref in references:
            for gram, count in _ngrams(ref, n).items():
                if count > max_ref[gram]:
                    max_ref[gram] = count
        matches = sum(min(count, max_ref[gram]) for gram, count in cand_counts.items())
        total = max(len(candidate) - n + 1, 0)
        if n == 1 and matches == 0:
            return 0.0
        if matches == 0:
            precision = (matches + 1) / (total + 1)
        else:
            precision = matches / total
        log_precisions.append(math.log(precision))
    c = len(candidate)
    r = min((len(ref) for ref in references), key=lambda rl: (abs(rl - c), rl))
    bp = 1.0 if c > r else math.exp(1.0 - r / c)
    return bp * math.exp(sum(log_precisions) / max_n)


def _lcs_length(a: list[str], b: list[str]) -> int:
    prev = [0] * (len(b) + 1)
    for x in a:
        cur = [0]
        for j, y in enumerate(b, start=1):
            cur.append(prev[j - 1] + 1 if x == y else max(prev[j], cur[j - 1]))
        prev = cur
    return prev[-1]


def rouge_l(candidate: list[str], references: list[list[str]] | list[str]) -> float:
    """LCS-based F1; with several references the max is taken."""
    refs = references if references and isinstance(references[0], list) else [references]
    if not candidate or any(not r for r in refs):
        raise ValueError("candidate and references must be non-empty")
    best = 0.0
    for ref in refs:
        lcs = _lcs_length(candidate, ref)
        p = lcs / len(candidate)
        r = lcs / len(ref)
        f = 2 * p * r / (p + r) if p + r > 0 else 0.0
        best = max(best, f)
    return best


def _align_greedy(candidate: list[str], reference: list[str]) -> list[tuple[int, int]]:
    """Greedy left-to-right exact unigram alignment (candidate order)."""
    used = [False] * len(reference)
    pairs = []
    for i, tok in enumerate(candidate):
        for j, ref_tok in enumerate(reference):
            if not used[j] and tok == ref_tok:
                used[j] = True
                pairs.append((i, j))
                break
    return pairs


def meteor_lite(candidate: list[str], references: list[list[str]] | list[str]) -> float:
    """Simplified METEOR: exact unigram matches only, no stemming or synonyms.

    F_mean = 10PR/(R+9P); fragmentation penalty 0.5*(chunks/matches)^3.
    Reported as "meteor_lite" everywhere so values are never confused with
    the full lexical-database metric.
    """
    refs = references if references and isinstance(references[0], list) else [references]
    if not candidate or any(not r for r in refs):
        raise ValueError("candidate and references must be non-empty")
    best = 0.0
    for ref in refs:
        pairs = _align_greedy(candidate, ref)
        matches = len(pairs)
        if matches == 0:
            continue
        chunks = 1
        for (ci, ri), (cj, rj) in zip(pairs, pairs[1:]):
            if cj != ci + 1 or rj != ri + 1:
                chunks += 1
        p = matches / len(candidate)
        r = matches / len(ref)
        f_mean = 10 * p * r / (r + 9 * p)
        penalty = 0.5 * (chunks / matches) ** 3
        best = max(best, f_mean * (1.0 - penalty))
    return best


def score_generation(candidate: list[str], references: list[list[str]]) -> MetricScores:
    """All three metrics of a generated response against reference responses."""
    if not candidate:
        return MetricScores(bleu=0.0, rouge_l=0.0, meteor_lite=0.0)
    return MetricScores(
        bleu=bleu(candidate, references),
        rouge_l=rouge_l(candidate, references),
        meteor_lite=meteor_lite(candidate, references),
    )


def success(
    original_scores: MetricScores,
    adversarial_scores: MetricScores,
    cosine: float,
    eps: float,
    tau: float,
) -> AttackSuccessRecord:
    """Success needs cosine strictly above eps AND a drop strictly above tau."""
    drop = original_scores.combined - adversarial_scores.combined
    return AttackSuccessRecord(
        cosine=float(cosine),
        metric_drop=float(drop),
        success=bool(cosine > eps and drop > tau),
    )


_REPORT_COLUMNS = ["n", "asr", "mean_gl", "mean_bleu", "mean_rouge_l", "mean_meteor_lite", "mean_cosine"]


def aggregate(records: list[AttackSuccessRecord], outcomes: list) -> dict:
    """Fold per-instance records and outcomes into the report mapping.

    ``outcomes`` only needs ``gl_after`` and ``scores_after`` attributes plus
    whatever ``summary()`` returns, so any outcome-shaped object works.
    """
    if not records:
        raise EmptyReport("no records to aggregate")
    if len(records) != len(outcomes):
        raise ValueError("records and outcomes must be parallel")
    n = len(records)
    report = {
        "schema_version": REPORT_SCHEMA_VERSION,
        "n": n,
        "asr": sum(r.success for r in records) / n,
        "mean_gl": sum(o.gl_after for o in outcomes) / n,
        "mean_bleu": sum(o.scores_after.bleu for o in outcomes) / n,
        "mean_rouge_l": sum(o.scores_after.rouge_l for o in outcomes) / n,
        "mean_meteor_lite": sum(o.scores_after.meteor_lite for o in outcomes) / n,
        "mean_cosine": sum(r.cosine for r in records) / n,
        "records": [o.summary() if hasattr(o, "summary") else dict(vars(o)) for o in outcomes],
    }
    return report


def write_report_json(report: dict, path: str | Path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(report, fh, ensure_ascii=False, indent=2)
        fh.write("\n")


def write_report_csv(report: dict, path: str | Path) -> None:
    """One aggregate row with the same columns as the JSON top level."""
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(_REPORT_COLUMNS)
        writer.writerow([report[c] for c in _REPORT_COLUMNS])


def write_records_csv(report: dict, path: str | Path) -> None:
    records = report["records"]
    if not records:
        raise EmptyReport("no records to write")
    fields = list(records[0].keys())
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=fields)
        writer.writeheader()
        writer.writerows(records)
