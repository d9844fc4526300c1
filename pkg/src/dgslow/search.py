"""The attack loop: saliency-guided substitution under a strict query budget.

Each iteration expands every beam member at its most salient unperturbed
utterance positions, validates candidates against the hard constraints,
scores the survivors with the fitness function, and carries k of them forward
chosen greedily or uniformly at random depending on the adaptive schedule.
The returned adversarial is the best-fitness valid candidate ever seen.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import metrics
from .corpus import DialogueInstance, TokenizedSentence, tokenize
from .errors import ConfigError
from .objectives import solve_pareto, word_saliency
from .perturber import (
    CandidateGenerator,
    GrammarCheckerProtocol,
    SentenceEncoderProtocol,
    substitute,
    validate,
)
from .victim.base import StopLossParams, VictimModel, serialize_input

STRATEGIES = ("adaptive", "greedy", "random")

# CLI strategy names -> (selection strategy, multi-objective on, combined fitness on)
STRATEGY_PRESETS: dict[str, tuple[str, bool, bool]] = {
    "rs": ("random", False, False),
    "gs": ("greedy", False, False),
    "dgslow1": ("adaptive", False, False),
    "dgslow2": ("adaptive", False, True),
    "dgslow3": ("adaptive", True, False),
    "dgslow": ("adaptive", True, True),
}


@dataclass
class AttackConfig:
    """Attack hyperparameters; the defaults are the reference configuration."""

    eps: float = 0.7
    tau: float = 0.0
    beta: float = 1.0
    c_bounds: tuple[float, float] = (0.0, 0.0)
    c: int = 50
    delta: float = 0.5
    k: int = 2
    T: int = 5
    query_budget: int = 2000
    positions_per_candidate: int = 3
    strategy: str = "adaptive"
    use_mo: bool = True
    use_cf: bool = True

    def __post_init__(self):
        if not -1.0 <= self.eps <= 1.0:
            raise ConfigError("eps must be a cosine value in [-1, 1]")
        if self.beta < 0:
            raise ConfigError("beta must be >= 0")
        if self.T < 1 or self.k < 1:
            raise ConfigError("T and k must be >= 1")
        if self.c < 0 or self.positions_per_candidate < 1 or self.query_budget < 0:
            raise ConfigError("c, positions_per_candidate, query_budget out of range")
        if self.strategy not in STRATEGIES:
            raise ConfigError(f"strategy must be one of {STRATEGIES}")
        c1, c2 = self.c_bounds
        if c1 < 0 or c2 < 0 or c1 + c2 > 1:
            raise ConfigError("need c_bounds >= 0 with c1 + c2 <= 1")

    @classmethod
    def preset(cls, name: str, **overrides) -> "AttackConfig":
        try:
            strategy, use_mo, use_cf = STRATEGY_PRESETS[name]
        except KeyError:
            raise ConfigError(f"unknown strategy preset {name!r}")
        return cls(strategy=strategy, use_mo=use_mo, use_cf=use_cf, **overrides)


@dataclass
class AdversarialCandidate:
    sentence: TokenizedSentence
    perturbed_positions: frozenset[int]
    cosine: float
    seq: int
    lineage: "AdversarialCandidate | None" = None
    fitness: float | None = None
    tc: float | None = None
    gl: int | None = None


@dataclass
class IterationTrace:
    t: int
    n_valid: int
    q: float
    xi: float
    mode: str
    queries_used: int
    best_fitness: float = 0.0


@dataclass
class AttackOutcome:
    original_input: str
    adversarial_input: str
    original_output: list[str]
    adversarial_output: list[str]
    tc_before: float
    tc_after: float
    gl_before: int
    gl_after: int
    cosine: float
    perturbed_positions: list[int]
    queries_used: int
    iterations_run: int
    success: bool
    scores_before: metrics.MetricScores
    scores_after: metrics.MetricScores
    record: metrics.AttackSuccessRecord
    trace: list[IterationTrace] = field(default_factory=list)

    def summary(self) -> dict:
        return {
            "original_input": self.original_input,
            "adversarial_input": self.adversarial_input,
            "original_output": " ".join(self.original_output),
            "adversarial_output": " ".join(self.adversarial_output),
            "tc_before": self.tc_before,
            "tc_after": self.tc_after,
            "gl_before": self.gl_before,
            "gl_after": self.gl_after,
            "cosine": self.cosine,
            "n_perturbed": len(self.perturbed_positions),
            "queries_used": self.queries_used,
            "iterations_run": self.iterations_run,
            "metric_drop": self.record.metric_drop,
            "success": self.success,
        }


def fitness(instance: DialogueInstance, candidate: TokenizedSentence, victim: VictimModel) -> float:
    """Generation length over summed reference-token probability (2 queries)."""
    gen = victim.generate(instance, candidate)
    score = victim.score_reference(instance, candidate, instance.references[0])
    tc = float(np.asarray(score.token_probs).sum())
    return len(gen.tokens) / max(tc, 1e-12)


def fitness_length_only(instance: DialogueInstance, candidate: TokenizedSentence, victim: VictimModel) -> float:
    """Ablation fitness: generation length alone."""
    return float(len(victim.generate(instance, candidate).tokens))


def quality(valid_set: list[AdversarialCandidate]) -> float:
    """Mean cosine of the valid candidates against the original utterance."""
    if not valid_set:
        raise ValueError("quality of an empty candidate set is undefined")
    return sum(c.cosine for c in valid_set) / len(valid_set)


def preference(t: int, T: int, q_t: float) -> float:
    """Search preference: 0 on the first iteration, grows with t and quality."""
    if T <= 1:
        return 0.0
    return (t - 1) * math.exp(q_t - 1.0) / (T - 1)


def select(
    valid_set: list[AdversarialCandidate],
    k: int,
    mode: str,
    rng: np.random.Generator,
    key=None,
) -> list[AdversarialCandidate]:
    """Greedy top-k by fitness (ties: cosine, then creation order) or uniform."""
    if not valid_set:
        return []
    if key is None:
        key = lambda c: c.fitness
    if mode == "greedy":
        return sorted(valid_set, key=lambda c: (-key(c), -c.cosine, c.seq))[: min(k, len(valid_set))]
    if mode == "random":
        picks = rng.choice(len(valid_set), size=min(k, len(valid_set)), replace=False)
        return [valid_set[i] for i in picks]
    raise ConfigError(f"unknown selection mode {mode!r}")


@dataclass
class PerturbationPipeline:
    generator: CandidateGenerator
    encoder: SentenceEncoderProtocol
    checker: GrammarCheckerProtocol


class _Session:
    """Per-attack bookkeeping: query budget, caches, best-so-far tracking."""

    def __init__(self, instance: DialogueInstance, victim: VictimModel, config: AttackConfig):
        self.instance = instance
        self.victim = victim
        self.config = config
        self.used = 0
        self.eval_cache: dict[tuple[str, ...], tuple[int, float, list[str]]] = {}

    def affordable(self, cost: int) -> bool:
        return self.used + cost <= self.config.query_budget

    def generate(self, sentence: TokenizedSentence | None):
        self.used += 1
        return self.victim.generate(self.instance, sentence)

    def score(self, sentence: TokenizedSentence | None) -> float:
        self.used += 1
        score = self.victim.score_reference(self.instance, sentence, self.instance.references[0])
        return float(np.asarray(score.token_probs).sum())

    def gradients(self, sentence: TokenizedSentence, rho: float):
        self.used += 1
        params = StopLossParams(beta=self.config.beta, eps=self.config.eps, rho=rho)
        return self.victim.gradients(self.instance, sentence, self.instance.references[0], params)

    def evaluate(self, candidate: AdversarialCandidate) -> bool:
        """Fill gl/tc/fitness, caching by token sequence. Costs 2 queries on a miss."""
        tokens_key = tuple(candidate.sentence.tokens)
        hit = self.eval_cache.get(tokens_key)
        if hit is None:
            if not self.affordable(2):
                return False
            gen = self.generate(candidate.sentence)
            tc = self.score(candidate.sentence)
            hit = (len(gen.tokens), tc, gen.tokens)
            self.eval_cache[tokens_key] = hit
        gl, tc, _ = hit
        candidate.gl = gl
        candidate.tc = tc
        candidate.fitness = gl / max(tc, 1e-12)
        return True


def attack(
    instance: DialogueInstance,
    victim: VictimModel,
    config: AttackConfig,
    pipeline: PerturbationPipeline,
    rng: np.random.Generator,
) -> AttackOutcome:
    """Run the full attack on one dialogue instance. Never exceeds the budget."""
    original = tokenize(instance.utterance)
    session = _Session(instance, victim, config)
    original_errors = pipeline.checker.count_errors(original.tokens)
    span = serialize_input(instance, original).utterance_span
    selection_key = (lambda c: c.fitness) if config.use_cf else (lambda c: c.gl)

    root = AdversarialCandidate(sentence=original, perturbed_positions=frozenset(), cosine=1.0, seq=0)
    if not session.affordable(2):
        return _finish(session, root, root, [], 0)
    session.evaluate(root)
    orig_gen_tokens = session.eval_cache[tuple(original.tokens)][2]

    beam = [root]
    best: AdversarialCandidate | None = None
    trace: list[IterationTrace] = []
    next_seq = 1
    iterations = 0
    out_of_budget = False

    for t in range(1, config.T + 1):
        valid: list[AdversarialCandidate] = []
        seen: set[tuple] = set()
        for member in beam:
            if not session.affordable(1):
                out_of_budget = True
                break
            pair = session.gradients(member.sentence, member.cosine)
            if config.use_mo:
                combined = solve_pareto(pair.g_ll, pair.g_stop, *config.c_bounds).combined_gradient
            else:
                combined = pair.g_stop
            ranking = word_saliency(combined, span, member.perturbed_positions)
            for position in ranking.order[: config.positions_per_candidate]:
                for word in pipeline.generator.generate(member.sentence, position, config.c):
                    sentence = substitute(member.sentence, position, word)
                    dedup_key = (tuple(sentence.tokens), member.perturbed_positions | {position})
                    if dedup_key in seen:
                        continue
                    seen.add(dedup_key)
                    verdict = validate(
                        original, sentence, config.eps, pipeline.encoder, pipeline.checker, original_errors
                    )
                    if not verdict.valid:
                        continue
                    valid.append(
                        AdversarialCandidate(
                            sentence=sentence,
                            perturbed_positions=member.perturbed_positions | {position},
                            cosine=verdict.cosine,
                            seq=next_seq,
                            lineage=member,
                        )
                    )
                    next_seq += 1
        if not valid:
            break
        evaluated = []
        for candidate in valid:
            if not session.evaluate(candidate):
                out_of_budget = True
                break
            evaluated.append(candidate)
        if not evaluated:
            break
        iterations = t
        for candidate in evaluated:
            if best is None or (selection_key(candidate), candidate.cosine) > (selection_key(best), best.cosine):
                best = candidate
        q_t = quality(evaluated)
        xi_t = preference(t, config.T, q_t)
        if config.strategy == "adaptive":
            mode = "random" if xi_t > config.delta else "greedy"
        else:
            mode = config.strategy
        beam = select(evaluated, config.k, mode, rng, key=selection_key)
        trace.append(
            IterationTrace(
                t=t,
                n_valid=len(evaluated),
                q=q_t,
                xi=xi_t,
                mode=mode,
                queries_used=session.used,
                best_fitness=float(selection_key(best)),
            )
        )
        if out_of_budget:
            break

    return _finish(session, root, best or root, trace, iterations)


def attack_all(
    instances: list[DialogueInstance],
    victim: VictimModel,
    config: AttackConfig,
    pipeline: PerturbationPipeline,
    seed: int,
    parallel: int = 1,
) -> list[AttackOutcome]:
    """Attack every instance with per-instance seeded randomness.

    Instance i always gets rng default_rng([seed, i]), so results do not
    depend on worker scheduling; sessions are independent and the victim is
    only read from, which makes thread-level parallelism safe.
    """
    def run(i: int) -> AttackOutcome:
        return attack(instances[i], victim, config, pipeline, np.random.default_rng([seed, i]))

    if parallel <= 1:
        return [run(i) for i in range(len(instances))]
    from concurrent.futures import ThreadPoolExecutor

    with ThreadPoolExecutor(max_workers=parallel) as pool:
        return list(pool.map(run, range(len(instances))))


def _finish(
    session: _Session,
    root: AdversarialCandidate,
    final: AdversarialCandidate,
    trace: list[IterationTrace],
    iterations: int,
) -> AttackOutcome:
    instance, config = session.instance, session.config
    references = [tokenize(r).tokens for r in instance.references]
    orig_hit = session.eval_cache.get(tuple(root.sentence.tokens))
    if orig_hit is None:  # budget too small to even measure the original
        empty = metrics.MetricScores(0.0, 0.0, 0.0)
        record = metrics.AttackSuccessRecord(cosine=1.0, metric_drop=0.0, success=False)
        return AttackOutcome(
            original_input=instance.utterance,
            adversarial_input=instance.utterance,
            original_output=[],
            adversarial_output=[],
            tc_before=float("nan"),
            tc_after=float("nan"),
            gl_before=0,
            gl_after=0,
            cosine=1.0,
            perturbed_positions=[],
            queries_used=session.used,
            iterations_run=0,
            success=False,
            scores_before=empty,
            scores_after=empty,
            record=record,
            trace=trace,
        )
    gl0, tc0, out0 = orig_hit
    gl1, tc1, out1 = session.eval_cache[tuple(final.sentence.tokens)]
    scores_before = metrics.score_generation(out0, references)
    scores_after = metrics.score_generation(out1, references)
    record = metrics.success(scores_before, scores_after, final.cosine, config.eps, config.tau)
    return AttackOutcome(
        original_input=instance.utterance,
        adversarial_input=final.sentence.raw,
        original_output=out0,
        adversarial_output=out1,
        tc_before=tc0,
        tc_after=tc1,
        gl_before=gl0,
        gl_after=gl1,
        cosine=final.cosine,
        perturbed_positions=sorted(final.perturbed_positions),
        queries_used=session.used,
        iterations_run=iterations,
        success=record.success,
        scores_before=scores_before,
        scores_after=scores_after,
        record=record,
        trace=trace,
    )
