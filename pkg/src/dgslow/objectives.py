"""Attack objectives and their combination.

Two scalar losses drive the attack: a log-likelihood loss over the reference
response (accuracy objective) and a stop loss built from an end-of-sequence
margin plus a semantic-drift hinge (length objective). Their gradients are
blended at a Pareto-stationary point (constrained min-norm combination) and
pooled per input position into word-saliency scores.
"""
from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np

from .errors import ContractError, EmptyUtterance, NumericalWarning
from .victim.base import GenerationResult, ReferenceScore

PROB_FLOOR = 1e-12


@dataclass
class ObjectiveValues:
    """All scalar objectives of one (input, reference) pair."""

    tc: float
    gl: int
    l_ll: float
    l_eos: float
    l_reg: float
    l_stop: float


def compute_tc(score: ReferenceScore) -> float:
    """Targeted confidence: the plain sum (not product) of reference-token probs."""
    probs = np.asarray(score.token_probs, dtype=float)
    if probs.size == 0:
        raise ContractError("reference score has no token probabilities")
    return float(probs.sum())


def loss_ll(score: ReferenceScore) -> float:
    """Sum of log reference-token probabilities; clamped at the prob floor."""
    probs = np.asarray(score.token_probs, dtype=float)
    if probs.size == 0:
        raise ContractError("reference score has no token probabilities")
    if (probs < PROB_FLOOR).any():
        warnings.warn("probability clamped before log", NumericalWarning, stacklevel=2)
        probs = np.maximum(probs, PROB_FLOOR)
    return float(np.log(probs).sum())


def loss_eos(gen: GenerationResult, eos_token_id: int) -> float:
    """Per-step EOS logit minus the probability-weighted expected logit, summed.

    Works from full logit rows when the victim provides them, otherwise from
    the per-step (eos_logit, expected_logit) sufficient statistics a remote
    victim sends.
    """
    if gen.steps is not None:
        total = 0.0
        for row in gen.steps:
            row = np.asarray(row, dtype=float)
            shifted = row - row.max()
            probs = np.exp(shifted)
            probs /= probs.sum()
            total += float(row[eos_token_id] - probs @ row)
        return total
    if gen.eos_stats is not None:
        return float(sum(e - x for e, x in gen.eos_stats))
    raise ContractError("generation result carries neither logit rows nor eos statistics")


def loss_reg(rho: float, eps: float) -> float:
    """Hinge on semantic similarity: max(0, eps - rho)."""
    return max(0.0, eps - rho)


def loss_stop(l_eos: float, l_reg: float, beta: float) -> float:
    return l_eos + beta * l_reg


def evaluate_objectives(
    gen: GenerationResult,
    score: ReferenceScore,
    rho: float,
    eps: float,
    beta: float,
    eos_token_id: int,
) -> ObjectiveValues:
    l_e = loss_eos(gen, eos_token_id)
    l_r = loss_reg(rho, eps)
    return ObjectiveValues(
        tc=compute_tc(score),
        gl=len(gen.tokens),
        l_ll=loss_ll(score),
        l_eos=l_e,
        l_reg=l_r,
        l_stop=loss_stop(l_e, l_r, beta),
    )


@dataclass
class ParetoSolution:
    alpha: tuple[float, float]
    lam: float
    combined_gradient: np.ndarray
    constraints: tuple[float, float]


def solve_pareto(
    g_ll: np.ndarray,
    g_stop: np.ndarray,
    c1: float = 0.0,
    c2: float = 0.0,
) -> ParetoSolution:
    """Min-norm convex combination of two gradients with weight lower bounds.

    Solves min_a ||a*g_ll + (1-a)*g_stop||^2 over a in [c1, 1-c2] in closed
    form: the unconstrained optimum a* = ((g_stop-g_ll).g_stop)/||g_ll-g_stop||^2
    clipped into the box. The multiplier reported is -||g||^2 (diagnostic
    only). Near-identical gradients fall back to equal weights.
    """
    a = np.asarray(g_ll, dtype=float)
    b = np.asarray(g_stop, dtype=float)
    if a.shape != b.shape:
        raise ValueError(f"gradient shapes differ: {a.shape} vs {b.shape}")
    if not (np.isfinite(a).all() and np.isfinite(b).all()):
        raise ValueError("gradients must be finite")
    if c1 < 0 or c2 < 0 or c1 + c2 > 1:
        raise ValueError("need c1, c2 >= 0 and c1 + c2 <= 1")
    av, bv = a.ravel(), b.ravel()
    diff = av - bv
    denom = float(diff @ diff)
    if denom < 1e-12:
        alpha1 = 0.5
    else:
        alpha1 = float((bv - av) @ bv) / denom
        alpha1 = min(max(alpha1, c1), 1.0 - c2)
    alpha2 = 1.0 - alpha1
    combined = alpha1 * a + alpha2 * b
    lam = -float(combined.ravel() @ combined.ravel())
    return ParetoSolution(alpha=(alpha1, alpha2), lam=lam, combined_gradient=combined, constraints=(c1, c2))


@dataclass
class SaliencyRanking:
    scores: np.ndarray
    order: list[int]


def word_saliency(
    combined_gradient: np.ndarray,
    utterance_span: tuple[int, int],
    perturbed: set[int] | frozenset[int] = frozenset(),
) -> SaliencyRanking:
    """Rank utterance positions by mean absolute gradient over embedding dims.

    The span selects the rows of the serialized input that belong to the
    current utterance; context rows are never ranked. Returned positions are
    utterance-relative, exclude already-perturbed ones, and break ties
    leftmost-first.
    """
    start, end = utterance_span
    g = np.asarray(combined_gradient, dtype=float)
    if end <= start or end > g.shape[0]:
        raise EmptyUtterance(f"bad utterance span {utterance_span} for {g.shape[0]} rows")
    scores = np.abs(g[start:end]).mean(axis=1)
    order = sorted(
        (i for i in range(end - start) if i not in perturbed),
        key=lambda i: (-scores[i], i),
    )
    return SaliencyRanking(scores=scores, order=order)
