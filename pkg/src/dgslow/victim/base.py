"""Victim-model contract: everything the attack needs from a dialogue model.

Implementations must be deterministic (greedy decoding), keep a per-instance
query counter that each generate/score/gradients call bumps by exactly one,
and expose gradients of the two attack losses with respect to the embedding
rows of the full serialized input.
"""
from __future__ import annotations

import abc
from dataclasses import dataclass

import numpy as np

from ..corpus import DialogueInstance, TokenizedSentence, tokenize

PS_TOKEN = "[PS]"
SEP_TOKEN = "[SEP]"


@dataclass
class SerializedInput:
    """Word sequence fed to a victim plus the span holding the utterance."""

    tokens: list[str]
    utterance_span: tuple[int, int]


def serialize_input(
    instance: DialogueInstance,
    utterance_override: TokenizedSentence | None = None,
) -> SerializedInput:
    """[PS]-prefixed persona sentences, then [SEP]-joined history and utterance.

    The override replaces only the current utterance; persona and history are
    never touched.
    """
    tokens: list[str] = []
    for sentence in instance.persona:
        tokens.append(PS_TOKEN)
        tokens.extend(tokenize(sentence).tokens)
    segments = [tokenize(h).tokens for h in instance.history]
    utterance = utterance_override if utterance_override is not None else tokenize(instance.utterance)
    segments.append(list(utterance.tokens))
    for i, segment in enumerate(segments):
        if tokens or i > 0:
            tokens.append(SEP_TOKEN)
        tokens.extend(segment)
    end = len(tokens)
    start = end - len(utterance.tokens)
    return SerializedInput(tokens=tokens, utterance_span=(start, end))


@dataclass
class GenerationResult:
    """Greedy decode output. ``tokens`` excludes the end-of-sequence token.

    ``steps`` holds one full logit row per decoding step including the step
    that emitted EOS (so len(steps) == len(tokens) + ended_by_eos); remote
    victims may send per-step (eos_logit, expected_logit) pairs in
    ``eos_stats`` instead.
    """

    tokens: list[str]
    steps: list[np.ndarray] | None
    ended_by_eos: bool
    eos_stats: list[tuple[float, float]] | None = None
    query_cost: int = 1


@dataclass
class ReferenceScore:
    """Teacher-forced per-position probabilities of a reference response."""

    token_probs: np.ndarray
    logit_rows: list[np.ndarray] | None = None
    query_cost: int = 1


@dataclass
class GradientPair:
    """Gradients of the accuracy and length losses w.r.t. input embedding rows.

    ``g_stop`` is the gradient of the EOS component only; the semantic hinge
    is computed by an external sentence encoder, so its gradient through the
    victim embedding layer is taken as zero.
    """

    g_ll: np.ndarray
    g_stop: np.ndarray
    query_cost: int = 1


@dataclass
class StopLossParams:
    beta: float = 1.0
    eps: float = 0.7
    rho: float = 1.0


class VictimModel(abc.ABC):
    """Deterministic dialogue model under attack."""

    def __init__(self):
        self.query_count = 0

    def reset_query_count(self) -> None:
        self.query_count = 0

    @property
    @abc.abstractmethod
    def vocabulary(self) -> list[str]:
        ...

    @property
    @abc.abstractmethod
    def max_decode_len(self) -> int:
        ...

    @abc.abstractmethod
    def generate(
        self,
        instance: DialogueInstance,
        utterance_override: TokenizedSentence | None = None,
    ) -> GenerationResult:
        ...

    @abc.abstractmethod
    def score_reference(
        self,
        instance: DialogueInstance,
        utterance_override: TokenizedSentence | None,
        reference: str,
    ) -> ReferenceScore:
        ...

    @abc.abstractmethod
    def gradients(
        self,
        instance: DialogueInstance,
        utterance_override: TokenizedSentence | None,
        reference: str,
        stop_loss_params: StopLossParams | None = None,
    ) -> GradientPair:
        ...
