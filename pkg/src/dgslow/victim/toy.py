"""A tiny differentiable encoder-decoder victim trained on synthetic corpora.

Single attention layer, recurrent tanh decoder cell, tied input/output
embeddings. Reverse-mode differentiation is written out by hand so analytic
gradients can be checked against central finite differences; everything runs
in float64 numpy, no ML framework involved.
"""
from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass
from pathlib import Path

import numpy as np

from ..corpus import DialogueInstance, TokenizedSentence, tokenize
from ..errors import (
    VersionError,
    ConfigError,
    ContractError,
    EmptyReference,
    ModelNotReady,
    NumericalError,
)
from .base import (
    PS_TOKEN,
    SEP_TOKEN,
    GenerationResult,
    GradientPair,
    ReferenceScore,
    StopLossParams,
    VictimModel,
    serialize_input,
)

BOS = "<bos>"
EOS = "<eos>"
UNK = "<unk>"
SPECIALS = (BOS, EOS, UNK, PS_TOKEN, SEP_TOKEN)

CHECKPOINT_FORMAT = "dgslow-toy-victim"
CHECKPOINT_VERSION = 1

_PARAM_NAMES = (
    "E", "P", "W_enc", "b_enc", "W_init", "b_init",
    "W_q", "W_s", "W_y", "W_c", "b_s", "W_o", "W_co", "b_v",
)


@dataclass
class ToyVictimConfig:
    embed_dim: int = 32
    hidden_dim: int = 48
    max_decode_len: int = 24
    max_input_len: int = 192
    train_epochs: int = 30
    learning_rate: float = 0.01
    seed: int = 0

    def __post_init__(self):
        for name in ("embed_dim", "hidden_dim", "max_decode_len", "max_input_len", "train_epochs"):
            if getattr(self, name) < 1:
                raise ConfigError(f"{name} must be >= 1")
        if self.learning_rate <= 0:
            raise ConfigError("learning_rate must be positive")


class _Cache:
    """Forward activations needed by the backward pass."""

    __slots__ = ("X", "M", "mbar", "s", "a", "q", "c", "o", "logits", "probs", "dec_ids")

    def __init__(self):
        self.s = []
        self.a = []
        self.q = []
        self.c = []
        self.o = []
        self.logits = []
        self.probs = []


def _softmax(row: np.ndarray) -> np.ndarray:
    shifted = row - row.max()
    e = np.exp(shifted)
    return e / e.sum()


class ToyVictim(VictimModel):
    def __init__(self, config: ToyVictimConfig, vocab: list[str]):
        super().__init__()
        self.config = config
        self.vocab = list(vocab)
        self.token_to_id = {tok: i for i, tok in enumerate(self.vocab)}
        if len(self.token_to_id) != len(self.vocab):
            raise ConfigError("vocabulary contains duplicates")
        for special in SPECIALS:
            if special not in self.token_to_id:
                raise ConfigError(f"vocabulary must contain {special!r}")
        self.bos_id = self.token_to_id[BOS]
        self.eos_id = self.token_to_id[EOS]
        self.unk_id = self.token_to_id[UNK]
        self.trained = False
        self._init_params(np.random.default_rng(config.seed))

    # -- construction ------------------------------------------------------

    @classmethod
    def build(cls, instances: list[DialogueInstance], config: ToyVictimConfig) -> "ToyVictim":
        """Vocabulary = specials + every word type in the corpus."""
        words: set[str] = set()
        for inst in instances:
            for sentence in [*inst.persona, *inst.history, inst.utterance, *inst.references]:
                words.update(tokenize(sentence).tokens)
        words -= set(SPECIALS)
        return cls(config, list(SPECIALS) + sorted(words))

    def _init_params(self, rng: np.random.Generator) -> None:
        d, h = self.config.embed_dim, self.config.hidden_dim
        V, L = len(self.vocab), self.config.max_input_len
        scale = 0.1
        self.params: dict[str, np.ndarray] = {
            "E": rng.normal(0.0, scale, (V, d)),
            "P": rng.normal(0.0, scale, (L, d)),
            "W_enc": rng.normal(0.0, scale, (d, h)),
            "b_enc": np.zeros(h),
            "W_init": rng.normal(0.0, scale, (h, h)),
            "b_init": np.zeros(h),
            "W_q": rng.normal(0.0, scale, (h, h)),
            "W_s": rng.normal(0.0, scale, (h, h)),
            "W_y": rng.normal(0.0, scale, (d, h)),
            "W_c": rng.normal(0.0, scale, (h, h)),
            "b_s": np.zeros(h),
            "W_o": rng.normal(0.0, scale, (h, d)),
            "W_co": rng.normal(0.0, scale, (h, d)),
            "b_v": np.zeros(V),
        }

    # -- vocabulary --------------------------------------------------------

    @property
    def vocabulary(self) -> list[str]:
        return list(self.vocab)

    @property
    def max_decode_len(self) -> int:
        return self.config.max_decode_len

    def token_ids(self, tokens: list[str]) -> list[int]:
        return [self.token_to_id.get(tok, self.unk_id) for tok in tokens]

    def _input_ids(self, instance: DialogueInstance, override: TokenizedSentence | None) -> list[int]:
        serialized = serialize_input(instance, override)
        if len(serialized.tokens) > self.config.max_input_len:
            raise ContractError(
                f"serialized input has {len(serialized.tokens)} tokens, "
                f"max_input_len is {self.config.max_input_len}"
            )
        return self.token_ids(serialized.tokens)

    # -- forward / backward ------------------------------------------------

    def input_embedding_rows(self, input_ids: list[int]) -> np.ndarray:
        p = self.params
        return p["E"][input_ids] + p["P"][: len(input_ids)]

    def _forward(self, X: np.ndarray, dec_ids: list[int]) -> _Cache:
        p = self.params
        h = self.config.hidden_dim
        cache = _Cache()
        cache.X = X
        cache.dec_ids = list(dec_ids)
        cache.M = np.tanh(X @ p["W_enc"] + p["b_enc"])
        cache.mbar = cache.M.mean(axis=0)
        s = np.tanh(cache.mbar @ p["W_init"] + p["b_init"])
        cache.s.append(s)
        scale = 1.0 / math.sqrt(h)
        for tok_id in dec_ids:
            q = s @ p["W_q"]
            a = _softmax(cache.M @ q * scale)
            c = a @ cache.M
            z = s @ p["W_s"] + p["E"][tok_id] @ p["W_y"] + c @ p["W_c"] + p["b_s"]
            s = np.tanh(z)
            o = s @ p["W_o"] + c @ p["W_co"]
            logits = o @ p["E"].T + p["b_v"]
            cache.q.append(q)
            cache.a.append(a)
            cache.c.append(c)
            cache.s.append(s)
            cache.o.append(o)
            cache.logits.append(logits)
            cache.probs.append(_softmax(logits))
        return cache

    def _backward(self, cache: _Cache, dlogits: list[np.ndarray], need_params: bool):
        p = self.params
        h = self.config.hidden_dim
        scale = 1.0 / math.sqrt(h)
        M, X = cache.M, cache.X
        m = X.shape[0]
        grads = {name: np.zeros_like(p[name]) for name in _PARAM_NAMES} if need_params else None
        dM = np.zeros_like(M)
        ds_next = np.zeros(h)
        for t in range(len(dlogits) - 1, -1, -1):
            dlog = dlogits[t]
            s_t, s_prev = cache.s[t + 1], cache.s[t]
            do = dlog @ p["E"]
            ds = do @ p["W_o"].T + ds_next
            dz = ds * (1.0 - s_t * s_t)
            dc = dz @ p["W_c"].T + do @ p["W_co"].T
            da = M @ dc
            dM += np.outer(cache.a[t], dc)
            de = cache.a[t] * (da - cache.a[t] @ da)
            dq = (M.T @ de) * scale
            dM += np.outer(de, cache.q[t]) * scale
            ds_prev = dz @ p["W_s"].T + dq @ p["W_q"].T
            if need_params:
                grads["b_v"] += dlog
                grads["E"] += np.outer(dlog, cache.o[t])
                grads["W_o"] += np.outer(s_t, do)
                grads["W_co"] += np.outer(cache.c[t], do)
                grads["W_s"] += np.outer(s_prev, dz)
                grads["W_y"] += np.outer(p["E"][cache.dec_ids[t]], dz)
                grads["E"][cache.dec_ids[t]] += dz @ p["W_y"].T
                grads["W_c"] += np.outer(cache.c[t], dz)
                grads["b_s"] += dz
                grads["W_q"] += np.outer(s_prev, dq)
            ds_next = ds_prev
        s0 = cache.s[0]
        dz0 = ds_next * (1.0 - s0 * s0)
        dM += np.outer(np.full(m, 1.0 / m), dz0 @ p["W_init"].T)
        dH = dM * (1.0 - M * M)
        dX = dH @ p["W_enc"].T
        if need_params:
            grads["W_init"] += np.outer(cache.mbar, dz0)
            grads["b_init"] += dz0
            grads["W_enc"] += X.T @ dH
            grads["b_enc"] += dH.sum(axis=0)
        return dX, grads

    # -- loss heads ---------------------------------------------------------

    @staticmethod
    def _ll_dlogits(cache: _Cache, target_ids: list[int]) -> list[np.ndarray]:
        """d/dlogits of sum_t log p(target_t)."""
        rows = []
        for t, tok_id in enumerate(target_ids):
            row = -cache.probs[t].copy()
            row[tok_id] += 1.0
            rows.append(row)
        return rows

    def _eos_dlogits(self, cache: _Cache) -> list[np.ndarray]:
        """d/dlogits of sum_t (l_eos - E_p[l])."""
        rows = []
        for logits, probs in zip(cache.logits, cache.probs):
            expected = probs @ logits
            row = -probs * (1.0 + logits - expected)
            row[self.eos_id] += 1.0
            rows.append(row)
        return rows

    def ll_loss_from_rows(self, X: np.ndarray, target_ids: list[int]) -> float:
        """Teacher-forced sum of log target probabilities, from embedding rows."""
        dec_ids = [self.bos_id] + list(target_ids[:-1])
        cache = self._forward(X, dec_ids)
        return float(sum(math.log(cache.probs[t][tok]) for t, tok in enumerate(target_ids)))

    def eos_loss_from_rows(self, X: np.ndarray, dec_ids: list[int]) -> float:
        """EOS-margin loss along a frozen decoder path, from embedding rows."""
        cache = self._forward(X, dec_ids)
        return float(
            sum(logits[self.eos_id] - probs @ logits for logits, probs in zip(cache.logits, cache.probs))
        )

    # -- public victim contract ---------------------------------------------

    def _greedy_ids(self, X: np.ndarray) -> tuple[list[int], list[np.ndarray], bool]:
        p = self.params
        h = self.config.hidden_dim
        scale = 1.0 / math.sqrt(h)
        M = np.tanh(X @ p["W_enc"] + p["b_enc"])
        s = np.tanh(M.mean(axis=0) @ p["W_init"] + p["b_init"])
        prev = self.bos_id
        ids: list[int] = []
        rows: list[np.ndarray] = []
        ended = False
        for _ in range(self.config.max_decode_len):
            q = s @ p["W_q"]
            a = _softmax(M @ q * scale)
            c = a @ M
            z = s @ p["W_s"] + p["E"][prev] @ p["W_y"] + c @ p["W_c"] + p["b_s"]
            s = np.tanh(z)
            logits = (s @ p["W_o"] + c @ p["W_co"]) @ p["E"].T + p["b_v"]
            rows.append(logits)
            choice = int(np.argmax(logits))
            if choice == self.eos_id:
                ended = True
                break
            ids.append(choice)
            prev = choice
        return ids, rows, ended

    def generate(
        self,
        instance: DialogueInstance,
        utterance_override: TokenizedSentence | None = None,
    ) -> GenerationResult:
        if not self.trained:
            raise ModelNotReady("toy victim has not been trained or loaded")
        input_ids = self._input_ids(instance, utterance_override)
        ids, rows, ended = self._greedy_ids(self.input_embedding_rows(input_ids))
        self.query_count += 1
        return GenerationResult(tokens=[self.vocab[i] for i in ids], steps=rows, ended_by_eos=ended)

    def score_reference(
        self,
        instance: DialogueInstance,
        utterance_override: TokenizedSentence | None,
        reference: str,
    ) -> ReferenceScore:
        if not reference.strip():
            raise EmptyReference("reference has no tokens")
        ref_ids = self.token_ids(tokenize(reference).tokens)
        input_ids = self._input_ids(instance, utterance_override)
        cache = self._forward(self.input_embedding_rows(input_ids), [self.bos_id] + ref_ids[:-1])
        probs = np.array([cache.probs[t][tok] for t, tok in enumerate(ref_ids)])
        self.query_count += 1
        return ReferenceScore(token_probs=probs, logit_rows=list(cache.logits))

    def gradients(
        self,
        instance: DialogueInstance,
        utterance_override: TokenizedSentence | None,
        reference: str,
        stop_loss_params: StopLossParams | None = None,
    ) -> GradientPair:
        if not reference.strip():
            raise EmptyReference("reference has no tokens")
        ref_ids = self.token_ids(tokenize(reference).tokens)
        input_ids = self._input_ids(instance, utterance_override)
        X = self.input_embedding_rows(input_ids)

        cache_ll = self._forward(X, [self.bos_id] + ref_ids[:-1])
        g_ll, _ = self._backward(cache_ll, self._ll_dlogits(cache_ll, ref_ids), need_params=False)

        gen_ids, rows, _ = self._greedy_ids(X)
        n_steps = len(rows)
        cache_eos = self._forward(X, ([self.bos_id] + gen_ids)[:n_steps])
        g_stop, _ = self._backward(cache_eos, self._eos_dlogits(cache_eos), need_params=False)

        if not (np.isfinite(g_ll).all() and np.isfinite(g_stop).all()):
            raise NumericalError("non-finite attack gradient")
        self.query_count += 1
        return GradientPair(g_ll=g_ll, g_stop=g_stop)

    # -- training ------------------------------------------------------------

    def train(self, instances: list[DialogueInstance], epochs: int | None = None) -> float:
        """Teacher-forced cross-entropy on (serialized input -> first reference).

        Adam, per-instance updates, seeded shuffling; returns the final epoch's
        mean loss. Training twice from the same seed gives identical weights.
        """
        epochs = self.config.train_epochs if epochs is None else epochs
        data = []
        for inst in instances:
            target = self.token_ids(tokenize(inst.references[0]).tokens) + [self.eos_id]
            data.append((self._input_ids(inst, None), target))
        rng = np.random.default_rng(self.config.seed + 1)
        mom = {k: np.zeros_like(v) for k, v in self.params.items()}
        vel = {k: np.zeros_like(v) for k, v in self.params.items()}
        base_lr, b1, b2, eps = self.config.learning_rate, 0.9, 0.999, 1e-8
        clip = 5.0
        step = 0
        last_epoch_loss = float("inf")
        for epoch in range(epochs):
            lr = base_lr if epoch < 2 * epochs // 3 else base_lr / 3.0
            order = rng.permutation(len(data))
            total = 0.0
            for idx in order:
                input_ids, target = data[idx]
                cache = self._forward(self.input_embedding_rows(input_ids), [self.bos_id] + target[:-1])
                n = len(target)
                dlogits = []
                for t, tok in enumerate(target):
                    total -= math.log(cache.probs[t][tok]) / n
                    row = cache.probs[t] / n
                    row[tok] -= 1.0 / n
                    dlogits.append(row)
                dX, grads = self._backward(cache, dlogits, need_params=True)
                np.add.at(grads["E"], input_ids, dX)  # += misses repeated ids
                grads["P"][: len(input_ids)] += dX
                norm = math.sqrt(sum(float((g * g).sum()) for g in grads.values()))
                if norm > clip:
                    for g in grads.values():
                        g *= clip / norm
                step += 1
                corr = math.sqrt(1.0 - b2**step) / (1.0 - b1**step)
                for name, g in grads.items():
                    mom[name] = b1 * mom[name] + (1 - b1) * g
                    vel[name] = b2 * vel[name] + (1 - b2) * g * g
                    self.params[name] -= lr * corr * mom[name] / (np.sqrt(vel[name]) + eps)
            last_epoch_loss = total / len(data)
        self.trained = True
        return last_epoch_loss

    # -- persistence -----------------------------------------------------------

    def save(self, path: str | Path) -> None:
        payload = {
            "format": CHECKPOINT_FORMAT,
            "format_version": CHECKPOINT_VERSION,
            "config": asdict(self.config),
            "vocab": self.vocab,
            "trained": self.trained,
            "weights": {name: self.params[name].tolist() for name in _PARAM_NAMES},
        }
        with open(path, "w", encoding="utf-8") as fh:
            json.dump(payload, fh)
            fh.write("\n")

    @classmethod
    def load(cls, path: str | Path) -> "ToyVictim":
        with open(path, encoding="utf-8") as fh:
            payload = json.load(fh)
        if payload.get("format") != CHECKPOINT_FORMAT or payload.get("format_version") != CHECKPOINT_VERSION:
            raise VersionError(
                f"expected {CHECKPOINT_FORMAT} v{CHECKPOINT_VERSION}, "
                f"got {payload.get('format')!r} v{payload.get('format_version')!r}"
            )
        victim = cls(ToyVictimConfig(**payload["config"]), payload["vocab"])
        for name in _PARAM_NAMES:
            victim.params[name] = np.asarray(payload["weights"][name], dtype=float)
        victim.trained = bool(payload["trained"])
        return victim


def mean_reference_confidence(victim: VictimModel, instances: list[DialogueInstance]) -> float:
    """Mean targeted confidence over first references; a learning yardstick."""
    total = 0.0
    for inst in instances:
        score = victim.score_reference(inst, None, inst.references[0])
        total += float(np.asarray(score.token_probs).sum())
    return total / len(instances)
