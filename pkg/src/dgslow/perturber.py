"""Word-substitution machinery: candidates, similarity, grammar, validation.

Candidate generation is a pluggable contract; the built-in generator ranks
vocabulary words by cosine similarity of static word embeddings to the masked
word. Validation enforces the two hard constraints every kept candidate must
satisfy: sentence cosine above the threshold and no new grammar errors.
"""
from __future__ import annotations

import hashlib
from dataclasses import dataclass
from importlib import resources
from pathlib import Path
from typing import Protocol

import numpy as np

from .corpus import TokenizedSentence, detokenize


class CandidateGenerator(Protocol):
    def generate(self, sentence: TokenizedSentence, position: int, c: int) -> list[str]:
        ...


class SentenceEncoderProtocol(Protocol):
    def similarity(self, a: list[str], b: list[str]) -> float:
        ...


class GrammarCheckerProtocol(Protocol):
    def count_errors(self, tokens: list[str]) -> int:
        ...


def _hash_vector(word: str, dim: int, seed: int) -> np.ndarray:
    digest = hashlib.sha256(word.encode("utf-8")).digest()
    rng = np.random.default_rng([seed, int.from_bytes(digest[:8], "little")])
    v = rng.normal(size=dim)
    return v / np.linalg.norm(v)


class StaticWordEmbeddings:
    """Unit-normalized word vectors; unknown words fall back to hash vectors."""

    def __init__(self, table: dict[str, np.ndarray], seed: int = 0):
        self.dim = len(next(iter(table.values())))
        self.table = {w: np.asarray(v, dtype=float) / np.linalg.norm(v) for w, v in table.items()}
        self.seed = seed

    @classmethod
    def from_file(cls, path: str | Path, seed: int = 0) -> "StaticWordEmbeddings":
        """Plain word-vector text format: `word v1 v2 ...` per line."""
        table: dict[str, np.ndarray] = {}
        with open(path, encoding="utf-8") as fh:
            for line in fh:
                parts = line.split()
                if len(parts) < 2:
                    continue
                table[parts[0]] = np.array([float(x) for x in parts[1:]])
        if not table:
            raise ValueError(f"no embeddings in {path}")
        return cls(table, seed=seed)

    @classmethod
    def from_hash(cls, words: list[str], dim: int = 32, seed: int = 0) -> "StaticWordEmbeddings":
        """Deterministic pseudo-random vectors; useful as a test fallback."""
        return cls({w: _hash_vector(w, dim, seed) for w in words}, seed=seed)

    @classmethod
    def from_categories(
        cls, groups: dict[str, list[str]], dim: int = 32, seed: int = 0, spread: float = 0.35
    ) -> "StaticWordEmbeddings":
        """Place same-category words near a shared center; categories stay apart."""
        table: dict[str, np.ndarray] = {}
        for name, words in groups.items():
            center = _hash_vector(f"category:{name}", dim, seed)
            for w in words:
                table[w] = center + spread * _hash_vector(w, dim, seed)
        return cls(table, seed=seed)

    def words(self) -> list[str]:
        return sorted(self.table)

    def vector(self, word: str) -> np.ndarray:
        v = self.table.get(word)
        if v is None:
            v = _hash_vector(word, self.dim, self.seed)
        return v

    def word_cosine(self, a: str, b: str) -> float:
        return float(self.vector(a) @ self.vector(b))


class SentenceEncoder:
    """Mean of static word vectors, renormalized to unit length."""

    def __init__(self, embeddings: StaticWordEmbeddings):
        self.embeddings = embeddings

    def encode(self, tokens: list[str]) -> np.ndarray:
        if not tokens:
            raise ValueError("cannot encode an empty token list")
        mean = np.mean([self.embeddings.vector(t) for t in tokens], axis=0)
        norm = np.linalg.norm(mean)
        if norm < 1e-12:
            v = np.zeros(self.embeddings.dim)
            v[0] = 1.0
            return v
        return mean / norm

    def similarity(self, a: list[str], b: list[str]) -> float:
        return float(np.clip(self.encode(a) @ self.encode(b), -1.0, 1.0))


_VOWELS = set("aeiou")
_PAIRED = {"(": ")", "[": "]", "{": "}"}


class RuleGrammarChecker:
    """Deterministic count of rule violations in a token sequence.

    Rules: immediate word repetition, first token not capitalizable, unmatched
    bracket/quote pairs, article-vowel mismatch (a apple / an banana).
    """

    def count_errors(self, tokens: list[str]) -> int:
        errors = 0
        for prev, cur in zip(tokens, tokens[1:]):
            if prev.lower() == cur.lower() and any(ch.isalnum() for ch in prev):
                errors += 1
        if tokens and not tokens[0][0].isalpha():
            errors += 1
        for opener, closer in _PAIRED.items():
            errors += abs(tokens.count(opener) - tokens.count(closer))
        errors += tokens.count('"') % 2
        for prev, cur in zip(tokens, tokens[1:]):
            low = cur.lower()
            if not low or not low[0].isalpha():
                continue
            if prev.lower() == "a" and low[0] in _VOWELS:
                errors += 1
            elif prev.lower() == "an" and low[0] not in _VOWELS:
                errors += 1
        return errors


class AntonymLexicon:
    """Symmetric word -> antonyms map loaded from `word: a1,a2` lines."""

    def __init__(self, pairs: dict[str, set[str]] | None = None):
        self.map: dict[str, set[str]] = {}
        for word, ants in (pairs or {}).items():
            for ant in ants:
                self.add(word, ant)

    def add(self, a: str, b: str) -> None:
        self.map.setdefault(a, set()).add(b)
        self.map.setdefault(b, set()).add(a)

    def antonyms(self, word: str) -> frozenset[str]:
        return frozenset(self.map.get(word, ()))

    @classmethod
    def from_file(cls, path: str | Path) -> "AntonymLexicon":
        lex = cls()
        with open(path, encoding="utf-8") as fh:
            lex._parse(fh.read())
        return lex

    @classmethod
    def builtin(cls) -> "AntonymLexicon":
        """Lexicon shipped with the package, covering the synthetic vocabulary."""
        lex = cls()
        lex._parse(resources.files("dgslow.resources").joinpath("antonyms.txt").read_text("utf-8"))
        return lex

    def _parse(self, text: str) -> None:
        for line in text.splitlines():
            line = line.strip()
            if not line or line.startswith("#") or ":" not in line:
                continue
            word, _, rest = line.partition(":")
            for ant in rest.split(","):
                ant = ant.strip()
                if ant:
                    self.add(word.strip(), ant)


class StaticNeighborGenerator:
    """Rank vocabulary words by embedding cosine to the masked word.

    Never proposes the original word or anything in its antonym blacklist;
    ties break alphabetically so rankings are reproducible.
    """

    def __init__(
        self,
        embeddings: StaticWordEmbeddings,
        antonyms: AntonymLexicon | None = None,
        vocabulary: list[str] | None = None,
    ):
        self.embeddings = embeddings
        self.antonyms = antonyms or AntonymLexicon()
        self.vocabulary = list(vocabulary) if vocabulary is not None else embeddings.words()

    def generate(self, sentence: TokenizedSentence, position: int, c: int) -> list[str]:
        if not 0 <= position < len(sentence.tokens):
            raise IndexError(f"position {position} out of range for {len(sentence.tokens)} tokens")
        if c <= 0:
            return []
        original = sentence.tokens[position]
        if not any(ch.isalnum() for ch in original):
            return []  # punctuation has no meaning-preserving neighbors
        blacklist = self.antonyms.antonyms(original)
        scored = [
            (-self.embeddings.word_cosine(word, original), word)
            for word in self.vocabulary
            if word.casefold() != original.casefold() and word not in blacklist
        ]
        scored.sort()
        return [word for _, word in scored[:c]]


def substitute(sentence: TokenizedSentence, position: int, word: str) -> TokenizedSentence:
    """New sentence differing from the input only at one position."""
    if not 0 <= position < len(sentence.tokens):
        raise IndexError(f"position {position} out of range for {len(sentence.tokens)} tokens")
    tokens = list(sentence.tokens)
    tokens[position] = word
    return TokenizedSentence(tokens=tokens, raw=detokenize(tokens))


@dataclass
class ValidationVerdict:
    valid: bool
    cosine: float
    grammar_errors: int
    reasons: list[str]


def validate(
    original: TokenizedSentence,
    candidate: TokenizedSentence,
    eps: float,
    encoder: SentenceEncoderProtocol,
    checker: GrammarCheckerProtocol,
    original_errors: int | None = None,
) -> ValidationVerdict:
    """Hard constraints: cosine strictly above eps, no new grammar errors.

    ``original_errors`` lets callers reuse the original's precomputed count.
    """
    cosine = encoder.similarity(original.tokens, candidate.tokens)
    if original_errors is None:
        original_errors = checker.count_errors(original.tokens)
    errors = checker.count_errors(candidate.tokens)
    reasons = []
    if not cosine > eps:
        reasons.append("semantic")
    if errors > original_errors:
        reasons.append("grammar")
    return ValidationVerdict(valid=not reasons, cosine=cosine, grammar_errors=errors, reasons=reasons)
