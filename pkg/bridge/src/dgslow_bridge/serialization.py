"""Word-level serialization of a dialogue turn, as the wire protocol defines it.

The engine ranks and perturbs word positions, so gradient rows must line up
with exactly this word sequence: [PS]-prefixed persona sentences, then
[SEP]-joined history and current utterance. Kept self-contained: the bridge
talks to the engine only over HTTP.
"""
from __future__ import annotations

import re

PS_TOKEN = "[PS]"
SEP_TOKEN = "[SEP]"

_TOKEN_RE = re.compile(r"[A-Za-z0-9]+|'[A-Za-z]+|[^\sA-Za-z0-9]")


def word_tokenize(text: str) -> list[str]:
    return _TOKEN_RE.findall(text)


def serialize_words(persona: list[str], history: list[str], utterance: str) -> tuple[list[str], tuple[int, int]]:
    """Returns (word sequence, utterance span) for one dialogue turn."""
    words: list[str] = []
    for sentence in persona:
        words.append(PS_TOKEN)
        words.extend(word_tokenize(sentence))
    segments = [word_tokenize(h) for h in history]
    utterance_words = word_tokenize(utterance)
    segments.append(utterance_words)
    for i, segment in enumerate(segments):
        if words or i > 0:
            words.append(SEP_TOKEN)
        words.extend(segment)
    end = len(words)
    return words, (end - len(utterance_words), end)
