"""Dialogue data model, word-level tokenization, JSONL I/O, synthetic corpora.

A dialogue instance is the attackable unit: the persona and chat history are
frozen context, the current utterance is the only text an attacker may edit,
and the references are the responses the victim is scored against.
"""
from __future__ import annotations

import json
import re
import warnings
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import ConfigError, CorpusLineWarning, EmptyUtterance, ParseError, SchemaError

# A token is a run of alphanumerics, a clitic ("'s", "'t", ...), or a single
# punctuation character. Case is preserved.
_TOKEN_RE = re.compile(r"[A-Za-z0-9]+|'[A-Za-z]+|[^\sA-Za-z0-9]")


@dataclass
class TokenizedSentence:
    tokens: list[str]
    raw: str

    def __len__(self) -> int:
        return len(self.tokens)

    @property
    def text(self) -> str:
        return self.raw


def tokenize(raw: str) -> TokenizedSentence:
    """Split a sentence into word tokens; punctuation becomes its own token.

    Raises EmptyUtterance when nothing survives the split.
    """
    tokens = _TOKEN_RE.findall(raw)
    if not tokens:
        raise EmptyUtterance(f"no tokens in {raw!r}")
    return TokenizedSentence(tokens=tokens, raw=raw)


def detokenize(tokens: list[str]) -> str:
    """Join tokens back into text. Round-trips on tokens, not whitespace."""
    parts: list[str] = []
    for tok in tokens:
        if parts and (tok.startswith("'") or not any(ch.isalnum() for ch in tok)):
            parts[-1] += tok
        else:
            parts.append(tok)
    return " ".join(parts)


@dataclass
class DialogueInstance:
    """One attackable turn: (persona, history, current utterance, references)."""

    persona: list[str]
    history: list[str]
    utterance: str
    references: list[str]

    def check(self) -> None:
        if not self.references:
            raise SchemaError("references must be non-empty")
        tokenize(self.utterance)  # raises EmptyUtterance

    def to_record(self) -> dict:
        return {
            "persona": list(self.persona),
            "history": list(self.history),
            "utterance": self.utterance,
            "references": list(self.references),
        }


_REQUIRED_FIELDS = ("utterance", "references")


def _instance_from_record(record: dict, line: int | None = None) -> DialogueInstance:
    if not isinstance(record, dict):
        raise SchemaError("record is not a JSON object", line)
    for key in _REQUIRED_FIELDS:
        if key not in record:
            raise SchemaError(f"missing required field {key!r}", line)
    persona = record.get("persona", [])
    history = record.get("history", [])
    utterance = record["utterance"]
    references = record["references"]
    if not isinstance(utterance, str):
        raise SchemaError("utterance must be a string", line)
    for name, value in (("persona", persona), ("history", history), ("references", references)):
        if not (isinstance(value, list) and all(isinstance(x, str) for x in value)):
            raise SchemaError(f"{name} must be a list of strings", line)
    if not references:
        raise SchemaError("references must be non-empty", line)
    inst = DialogueInstance(persona=persona, history=history, utterance=utterance, references=references)
    try:
        inst.check()
    except EmptyUtterance:
        raise SchemaError("utterance has no tokens", line)
    return inst


def load_jsonl(path: str | Path, strict: bool = True) -> list[DialogueInstance]:
    """Load dialogue instances, one JSON object per line.

    With strict=True any bad line raises ParseError/SchemaError carrying its
    line number; otherwise bad lines are skipped with a CorpusLineWarning.
    """
    instances: list[DialogueInstance] = []
    with open(path, encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, start=1):
            raw = raw.strip()
            if not raw:
                continue
            try:
                try:
                    record = json.loads(raw)
                except json.JSONDecodeError as exc:
                    raise ParseError(str(exc), lineno)
                instances.append(_instance_from_record(record, lineno))
            except (ParseError, SchemaError) as exc:
                if strict:
                    raise
                warnings.warn(f"skipping bad line: {exc}", CorpusLineWarning, stacklevel=2)
    return instances


def write_jsonl(instances: list[DialogueInstance], path: str | Path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for inst in instances:
            fh.write(json.dumps(inst.to_record(), ensure_ascii=False) + "\n")


@dataclass
class CorpusSpec:
    """Recipe for a deterministic synthetic corpus; equal specs give equal bytes."""

    seed: int
    num_dialogues: int
    turns_per_dialogue: int = 3
    template_grammar: str = "chitchat-v1"

    def __post_init__(self):
        if self.num_dialogues < 1 or self.turns_per_dialogue < 1:
            raise ConfigError("num_dialogues and turns_per_dialogue must be >= 1")


# ---------------------------------------------------------------------------
# The "chitchat-v1" template grammar: short topic/preference exchanges whose
# responses are deterministic functions of the utterance, so a small model can
# learn the mapping. Each category lists (words used by templates, extra
# synonyms that only exist in the perturbation vocabulary).
# ---------------------------------------------------------------------------

_CHITCHAT_GROUPS: dict[str, tuple[list[str], list[str]]] = {
    "verb_like": (["like", "love", "enjoy"], ["adore", "fancy", "favor"]),
    "verb_dislike": (["hate", "dislike"], ["despise", "detest"]),
    "food": (
        ["fish", "pasta", "pizza", "salad", "soup", "bread", "cheese", "steak", "cake", "rice"],
        ["noodles", "stew", "curry", "toast"],
    ),
    "animal": (["dogs", "cats", "birds", "horses", "rabbits", "turtles"], ["puppies", "kittens", "ponies"]),
    "sport": (["soccer", "tennis", "chess", "swimming", "running", "golf"], ["rugby", "cricket"]),
    "music": (["jazz", "rock", "blues", "opera", "folk", "reggae"], ["funk", "soul"]),
    "hobby": (["reading", "cooking", "painting", "hiking", "gardening", "camping"], ["baking", "knitting"]),
    "quality_good": (["great", "nice", "lovely", "fine"], ["wonderful", "pleasant"]),
    "quality_bad": (["awful", "boring"], ["dreadful", "tedious"]),
}

_TOPIC_OF = {"food": "food", "animal": "animals", "sport": "sports", "music": "music", "hobby": "hobbies"}
_NOUN_CATEGORIES = tuple(_TOPIC_OF)


def _good_quality_for(noun: str) -> str:
    words = _CHITCHAT_GROUPS["quality_good"][0]
    return words[sum(noun.encode()) % len(words)]


def _is_verbose(word: str) -> bool:
    """Stable per-word bit: verbose words earn an extra clause in responses.

    Response length being a function of the content word is what makes
    generation length a real, learnable attack surface for a small model.
    """
    return (sum(word.encode()) * 31 % 97) < 40


def _chitchat_turn(rng: np.random.Generator) -> tuple[str, list[str]]:
    """Draw one (utterance, references) exchange from the template set."""
    cat = _NOUN_CATEGORIES[rng.integers(len(_NOUN_CATEGORIES))]
    nouns = _CHITCHAT_GROUPS[cat][0]
    noun = nouns[rng.integers(len(nouns))]
    topic = _TOPIC_OF[cat]
    quality = _good_quality_for(noun)
    pattern = int(rng.integers(6))
    if pattern == 0:
        utt = f"do you like {noun} ?"
        refs = [f"yes , i like {noun} a lot .", f"yes , i really like {noun} ."]
        ext = f"i could talk about {noun} all day ."
        key = noun
    elif pattern == 1:
        verbs = _CHITCHAT_GROUPS["verb_like"][0]
        verb = verbs[rng.integers(len(verbs))]
        utt = f"i {verb} {noun} ."
        refs = [f"{noun} is {quality} , i like {noun} too ."]
        ext = f"{noun} always makes my day better ."
        key = noun
    elif pattern == 2:
        verbs = _CHITCHAT_GROUPS["verb_dislike"][0]
        verb = verbs[rng.integers(len(verbs))]
        utt = f"i {verb} {noun} ."
        refs = [f"oh no , why do you {verb} {noun} ?"]
        ext = f"but {noun} is not so bad sometimes ."
        key = noun
    elif pattern == 3:
        utt = f"what is your favorite {topic} ?"
        first = nouns[0]
        refs = [f"that is hard , i would say {first} .", f"my favorite is {first} i think ."]
        ext = f"i could talk about {first} all day ."
        key = topic
    elif pattern == 4:
        utt = f"let us talk about {topic} ."
        refs = [f"sure , {topic} is a fun topic , tell me more about it ."]
        ext = f"i have many stories about {topic} ."
        key = topic
    else:
        utt = f"what do you think of {noun} ?"
        refs = [f"i think {noun} is {quality} ."]
        ext = f"{noun} reminds me of good times ."
        key = noun
    if _is_verbose(key):
        refs = [f"{r} {ext}" for r in refs]
    return utt, refs


def _chitchat_persona(rng: np.random.Generator) -> list[str]:
    cat = _NOUN_CATEGORIES[rng.integers(len(_NOUN_CATEGORIES))]
    nouns = _CHITCHAT_GROUPS[cat][0]
    noun = nouns[rng.integers(len(nouns))]
    other = nouns[rng.integers(len(nouns))]
    return [f"i like {noun} .", f"my favorite {_TOPIC_OF[cat]} is {other} ."]


def _generate_chitchat(spec: CorpusSpec) -> list[DialogueInstance]:
    rng = np.random.default_rng(spec.seed)
    instances: list[DialogueInstance] = []
    for _ in range(spec.num_dialogues):
        persona = _chitchat_persona(rng)
        history: list[str] = []
        for _ in range(spec.turns_per_dialogue):
            utterance, references = _chitchat_turn(rng)
            instances.append(
                DialogueInstance(
                    persona=list(persona),
                    history=list(history),
                    utterance=utterance,
                    references=list(references),
                )
            )
            history.extend([utterance, references[0]])
    return instances


_GRAMMARS = {"chitchat-v1": _generate_chitchat}


def generate_synthetic_corpus(spec: CorpusSpec) -> list[DialogueInstance]:
    """Deterministically expand a CorpusSpec into dialogue instances."""
    try:
        builder = _GRAMMARS[spec.template_grammar]
    except KeyError:
        raise ConfigError(f"unknown template_grammar {spec.template_grammar!r}")
    instances = builder(spec)
    for inst in instances:
        inst.check()
    return instances


def grammar_word_groups(template_grammar: str = "chitchat-v1") -> dict[str, list[str]]:
    """Word categories of a grammar (template words plus extra synonyms).

    The perturbation vocabulary is deliberately a superset of what the
    templates emit, so substitution can push a victim off-distribution.
    """
    if template_grammar not in _GRAMMARS:
        raise ConfigError(f"unknown template_grammar {template_grammar!r}")
    return {name: core + extra for name, (core, extra) in _CHITCHAT_GROUPS.items()}


def corpus_vocabulary(instances: list[DialogueInstance]) -> list[str]:
    """Sorted word types over every text field of a corpus."""
    words: set[str] = set()
    for inst in instances:
        for sentence in [*inst.persona, *inst.history, inst.utterance, *inst.references]:
            words.update(tokenize(sentence).tokens)
    return sorted(words)
