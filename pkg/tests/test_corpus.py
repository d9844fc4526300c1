import json

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from dgslow.corpus import (
    CorpusSpec,
    DialogueInstance,
    corpus_vocabulary,
    detokenize,
    generate_synthetic_corpus,
    grammar_word_groups,
    load_jsonl,
    tokenize,
    write_jsonl,
)
from dgslow.errors import ConfigError, CorpusLineWarning, EmptyUtterance, ParseError, SchemaError

# 20-sentence fixture pinning the splitting rules.
TOKENIZE_FIXTURE = [
    ("I love fish.", ["I", "love", "fish", "."]),
    ("Let's talk", ["Let", "'s", "talk"]),
    ("don't do that!", ["don", "'t", "do", "that", "!"]),
    ("hello, world", ["hello", ",", "world"]),
    ("what?!", ["what", "?", "!"]),
    ("a b c", ["a", "b", "c"]),
    ("it's a co-op", ["it", "'s", "a", "co", "-", "op"]),
    ("3.5 miles", ["3", ".", "5", "miles"]),
    ("(hi)", ["(", "hi", ")"]),
    ("yes...", ["yes", ".", ".", "."]),
    ("I'm fine", ["I", "'m", "fine"]),
    ("one  two", ["one", "two"]),
    ("semi;colon", ["semi", ";", "colon"]),
    ("tabs\tcount", ["tabs", "count"]),
    ("UPPER lower", ["UPPER", "lower"]),
    ("42", ["42"]),
    ("x2 go", ["x2", "go"]),
    ("he said: go", ["he", "said", ":", "go"]),
    ("a-1", ["a", "-", "1"]),
    ("end .", ["end", "."]),
]

_WORDS = st.sampled_from(
    ["i", "like", "fish", "dogs", "soccer", "Let", "don", "hello", "a", "an", "the", "42", "x2"]
)
_PUNCT = st.sampled_from([".", ",", "?", "!", "'s", "'t", "-", "(", ")"])


class TestTokenize:
    @pytest.mark.parametrize("raw,expected", TOKENIZE_FIXTURE)
    def test_fixture(self, raw, expected):
        assert tokenize(raw).tokens == expected

    def test_empty_raises(self):
        with pytest.raises(EmptyUtterance):
            tokenize("")
        with pytest.raises(EmptyUtterance):
            tokenize("   ")

    def test_raw_preserved(self):
        s = tokenize("I love fish.")
        assert s.raw == "I love fish."

    @pytest.mark.parametrize("raw,_", TOKENIZE_FIXTURE)
    def test_roundtrip_on_fixture(self, raw, _):
        tokens = tokenize(raw).tokens
        assert tokenize(detokenize(tokens)).tokens == tokens

    @given(st.lists(st.one_of(_WORDS, _PUNCT), min_size=1, max_size=12))
    @settings(max_examples=200)
    def test_roundtrip_property(self, tokens):
        # canonicalize through one tokenize pass, then round-trip must be exact
        canonical = tokenize(detokenize(tokens)).tokens
        assert tokenize(detokenize(canonical)).tokens == canonical


class TestJsonl:
    RECORD = {"persona": ["i like irc"], "history": [], "utterance": "hi", "references": ["hello"]}

    def test_load_single(self, tmp_path):
        path = tmp_path / "c.jsonl"
        path.write_text(json.dumps(self.RECORD) + "\n")
        insts = load_jsonl(path)
        assert len(insts) == 1
        assert insts[0].persona == ["i like irc"]
        assert insts[0].utterance == "hi"

    def test_missing_references(self, tmp_path):
        bad = {k: v for k, v in self.RECORD.items() if k != "references"}
        path = tmp_path / "c.jsonl"
        path.write_text(json.dumps(bad) + "\n")
        with pytest.raises(SchemaError) as err:
            load_jsonl(path)
        assert err.value.line == 1

    def test_malformed_line(self, tmp_path):
        path = tmp_path / "c.jsonl"
        path.write_text(json.dumps(self.RECORD) + "\n{oops\n")
        with pytest.raises(ParseError) as err:
            load_jsonl(path)
        assert err.value.line == 2

    def test_non_strict_skips_with_warning(self, tmp_path):
        path = tmp_path / "c.jsonl"
        lines = [json.dumps(self.RECORD), "{bad json", json.dumps(self.RECORD)]
        path.write_text("\n".join(lines) + "\n")
        with pytest.warns(CorpusLineWarning):
            insts = load_jsonl(path, strict=False)
        assert len(insts) == 2

    def test_write_load_roundtrip(self, tmp_path):
        insts = generate_synthetic_corpus(CorpusSpec(seed=5, num_dialogues=4, turns_per_dialogue=2))
        path = tmp_path / "c.jsonl"
        write_jsonl(insts, path)
        assert load_jsonl(path) == insts

    def test_writer_key_order(self, tmp_path):
        path = tmp_path / "c.jsonl"
        write_jsonl([DialogueInstance(**self.RECORD)], path)
        keys = list(json.loads(path.read_text().splitlines()[0]).keys())
        assert keys == ["persona", "history", "utterance", "references"]


class TestSyntheticCorpus:
    def test_determinism(self):
        spec = CorpusSpec(seed=1, num_dialogues=10)
        assert generate_synthetic_corpus(spec) == generate_synthetic_corpus(spec)

    def test_seed_changes_corpus(self):
        a = generate_synthetic_corpus(CorpusSpec(seed=1, num_dialogues=10))
        b = generate_synthetic_corpus(CorpusSpec(seed=2, num_dialogues=10))
        assert a != b

    def test_counts(self):
        insts = generate_synthetic_corpus(CorpusSpec(seed=3, num_dialogues=100, turns_per_dialogue=4))
        assert len(insts) == 400

    def test_unknown_grammar(self):
        with pytest.raises(ConfigError):
            generate_synthetic_corpus(CorpusSpec(seed=1, num_dialogues=1, template_grammar="nope"))

    def test_invalid_spec(self):
        with pytest.raises(ConfigError):
            CorpusSpec(seed=1, num_dialogues=0)

    def test_instance_invariants(self):
        insts = generate_synthetic_corpus(CorpusSpec(seed=9, num_dialogues=30, turns_per_dialogue=3))
        for i, inst in enumerate(insts):
            inst.check()
            assert inst.references
            assert len(tokenize(inst.utterance).tokens) <= 15
            # first turn of each dialogue has empty history
            if i % 3 == 0:
                assert inst.history == []

    def test_vocabulary_bounded(self):
        insts = generate_synthetic_corpus(CorpusSpec(seed=7, num_dialogues=200, turns_per_dialogue=4))
        assert len(corpus_vocabulary(insts)) <= 500

    def test_word_groups_cover_templates(self):
        groups = grammar_word_groups()
        assert "fish" in groups["food"]
        assert "adore" in groups["verb_like"]  # synonym outside the template vocabulary
        with pytest.raises(ConfigError):
            grammar_word_groups("nope")
