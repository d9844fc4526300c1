"""Shared fixtures: the frozen benchmark corpus, a trained victim, pipeline.

The victim is trained once per session and cached as a checkpoint; the
acceptance benchmark (3 strategies x 100 instances) also runs once and is
shared by every test that needs full attack outcomes.
"""
import time

import pytest

from dgslow.corpus import CorpusSpec, generate_synthetic_corpus, grammar_word_groups
from dgslow.perturber import (
    AntonymLexicon,
    RuleGrammarChecker,
    SentenceEncoder,
    StaticNeighborGenerator,
    StaticWordEmbeddings,
)
from dgslow.search import AttackConfig, PerturbationPipeline, attack_all
from dgslow.victim import ToyVictim, ToyVictimConfig

# Frozen benchmark fixture: calibrated once, pinned. Tests assert against
# behavior of exactly this corpus/victim/embedding combination.
CORPUS_SPEC = CorpusSpec(seed=11, num_dialogues=150, turns_per_dialogue=3)
TRAIN_SLICE = slice(0, 350)
ATTACK_SLICE = slice(350, 450)
VICTIM_CONFIG = ToyVictimConfig(
    embed_dim=32, hidden_dim=48, max_decode_len=24, train_epochs=30, learning_rate=0.008, seed=0
)
EMBEDDING_SEED = 7
BENCHMARK_SEED = 1000


@pytest.fixture(scope="session")
def fixture_corpus():
    return generate_synthetic_corpus(CORPUS_SPEC)


@pytest.fixture(scope="session")
def victim_checkpoint(fixture_corpus, tmp_path_factory):
    path = tmp_path_factory.mktemp("victim") / "victim.json"
    victim = ToyVictim.build(fixture_corpus, VICTIM_CONFIG)
    victim.train(fixture_corpus[TRAIN_SLICE])
    victim.save(path)
    return path


@pytest.fixture(scope="session")
def trained_victim(victim_checkpoint):
    return ToyVictim.load(victim_checkpoint)


@pytest.fixture(scope="session")
def embeddings():
    return StaticWordEmbeddings.from_categories(grammar_word_groups(), dim=32, seed=EMBEDDING_SEED)


@pytest.fixture(scope="session")
def pipeline(embeddings):
    return PerturbationPipeline(
        generator=StaticNeighborGenerator(embeddings, AntonymLexicon.builtin()),
        encoder=SentenceEncoder(embeddings),
        checker=RuleGrammarChecker(),
    )


@pytest.fixture(scope="session")
def attack_instances(fixture_corpus):
    return fixture_corpus[ATTACK_SLICE]


@pytest.fixture(scope="session")
def benchmark_runs(attack_instances, trained_victim, pipeline):
    """rs/gs/dgslow outcomes over the 100 frozen instances, default config."""
    runs = {}
    t0 = time.time()
    for name in ("rs", "gs", "dgslow"):
        victim = trained_victim
        runs[name] = attack_all(
            attack_instances, victim, AttackConfig.preset(name), pipeline, seed=BENCHMARK_SEED
        )
    runs["elapsed"] = time.time() - t0
    return runs
