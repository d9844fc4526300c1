"""Ablation benchmark: random vs greedy vs adaptive search, with and without
the multi-objective gradient and the combined fitness.

Mirrors the ablation matrix: rs/gs disable both components and force one
selection mode; dgslow1..3 toggle the components under the adaptive schedule;
dgslow is the full method. Expect ASR to order rs < gs <= dgslow.
"""
import numpy as np

from dgslow import (
    AntonymLexicon,
    AttackConfig,
    CorpusSpec,
    PerturbationPipeline,
    RuleGrammarChecker,
    SentenceEncoder,
    StaticNeighborGenerator,
    StaticWordEmbeddings,
    ToyVictim,
    ToyVictimConfig,
    attack_all,
    generate_synthetic_corpus,
    grammar_word_groups,
)

N = 40  # instances to attack; bump for tighter estimates

corpus = generate_synthetic_corpus(CorpusSpec(seed=11, num_dialogues=120, turns_per_dialogue=3))
victim = ToyVictim.build(corpus, ToyVictimConfig(train_epochs=30, learning_rate=0.008, seed=0))
victim.train(corpus[:300])
instances = corpus[300 : 300 + N]

embeddings = StaticWordEmbeddings.from_categories(grammar_word_groups(), dim=32, seed=7)
pipeline = PerturbationPipeline(
    generator=StaticNeighborGenerator(embeddings, AntonymLexicon.builtin()),
    encoder=SentenceEncoder(embeddings),
    checker=RuleGrammarChecker(),
)

print(f"{'method':<8s} {'MO':<3s} {'CF':<3s} {'GL':>6s} {'BLEU':>7s} {'ROU.':>7s} {'ASR':>6s} {'Cos.':>6s}")
for name in ("rs", "gs", "dgslow1", "dgslow2", "dgslow3", "dgslow"):
    config = AttackConfig.preset(name)
    outs = attack_all(instances, victim, config, pipeline, seed=1000)
    row = (
        np.mean([o.gl_after for o in outs]),
        np.mean([o.scores_after.bleu for o in outs]),
        np.mean([o.scores_after.rouge_l for o in outs]),
        np.mean([o.success for o in outs]),
        np.mean([o.cosine for o in outs]),
    )
    mo, cf = ("x" if config.use_mo else " "), ("x" if config.use_cf else " ")
    print(f"{name:<8s} {mo:<3s} {cf:<3s} {row[0]:6.2f} {row[1]:7.4f} {row[2]:7.4f} {row[3]:6.2f} {row[4]:6.3f}")

print(f"\n(unattacked GL on this slice is ~{np.mean([len(victim.generate(i).tokens) for i in instances]):.2f})")
