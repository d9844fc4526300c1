"""One attack, narrated: beams, schedule, and the final adversarial input.

Watch the adaptive schedule: the first iteration is always greedy (xi=0); as
iterations accumulate and candidates stay semantically close, xi grows past
delta and selection flips to uniform random to escape local optima.
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
    attack,
    generate_synthetic_corpus,
    grammar_word_groups,
)

corpus = generate_synthetic_corpus(CorpusSpec(seed=11, num_dialogues=60, turns_per_dialogue=3))
victim = ToyVictim.build(corpus, ToyVictimConfig(train_epochs=20, learning_rate=0.008, seed=0))
victim.train(corpus[:150])

embeddings = StaticWordEmbeddings.from_categories(grammar_word_groups(), dim=32, seed=7)
pipeline = PerturbationPipeline(
    generator=StaticNeighborGenerator(embeddings, AntonymLexicon.builtin()),
    encoder=SentenceEncoder(embeddings),
    checker=RuleGrammarChecker(),
)

instance = corpus[160]
outcome = attack(instance, victim, AttackConfig(), pipeline, np.random.default_rng(3))

print(f"original input : {outcome.original_input}")
print(f"original output: {' '.join(outcome.original_output)}  (GL={outcome.gl_before})")
print("\nper-iteration schedule:")
for tr in outcome.trace:
    print(f"  t={tr.t}  |V_t|={tr.n_valid:<4d} q_t={tr.q:.3f}  xi_t={tr.xi:.3f}  mode={tr.mode:<6s} "
          f"queries={tr.queries_used}")
print(f"\nadversarial input : {outcome.adversarial_input}")
print(f"adversarial output: {' '.join(outcome.adversarial_output)}  (GL={outcome.gl_after})")
print(f"\nTC {outcome.tc_before:.3f} -> {outcome.tc_after:.3f}   cosine {outcome.cosine:.3f}   "
      f"metric drop {outcome.record.metric_drop:.3f}")
print(f"perturbed positions {outcome.perturbed_positions}  queries {outcome.queries_used}  "
      f"success={outcome.success}")
