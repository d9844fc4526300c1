"""The two attack objectives, their Pareto-stationary blend, and word saliency.

The accuracy objective is the summed log-likelihood of the reference; the
length objective is an EOS-margin loss plus a semantic hinge. Their gradients
with respect to the input embedding rows get combined at the min-norm convex
combination, then pooled per position into saliency scores that rank where to
perturb.
"""
import numpy as np

from dgslow import (
    CorpusSpec,
    ToyVictim,
    ToyVictimConfig,
    evaluate_objectives,
    generate_synthetic_corpus,
    serialize_input,
    solve_pareto,
    tokenize,
    word_saliency,
)

corpus = generate_synthetic_corpus(CorpusSpec(seed=11, num_dialogues=60, turns_per_dialogue=3))
victim = ToyVictim.build(corpus, ToyVictimConfig(train_epochs=20, learning_rate=0.008, seed=0))
victim.train(corpus[:150])

inst = corpus[151]
reference = inst.references[0]
gen = victim.generate(inst)
score = victim.score_reference(inst, None, reference)
values = evaluate_objectives(gen, score, rho=1.0, eps=0.7, beta=1.0, eos_token_id=victim.eos_id)
print(f"utterance : {inst.utterance}")
print(f"reference : {reference}")
print(f"objectives: TC={values.tc:.3f} GL={values.gl} L_ll={values.l_ll:.3f} "
      f"L_eos={values.l_eos:.3f} L_reg={values.l_reg:.3f} L_stop={values.l_stop:.3f}")

pair = victim.gradients(inst, None, reference)
solution = solve_pareto(pair.g_ll, pair.g_stop)
print(f"\nPareto weights alpha={solution.alpha[0]:.4f}/{solution.alpha[1]:.4f}  lambda={solution.lam:.4f}")
print(f"norms: |g_ll|={np.linalg.norm(pair.g_ll):.4f} |g_stop|={np.linalg.norm(pair.g_stop):.4f} "
      f"|g|={np.linalg.norm(solution.combined_gradient):.4f}  (min-norm, never larger than either)")

span = serialize_input(inst).utterance_span
ranking = word_saliency(solution.combined_gradient, span)
words = tokenize(inst.utterance).tokens
print("\nsaliency over utterance positions (most attackable first):")
for pos in ranking.order:
    print(f"  {words[pos]:<12s} {ranking.scores[pos]:.5f}")
