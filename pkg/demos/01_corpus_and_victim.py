"""Build a synthetic dialogue corpus and train the toy victim on it.

The corpus is a pure function of its spec: same seed, same bytes. The victim
is a tiny attention encoder-decoder written in numpy; after a few epochs it
echoes content words and reproduces the response templates, including the
longer variants some content words trigger.
"""
from dgslow import (
    CorpusSpec,
    ToyVictim,
    ToyVictimConfig,
    generate_synthetic_corpus,
    mean_reference_confidence,
)

corpus = generate_synthetic_corpus(CorpusSpec(seed=11, num_dialogues=60, turns_per_dialogue=3))
train, held = corpus[:150], corpus[150:]
print(f"{len(corpus)} instances; one of them:")
inst = corpus[4]
print(f"  persona   : {inst.persona}")
print(f"  history   : {inst.history[:2]}...")
print(f"  utterance : {inst.utterance}")
print(f"  references: {inst.references}")

config = ToyVictimConfig(train_epochs=20, learning_rate=0.008, seed=0)
victim = ToyVictim.build(corpus, config)
print(f"\nvocabulary size {len(victim.vocabulary)}; training on {len(train)} instances...")
untrained_tc = mean_reference_confidence(victim, held)
loss = victim.train(train)
trained_tc = mean_reference_confidence(victim, held)
print(f"final loss {loss:.3f}; held-out mean TC {untrained_tc:.3f} -> {trained_tc:.3f}")

print("\nheld-out generations (greedy, deterministic):")
for inst in held[:4]:
    gen = victim.generate(inst)
    print(f"  B: {inst.utterance}")
    print(f"  A: {' '.join(gen.tokens)}   (GL={len(gen.tokens)}, eos={gen.ended_by_eos})")
