"""Attack a transformer through the HTTP bridge instead of the toy victim.

Spins up the bridge in-process around a tiny randomly-initialized GPT-2-style
checkpoint (no downloads), connects the engine's remote client to it, and runs
one attack. A random model shows the mechanics, not meaningful degradation;
point --model at a real dialogue checkpoint for that.

Requires the bridge extras: pip install -e bridge --no-build-isolation
"""
import sys
import tempfile
import threading
import time

import numpy as np

try:
    import torch
    import uvicorn
    from tokenizers import Tokenizer, decoders, models, pre_tokenizers, trainers
    from transformers import GPT2Config, GPT2LMHeadModel, PreTrainedTokenizerFast

    from dgslow_bridge.model import BridgeConfig, BridgeModel
    from dgslow_bridge.server import create_app
except ImportError as exc:
    sys.exit(f"bridge dependencies missing ({exc}); install with: pip install -e bridge --no-build-isolation")

from dgslow import (
    AntonymLexicon,
    AttackConfig,
    CorpusSpec,
    PerturbationPipeline,
    RuleGrammarChecker,
    SentenceEncoder,
    StaticNeighborGenerator,
    StaticWordEmbeddings,
    attack,
    connect_remote,
    generate_synthetic_corpus,
    grammar_word_groups,
)

# -- build a tiny local checkpoint ------------------------------------------
corpus = generate_synthetic_corpus(CorpusSpec(seed=11, num_dialogues=20, turns_per_dialogue=2))
text = [f"{i.utterance} {i.references[0]}" for i in corpus]
tok = Tokenizer(models.BPE(unk_token=None))
tok.pre_tokenizer = pre_tokenizers.ByteLevel(add_prefix_space=False)
tok.decoder = decoders.ByteLevel()
tok.train_from_iterator(
    text * 10,
    trainers.BpeTrainer(vocab_size=400, special_tokens=["<eos>", "[PS]", "[SEP]"],
                        initial_alphabet=pre_tokenizers.ByteLevel.alphabet()),
)
fast = PreTrainedTokenizerFast(tokenizer_object=tok, eos_token="<eos>", pad_token="<eos>",
                               additional_special_tokens=["[PS]", "[SEP]"])
torch.manual_seed(0)
checkpoint = tempfile.mkdtemp(prefix="tiny-ckpt-")
GPT2LMHeadModel(
    GPT2Config(vocab_size=len(fast), n_positions=256, n_embd=32, n_layer=2, n_head=2,
               bos_token_id=fast.eos_token_id, eos_token_id=fast.eos_token_id)
).save_pretrained(checkpoint)
fast.save_pretrained(checkpoint)
print(f"built tiny checkpoint at {checkpoint}")

# -- serve it ------------------------------------------------------------------
server = uvicorn.Server(uvicorn.Config(
    create_app(BridgeModel(BridgeConfig(model=checkpoint, max_decode_len=16))),
    host="127.0.0.1", port=0, log_level="error",
))
threading.Thread(target=server.run, daemon=True).start()
while not server.started:
    time.sleep(0.05)
url = f"http://127.0.0.1:{server.servers[0].sockets[0].getsockname()[1]}"
print(f"bridge listening at {url}")

# -- attack through the wire -----------------------------------------------------
victim = connect_remote(url)
print(f"handshake ok: {victim.meta['model_name']} (vocab {victim.meta['vocab_size']})")

embeddings = StaticWordEmbeddings.from_categories(grammar_word_groups(), dim=32, seed=7)
pipeline = PerturbationPipeline(
    generator=StaticNeighborGenerator(embeddings, AntonymLexicon.builtin()),
    encoder=SentenceEncoder(embeddings),
    checker=RuleGrammarChecker(),
)
outcome = attack(corpus[5], victim, AttackConfig(c=8, T=2, query_budget=120), pipeline,
                 np.random.default_rng(0))
print(f"\noriginal    : {outcome.original_input}  (GL={outcome.gl_before})")
print(f"adversarial : {outcome.adversarial_input}  (GL={outcome.gl_after})")
print(f"queries {outcome.queries_used}, cosine {outcome.cosine:.3f}, success={outcome.success}")
server.should_exit = True
