"""Fixtures: a tiny locally-built causal-LM checkpoint and a live bridge server.

No hub access is assumed anywhere: the tokenizer is trained on the spot and
the model is randomly initialized from a pinned seed, then saved and reloaded
through the same code path a downloaded checkpoint would use.
"""
import threading
import time

import pytest
import torch
import uvicorn
from tokenizers import Tokenizer, decoders, models, pre_tokenizers, trainers
from transformers import GPT2Config, GPT2LMHeadModel, PreTrainedTokenizerFast

from dgslow_bridge.model import BridgeConfig, BridgeModel
from dgslow_bridge.server import create_app

SAMPLE_TEXT = [
    "i like fish . do you like dogs ? yes , i like dogs a lot .",
    "let us talk about food . sure , food is a fun topic , tell me more about it .",
    "what is your favorite sport ? that is hard , i would say soccer .",
    "i hate jazz . oh no , why do you hate jazz ?",
    "my favorite animals are cats . i could talk about cats all day .",
]


def build_tiny_checkpoint(directory, seed=3):
    tok = Tokenizer(models.BPE(unk_token=None))
    tok.pre_tokenizer = pre_tokenizers.ByteLevel(add_prefix_space=False)
    tok.decoder = decoders.ByteLevel()
    trainer = trainers.BpeTrainer(
        vocab_size=400,
        special_tokens=["<eos>", "[PS]", "[SEP]"],
        initial_alphabet=pre_tokenizers.ByteLevel.alphabet(),
    )
    tok.train_from_iterator(SAMPLE_TEXT * 20, trainer)
    fast = PreTrainedTokenizerFast(
        tokenizer_object=tok,
        eos_token="<eos>",
        pad_token="<eos>",
        additional_special_tokens=["[PS]", "[SEP]"],
    )
    torch.manual_seed(seed)
    config = GPT2Config(
        vocab_size=len(fast),
        n_positions=256,
        n_embd=32,
        n_layer=2,
        n_head=2,
        bos_token_id=fast.eos_token_id,
        eos_token_id=fast.eos_token_id,
    )
    model = GPT2LMHeadModel(config)
    model.save_pretrained(directory)
    fast.save_pretrained(directory)
    return directory


@pytest.fixture(scope="session")
def checkpoint_dir(tmp_path_factory):
    return build_tiny_checkpoint(tmp_path_factory.mktemp("ckpt"))


@pytest.fixture(scope="session")
def bridge_model(checkpoint_dir):
    return BridgeModel(BridgeConfig(model=str(checkpoint_dir), max_decode_len=12))


def start_server(app):
    config = uvicorn.Config(app, host="127.0.0.1", port=0, log_level="error")
    server = uvicorn.Server(config)
    thread = threading.Thread(target=server.run, daemon=True)
    thread.start()
    deadline = time.time() + 15
    while not server.started:
        if time.time() > deadline:
            raise RuntimeError("bridge server did not start")
        time.sleep(0.05)
    port = server.servers[0].sockets[0].getsockname()[1]
    return server, thread, f"http://127.0.0.1:{port}"


@pytest.fixture(scope="session")
def live_bridge(bridge_model):
    server, thread, url = start_server(create_app(bridge_model))
    yield url
    server.should_exit = True
    thread.join(timeout=5)
