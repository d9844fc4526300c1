"""Model wrapper: greedy decoding, reference scoring, word-pooled gradients.

Supports causal-LM and seq2seq-LM checkpoints. All word-level structure comes
from the wire serialization; subword gradient rows are mean-pooled onto word
positions using spans recorded while encoding word by word.
"""
from __future__ import annotations

from dataclasses import dataclass

import torch
import torch.nn.functional as F
from transformers import AutoConfig, AutoModelForCausalLM, AutoModelForSeq2SeqLM, AutoTokenizer

from .serialization import PS_TOKEN, SEP_TOKEN, serialize_words, word_tokenize


class BridgeStartupError(RuntimeError):
    """The checkpoint cannot serve the victim contract."""


@dataclass
class BridgeConfig:
    model: str
    device: str = "cpu"
    max_decode_len: int = 24
    port: int = 8787
    host: str = "127.0.0.1"


@dataclass
class GenerateOutput:
    words: list[str]
    text: str
    steps: list[dict]
    ended_by_eos: bool
    logit_rows: list[list[float]] | None = None


class BridgeModel:
    def __init__(self, config: BridgeConfig):
        self.config = config
        model_config = AutoConfig.from_pretrained(config.model)
        self.is_seq2seq = bool(getattr(model_config, "is_encoder_decoder", False))
        loader = AutoModelForSeq2SeqLM if self.is_seq2seq else AutoModelForCausalLM
        try:
            self.model = loader.from_pretrained(config.model)
        except (ValueError, OSError) as exc:
            raise BridgeStartupError(f"model head unsupported for generation: {exc}")
        self.tokenizer = AutoTokenizer.from_pretrained(config.model)
        specials = [t for t in (PS_TOKEN, SEP_TOKEN) if t not in self.tokenizer.get_vocab()]
        if specials:
            self.tokenizer.add_special_tokens({"additional_special_tokens": specials})
            self.model.resize_token_embeddings(len(self.tokenizer))
        if self.tokenizer.eos_token_id is None:
            raise BridgeStartupError("tokenizer has no EOS token; greedy decoding cannot terminate")
        self.eos_id = self.tokenizer.eos_token_id
        self.model.to(config.device)
        self.model.eval()
        self.embed_dim = int(self.model.get_input_embeddings().weight.shape[1])
        self.special_ids = set(self.tokenizer.all_special_ids)
        self.special_words = {PS_TOKEN, SEP_TOKEN}

    @property
    def name(self) -> str:
        return str(self.config.model)

    # -- encoding --------------------------------------------------------------

    def encode_words(self, words: list[str]) -> tuple[list[int], list[tuple[int, int]]]:
        """Subword ids plus the subword span of each word, by construction."""
        ids: list[int] = []
        spans: list[tuple[int, int]] = []
        for i, word in enumerate(words):
            text = word if (i == 0 or word in self.special_words) else " " + word
            piece = self.tokenizer.encode(text, add_special_tokens=False)
            if not piece:
                piece = [self.tokenizer.eos_token_id]
            spans.append((len(ids), len(ids) + len(piece)))
            ids.extend(piece)
        return ids, spans

    def _serialized(self, persona, history, utterance):
        words, span = serialize_words(persona, history, utterance)
        ids, spans = self.encode_words(words)
        return words, span, ids, spans

    # -- greedy decoding ----------------------------------------------------------

    def _greedy_rows(self, input_ids: list[int]) -> tuple[list[int], list[torch.Tensor], bool]:
        """Greedy decode; returns (generated ids sans EOS, per-step logit rows, ended)."""
        device = self.config.device
        gen: list[int] = []
        rows: list[torch.Tensor] = []
        ended = False
        with torch.no_grad():
            if self.is_seq2seq:
                encoder_ids = torch.tensor([input_ids], device=device)
                start = self.model.config.decoder_start_token_id
                if start is None:
                    start = self.eos_id
                dec = [start]
                for _ in range(self.config.max_decode_len):
                    out = self.model(input_ids=encoder_ids, decoder_input_ids=torch.tensor([dec], device=device))
                    row = out.logits[0, -1].float()
                    rows.append(row)
                    nxt = int(row.argmax())
                    if nxt == self.eos_id:
                        ended = True
                        break
                    gen.append(nxt)
                    dec.append(nxt)
            else:
                seq = list(input_ids)
                for _ in range(self.config.max_decode_len):
                    out = self.model(input_ids=torch.tensor([seq], device=device))
                    row = out.logits[0, -1].float()
                    rows.append(row)
                    nxt = int(row.argmax())
                    if nxt == self.eos_id:
                        ended = True
                        break
                    gen.append(nxt)
                    seq.append(nxt)
        return gen, rows, ended

    def generate(self, persona, history, utterance, debug: bool = False) -> GenerateOutput:
        _, _, input_ids, _ = self._serialized(persona, history, utterance)
        gen, rows, ended = self._greedy_rows(input_ids)
        text = self.tokenizer.decode(gen, skip_special_tokens=True).strip()
        steps = []
        for row in rows:
            probs = F.softmax(row, dim=-1)
            steps.append(
                {
                    "eos_logit": float(row[self.eos_id]),
                    "expected_logit": float(probs @ row),
                }
            )
        return GenerateOutput(
            words=word_tokenize(text),
            text=text,
            steps=steps,
            ended_by_eos=ended,
            logit_rows=[row.tolist() for row in rows] if debug else None,
        )

    # -- reference scoring ---------------------------------------------------------

    def _reference_logits(self, input_ids: list[int], ref_ids: list[int]) -> torch.Tensor:
        """Teacher-forced logit rows, one per reference position (differentiable)."""
        device = self.config.device
        if self.is_seq2seq:
            out = self.model(
                input_ids=torch.tensor([input_ids], device=device),
                labels=torch.tensor([ref_ids], device=device),
            )
            return out.logits[0].float()
        seq = torch.tensor([input_ids + ref_ids], device=device)
        logits = self.model(input_ids=seq).logits[0].float()
        n = len(input_ids)
        return logits[n - 1 : n - 1 + len(ref_ids)]

    def score(self, persona, history, utterance, reference: str) -> list[float]:
        _, _, input_ids, _ = self._serialized(persona, history, utterance)
        ref_ids, _ = self.encode_words(word_tokenize(reference))
        with torch.no_grad():
            logits = self._reference_logits(input_ids, ref_ids)
        probs = F.softmax(logits, dim=-1)
        return [float(probs[j, tok]) for j, tok in enumerate(ref_ids)]

    # -- gradients -----------------------------------------------------------------

    def _pool(self, grad: torch.Tensor, spans: list[tuple[int, int]]) -> list[list[float]]:
        return [grad[a:b].mean(dim=0).tolist() for a, b in spans]

    def gradients(self, persona, history, utterance, reference: str, debug: bool = False) -> dict:
        words, span, input_ids, spans = self._serialized(persona, history, utterance)
        ref_ids, _ = self.encode_words(word_tokenize(reference))
        device = self.config.device
        embedding = self.model.get_input_embeddings()
        input_tensor = torch.tensor([input_ids], device=device)

        def backward(loss_fn):
            embeds = embedding(input_tensor).detach().clone().requires_grad_(True)
            loss = loss_fn(embeds)
            loss.backward()
            return embeds.grad[0].float()

        def ll_loss(embeds):
            if self.is_seq2seq:
                out = self.model(inputs_embeds=embeds, labels=torch.tensor([ref_ids], device=device))
                logits = out.logits[0]
            else:
                ref_embeds = embedding(torch.tensor([ref_ids], device=device)).detach()
                full = torch.cat([embeds, ref_embeds], dim=1)
                n = len(input_ids)
                logits = self.model(inputs_embeds=full).logits[0][n - 1 : n - 1 + len(ref_ids)]
            logp = F.log_softmax(logits, dim=-1)
            return sum(logp[j, tok] for j, tok in enumerate(ref_ids))

        gen, rows, ended = self._greedy_rows(input_ids)
        n_steps = len(rows)

        def eos_loss(embeds):
            if self.is_seq2seq:
                start = self.model.config.decoder_start_token_id
                if start is None:
                    start = self.eos_id
                dec = torch.tensor([[start] + gen], device=device)
                logits = self.model(inputs_embeds=embeds, decoder_input_ids=dec).logits[0][:n_steps]
            else:
                if gen:
                    gen_embeds = embedding(torch.tensor([gen], device=device)).detach()
                    full = torch.cat([embeds, gen_embeds], dim=1)
                else:
                    full = embeds
                n = len(input_ids)
                logits = self.model(inputs_embeds=full).logits[0][n - 1 : n - 1 + n_steps]
            probs = F.softmax(logits, dim=-1)
            expected = (probs * logits).sum(dim=-1)
            return (logits[:, self.eos_id] - expected).sum()

        g_ll_sub = backward(ll_loss)
        g_stop_sub = backward(eos_loss)
        result = {
            "g_ll": self._pool(g_ll_sub, spans),
            "g_stop": self._pool(g_stop_sub, spans),
            "tokens": words,
            "utterance_span": list(span),
        }
        if debug:
            result["g_ll_subword"] = g_ll_sub.tolist()
            result["g_stop_subword"] = g_stop_sub.tolist()
            result["word_spans"] = [list(s) for s in spans]
        return result
