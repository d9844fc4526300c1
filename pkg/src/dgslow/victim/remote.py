"""HTTP client for victims served behind the bridge wire protocol."""
from __future__ import annotations

import numpy as np
import requests

from ..corpus import DialogueInstance, TokenizedSentence, detokenize
from ..errors import EmptyReference, ProtocolError, VictimConnectionError
from .base import (
    GenerationResult,
    GradientPair,
    ReferenceScore,
    StopLossParams,
    VictimModel,
)

PROTOCOL_VERSION = "1"


class RemoteVictim(VictimModel):
    """VictimModel backed by a remote /meta /generate /score /gradients service.

    /generate sends per-step (eos_logit, expected_logit) pairs rather than full
    logit rows, which is all the stop loss needs.
    """

    def __init__(self, endpoint_url: str, meta: dict, timeout: float, retries: int):
        super().__init__()
        self.endpoint_url = endpoint_url.rstrip("/")
        self.meta = meta
        self.timeout = timeout
        self.retries = retries

    @property
    def vocabulary(self) -> list[str]:
        return []  # open-vocabulary: the bridge model owns its subword vocab

    @property
    def max_decode_len(self) -> int:
        return int(self.meta["max_decode_len"])

    def _request(self, method: str, path: str, payload: dict | None = None) -> dict:
        url = f"{self.endpoint_url}{path}"
        last_error: Exception | None = None
        for _ in range(self.retries + 1):
            try:
                if method == "GET":
                    response = requests.get(url, timeout=self.timeout)
                else:
                    response = requests.post(url, json=payload, timeout=self.timeout)
                response.raise_for_status()
                return response.json()
            except (requests.ConnectionError, requests.Timeout) as exc:
                last_error = exc
        raise VictimConnectionError(f"{method} {url} failed: {last_error}", retries=self.retries)

    def _body(self, instance: DialogueInstance, override: TokenizedSentence | None) -> dict:
        return {
            "persona": list(instance.persona),
            "history": list(instance.history),
            "utterance": detokenize(override.tokens) if override is not None else instance.utterance,
        }

    def generate(self, instance, utterance_override=None) -> GenerationResult:
        data = self._request("POST", "/generate", self._body(instance, utterance_override))
        try:
            result = GenerationResult(
                tokens=list(data["tokens"]),
                steps=None,
                ended_by_eos=bool(data["ended_by_eos"]),
                eos_stats=[(float(s["eos_logit"]), float(s["expected_logit"])) for s in data["steps"]],
            )
        except (KeyError, TypeError) as exc:
            raise ProtocolError(f"malformed /generate response: {exc}")
        self.query_count += 1
        return result

    def score_reference(self, instance, utterance_override, reference: str) -> ReferenceScore:
        if not reference.strip():
            raise EmptyReference("reference has no tokens")
        body = self._body(instance, utterance_override) | {"reference": reference}
        data = self._request("POST", "/score", body)
        try:
            probs = np.asarray(data["token_probs"], dtype=float)
        except (KeyError, TypeError) as exc:
            raise ProtocolError(f"malformed /score response: {exc}")
        self.query_count += 1
        return ReferenceScore(token_probs=probs, logit_rows=None)

    def gradients(self, instance, utterance_override, reference: str,
                  stop_loss_params: StopLossParams | None = None) -> GradientPair:
        if not reference.strip():
            raise EmptyReference("reference has no tokens")
        body = self._body(instance, utterance_override) | {"reference": reference}
        data = self._request("POST", "/gradients", body)
        try:
            g_ll = np.asarray(data["g_ll"], dtype=float)
            g_stop = np.asarray(data["g_stop"], dtype=float)
        except (KeyError, TypeError) as exc:
            raise ProtocolError(f"malformed /gradients response: {exc}")
        if g_ll.shape != g_stop.shape or g_ll.ndim != 2:
            raise ProtocolError(f"gradient shapes {g_ll.shape} vs {g_stop.shape}")
        self.query_count += 1
        return GradientPair(g_ll=g_ll, g_stop=g_stop)


def connect_remote(endpoint_url: str, timeout: float = 30.0, retries: int = 2) -> RemoteVictim:
    """Handshake with a bridge endpoint and return a conforming victim."""
    probe = RemoteVictim(endpoint_url, meta={}, timeout=timeout, retries=retries)
    meta = probe._request("GET", "/meta")
    version = str(meta.get("protocol_version"))
    if version != PROTOCOL_VERSION:
        raise ProtocolError(f"unsupported protocol version {version!r}", version=version)
    for key in ("model_name", "vocab_size", "embed_dim", "max_decode_len"):
        if key not in meta:
            raise ProtocolError(f"/meta is missing {key!r}")
    probe.meta = meta
    return probe
