"""Victim-contract conformance checks, shared by the toy model and any bridge.

Each check raises AssertionError with a readable message; pytest can call
``check_victim_contract`` directly and remote services run the same list.
"""
from __future__ import annotations

import numpy as np

from ..corpus import DialogueInstance


def check_victim_contract(victim, instances: list[DialogueInstance]) -> list[str]:
    """Run every contract check against live instances; returns check names."""
    passed = []
    inst = instances[0]
    ref = inst.references[0]

    start = victim.query_count
    first = victim.generate(inst)
    second = victim.generate(inst)
    assert first.tokens == second.tokens, "generation is not deterministic"
    assert first.ended_by_eos == second.ended_by_eos
    passed.append("deterministic-generation")

    assert victim.query_count == start + 2, "generate must cost exactly one query"
    score = victim.score_reference(inst, None, ref)
    assert victim.query_count == start + 3, "score must cost exactly one query"
    grads = victim.gradients(inst, None, ref)
    assert victim.query_count == start + 4, "gradients must cost exactly one query"
    passed.append("query-accounting")

    assert len(first.tokens) <= victim.max_decode_len, "generation exceeds max_decode_len"
    if not first.ended_by_eos:
        assert len(first.tokens) == victim.max_decode_len
    if first.steps is not None:
        assert len(first.steps) == len(first.tokens) + int(first.ended_by_eos)
    if first.eos_stats is not None:
        assert len(first.eos_stats) >= len(first.tokens)
    passed.append("generation-shape")

    probs = np.asarray(score.token_probs, dtype=float)
    assert probs.shape[0] > 0, "empty reference score"
    assert ((probs > 0) & (probs <= 1)).all(), "reference probs outside (0, 1]"
    if score.logit_rows is not None:
        for row in score.logit_rows:
            row = np.asarray(row, dtype=float)
            soft = np.exp(row - row.max())
            soft /= soft.sum()
            assert abs(float(soft.sum()) - 1.0) < 1e-6, "softmax row does not normalize"
            assert ((soft >= 0) & (soft <= 1)).all()
    passed.append("probability-normalization")

    g_ll = np.asarray(grads.g_ll, dtype=float)
    g_stop = np.asarray(grads.g_stop, dtype=float)
    assert g_ll.shape == g_stop.shape and g_ll.ndim == 2, "gradient shape mismatch"
    assert np.isfinite(g_ll).all() and np.isfinite(g_stop).all(), "non-finite gradients"
    passed.append("gradient-shape")

    again = victim.score_reference(inst, None, ref)
    assert np.allclose(np.asarray(again.token_probs), probs, atol=1e-9), "scoring is not deterministic"
    passed.append("deterministic-scoring")

    return passed
