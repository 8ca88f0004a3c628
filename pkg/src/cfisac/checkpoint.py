"""Versioned JSON policy checkpoints.

A checkpoint stores every network's flat weights (base64 little-endian
float64), the optimizer state, the learner's noise-generator state and the
scenario fingerprint of the training run. Loading rejects unknown format
versions; a fingerprint mismatch only warns, the policy stays usable.
"""

from __future__ import annotations

import base64
import dataclasses
import json
import logging

import numpy as np

from .td3 import Td3Config, Td3Learner

log = logging.getLogger(__name__)

FORMAT_VERSION = 1


class CheckpointError(ValueError):
    """Raised for unreadable or incompatible checkpoint files."""


def _encode_array(arr: np.ndarray) -> dict:
    arr = np.ascontiguousarray(arr, dtype="<f8")
    return {"shape": list(arr.shape),
            "data": base64.b64encode(arr.tobytes()).decode("ascii")}


def _decode_array(doc: dict) -> np.ndarray:
    raw = base64.b64decode(doc["data"])
    return np.frombuffer(raw, dtype="<f8").reshape(doc["shape"]).copy()


def _net_names(learner: Td3Learner):
    return {"actor": learner.actor, "critic1": learner.critic1,
            "critic2": learner.critic2, "target_actor": learner.target_actor,
            "target_critic1": learner.target_critic1,
            "target_critic2": learner.target_critic2}


def save_checkpoint(learner: Td3Learner, path,
                    scenario_fingerprint: str = "") -> None:
    doc = {
        "format_version": FORMAT_VERSION,
        "scenario_fingerprint": scenario_fingerprint,
        "state_dim": learner.state_dim,
        "action_dim": learner.action_dim,
        "config": dataclasses.asdict(learner.cfg),
        "update_count": learner.update_count,
        "layer_widths": {name: net.widths
                         for name, net in _net_names(learner).items()},
        "weights": {name: _encode_array(net.flatten())
                    for name, net in _net_names(learner).items()},
        "optimizer_state": {
            name: {k: ([_encode_array(a) for a in v]
                       if isinstance(v, list) else v)
                   for k, v in opt.state_dict().items()}
            for name, opt in (("actor", learner.actor_opt),
                              ("critic1", learner.critic1_opt),
                              ("critic2", learner.critic2_opt))},
        "rng_state": learner.rng.bit_generator.state,
    }
    with open(path, "w") as fh:
        json.dump(doc, fh)


def load_checkpoint(path, expected_fingerprint: str | None = None
                    ) -> Td3Learner:
    try:
        with open(path) as fh:
            doc = json.load(fh)
    except json.JSONDecodeError as exc:
        raise CheckpointError(
            f"corrupt checkpoint {path}: {exc.msg} at offset {exc.pos}"
        ) from exc
    version = doc.get("format_version")
    if version != FORMAT_VERSION:
        raise CheckpointError(
            f"unsupported checkpoint format_version {version!r}, "
            f"expected {FORMAT_VERSION}")
    if expected_fingerprint and \
            doc.get("scenario_fingerprint") not in ("", expected_fingerprint):
        log.warning("checkpoint %s was trained on scenario %s, loading into "
                    "%s anyway", path, doc.get("scenario_fingerprint"),
                    expected_fingerprint)

    cfg_doc = dict(doc["config"])
    cfg_doc["hidden"] = tuple(cfg_doc["hidden"])
    cfg = Td3Config(**cfg_doc)
    learner = Td3Learner(doc["state_dim"], doc["action_dim"], cfg)
    for name, net in _net_names(learner).items():
        if net.widths != doc["layer_widths"][name]:
            raise CheckpointError(f"layer widths of {name} do not match")
        net.load_flat(_decode_array(doc["weights"][name]))
    for name, opt in (("actor", learner.actor_opt),
                      ("critic1", learner.critic1_opt),
                      ("critic2", learner.critic2_opt)):
        state = doc["optimizer_state"][name]
        if state:
            opt.load_state_dict({
                k: ([_decode_array(a) for a in v] if isinstance(v, list)
                    else v) for k, v in state.items()})
    learner.update_count = int(doc["update_count"])
    learner.rng.bit_generator.state = doc["rng_state"]
    return learner
