"""Versioned JSON checkpoints for trained ensembles.

Floats are written with ``repr`` precision, so a save/load round trip is exact.
"""
from __future__ import annotations

import json
import os
import tempfile
from pathlib import Path

import numpy as np

from .agents import AgentEnsemble, AgentGroup, GroupingError
from .nn import MlpNet, ShapeError

CHECKPOINT_VERSION = "oran-placer-maddpg/1"
_NETS = ("actor", "critic", "target_actor", "target_critic")


class CheckpointError(ValueError):
    """Unreadable, corrupt or incompatible checkpoint."""


def _net_to_dict(net: MlpNet) -> dict:
    return {"sizes": list(net.sizes), "output": net.output,
            "weights": [w.tolist() for w in net.weights],
            "biases": [b.tolist() for b in net.biases]}


def _net_from_dict(d: dict) -> MlpNet:
    return MlpNet(tuple(d["sizes"]), d["output"],
                  [np.asarray(w, dtype=float).reshape(a, b)
                   for w, a, b in zip(d["weights"], d["sizes"], d["sizes"][1:])],
                  [np.asarray(b, dtype=float) for b in d["biases"]])


def checkpoint_dict(ensemble: AgentEnsemble) -> dict:
    return {
        "version": CHECKPOINT_VERSION,
        "node_ids": list(ensemble.node_ids),
        "grouping": [list(g) for g in ensemble.grouping],
        "encoding": ensemble.encoding,
        "config": ensemble.config,
        "groups": [{"index": g.index, "nodes": list(g.nodes),
                    **{name: _net_to_dict(getattr(g, name)) for name in _NETS}}
                   for g in ensemble.groups],
    }


def save_checkpoint(ensemble: AgentEnsemble, path) -> Path:
    """Write atomically; identical ensembles give identical bytes."""
    path = Path(path)
    text = json.dumps(checkpoint_dict(ensemble), sort_keys=True, separators=(",", ":")) + "\n"
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.")
    try:
        with os.fdopen(fd, "w") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise
    return path


def ensemble_from_dict(doc: dict, expected_grouping=None) -> AgentEnsemble:
    if not isinstance(doc, dict) or doc.get("version") != CHECKPOINT_VERSION:
        found = doc.get("version") if isinstance(doc, dict) else None
        raise CheckpointError(f"unsupported checkpoint version {found!r} "
                              f"(expected {CHECKPOINT_VERSION!r})")
    grouping = tuple(tuple(g) for g in doc["grouping"])
    if expected_grouping is not None and grouping != tuple(tuple(g) for g in expected_grouping):
        raise CheckpointError(f"checkpoint grouping {grouping} does not match "
                              f"{tuple(tuple(g) for g in expected_grouping)}")
    try:
        groups = [AgentGroup(g["index"], tuple(g["nodes"]),
                             *(_net_from_dict(g[name]) for name in _NETS))
                  for g in doc["groups"]]
        return AgentEnsemble(tuple(doc["node_ids"]), groups, doc["encoding"], doc["config"])
    except (KeyError, TypeError, ValueError, ShapeError, GroupingError) as exc:
        raise CheckpointError(f"malformed checkpoint: {exc}") from exc


def load_checkpoint(path, expected_grouping=None) -> AgentEnsemble:
    try:
        doc = json.loads(Path(path).read_text())
    except (OSError, UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise CheckpointError(f"cannot read checkpoint {path}: {exc}") from exc
    return ensemble_from_dict(doc, expected_grouping)
