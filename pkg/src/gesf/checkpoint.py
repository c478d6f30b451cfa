"""JSON checkpoints: named parameter blocks with shapes, plus provenance."""

from __future__ import annotations

import json
import re
from pathlib import Path

import numpy as np

from .diffnet import MlpParams
from .errors import ValidationError
from .model import GesfModel, TrainConfig

FORMAT = "gesf-checkpoint"
VERSION = 1


def checkpoint_document(m: GesfModel, spectral_hash: str, cfg: TrainConfig | None = None) -> dict:
    blocks = {name: {"shape": list(a.shape), "data": a.reshape(-1).tolist()}
              for name, a in m.named_arrays()}
    return {
        "format": FORMAT,
        "version": VERSION,
        "spectral_hash": spectral_hash,
        "config": cfg.to_dict() if cfg is not None else None,
        "labeled_type": m.labeled_type,
        "mode": m.mode,
        "node_type": m.node_type.tolist(),
        "blocks": blocks,
    }


def save_checkpoint(path, m: GesfModel, spectral_hash: str, cfg: TrainConfig | None = None) -> None:
    doc = checkpoint_document(m, spectral_hash, cfg)
    Path(path).write_text(json.dumps(doc, sort_keys=True) + "\n")


_NET = re.compile(r"^(psi|phi)\.(\d+)\.([Wb])(\d+)$")
_RHO = re.compile(r"^rho\.([Wb])(\d+)$")


def _array(name, block):
    shape = tuple(int(s) for s in block["shape"])
    data = np.asarray(block["data"], dtype=float)
    if data.size != int(np.prod(shape)):
        raise ValidationError(f"block {name}: {data.size} values for shape {shape}")
    return data.reshape(shape)


def _assemble(layers: dict) -> MlpParams:
    n = len(layers)
    if sorted(layers) != list(range(n)) or any(len(v) != 2 for v in layers.values()):
        raise ValidationError("incomplete network layers in checkpoint")
    return MlpParams([layers[i]["W"] for i in range(n)], [layers[i]["b"] for i in range(n)])


def load_checkpoint(path):
    """Returns ``(model, spectral_hash, config or None)``."""
    doc = json.loads(Path(path).read_text())
    if doc.get("format") != FORMAT or doc.get("version") != VERSION:
        raise ValidationError(f"{path}: not a version-{VERSION} {FORMAT} file")
    xs, nets, rho, clf = {}, {"psi": {}, "phi": {}}, {}, {}
    for name, block in doc["blocks"].items():
        a = _array(name, block)
        if name.startswith("X."):
            xs[int(name[2:])] = a
        elif m := _NET.match(name):
            tag, k, kind, i = m.group(1), int(m.group(2)), m.group(3), int(m.group(4))
            nets[tag].setdefault(k, {}).setdefault(i, {})[kind] = a
        elif m := _RHO.match(name):
            rho.setdefault(int(m.group(2)), {})[m.group(1)] = a
        elif name in ("classifier.W", "classifier.b"):
            clf[name] = a
        else:
            raise ValidationError(f"unknown block {name!r}")
    K = len(xs)
    if sorted(xs) != list(range(K)) or sorted(nets["psi"]) != list(range(K)) \
            or sorted(nets["phi"]) != list(range(K)) or len(clf) != 2:
        raise ValidationError("checkpoint is missing parameter blocks")
    model = GesfModel(
        X=[xs[k] for k in range(K)],
        psi=[_assemble(nets["psi"][k]) for k in range(K)],
        phi=[_assemble(nets["phi"][k]) for k in range(K)],
        rho=_assemble(rho),
        W=clf["classifier.W"], b=clf["classifier.b"],
        node_type=np.asarray(doc["node_type"], dtype=np.int64),
        labeled_type=int(doc["labeled_type"]), mode=doc["mode"])
    cfg = TrainConfig.from_dict(doc["config"]) if doc.get("config") else None
    return model, doc["spectral_hash"], cfg
