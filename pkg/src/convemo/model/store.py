"""Model persistence: a versioned JSON document for both model kinds.

``load_model(save_model(m))`` predicts identically to ``m``; floats go
through ``repr`` round-tripping so the file is exact.  Re-saving the
same model is byte-identical.
"""
from __future__ import annotations

import json
from pathlib import Path

import numpy as np

from ..errors import DataError
from .gbdt import GbdtModel, GbdtParams, Tree, TreeNode
from .logreg import LogRegModel

MODEL_FORMAT = "convemo-model"
MODEL_VERSION = 1


class UnsupportedVersion(DataError):
    pass


class CorruptModel(DataError):
    pass


def _tree_to_dict(tree: Tree) -> dict:
    nodes = []
    for node in tree.nodes:
        if node.is_leaf:
            nodes.append({"v": node.value})
        else:
            nodes.append({"f": node.feature, "t": node.threshold,
                          "dl": node.default_left, "l": node.left, "r": node.right})
    return {"nodes": nodes}


def _tree_from_dict(doc: dict, dimension: int) -> Tree:
    nodes = []
    raw_nodes = doc["nodes"]
    for raw in raw_nodes:
        if "v" in raw:
            nodes.append(TreeNode(is_leaf=True, value=float(raw["v"])))
        else:
            left, right = int(raw["l"]), int(raw["r"])
            feature = int(raw["f"])
            if not 0 <= feature < dimension:
                raise CorruptModel(f"tree references feature {feature} outside dimension {dimension}")
            if not (0 <= left < len(raw_nodes) and 0 <= right < len(raw_nodes)):
                raise CorruptModel("tree child index out of range")
            nodes.append(TreeNode(is_leaf=False, feature=feature, threshold=float(raw["t"]),
                                  default_left=bool(raw["dl"]), left=left, right=right))
    if not nodes:
        raise CorruptModel("tree has no nodes")
    return Tree(nodes=nodes)


def model_to_dict(model: GbdtModel | LogRegModel) -> dict:
    doc = {"format": MODEL_FORMAT, "version": MODEL_VERSION}
    if isinstance(model, GbdtModel):
        doc.update({
            "kind": "gbdt",
            "class_order": list(model.class_order),
            "dimension": model.dimension,
            "init_scores": [float(v) for v in model.init_scores],
            "params": model.params.to_dict(),
            "rounds": [[_tree_to_dict(tree) for tree in round_trees]
                       for round_trees in model.trees],
        })
    elif isinstance(model, LogRegModel):
        doc.update({
            "kind": "logreg",
            "class_order": list(model.class_order),
            "dimension": model.dimension,
            "l2": float(model.l2),
            "weights": [[float(v) for v in row] for row in model.weights],
            "bias": [float(v) for v in model.bias],
        })
    else:
        raise TypeError(f"cannot serialize {type(model).__name__}")
    return doc


def model_from_dict(doc: dict) -> GbdtModel | LogRegModel:
    if not isinstance(doc, dict) or doc.get("format") != MODEL_FORMAT:
        raise CorruptModel("not a model document")
    if doc.get("version") != MODEL_VERSION:
        raise UnsupportedVersion(f"model version {doc.get('version')!r} not supported "
                                 f"(expected {MODEL_VERSION})")
    try:
        kind = doc["kind"]
        class_order = tuple(doc["class_order"])
        dimension = int(doc["dimension"])
        if kind == "gbdt":
            params = GbdtParams.from_dict(doc["params"])
            trees = [[_tree_from_dict(t, dimension) for t in round_trees]
                     for round_trees in doc["rounds"]]
            init = tuple(float(v) for v in doc["init_scores"])
            if len(init) != 4 or len(class_order) != 4:
                raise CorruptModel("model must carry exactly 4 classes")
            return GbdtModel(params=params, class_order=class_order, dimension=dimension,
                             init_scores=init, trees=trees)
        if kind == "logreg":
            weights = np.asarray(doc["weights"], dtype=np.float64)
            bias = np.asarray(doc["bias"], dtype=np.float64)
            if weights.shape != (4, dimension) or bias.shape != (4,):
                raise CorruptModel("weight block shape mismatch")
            return LogRegModel(weights=weights, bias=bias, l2=float(doc["l2"]),
                               class_order=class_order)
        raise CorruptModel(f"unknown model kind {kind!r}")
    except (KeyError, TypeError, ValueError) as exc:
        raise CorruptModel(f"malformed model document: {exc}") from None


def save_model(model: GbdtModel | LogRegModel, path: str | Path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(model_to_dict(model), fh, indent=1)
        fh.write("\n")


def load_model(path: str | Path) -> GbdtModel | LogRegModel:
    try:
        with open(path, encoding="utf-8") as fh:
            doc = json.load(fh)
    except json.JSONDecodeError as exc:
        raise CorruptModel(f"cannot parse {path}: {exc}") from None
    return model_from_dict(doc)
