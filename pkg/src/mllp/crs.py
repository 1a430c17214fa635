"""Discrete Concept Rule Sets: Boolean evaluation, prediction and rendering."""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .binarizer import FeatureDictionary
from .errors import DataError, DimensionError

MODEL_FORMAT = "mllp.model"
FORMAT_VERSION = 1


@dataclass
class CrsModel:
    """Alternating AND/OR layers given as 0/1 adjacency matrices.

    ``layers[l-1]`` has shape ``(n_l, n_{l-1})``; odd ``l`` are conjunction
    layers, even ``l`` disjunction layers. ``fallback_class`` is predicted when
    no output node fires.
    """

    layers: list[np.ndarray]
    dictionary: FeatureDictionary | None = None
    fallback_class: int = 0
    label_order: list[str] = field(default_factory=list)

    def __post_init__(self):
        self.layers = [np.asarray(W, dtype=np.uint8) for W in self.layers]
        if not self.layers or len(self.layers) % 2:
            raise DimensionError("a CRS needs an even, non-zero number of logical layers")
        for a, b in zip(self.layers, self.layers[1:]):
            if b.shape[1] != a.shape[0]:
                raise DimensionError(f"layer shapes {a.shape} and {b.shape} do not chain")
        if np.any(np.concatenate([W.ravel() for W in self.layers]) > 1):
            raise DimensionError("adjacency entries must be 0 or 1")

    @property
    def widths(self) -> list[int]:
        return [self.layers[0].shape[1]] + [W.shape[0] for W in self.layers]

    @property
    def n_classes(self) -> int:
        return self.layers[-1].shape[0]

    def copy(self) -> "CrsModel":
        return CrsModel([W.copy() for W in self.layers], self.dictionary, self.fallback_class, list(self.label_order))

    def to_json(self) -> dict:
        return {
            "format": MODEL_FORMAT,
            "version": FORMAT_VERSION,
            "kind": "crs",
            "widths": self.widths,
            "layer_kinds": ["conjunction" if l % 2 else "disjunction" for l in range(1, len(self.layers) + 1)],
            "weights": [W.tolist() for W in self.layers],
            "fallback_class": self.fallback_class,
            "label_order": self.label_order,
            "dictionary": self.dictionary.to_json() if self.dictionary else None,
        }

    @classmethod
    def from_json(cls, d: dict) -> "CrsModel":
        if d.get("format") != MODEL_FORMAT or d.get("version") != FORMAT_VERSION or d.get("kind") != "crs":
            raise DataError("not a version-1 CRS model document")
        dic = FeatureDictionary.from_json(d["dictionary"]) if d.get("dictionary") else None
        layers = [np.asarray(W, dtype=np.uint8).reshape(n, m) for W, n, m in zip(d["weights"], d["widths"][1:], d["widths"][:-1])]
        return cls(layers, dic, int(d.get("fallback_class", 0)), list(d.get("label_order", [])))

    def save(self, path) -> None:
        Path(path).write_text(json.dumps(self.to_json()) + "\n", encoding="utf-8")

    @classmethod
    def load(cls, path) -> "CrsModel":
        return cls.from_json(json.loads(Path(path).read_text(encoding="utf-8")))


def crs_forward(crs: CrsModel, x) -> list[np.ndarray]:
    """Layer representations ``[h0, h1, ..., h_2L]`` for ``x`` of shape (J,) or (B, J).

    A node with no incoming edge evaluates to 1 in a conjunction layer and
    0 in a disjunction layer.
    """
    x = np.asarray(x)
    single = x.ndim == 1
    H = (x[None, :] if single else x).astype(np.int64)
    if H.shape[1] != crs.widths[0]:
        raise DimensionError(f"input has {H.shape[1]} features, model expects {crs.widths[0]}")
    reps = [H.astype(np.uint8)]
    for l, W in enumerate(crs.layers, start=1):
        Wi = W.astype(np.int64)
        if l % 2 == 1:
            H = ((1 - H) @ Wi.T == 0).astype(np.int64)
        else:
            H = (H @ Wi.T > 0).astype(np.int64)
        reps.append(H.astype(np.uint8))
    return [r[0] for r in reps] if single else reps


def decode(outputs: np.ndarray, fallback_class: int) -> np.ndarray:
    """First firing output index per row; ``fallback_class`` where none fires."""
    outputs = np.atleast_2d(outputs)
    fired = outputs.any(axis=1)
    return np.where(fired, outputs.argmax(axis=1), fallback_class)


def predict(crs: CrsModel, x):
    out = crs_forward(crs, x)[-1]
    pred = decode(out, crs.fallback_class)
    return int(pred[0]) if np.asarray(x).ndim == 1 else pred


def fallback_count(crs: CrsModel, X) -> int:
    return int((~crs_forward(crs, X)[-1].any(axis=1)).sum())


def edge_count(crs: CrsModel) -> int:
    return int(sum(int(W.sum()) for W in crs.layers))


# --------------------------------------------------------------------------
# rendering
# --------------------------------------------------------------------------

def _node_name(l: int, i: int) -> str:
    return f"{'r' if l % 2 else 's'}{l}[{i}]"


def _condition(crs: CrsModel, j: int) -> str:
    if crs.dictionary is not None and j < len(crs.dictionary):
        return crs.dictionary[j].condition
    return f"x{j}"


def _lines(crs: CrsModel, l: int, i: int, indent: int) -> list[str]:
    pad = "  " * indent
    members = np.flatnonzero(crs.layers[l - 1][i])
    if l == 1:
        if members.size == 0:
            return [pad + "TRUE"]
        return [pad + "IF " + " AND ".join(f"({_condition(crs, j)})" for j in members)]
    if members.size == 0:
        return [pad + ("TRUE" if l % 2 else "FALSE")]
    joiner = "AND" if l % 2 else "OR"
    out: list[str] = []
    for pos, k in enumerate(members):
        if pos:
            out.append(pad + joiner)
        if l - 1 == 1:
            out += _lines(crs, 1, int(k), indent)
        else:
            out.append(pad + _node_name(l - 1, int(k)) + ":")
            out += _lines(crs, l - 1, int(k), indent + 1)
    return out


def _check_node(crs: CrsModel, layer: int, index: int) -> None:
    if not 1 <= layer <= len(crs.layers):
        raise KeyError(f"unknown layer {layer}")
    if not 0 <= index < crs.layers[layer - 1].shape[0]:
        raise KeyError(f"unknown node {index} in layer {layer}")


def render_rules(crs: CrsModel, layer: int | None = None, index: int | None = None) -> str:
    """Readable text for one node, or for every output node when no node is given.

    Conjunctions over input features print as ``IF (a) AND (b)``; deeper
    nodes print their members one level further indented, separated by
    ``AND`` / ``OR`` lines.
    """
    if layer is None:
        layer = len(crs.layers)
        nodes = range(crs.layers[-1].shape[0])
    else:
        nodes = [index if index is not None else 0]
    blocks = []
    for i in nodes:
        _check_node(crs, layer, i)
        head = _node_name(layer, i)
        if layer == len(crs.layers) and crs.label_order:
            head += f" (class = {crs.label_order[i]})"
        blocks.append("\n".join([head + ":"] + _lines(crs, layer, i, 1)))
    return "\n".join(blocks) + "\n"


def rule_tree(crs: CrsModel, layer: int, index: int) -> dict:
    """Machine-readable nested form of :func:`render_rules`."""
    _check_node(crs, layer, index)
    members = [int(k) for k in np.flatnonzero(crs.layers[layer - 1][index])]
    node = {"node": _node_name(layer, index), "op": "AND" if layer % 2 else "OR"}
    if layer == 1:
        node["children"] = [{"feature": j, "condition": _condition(crs, j)} for j in members]
    else:
        node["children"] = [rule_tree(crs, layer - 1, k) for k in members]
    return node


def rules_json(crs: CrsModel) -> dict:
    top = len(crs.layers)
    return {
        "fallback_class": crs.fallback_class,
        "label_order": crs.label_order,
        "outputs": [rule_tree(crs, top, i) for i in range(crs.layers[-1].shape[0])],
    }
