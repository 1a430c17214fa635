"""CRS simplification: dead-node removal and redundant-rule elimination.

Node references are ``(layer, index)`` pairs with ``layer`` 1-based; the input
layer (0) and the output layer (2L) are never removed.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .crs import CrsModel, crs_forward, edge_count

NO_PATH = "no-path"
NEVER_ACTIVATED = "never-activated"


@dataclass
class SimplificationReport:
    edges_before: int
    edges_after: int
    dead_nodes_removed: dict[str, dict[int, int]] = field(
        default_factory=lambda: {NO_PATH: {}, NEVER_ACTIVATED: {}}
    )
    redundant_edges_removed: int = 0
    iterations: int = 0

    def count_dead(self, cause: str | None = None) -> int:
        causes = [cause] if cause else list(self.dead_nodes_removed)
        return sum(sum(self.dead_nodes_removed[c].values()) for c in causes)

    def to_json(self) -> dict:
        return {
            "edges_before": self.edges_before,
            "edges_after": self.edges_after,
            "dead_nodes_removed": {
                c: {str(l): k for l, k in sorted(per.items())} for c, per in self.dead_nodes_removed.items()
            },
            "redundant_edges_removed": self.redundant_edges_removed,
            "iterations": self.iterations,
        }

    def format(self) -> str:
        rows = [
            ("edges before", self.edges_before),
            ("edges after", self.edges_after),
            ("redundant edges removed", self.redundant_edges_removed),
            ("dead nodes (no path)", self.count_dead(NO_PATH)),
            ("dead nodes (never activated)", self.count_dead(NEVER_ACTIVATED)),
            ("iterations", self.iterations),
        ]
        width = max(len(k) for k, _ in rows)
        return "\n".join(f"{k:<{width}}  {v:>8}" for k, v in rows) + "\n"

    def csv_rows(self) -> list[tuple[str, int]]:
        return [
            ("edges_before", self.edges_before),
            ("edges_after", self.edges_after),
            ("redundant_edges_removed", self.redundant_edges_removed),
            ("dead_no_path", self.count_dead(NO_PATH)),
            ("dead_never_activated", self.count_dead(NEVER_ACTIVATED)),
            ("iterations", self.iterations),
        ]


def subset(wi, wj) -> int:
    """1 iff every edge of row ``wi`` is also an edge of row ``wj``."""
    wi = np.asarray(wi)
    wj = np.asarray(wj)
    if wi.shape != wj.shape:
        raise ValueError(f"row lengths differ: {wi.shape} vs {wj.shape}")
    return int(not np.any((wi > 0) & (wj == 0)))


def _constants(crs: CrsModel) -> list[np.ndarray]:
    """Per layer: -1 for input-dependent nodes, else the node's constant value.

    A node is constant when its value follows from constant members alone,
    e.g. an empty conjunction (1), an empty disjunction (0), or a
    conjunction over a constant-0 node.
    """
    consts = [np.full(crs.widths[0], -1, dtype=np.int8)]
    for l, W in enumerate(crs.layers, start=1):
        prev = consts[-1]
        edges = W > 0
        has0 = (edges & (prev == 0)[None, :]).any(axis=1)
        has1 = (edges & (prev == 1)[None, :]).any(axis=1)
        all_const = ~(edges & (prev == -1)[None, :]).any(axis=1)
        cur = np.full(W.shape[0], -1, dtype=np.int8)
        if l % 2:
            cur[all_const] = 1
            cur[has0] = 0
        else:
            cur[all_const] = 0
            cur[has1] = 1
        consts.append(cur)
    return consts


def _backward_reachable(crs: CrsModel) -> list[np.ndarray]:
    top = len(crs.layers)
    reach = [None] * (top + 1)
    reach[top] = np.ones(crs.widths[top], dtype=bool)
    for l in range(top, 0, -1):
        reach[l - 1] = (crs.layers[l - 1][reach[l]] > 0).any(axis=0)
    return reach


def detect_dead_nodes(crs: CrsModel, train=None, structural_only: bool = False) -> dict[tuple[int, int], str]:
    """Hidden nodes that can be dropped, mapped to their cause.

    ``no-path``: the node reaches no output, or it computes a constant that is
    either 0 or a neutral 1 for all of its consumers (conjunctions); these
    removals preserve the model's outputs on every input.
    ``never-activated``: the node is 0 on every row of ``train`` (a binary
    feature matrix or a :class:`BinarizedDataset`); removing all such nodes at
    once preserves outputs on those rows.
    """
    top = len(crs.layers)
    reach = _backward_reachable(crs)
    consts = _constants(crs)
    dead: dict[tuple[int, int], str] = {}
    for l in range(1, top):
        consumers = crs.layers[l] > 0  # (n_{l+1}, n_l)
        next_is_conj = (l + 1) % 2 == 1
        for i in range(crs.widths[l]):
            c = consts[l][i]
            neutral_one = c == 1 and (next_is_conj or not consumers[:, i].any())
            if not reach[l][i] or c == 0 or neutral_one:
                dead[(l, i)] = NO_PATH
    if train is not None and not structural_only:
        X = getattr(train, "features", train)
        reps = crs_forward(crs, np.asarray(X))
        for l in range(1, top):
            never = ~reps[l].any(axis=0)
            for i in np.flatnonzero(never):
                dead.setdefault((l, int(i)), NEVER_ACTIVATED)
    return dead


def remove_nodes(crs: CrsModel, nodes) -> CrsModel:
    """Drop hidden nodes: their rows in layer ``l`` and columns in layer ``l + 1``."""
    top = len(crs.layers)
    by_layer: dict[int, set[int]] = {}
    for l, i in nodes:
        if l <= 0 or l >= top:
            raise ValueError(f"cannot remove node ({l}, {i}): input and output nodes are fixed")
        if not 0 <= i < crs.widths[l]:
            raise ValueError(f"node ({l}, {i}) does not exist")
        by_layer.setdefault(l, set()).add(int(i))
    layers = [W.copy() for W in crs.layers]
    for l, gone in by_layer.items():
        keep = np.array([i for i in range(crs.widths[l]) if i not in gone], dtype=int)
        layers[l - 1] = layers[l - 1][keep, :]
        layers[l] = layers[l][:, keep]
    return CrsModel(layers, crs.dictionary, crs.fallback_class, list(crs.label_order))


def redundant_edges(crs: CrsModel) -> list[np.ndarray]:
    """Boolean masks of removable edges, one per layer (layer 1 never has any).

    Edge ``(i, j)`` of layer ``l >= 2`` is redundant when node ``i`` also
    links to some ``k != j`` whose own edge row is contained in ``j``'s;
    among identical rows the lowest index is kept.
    """
    masks = [np.zeros_like(crs.layers[0], dtype=bool)]
    for l in range(2, len(crs.layers) + 1):
        prev = crs.layers[l - 2].astype(bool)  # rows of layer l-1 nodes
        n = prev.shape[0]
        # sub[k, j]: row k is contained in row j
        sub = ~(prev[:, None, :] & ~prev[None, :, :]).any(axis=2)
        equal = sub & sub.T
        dominates = sub & ~(equal & (np.arange(n)[:, None] >= np.arange(n)[None, :]))
        W = crs.layers[l - 1].astype(bool)
        # redundant[i, j] = W[i, j] and exists k: W[i, k] and dominates[k, j]
        masks.append(W & ((W.astype(np.int64) @ dominates.astype(np.int64)) > 0))
    return masks


def eliminate_redundant(crs: CrsModel) -> CrsModel:
    layers = [W.copy() for W in crs.layers]
    for W, m in zip(layers, redundant_edges(crs)):
        W[m] = 0
    return CrsModel(layers, crs.dictionary, crs.fallback_class, list(crs.label_order))


def _record_dead(report: SimplificationReport, dead: dict[tuple[int, int], str]) -> None:
    for (l, _), cause in dead.items():
        per = report.dead_nodes_removed[cause]
        per[l] = per.get(l, 0) + 1


def simplify(
    crs: CrsModel,
    train=None,
    structural_only: bool = False,
    redundant: bool = True,
    dead_nodes: bool = True,
) -> tuple[CrsModel, SimplificationReport]:
    """Alternate redundancy elimination and dead-node removal to a fixpoint.

    ``iterations`` counts passes including the final one that changes
    nothing, so an already minimal model reports 1.
    """
    report = SimplificationReport(edge_count(crs), edge_count(crs))
    current = crs.copy()
    limit = sum(crs.widths) + edge_count(crs) + 1
    for _ in range(limit):
        report.iterations += 1
        changed = False
        if redundant:
            before = edge_count(current)
            current = eliminate_redundant(current)
            removed = before - edge_count(current)
            report.redundant_edges_removed += removed
            changed |= removed > 0
        if dead_nodes:
            dead = detect_dead_nodes(current, train, structural_only)
            if dead:
                _record_dead(report, dead)
                current = remove_nodes(current, dead)
                changed = True
        if not changed:
            break
    report.edges_after = edge_count(current)
    return current, report
