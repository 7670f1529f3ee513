from __future__ import annotations

import json
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path
from typing import Any, Dict, List, Optional, Sequence, Set, Tuple

import networkx as nx
import numpy as np
import pandas as pd
import pydantic

from cryptonet.utils import ValidPath, write_csv

Face = Tuple[int, int, int]
Edge = Tuple[int, int, float]

EDGE_COLUMNS = ["window_end_ts", "sym_i", "sym_j", "weight"]


class SimilarityTransform(str, Enum):
    SQUARE = "square"
    ABS = "abs"
    RAW_SHIFTED = "shift"

    def apply(self, rho: np.ndarray) -> np.ndarray:
        if self == SimilarityTransform.SQUARE:
            return rho * rho
        elif self == SimilarityTransform.ABS:
            return np.abs(rho)
        else:
            return (1.0 + rho) / 2.0


@dataclass(frozen=True, eq=False)
class SimilarityMatrix:
    symbols: Tuple[str, ...]
    values: np.ndarray
    window_end_ts: Optional[int] = None
    transform: Optional[SimilarityTransform] = None

    def __post_init__(self):
        object.__setattr__(self, "symbols", tuple(self.symbols))
        values = np.array(self.values, dtype=float, copy=True)
        values.setflags(write=False)
        object.__setattr__(self, "values", values)
        n = len(self.symbols)
        if values.shape != (n, n):
            raise ValueError(f"values has shape {values.shape}, expected {(n, n)}")
        if not np.all(np.isfinite(values)):
            raise ValueError("Similarities must be finite.")
        if not np.array_equal(values, values.T):
            raise ValueError("A similarity matrix must be symmetric.")
        if np.any(np.diag(values) != 0):
            raise ValueError("A similarity matrix must have a zero diagonal.")
        if np.any(values < 0):
            raise ValueError("Similarities must be non-negative.")

    def __len__(self) -> int:
        return len(self.symbols)


class InsertionStep(pydantic.BaseModel):
    model_config = pydantic.ConfigDict(frozen=True)

    vertex: int
    face: Face
    gain: float


class VerificationReport(pydantic.BaseModel):
    """Pass/fail result of every structural check of a filtered graph."""

    edge_count: bool
    connected: bool
    degree: bool
    planar: bool
    chordal: bool
    details: Dict[str, str] = {}

    @property
    def passed(self) -> bool:
        return all(
            [self.edge_count, self.connected, self.degree, self.planar, self.chordal]
        )

    @property
    def failures(self) -> List[str]:
        checks = self.model_dump(exclude={"details"})
        return [name for name, ok in checks.items() if not ok]


@dataclass(frozen=True, eq=False)
class FilteredGraph:
    """A planar filtered graph over `symbols`.

    Edges are `(i, j, weight)` with `i < j`, indices into `symbols`. When the graph
    comes out of `build_tmfg`, `seed` is the initial 4-clique and replaying
    `insertion_log` from it rebuilds every edge.
    """

    symbols: Tuple[str, ...]
    edges: Tuple[Edge, ...]
    triangles: Tuple[Face, ...] = ()
    insertion_log: Tuple[InsertionStep, ...] = ()
    seed: Tuple[int, ...] = ()
    window_end_ts: Optional[int] = None
    _neighbors: List[Set[int]] = field(init=False, repr=False)

    def __post_init__(self):
        object.__setattr__(self, "symbols", tuple(self.symbols))
        edges = []
        for i, j, weight in self.edges:
            i, j = int(i), int(j)
            if i > j:
                i, j = j, i
            if i == j or not 0 <= i < len(self.symbols) or j >= len(self.symbols):
                raise ValueError(f"Invalid edge ({i}, {j}).")
            edges.append((i, j, float(weight)))
        object.__setattr__(self, "edges", tuple(sorted(edges)))
        object.__setattr__(self, "triangles", tuple(tuple(t) for t in self.triangles))
        object.__setattr__(self, "insertion_log", tuple(self.insertion_log))
        object.__setattr__(self, "seed", tuple(self.seed))
        neighbors = [set() for _ in self.symbols]
        for i, j, _ in self.edges:
            neighbors[i].add(j)
            neighbors[j].add(i)
        object.__setattr__(self, "_neighbors", neighbors)

    @property
    def n_vertices(self) -> int:
        return len(self.symbols)

    def neighbors(self, vertex: int) -> Set[int]:
        return set(self._neighbors[vertex])

    def degree(self, vertex: int) -> int:
        return len(self._neighbors[vertex])

    @property
    def total_weight(self) -> float:
        return float(sum(w for _, _, w in self.edges))

    def edge_set(self) -> Set[Tuple[int, int]]:
        return {(i, j) for i, j, _ in self.edges}

    def adjacency(self, binary: bool = False) -> np.ndarray:
        n = self.n_vertices
        matrix = np.zeros((n, n))
        for i, j, weight in self.edges:
            value = 1.0 if binary else weight
            matrix[i, j] = value
            matrix[j, i] = value
        return matrix

    def to_networkx(self) -> nx.Graph:
        graph = nx.Graph()
        graph.add_nodes_from(range(self.n_vertices))
        graph.add_weighted_edges_from(self.edges)
        return graph

    def without_edge(self, i: int, j: int) -> "FilteredGraph":
        i, j = min(i, j), max(i, j)
        return FilteredGraph(
            symbols=self.symbols,
            edges=tuple(e for e in self.edges if (e[0], e[1]) != (i, j)),
            seed=self.seed,
            window_end_ts=self.window_end_ts,
        )

    def replay_edges(self) -> Set[Tuple[int, int]]:
        """Rebuilds the edge set from the seed and the insertion log."""
        seed = sorted(self.seed)
        edges = {(a, b) for k, a in enumerate(seed) for b in seed[k + 1 :]}
        for step in self.insertion_log:
            for u in step.face:
                edges.add((min(u, step.vertex), max(u, step.vertex)))
        return edges

    def to_frame(self) -> pd.DataFrame:
        return pd.DataFrame(
            [
                (self.window_end_ts, self.symbols[i], self.symbols[j], weight)
                for i, j, weight in self.edges
            ],
            columns=EDGE_COLUMNS,
        )

    def sidecar(self, report: Optional[VerificationReport] = None) -> Dict[str, Any]:
        names = self.symbols
        result = {
            "window_end_ts": self.window_end_ts,
            "seed": [names[v] for v in self.seed],
            "insertion_log": [
                {
                    "vertex": names[step.vertex],
                    "face": [names[v] for v in step.face],
                    "gain": step.gain,
                }
                for step in self.insertion_log
            ],
        }
        if report is not None:
            result["verification"] = report.model_dump()
        return result


def write_graphs(
    graphs: Sequence[FilteredGraph],
    path: ValidPath,
    reports: Optional[Sequence[VerificationReport]] = None,
) -> Tuple[Path, Path]:
    """Writes the edge lists `window_end_ts,sym_i,sym_j,weight` to `path` and the
    seeds, insertion logs and verification reports to a `.json` file next to it."""
    path = Path(path)
    if graphs:
        frame = pd.concat([g.to_frame() for g in graphs], ignore_index=True)
    else:
        frame = pd.DataFrame(columns=EDGE_COLUMNS)
    write_csv(frame, path)
    if reports is None:
        reports = [None] * len(graphs)
    sidecar_path = path.with_suffix(".json")
    sidecar = [g.sidecar(r) for g, r in zip(graphs, reports)]
    sidecar_path.write_text(json.dumps(sidecar, indent=2) + "\n")
    return path, sidecar_path
