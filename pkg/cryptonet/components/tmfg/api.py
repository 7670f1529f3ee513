import heapq
import itertools
from typing import Dict, List, Sequence, Set

import networkx as nx
import numpy as np

from cryptonet.client_config import CryptonetCaller
from cryptonet.components.ewcorr.models import WeightedCorrelationMatrix
from cryptonet.components.tmfg.models import (
    Face,
    FilteredGraph,
    InsertionStep,
    SimilarityMatrix,
    SimilarityTransform,
    VerificationReport,
)
from cryptonet.exceptions import TooFewVertices

SEED_CANDIDATES = 8


def to_similarity(
    corr: WeightedCorrelationMatrix,
    transform: SimilarityTransform = SimilarityTransform.SQUARE,
) -> SimilarityMatrix:
    transform = SimilarityTransform(transform)
    values = transform.apply(np.array(corr.values, dtype=float))
    np.fill_diagonal(values, 0.0)
    return SimilarityMatrix(
        symbols=corr.symbols,
        values=values,
        window_end_ts=corr.window_end_ts,
        transform=transform,
    )


def select_seed(values: np.ndarray) -> List[int]:
    """The 4-clique of maximal weight among the vertices with the largest
    similarity row sums. Ties go to the lowest indices."""
    n = len(values)
    row_sums = values.sum(axis=1)
    ranked = sorted(range(n), key=lambda i: (-row_sums[i], i))
    candidates = sorted(ranked[:SEED_CANDIDATES])
    best, best_weight = None, -np.inf
    for clique in itertools.combinations(candidates, 4):
        weight = sum(values[a, b] for a, b in itertools.combinations(clique, 2))
        if weight > best_weight:
            best, best_weight = list(clique), weight
    return best


class _FaceGains:
    """Gains of every (remaining vertex, alive face) pair.

    Row `f` holds `S[a] + S[b] + S[c]` for the face `(a, b, c)`, with `-inf` in the
    columns of inserted vertices. Each face remembers its best vertex, a heap keyed
    by `(-gain, vertex, face id)` gives the global best move. Only the faces whose
    best vertex gets inserted are re-scanned.
    """

    def __init__(self, values: np.ndarray, max_faces: int):
        self.values = values
        n = len(values)
        self.inserted = np.zeros(n, dtype=bool)
        self.gains = np.full((max_faces, n), -np.inf)
        self.best_vertex = np.full(max_faces, -1)
        self.faces: List[Face] = []
        self.alive: List[bool] = []
        self.heap = []

    def insert_vertex(self, vertex: int):
        self.inserted[vertex] = True
        self.gains[: len(self.faces), vertex] = -np.inf

    def add_face(self, face: Face) -> int:
        face_id = len(self.faces)
        a, b, c = face
        self.faces.append(face)
        self.alive.append(True)
        row = self.values[a] + self.values[b] + self.values[c]
        row[self.inserted] = -np.inf
        self.gains[face_id] = row
        self._push_best(face_id)
        return face_id

    def kill_face(self, face_id: int):
        self.alive[face_id] = False

    def refresh_faces_of(self, vertex: int):
        n_faces = len(self.faces)
        for face_id in np.flatnonzero(self.best_vertex[:n_faces] == vertex):
            if self.alive[face_id]:
                self._push_best(int(face_id))

    def _push_best(self, face_id: int):
        row = self.gains[face_id]
        vertex = int(np.argmax(row))
        self.best_vertex[face_id] = vertex
        if np.isfinite(row[vertex]):
            heapq.heappush(self.heap, (-row[vertex], vertex, face_id))

    def pop_best(self):
        while self.heap:
            neg_gain, vertex, face_id = heapq.heappop(self.heap)
            if (
                self.alive[face_id]
                and not self.inserted[vertex]
                and self.best_vertex[face_id] == vertex
            ):
                return vertex, face_id, -neg_gain
        raise RuntimeError("No move left while vertices remain to be inserted.")


def build_tmfg(sim: SimilarityMatrix) -> FilteredGraph:
    """Builds the Triangulated Maximally Filtered Graph of a similarity matrix.

    Starts from the heaviest 4-clique among the 8 vertices with the largest row
    sums, then repeatedly inserts the (vertex, face) pair of maximal gain, the gain
    being the sum of the vertex's similarities to the 3 face vertices. Equal gains
    go to the lowest vertex index, then to the oldest face.

    # Arguments
        sim: The `cryptonet.SimilarityMatrix`, at least 4 symbols.

    # Returns
        A `cryptonet.FilteredGraph` with `3N - 6` edges.
    """
    values = sim.values
    n = len(sim.symbols)
    if n < 4:
        raise TooFewVertices(n)

    seed = select_seed(values)
    edges = {(a, b) for a, b in itertools.combinations(seed, 2)}
    state = _FaceGains(values, max_faces=4 + 3 * (n - 4))
    for vertex in seed:
        state.insert_vertex(vertex)
    for face in itertools.combinations(seed, 3):
        state.add_face(face)

    insertion_log = []
    for _ in range(n - 4):
        vertex, face_id, gain = state.pop_best()
        a, b, c = state.faces[face_id]
        insertion_log.append(
            InsertionStep(vertex=vertex, face=(a, b, c), gain=float(gain))
        )
        edges.update({(min(u, vertex), max(u, vertex)) for u in (a, b, c)})
        state.kill_face(face_id)
        state.insert_vertex(vertex)
        for u, w in ((a, b), (a, c), (b, c)):
            state.add_face(tuple(sorted((u, w, vertex))))
        state.refresh_faces_of(vertex)

    return FilteredGraph(
        symbols=sim.symbols,
        edges=tuple((i, j, values[i, j]) for i, j in sorted(edges)),
        triangles=tuple(f for f, alive in zip(state.faces, state.alive) if alive),
        insertion_log=tuple(insertion_log),
        seed=tuple(seed),
        window_end_ts=sim.window_end_ts,
    )


def is_chordal(n_vertices: int, neighbors: Sequence[Set[int]]) -> bool:
    """Chordality through a perfect elimination ordering.

    Maximum cardinality search numbers the vertices, the reverse of that order is a
    perfect elimination ordering if and only if the graph is chordal.
    """
    weight = [0] * n_vertices
    numbered = [False] * n_vertices
    visit_order = []
    for _ in range(n_vertices):
        vertex = max(
            (v for v in range(n_vertices) if not numbered[v]),
            key=lambda v: (weight[v], -v),
        )
        numbered[vertex] = True
        visit_order.append(vertex)
        for u in neighbors[vertex]:
            if not numbered[u]:
                weight[u] += 1

    elimination = visit_order[::-1]
    position = {v: k for k, v in enumerate(elimination)}
    for vertex in elimination:
        later = [u for u in neighbors[vertex] if position[u] > position[vertex]]
        if not later:
            continue
        parent = min(later, key=position.__getitem__)
        if any(u != parent and u not in neighbors[parent] for u in later):
            return False
    return True


def verify(graph: FilteredGraph) -> VerificationReport:
    """Checks a filtered graph independently of how it was built.

    Every check is reported, none raises.
    """
    n = graph.n_vertices
    details: Dict[str, str] = {}

    expected_edges = 3 * n - 6 if n >= 3 else n * (n - 1) // 2
    n_edges = len(graph.edge_set())
    edge_count = n_edges == expected_edges and n_edges == len(graph.edges)
    if not edge_count:
        details["edge_count"] = f"{len(graph.edges)} edges, expected {expected_edges}"

    nx_graph = graph.to_networkx()
    connected = n > 0 and nx.is_connected(nx_graph)
    if not connected:
        details["connected"] = (
            f"{nx.number_connected_components(nx_graph)} connected components"
        )

    seed = set(graph.seed)
    low_degree = [
        graph.symbols[v] for v in range(n) if v not in seed and graph.degree(v) < 3
    ]
    degree = not low_degree
    if not degree:
        details["degree"] = f"vertices with degree < 3: {low_degree}"

    planar, _ = nx.check_planarity(nx_graph)
    if not planar:
        details["planar"] = "the graph has a Kuratowski subgraph"

    chordal = is_chordal(n, [graph.neighbors(v) for v in range(n)])
    if not chordal:
        details["chordal"] = "no perfect elimination ordering exists"

    return VerificationReport(
        edge_count=edge_count,
        connected=connected,
        degree=degree,
        planar=planar,
        chordal=chordal,
        details=details,
    )


class TmfgAPI(CryptonetCaller):
    def to_similarity(
        self,
        corr: WeightedCorrelationMatrix,
        transform: SimilarityTransform = SimilarityTransform.SQUARE,
    ) -> SimilarityMatrix:
        """Turns correlations into non-negative similarities.

        # Arguments
            corr: The `cryptonet.WeightedCorrelationMatrix`.
            transform: `"square"` for `rho ** 2`, `"abs"` for `|rho|`,
                `"shift"` for `(1 + rho) / 2`. The diagonal is always zero.

        # Returns
            A `cryptonet.SimilarityMatrix`
        """
        return to_similarity(corr, transform)

    def build(self, sim: SimilarityMatrix) -> FilteredGraph:
        return build_tmfg(sim)

    def verify(self, graph: FilteredGraph) -> VerificationReport:
        return verify(graph)

    def build_from_correlations(
        self,
        mats: Sequence[WeightedCorrelationMatrix],
        transform: SimilarityTransform = SimilarityTransform.SQUARE,
    ) -> List[FilteredGraph]:
        """One graph per matrix, built concurrently when `workers > 1`."""

        def build_one(corr: WeightedCorrelationMatrix) -> FilteredGraph:
            return build_tmfg(to_similarity(corr, transform))

        return self.client_config.map(build_one, mats)
