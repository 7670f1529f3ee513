import warnings
from typing import List, Optional, Sequence

import networkx as nx
import numpy as np
from tqdm import tqdm

from cryptonet.client_config import CryptonetCaller
from cryptonet.components.centrality.models import (
    BAND_PERCENTILES,
    CentralityBands,
    CentralityVector,
)
from cryptonet.components.ewcorr.api import (
    DEFAULT_WINDOW,
    weights_for,
    window_matrix,
)
from cryptonet.components.returns.models import ReturnPanel
from cryptonet.components.tmfg.api import build_tmfg, to_similarity, verify
from cryptonet.components.tmfg.models import FilteredGraph, SimilarityTransform
from cryptonet.exceptions import (
    CryptonetException,
    DisconnectedGraph,
    EmptyInput,
    FocusMissing,
    InvalidParameter,
    NoConvergence,
    StageError,
    WindowTooLong,
)
from cryptonet.utils import percentiles, to_list

TOLERANCE = 1e-10
MAX_ITERATIONS = 10_000
STAGNATION_CHECK = 500


def eigenvector_centrality(
    graph: FilteredGraph,
    binary: bool = False,
    tolerance: float = TOLERANCE,
    max_iterations: int = MAX_ITERATIONS,
) -> CentralityVector:
    """Principal eigenvector of the adjacency matrix by power iteration.

    The iteration runs on `A / r + I`, `r` being the largest row sum of `A`. The
    eigenvectors are those of `A`, but the spectrum is positive, so bipartite
    graphs (stars, paths) converge instead of oscillating.

    # Arguments
        graph: A connected `cryptonet.FilteredGraph` with non-negative weights.
        binary: Use 0/1 adjacency instead of the edge weights.
        tolerance: Stop when two successive iterates are closer than this.
        max_iterations: Raise `NoConvergence` beyond this.

    # Returns
        A `cryptonet.CentralityVector`
    """
    n = graph.n_vertices
    if n == 0:
        raise EmptyInput("vertices", can_be_allowed=False)
    n_components = nx.number_connected_components(graph.to_networkx())
    if n_components > 1:
        raise DisconnectedGraph(n_components)
    adjacency = graph.adjacency(binary=binary)
    if np.any(adjacency < 0):
        raise InvalidParameter("edge weights", "negative", "must be >= 0")

    scale = adjacency.sum(axis=1).max() or 1.0
    operator = adjacency / scale + np.eye(n)
    scores = np.full(n, 1 / np.sqrt(n))
    checkpoint_residual = np.inf
    residual = np.inf
    for iteration in range(1, max_iterations + 1):
        new_scores = operator @ scores
        new_scores /= np.linalg.norm(new_scores)
        residual = float(np.linalg.norm(new_scores - scores))
        scores = new_scores
        if residual < tolerance:
            break
        if iteration % STAGNATION_CHECK == 0:
            if residual > 0.999 * checkpoint_residual:
                raise NoConvergence(iteration, residual)
            checkpoint_residual = residual
    else:
        raise NoConvergence(max_iterations, residual)

    scores = np.maximum(scores, 0.0)
    return CentralityVector(
        symbols=graph.symbols,
        scores=scores / np.linalg.norm(scores),
        window_end_ts=graph.window_end_ts,
        iterations=iteration,
    )


class CentralityAPI(CryptonetCaller):
    def eigenvector_centrality(
        self, graph: FilteredGraph, binary: bool = False
    ) -> CentralityVector:
        return eigenvector_centrality(graph, binary=binary)

    def centrality_over_windows(
        self,
        returns: ReturnPanel,
        window: int = DEFAULT_WINDOW,
        theta: Optional[float] = None,
        transform: SimilarityTransform = SimilarityTransform.SQUARE,
        binary: bool = False,
    ) -> List[CentralityVector]:
        """Eigenvector centrality over non-overlapping windows.

        Each window goes through the weighted correlations, the similarity
        transform, the TMFG and the power iteration. There are
        `floor(T / window)` windows, the incomplete tail is discarded. A window
        whose graph fails verification is kept, marked as failed, with `nan`
        scores.

        # Arguments
            returns: The `cryptonet.ReturnPanel`.
            window: The number of observations per window.
            theta: The decay of the weights, defaults to `window / 3`.
            transform: How correlations become similarities.
            binary: Use 0/1 adjacency instead of the similarities.

        # Returns
            `List[cryptonet.CentralityVector]`
        """
        weights = weights_for(window, theta)
        transform = SimilarityTransform(transform)
        n_observations = returns.n_observations
        if window > n_observations:
            raise WindowTooLong(window, n_observations)
        starts = list(range(0, n_observations - window + 1, window))
        progress_bar = tqdm(
            total=len(starts),
            desc="centrality",
            disable=not self.client_config.progress,
        )

        def compute(index: int) -> CentralityVector:
            start = starts[index]
            stage = "ewcorr"
            try:
                columns = slice(start, start + window)
                matrix = window_matrix(
                    returns.symbols,
                    returns.values[:, columns],
                    returns.mask[:, columns],
                    weights.weights,
                    returns.timestamps[start + window - 1],
                )
                stage = "tmfg"
                graph = build_tmfg(to_similarity(matrix, transform))
                report = verify(graph)
                if not report.passed:
                    warnings.warn(
                        f"The graph of window {index} failed the checks "
                        f"{report.failures}, its centrality is marked as failed."
                    )
                    vector = CentralityVector.failed(
                        graph.symbols, graph.window_end_ts, "; ".join(report.failures)
                    )
                else:
                    stage = "centrality"
                    vector = eigenvector_centrality(graph, binary=binary)
            except CryptonetException as err:
                raise StageError(stage, err, window_index=index) from err
            progress_bar.update(1)
            return vector

        try:
            return self.client_config.map(compute, range(len(starts)))
        finally:
            progress_bar.close()

    def percentile_bands(
        self, vectors: Sequence[CentralityVector], focus: List[str]
    ) -> CentralityBands:
        """Extracts the focus series and computes, per window, the percentile
        bands of every other asset's score (linear interpolation).

        Windows where a focus asset is absent or that failed give `nan`.
        """
        focus = to_list(focus)
        seen = {s for v in vectors for s in v.symbols}
        missing = [s for s in focus if s not in seen]
        if missing:
            raise FocusMissing(missing)

        bands = np.full((len(vectors), len(BAND_PERCENTILES)), np.nan)
        focus_series = {s: np.full(len(vectors), np.nan) for s in focus}
        for w, vector in enumerate(vectors):
            if vector.is_failed:
                continue
            others = []
            for symbol, score in zip(vector.symbols, vector.scores):
                if symbol in focus_series:
                    focus_series[symbol][w] = score
                else:
                    others.append(score)
            bands[w] = percentiles(others, BAND_PERCENTILES)
        return CentralityBands(
            timestamps=np.array([v.window_end_ts for v in vectors], dtype=np.int64),
            focus_series=focus_series,
            bands=bands,
        )
