import math
import numbers
from typing import List, Optional, Sequence, Tuple

import numpy as np
from tqdm import tqdm

from cryptonet.client_config import CryptonetCaller
from cryptonet.components.ewcorr.models import (
    CorrelationSeries,
    WeightedCorrelationMatrix,
    WeightVector,
)
from cryptonet.components.returns.models import ReturnPanel
from cryptonet.exceptions import (
    EmptyInput,
    InvalidParameter,
    WindowTooLong,
    ZeroVariance,
)
from cryptonet.utils import Timestamp, to_list, to_timestamp_ms

DEFAULT_WINDOW = 24
DEFAULT_STEP = 1
SHARP_THETA = 0.1


def default_theta(window: int) -> float:
    return window / 3


def weights_for(window: int, theta: Optional[float]) -> WeightVector:
    return make_weights(window, default_theta(window) if theta is None else theta)


def _variance_floor(block: np.ndarray) -> np.ndarray:
    # what a constant series leaves behind once its weighted mean is subtracted
    scale = np.max(np.abs(block), axis=-1)
    return (4 * np.finfo(float).eps * scale) ** 2


def _check_window(window: int):
    if not isinstance(window, (int, np.integer)) or window < 1:
        raise InvalidParameter("window", window, "must be an integer >= 1")


def make_weights(window: int, theta: float) -> WeightVector:
    """Builds the exponential weights of a window.

    # Arguments
        window: The number of observations in the window.
        theta: The decay, in time steps. Small values put almost all the weight on
            the latest observation, large values tend to uniform weights.

    # Returns
        A `cryptonet.WeightVector`
    """
    _check_window(window)
    if not (isinstance(theta, numbers.Real) and math.isfinite(theta) and theta > 0):
        raise InvalidParameter("theta", theta, "must be a finite number > 0")
    t = np.arange(1, window + 1, dtype=float)
    raw = np.exp((t - window) / theta)
    if window > 1 and (raw[0] == 0.0 or np.any(np.diff(raw) <= 0)):
        raise InvalidParameter(
            "theta",
            theta,
            f"gives weights that are not all positive and distinct "
            f"over a window of {window}",
        )
    w_0 = 1.0 / raw.sum()
    return WeightVector(weights=raw * w_0, theta=float(theta), window=window, w_0=w_0)


def weighted_corr(x: Sequence[float], y: Sequence[float], w: WeightVector) -> float:
    """Exponentially weighted Pearson correlation of two series of the window's
    length. Raises `ZeroVariance` if either series is constant under the weights.
    """
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    for name, series in (("x", x), ("y", y)):
        if series.shape != (w.window,):
            raise InvalidParameter(
                name, f"length {len(series)}", f"must have length {w.window}"
            )
    weights = w.weights
    dx = x - np.dot(weights, x)
    dy = y - np.dot(weights, y)
    var_x = np.dot(weights, dx * dx)
    var_y = np.dot(weights, dy * dy)
    if np.ptp(x) == 0 or var_x <= _variance_floor(x):
        raise ZeroVariance("x")
    if np.ptp(y) == 0 or var_y <= _variance_floor(y):
        raise ZeroVariance("y")
    rho = np.dot(weights, dx * dy) / math.sqrt(var_x * var_y)
    return float(np.clip(rho, -1.0, 1.0))


def window_matrix(
    symbols: Tuple[str, ...],
    block: np.ndarray,
    mask: np.ndarray,
    weights: np.ndarray,
    window_end_ts: int,
) -> WeightedCorrelationMatrix:
    complete = mask.all(axis=1)
    safe_block = np.where(mask, block, 0.0)
    centered = safe_block - (safe_block @ weights)[:, None]
    covariance = (centered * weights) @ centered.T
    variance = np.diag(covariance)
    constant = np.ptp(safe_block, axis=1) == 0
    kept = complete & ~constant & (variance > _variance_floor(safe_block))
    keep = np.flatnonzero(kept)

    covariance = covariance[np.ix_(keep, keep)]
    std = np.sqrt(variance[keep])
    values = covariance / np.outer(std, std)
    values = np.clip((values + values.T) / 2, -1.0, 1.0)
    np.fill_diagonal(values, 1.0)
    return WeightedCorrelationMatrix(
        symbols=tuple(symbols[i] for i in keep),
        values=values,
        window_end_ts=int(window_end_ts),
        excluded=tuple(s for s, k in zip(symbols, kept) if not k),
    )


class EwcorrAPI(CryptonetCaller):
    def make_weights(self, window: int, theta: float) -> WeightVector:
        return make_weights(window, theta)

    def weighted_corr(
        self, x: Sequence[float], y: Sequence[float], w: WeightVector
    ) -> float:
        return weighted_corr(x, y, w)

    def correlation_matrix(
        self,
        returns: ReturnPanel,
        window_end_ts: Timestamp,
        window: int = DEFAULT_WINDOW,
        theta: Optional[float] = None,
    ) -> WeightedCorrelationMatrix:
        """The weighted correlation matrix of the window ending (inclusive) at
        `window_end_ts`. Assets with a gap or zero variance in the window are left
        out and listed in `excluded`."""
        _check_window(window)
        weights = weights_for(window, theta)
        window_end_ts = to_timestamp_ms(window_end_ts)
        matches = np.flatnonzero(returns.timestamps == window_end_ts)
        if len(matches) == 0:
            raise KeyError(window_end_ts)
        stop = int(matches[0]) + 1
        if stop < window:
            raise WindowTooLong(window, stop)
        columns = slice(stop - window, stop)
        return window_matrix(
            returns.symbols,
            returns.values[:, columns],
            returns.mask[:, columns],
            weights.weights,
            window_end_ts,
        )

    def rolling_corr(
        self,
        returns: ReturnPanel,
        window: int = DEFAULT_WINDOW,
        step: int = DEFAULT_STEP,
        theta: Optional[float] = None,
    ) -> List[WeightedCorrelationMatrix]:
        """Weighted correlation matrices over rolling windows.

        Produces `floor((T - window) / step) + 1` matrices for `T` return
        observations, each labelled with the timestamp of its last observation.
        Windows are computed in parallel when `workers > 1`, the output order
        does not depend on it.

        # Arguments
            returns: The `cryptonet.ReturnPanel`.
            window: The number of observations per window.
            step: The number of observations between two window starts.
            theta: The decay of the weights, defaults to `window / 3`.

        # Returns
            `List[cryptonet.WeightedCorrelationMatrix]`
        """
        _check_window(window)
        if not isinstance(step, (int, np.integer)) or step < 1:
            raise InvalidParameter("step", step, "must be an integer >= 1")
        weights = weights_for(window, theta)
        n_observations = returns.n_observations
        if window > n_observations:
            raise WindowTooLong(window, n_observations)

        starts = range(0, n_observations - window + 1, step)
        progress_bar = tqdm(
            total=len(starts),
            desc="correlations",
            disable=not self.client_config.progress,
        )

        def compute(start: int) -> WeightedCorrelationMatrix:
            columns = slice(start, start + window)
            matrix = window_matrix(
                returns.symbols,
                returns.values[:, columns],
                returns.mask[:, columns],
                weights.weights,
                returns.timestamps[start + window - 1],
            )
            progress_bar.update(1)
            return matrix

        try:
            return self.client_config.map(compute, starts)
        finally:
            progress_bar.close()

    def average_series(
        self,
        mats: Sequence[WeightedCorrelationMatrix],
        focus: Optional[List[str]] = None,
    ) -> CorrelationSeries:
        """Per-asset and market-wide mean correlations, one value per window.

        # Arguments
            mats: The matrices, usually the output of `rolling_corr`.
            focus: The assets to follow, defaults to every asset seen in `mats`.
                An asset absent from a window gets `nan` there.

        # Returns
            A `cryptonet.CorrelationSeries`
        """
        if len(mats) == 0:
            raise EmptyInput("correlation matrices", can_be_allowed=False)
        if focus is None:
            focus = list(dict.fromkeys(s for m in mats for s in m.symbols))
        focus = to_list(focus)
        per_asset_mean = np.full((len(focus), len(mats)), np.nan)
        market_mean = np.full(len(mats), np.nan)
        for w, matrix in enumerate(mats):
            n = len(matrix.symbols)
            if n < 2:
                continue
            values = matrix.values
            market_mean[w] = values[np.triu_indices(n, k=1)].mean()
            row_means = (values.sum(axis=1) - np.diag(values)) / (n - 1)
            for i, symbol in enumerate(focus):
                if symbol in matrix.symbols:
                    per_asset_mean[i, w] = row_means[matrix.symbols.index(symbol)]
        return CorrelationSeries(
            timestamps=np.array([m.window_end_ts for m in mats], dtype=np.int64),
            symbols=tuple(focus),
            per_asset_mean=per_asset_mean,
            market_mean=market_mean,
        )
