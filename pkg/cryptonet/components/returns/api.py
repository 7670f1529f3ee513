import warnings

import numpy as np

from cryptonet.client_config import CryptonetCaller
from cryptonet.components.market_data.models import PricePanel
from cryptonet.components.returns.models import BhrReport, ReturnKind, ReturnPanel
from cryptonet.exceptions import EmptyPanel, TimestampOffGrid
from cryptonet.utils import Timestamp, to_timestamp_ms


class ReturnsAPI(CryptonetCaller):
    def to_returns(
        self, panel: PricePanel, kind: ReturnKind = ReturnKind.LOG
    ) -> ReturnPanel:
        """Turns a price panel into returns between consecutive bars.

        A return is masked out when either of its two prices was gap-filled.

        # Arguments
            panel: The `cryptonet.PricePanel`.
            kind: `"log"` for `ln(p[t+1] / p[t])`, `"simple"` for `p[t+1] / p[t] - 1`.

        # Returns
            A `cryptonet.ReturnPanel` with `T - 1` columns.
        """
        kind = ReturnKind(kind)
        if len(panel.symbols) == 0 or len(panel.timestamps) < 2:
            raise EmptyPanel("at least 2 bars are needed to compute returns")
        mask = panel.mask[:, 1:] & panel.mask[:, :-1]
        values = np.full(mask.shape, np.nan)
        ratio = panel.prices[:, 1:][mask] / panel.prices[:, :-1][mask]
        if kind == ReturnKind.LOG:
            values[mask] = np.log(ratio)
        else:
            values[mask] = ratio - 1.0
        return ReturnPanel(
            symbols=panel.symbols,
            timestamps=panel.timestamps[1:],
            values=values,
            mask=mask,
            kind=kind,
        )

    def rescale(self, panel: PricePanel) -> PricePanel:
        """Divides each row by its first observed price, which becomes exactly 1."""
        if len(panel.symbols) == 0 or len(panel.timestamps) == 0:
            raise EmptyPanel("the panel has no cell")
        observed_rows = panel.mask.any(axis=1)
        if not observed_rows.all():
            empty = [s for s, ok in zip(panel.symbols, observed_rows) if not ok]
            raise EmptyPanel(f"{empty} have no observed price")
        first = panel.mask.argmax(axis=1)
        base = panel.prices[np.arange(len(panel.symbols)), first]
        prices = panel.prices / base[:, None]
        prices[np.arange(len(panel.symbols)), first] = 1.0
        return PricePanel(
            symbols=panel.symbols,
            timestamps=panel.timestamps,
            prices=prices,
            mask=panel.mask,
            quote=panel.quote,
        )

    def buy_and_hold(
        self, panel: PricePanel, ts_start: Timestamp, ts_end: Timestamp
    ) -> BhrReport:
        """Computes `(p_end - p_start) / p_start` for every symbol.

        Symbols whose price is not observed at one of the two dates are dropped,
        listed in `BhrReport.dropped` and reported with a warning.

        # Arguments
            panel: The `cryptonet.PricePanel`.
            ts_start: The buying date, must be on the panel's grid.
            ts_end: The selling date, must be on the panel's grid.

        # Returns
            A `cryptonet.BhrReport`
        """
        ts_start, ts_end = to_timestamp_ms(ts_start), to_timestamp_ms(ts_end)
        columns = []
        for ts in (ts_start, ts_end):
            try:
                columns.append(panel.column_index(ts))
            except KeyError:
                raise TimestampOffGrid(ts)
        start, end = columns
        values, dropped = [], []
        for i, symbol in enumerate(panel.symbols):
            if not (panel.mask[i, start] and panel.mask[i, end]):
                dropped.append(symbol)
                continue
            p_start, p_end = panel.prices[i, start], panel.prices[i, end]
            values.append((symbol, float((p_end - p_start) / p_start)))
        if not values:
            raise EmptyPanel("no symbol is observed at both dates")
        if dropped:
            warnings.warn(
                f"{dropped} are not observed at both dates and are left out of "
                f"the buy-and-hold report."
            )
        return BhrReport.from_values(ts_start, ts_end, values, dropped)
