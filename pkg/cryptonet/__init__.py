from .client import CryptonetClient
from .client_config import ClientConfig
from .components.centrality.models import CentralityBands, CentralityVector
from .components.ewcorr.models import (
    CorrelationSeries,
    WeightedCorrelationMatrix,
    WeightVector,
)
from .components.imbalance.models import (
    Bucket,
    ImbalancePeak,
    ImbalanceSeries,
    PeakDirection,
)
from .components.market_data.models import (
    Candle,
    Interval,
    PricePanel,
    Side,
    TradeRecord,
)
from .components.market_data.sources import ArchiveSource, BinanceSource
from .components.report.models import EventTimeline, RunConfig, RunManifest
from .components.returns.models import BhrReport, ReturnKind, ReturnPanel
from .components.tmfg.models import (
    FilteredGraph,
    SimilarityMatrix,
    SimilarityTransform,
    VerificationReport,
)
from .exceptions import CryptonetException

# alias
cryptonet = CryptonetClient()
