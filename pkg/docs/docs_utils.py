OBJECT_PAGES = {
    "PricePanel": "objects/panels",
    "ReturnPanel": "objects/panels",
    "WeightVector": "objects/correlations",
    "WeightedCorrelationMatrix": "objects/correlations",
    "CorrelationSeries": "objects/correlations",
    "SimilarityMatrix": "objects/graphs",
    "FilteredGraph": "objects/graphs",
    "VerificationReport": "objects/graphs",
    "CentralityVector": "objects/centrality",
    "CentralityBands": "objects/centrality",
    "ImbalanceSeries": "objects/imbalance",
    "ImbalancePeak": "objects/imbalance",
    "RunConfig": "objects/runs",
    "RunManifest": "objects/runs",
    "EventTimeline": "objects/runs",
    "BhrReport": "objects/runs",
}


def add_links(text):
    for name, page in OBJECT_PAGES.items():
        text = text.replace(
            f"`cryptonet.{name}`", f"[`cryptonet.{name}`](/{page}/#{name.lower()})"
        )
    return text
