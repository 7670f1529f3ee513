import shutil

from docs_utils import add_links
from keras_autodoc import DocumentationGenerator, get_methods

from cryptonet.utils import PROJECT_ROOT

pages = {
    "cryptonet_client.md": ["cryptonet.CryptonetClient"]
    + get_methods("cryptonet.client.CryptonetClient"),
    "components/market_data.md": get_methods(
        "cryptonet.components.market_data.api.MarketDataAPI"
    ),
    "components/returns.md": get_methods(
        "cryptonet.components.returns.api.ReturnsAPI"
    ),
    "components/ewcorr.md": get_methods("cryptonet.components.ewcorr.api.EwcorrAPI"),
    "components/tmfg.md": get_methods("cryptonet.components.tmfg.api.TmfgAPI"),
    "components/centrality.md": get_methods(
        "cryptonet.components.centrality.api.CentralityAPI"
    ),
    "components/imbalance.md": get_methods(
        "cryptonet.components.imbalance.api.ImbalanceAPI"
    ),
    "components/report.md": get_methods("cryptonet.components.report.api.ReportAPI"),
    "objects/panels.md": ["cryptonet.PricePanel", "cryptonet.ReturnPanel"]
    + get_methods("cryptonet.PricePanel"),
    "objects/correlations.md": [
        "cryptonet.WeightVector",
        "cryptonet.WeightedCorrelationMatrix",
        "cryptonet.CorrelationSeries",
    ]
    + get_methods("cryptonet.CorrelationSeries"),
    "objects/graphs.md": [
        "cryptonet.SimilarityMatrix",
        "cryptonet.FilteredGraph",
        "cryptonet.VerificationReport",
    ]
    + get_methods("cryptonet.FilteredGraph"),
    "objects/centrality.md": [
        "cryptonet.CentralityVector",
        "cryptonet.CentralityBands",
    ],
    "objects/imbalance.md": ["cryptonet.ImbalanceSeries", "cryptonet.ImbalancePeak"],
    "objects/runs.md": [
        "cryptonet.RunConfig",
        "cryptonet.RunManifest",
        "cryptonet.EventTimeline",
        "cryptonet.BhrReport",
    ],
}


class MyDocumentationGenerator(DocumentationGenerator):
    def process_signature(self, signature):
        signature = signature.replace("CryptonetClient.", "cryptonet.")
        signature = signature.replace("MarketDataAPI.", "cryptonet.market_data.")
        signature = signature.replace("ReturnsAPI.", "cryptonet.returns.")
        signature = signature.replace("EwcorrAPI.", "cryptonet.ewcorr.")
        signature = signature.replace("TmfgAPI.", "cryptonet.tmfg.")
        signature = signature.replace("CentralityAPI.", "cryptonet.centrality.")
        signature = signature.replace("ImbalanceAPI.", "cryptonet.imbalance.")
        signature = signature.replace("ReportAPI.", "cryptonet.report.")
        return signature


doc_generator = MyDocumentationGenerator(
    pages,
    template_dir=PROJECT_ROOT / "docs/template",
    extra_aliases=[
        "cryptonet.PricePanel",
        "cryptonet.ReturnPanel",
        "cryptonet.WeightedCorrelationMatrix",
        "cryptonet.CorrelationSeries",
        "cryptonet.SimilarityMatrix",
        "cryptonet.FilteredGraph",
        "cryptonet.CentralityVector",
        "cryptonet.CentralityBands",
        "cryptonet.ImbalanceSeries",
        "cryptonet.RunConfig",
        "cryptonet.RunManifest",
    ],
    titles_size="##",
)


destination = PROJECT_ROOT / "docs" / "generated_sources"
doc_generator.generate(destination)
shutil.copyfile(PROJECT_ROOT / "README.md", destination / "index.md")

for file in destination.rglob("*.md"):
    file.write_text(add_links(file.read_text()))
