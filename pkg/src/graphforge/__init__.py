"""graphforge: build paired clean/noisy property-graph benchmarks and
evaluate answerers against executed Cypher ground truth."""

__version__ = "0.1.0"
