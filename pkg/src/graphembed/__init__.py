"""Graph embeddings, centrality measures and node classification experiments."""

__version__ = "0.1.0"
