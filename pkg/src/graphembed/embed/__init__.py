"""Node embedding algorithms: Laplacian eigenmaps, LINE and node2vec."""

from .base import EmbeddingMatrix, ResourceExhausted

__all__ = ["EmbeddingMatrix", "ResourceExhausted"]
