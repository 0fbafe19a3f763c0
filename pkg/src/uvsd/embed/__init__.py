"""Slice embedding: biased walks -> skip-gram vectors -> 2-D t-SNE map."""
from dataclasses import dataclass

import numpy as np

from ..graph import NormalizedSubgraph
from .skipgram import EmbeddingConfig, fit_skipgram, train_skipgram
from .tsne import TsneConfig, fallback_line, fit_tsne, tsne_2d
from .walks import WalkConfig, generate_walk_matrix, generate_walks, to_csr, transition_distribution


@dataclass(frozen=True)
class NodeCoordinates:
    ids: tuple
    xy: np.ndarray

    def __post_init__(self):
        if self.xy.shape != (len(self.ids), 2):
            raise ValueError("one (x, y) pair per node required")
        if not np.all(np.isfinite(self.xy)):
            raise ValueError("coordinates must be finite")

    def as_dict(self) -> dict:
        return {nid: (float(x), float(y)) for nid, (x, y) in zip(self.ids, self.xy)}

    @classmethod
    def from_dict(cls, mapping: dict) -> "NodeCoordinates":
        ids = tuple(mapping)
        xy = np.array([mapping[i] for i in ids], dtype=np.float64).reshape(len(ids), 2)
        return cls(ids, xy)


def embed_subgraph(graph: NormalizedSubgraph, walk: WalkConfig, sg: EmbeddingConfig, tsne: TsneConfig) -> NodeCoordinates:
    """All three embedding stages for one normalized slice."""
    csr = to_csr(graph)
    if csr.n < 3:
        return NodeCoordinates(csr.ids, fallback_line(csr.n))
    walks = generate_walk_matrix(csr, walk)
    vectors = fit_skipgram(walks, csr.n, sg).vectors
    return NodeCoordinates(csr.ids, fit_tsne(vectors, tsne).coords)


__all__ = [
    "EmbeddingConfig", "NodeCoordinates", "TsneConfig", "WalkConfig", "embed_subgraph",
    "fit_skipgram", "fit_tsne", "generate_walks", "train_skipgram", "transition_distribution", "tsne_2d",
]
