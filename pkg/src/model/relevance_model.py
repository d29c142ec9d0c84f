"""
RelevanceModel: the trainable state of one arsrank run.

Bundles the scoring head, the contrastive temperature and the encoder
backend, and exposes them through one flat parameter namespace that the
optimizer, the checkpoint writer and gradcheck all share:

    ars.W_q, ars.W_c, ars.w_att   - scoring head
    loss.log_tau                  - contrastive temperature
    encoder.table                 - toy encoder only
"""

from dataclasses import dataclass
from typing import Optional

import numpy as np

from src.data.dataset import McqItem, text_key
from src.model.ars_head import ArsParams, init_ars_params, score_candidates
from src.model.encoder import (
    EncoderBackend,
    PrecomputedEncoder,
    ToyEncoder,
    init_toy_params,
    load_precomputed,
)
from src.model.losses import Temperature
from src.utils.config import TrainConfig
from src.utils.errors import DimensionMismatch
from src.utils.seeding import named_rng


@dataclass
class ItemScores:
    letters: list[str]
    logits: list[float]
    scores: list[float]


class RelevanceModel:
    def __init__(self, ars: ArsParams, temperature: Temperature, encoder: EncoderBackend):
        if encoder.embed_dim != ars.embed_dim:
            raise DimensionMismatch(
                f"encoder produces d={encoder.embed_dim} but the scoring head expects d={ars.embed_dim}"
            )
        self.ars = ars
        self.temperature = temperature
        self.encoder = encoder

    @classmethod
    def initialize(cls, config: TrainConfig, encoder: Optional[EncoderBackend] = None) -> "RelevanceModel":
        """Fresh model from the 'init' stream of ``config.seed``."""
        rng = named_rng(config.seed, "init")
        ars = init_ars_params(config.embed_dim, config.hidden_dim, rng)
        if encoder is None:
            encoder = build_encoder(config, rng)
        return cls(ars, Temperature.from_tau(config.init_temperature), encoder)

    def named_parameters(self) -> dict[str, np.ndarray]:
        params = {
            "ars.W_q": self.ars.W_q,
            "ars.W_c": self.ars.W_c,
            "ars.w_att": self.ars.w_att,
            "loss.log_tau": self.temperature.log_tau,
        }
        if isinstance(self.encoder, ToyEncoder):
            params["encoder.table"] = self.encoder.params.table
        return params

    def parameter_count(self) -> int:
        return int(sum(p.size for p in self.named_parameters().values()))

    def embed_options(self, item: McqItem) -> tuple[np.ndarray, list[str], list[np.ndarray]]:
        q = self.encoder.embed(text_key(item.id, "q"), item.question).vector
        letters = list(item.options)
        options = [self.encoder.embed(text_key(item.id, letter), item.options[letter]).vector for letter in letters]
        return q, letters, options

    def score_item(self, item: McqItem) -> ItemScores:
        q, letters, options = self.embed_options(item)
        pairs = score_candidates(self.ars, q, options)
        return ItemScores(letters=letters, logits=[s for s, _ in pairs], scores=[r for _, r in pairs])

    def cosine_item(self, item: McqItem) -> ItemScores:
        """Baseline: raw embedding cosine (embeddings are unit norm), no head."""
        q, letters, options = self.embed_options(item)
        sims = [float(q @ c) for c in options]
        return ItemScores(letters=letters, logits=sims, scores=sims)


def build_encoder(config: TrainConfig, rng: Optional[np.random.Generator] = None) -> EncoderBackend:
    if config.backend == "precomputed":
        store = load_precomputed(config.embedding_store)
        if store.dim != config.embed_dim:
            raise DimensionMismatch(
                f"embedding store has d={store.dim} but config embed_dim={config.embed_dim}"
            )
        return PrecomputedEncoder(store)
    if rng is None:
        rng = named_rng(config.seed, "init")
    return ToyEncoder(init_toy_params(config.vocab_size, config.embed_dim, rng, config.toy_init_scale))
