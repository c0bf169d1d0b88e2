"""Probabilistic asset retrieval: blended semantic/geometric scoring with
temperature softmax, top-k, and nucleus filtering.

Randomness comes from numpy's PCG64 generator, so sampled choices are
reproducible across platforms for a fixed seed.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np

from .errors import BadFormat, BadNorm, DimensionMismatch, InconsistentDimension
from .scene import Vec3

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class AssetEntry:
    jid: str
    desc: str
    embedding: np.ndarray  # unit-norm, catalog-constant dimension
    size: Vec3
    mesh_path: str | None = None


@dataclass(frozen=True)
class SamplerConfig:
    lam: float = 0.5          # weight of the semantic term
    sigma: float = 0.2        # size-similarity bandwidth
    temperature: float = 0.2
    top_p: float = 0.95
    top_k: int = 20
    seed: int | None = None


class Catalog:
    def __init__(self, entries: list[AssetEntry]):
        if not entries:
            raise BadFormat("catalog is empty")
        self.entries = list(entries)
        self.dim = len(entries[0].embedding)
        for e in entries:
            if len(e.embedding) != self.dim:
                raise InconsistentDimension(
                    f"asset {e.jid}: embedding dimension {len(e.embedding)} != {self.dim}")
        self._embeddings = np.stack([e.embedding for e in entries])
        self._sizes = np.array([e.size.as_list() for e in entries])

    def __len__(self) -> int:
        return len(self.entries)

    def by_jid(self, jid: str) -> AssetEntry:
        for e in self.entries:
            if e.jid == jid:
                return e
        raise KeyError(jid)

    @property
    def embeddings(self) -> np.ndarray:
        return self._embeddings

    @property
    def sizes(self) -> np.ndarray:
        return self._sizes


def _check_unit(vec: np.ndarray, what: str) -> np.ndarray:
    norm = float(np.linalg.norm(vec))
    if abs(norm - 1.0) > 1e-3:
        raise BadNorm(f"{what} has norm {norm:.6f}, expected 1")
    if abs(norm - 1.0) > 1e-6:
        log.warning("%s slightly off unit norm (%.2e); renormalizing", what, abs(norm - 1))
        return vec / norm
    return vec


def load_catalog(path) -> Catalog:
    """Load a tab-separated catalog: header ``#dim=D`` then per line
    jid, desc, sx, sy, sz, and D space-separated embedding floats."""
    entries = []
    dim = None
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            line = line.rstrip("\n")
            if not line:
                continue
            if line.startswith("#"):
                if line.startswith("#dim="):
                    dim = int(line[5:])
                continue
            parts = line.split("\t")
            if len(parts) != 6:
                raise BadFormat(f"line {lineno}: expected 6 tab-separated fields, got {len(parts)}")
            jid, desc, sx, sy, sz, emb = parts
            try:
                size = Vec3(float(sx), float(sy), float(sz))
                vec = np.array([float(x) for x in emb.split()])
            except ValueError as exc:
                raise BadFormat(f"line {lineno}: {exc}") from exc
            if dim is None:
                dim = len(vec)
            if len(vec) != dim:
                raise InconsistentDimension(
                    f"line {lineno}: embedding dimension {len(vec)} != {dim}")
            if min(size.x, size.y, size.z) <= 0:
                raise BadFormat(f"line {lineno}: non-positive asset size")
            vec = _check_unit(vec, f"embedding of {jid}")
            entries.append(AssetEntry(jid, desc, vec, size))
    if not entries:
        raise BadFormat(f"no catalog entries in {path}")
    return Catalog(entries)


def load_query_embeddings(path) -> dict[str, np.ndarray]:
    """Prompt-keyed embedding lookup in the catalog file layout (sizes are
    present for format symmetry but ignored)."""
    out: dict[str, np.ndarray] = {}
    dim = None
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            line = line.rstrip("\n")
            if not line or line.startswith("#"):
                continue
            parts = line.split("\t")
            if len(parts) != 6:
                raise BadFormat(f"line {lineno}: expected 6 tab-separated fields")
            _, text, _, _, _, emb = parts
            vec = np.array([float(x) for x in emb.split()])
            if dim is None:
                dim = len(vec)
            elif len(vec) != dim:
                raise InconsistentDimension(f"line {lineno}: inconsistent dimension")
            out[text] = _check_unit(vec, f"embedding for {text!r}")
    if not out:
        raise BadFormat(f"no query embeddings in {path}")
    return out


def score_assets(query_embedding: np.ndarray, target_size: Vec3,
                 catalog: Catalog, lam: float = 0.5,
                 sigma: float = 0.2) -> list[tuple[str, float]]:
    """Blend cosine similarity with a Gaussian size-compatibility term:
    lam * <q, e_j> + (1 - lam) * exp(-||s - s_j||^2 / (2 sigma^2)).
    Returned descending by score, ties broken by jid."""
    q = np.asarray(query_embedding, dtype=float)
    if len(q) != catalog.dim:
        raise DimensionMismatch(f"query dimension {len(q)} != catalog dimension {catalog.dim}")
    semantic = catalog.embeddings @ q
    diff = catalog.sizes - np.asarray(target_size.as_list())
    geometric = np.exp(-(diff ** 2).sum(axis=1) / (2.0 * sigma ** 2))
    scores = lam * semantic + (1.0 - lam) * geometric
    ranked = sorted(zip((e.jid for e in catalog.entries), scores.tolist()),
                    key=lambda pair: (-pair[1], pair[0]))
    return ranked


def _nucleus_probs(scores: list[tuple[str, float]], cfg: SamplerConfig
                   ) -> tuple[list[str], np.ndarray]:
    """Top-k, temperature softmax, then the smallest top-p prefix,
    renormalized."""
    ranked = sorted(scores, key=lambda pair: (-pair[1], pair[0]))
    kept = ranked[:max(cfg.top_k, 1)]
    jids = [j for j, _ in kept]
    logits = np.array([s for _, s in kept]) / cfg.temperature
    logits -= logits.max()
    probs = np.exp(logits)
    probs /= probs.sum()
    cum = np.cumsum(probs)
    cut = int(np.searchsorted(cum, cfg.top_p - 1e-12)) + 1
    probs = probs[:cut]
    probs /= probs.sum()
    return jids[:cut], probs


def sample_asset(scores: list[tuple[str, float]], cfg: SamplerConfig) -> str:
    """Draw one jid from the filtered softmax distribution; deterministic for
    a fixed (scores, cfg, seed)."""
    if not scores:
        raise BadFormat("cannot sample from empty scores")
    jids, probs = _nucleus_probs(scores, cfg)
    rng = np.random.default_rng(cfg.seed)
    return jids[int(rng.choice(len(jids), p=probs))]


def greedy_asset(scores: list[tuple[str, float]]) -> str:
    """Argmax by score, ties broken by lexicographically smaller jid."""
    if not scores:
        raise BadFormat("cannot select from empty scores")
    return min(scores, key=lambda pair: (-pair[1], pair[0]))[0]
