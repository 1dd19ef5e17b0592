"""Evaluation kit: retrieval gallery, attribute errors, clustering, reports."""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .data import Sample, tensor_to_image
from .sprites import analyze_image, features_from_params
from .trainer import TrainState
from .config import config_fingerprint


def _as_rows(embeddings) -> np.ndarray:
    arr = np.asarray(embeddings, dtype=np.float64)
    if arr.ndim != 2:
        raise ValueError(f"expected (N, D) embeddings, got {arr.shape}")
    return arr


def _normalize_rows(arr: np.ndarray) -> np.ndarray:
    norms = np.linalg.norm(arr, axis=1, keepdims=True)
    if (norms == 0).any():
        raise ValueError("zero-norm embedding row")
    return arr / norms


@dataclass
class Gallery:
    """L2-normalized reference embeddings with identity labels.

    sample_ids, when present, let retrieval exclude gallery entries that are
    the query itself (matched by id) rather than a genuine reference.
    """

    embeddings: np.ndarray
    labels: list[int]
    sample_ids: list[int] | None = None

    def __post_init__(self) -> None:
        self.embeddings = _normalize_rows(_as_rows(self.embeddings))
        if len(self.labels) != self.embeddings.shape[0]:
            raise ValueError("labels must align with embedding rows")
        if self.sample_ids is not None and len(self.sample_ids) != len(self.labels):
            raise ValueError("sample_ids must align with embedding rows")


def id_retrieval(query_embeddings, query_labels: list[int], gallery: Gallery,
                 query_sample_ids: list[int] | None = None) -> float:
    """Fraction of queries whose nearest gallery entry (cosine) shares their label.

    Ties resolve to the lowest gallery index. Entries carrying the query's own
    sample id are excluded from the scan.
    """
    q = _normalize_rows(_as_rows(query_embeddings))
    if len(query_labels) != q.shape[0]:
        raise ValueError("query labels must align with query rows")
    if q.shape[1] != gallery.embeddings.shape[1]:
        raise ValueError("query and gallery dimensionality differ")
    sims = q @ gallery.embeddings.T
    if query_sample_ids is not None and gallery.sample_ids is not None:
        for i, qid in enumerate(query_sample_ids):
            for j, gid in enumerate(gallery.sample_ids):
                if qid == gid:
                    sims[i, j] = -np.inf
    preds = sims.argmax(axis=1)
    hits = [gallery.labels[j] == lab for j, lab in zip(preds, query_labels)]
    return float(np.mean(hits))


class SpritePoseEstimator:
    """Pose readout: exact from sprite parameters, inverse-rendered from pixels.

    Images too degraded to read score as the neutral view (yaw 0), so error
    means stay finite on arbitrary generator output.
    """

    def estimate(self, item) -> np.ndarray:
        yaw = _features(item).pose_yaw
        return np.asarray([yaw if np.isfinite(yaw) else 0.0], dtype=np.float64)


class SpriteExpressionEstimator:
    """Expression readout: exact from sprite parameters, fitted from pixels.

    Unreadable mouths score as half open, the midpoint of the range.
    """

    def estimate(self, item) -> np.ndarray:
        op = _features(item).expression_open
        return np.asarray([op if np.isfinite(op) else 0.5], dtype=np.float64)


def _features(item):
    import torch

    if isinstance(item, Sample):
        if item.sprite is not None:
            return features_from_params(item.sprite)
        return analyze_image(tensor_to_image(item.image))
    if isinstance(item, torch.Tensor):
        return analyze_image(tensor_to_image(item))
    if isinstance(item, np.ndarray):
        return analyze_image(item)
    raise TypeError(f"cannot estimate from {type(item).__name__}")


def _vector_error(outputs, references, estimator) -> float:
    if len(outputs) != len(references):
        raise ValueError("outputs and references must align")
    if not outputs:
        raise ValueError("empty evaluation list")
    dists = []
    for out, ref in zip(outputs, references):
        a = estimator.estimate(out)
        b = estimator.estimate(ref)
        dists.append(float(np.linalg.norm(a - b)))
    return float(np.mean(dists))


def pose_error(outputs, references, estimator=None) -> float:
    """Mean L2 distance between pose estimates of aligned lists."""
    return _vector_error(outputs, references, estimator or SpritePoseEstimator())


def expression_error(outputs, references, estimator=None) -> float:
    """Mean L2 distance between expression estimates of aligned lists."""
    return _vector_error(outputs, references, estimator or SpriteExpressionEstimator())


def cluster_identities(embeddings, threshold: float = 0.95) -> list[int]:
    """Single-link clustering: transitive closure of the cos >= threshold graph.

    Deterministic given input order; labels are cluster indices in order of
    each cluster's first member.
    """
    arr = _normalize_rows(_as_rows(embeddings))
    n = arr.shape[0]
    sims = arr @ arr.T
    parent = list(range(n))

    def find(i: int) -> int:
        while parent[i] != i:
            parent[i] = parent[parent[i]]
            i = parent[i]
        return i

    for i in range(n):
        for j in range(i + 1, n):
            if sims[i, j] >= threshold:
                ri, rj = find(i), find(j)
                if ri != rj:
                    parent[max(ri, rj)] = min(ri, rj)

    roots: dict[int, int] = {}
    labels = []
    for i in range(n):
        r = find(i)
        if r not in roots:
            roots[r] = len(roots)
        labels.append(roots[r])
    return labels


@dataclass
class EvalReport:
    """Aggregate swap-quality metrics for one checkpoint on one pair list."""

    n_pairs: int
    id_retrieval_acc: float
    pose_err: float
    expr_err: float
    pose_err_recon: float
    expr_err_recon: float
    config_fingerprint: str
    rows: list[dict] = field(default_factory=list)

    def to_text(self) -> str:
        lines = [
            "swap evaluation report",
            f"config_fingerprint: {self.config_fingerprint}",
            f"n_pairs: {self.n_pairs}",
            f"id_retrieval_acc: {self.id_retrieval_acc:.4f}",
            f"pose_err: {self.pose_err:.4f}",
            f"expr_err: {self.expr_err:.4f}",
            f"pose_err_recon_baseline: {self.pose_err_recon:.4f}",
            f"expr_err_recon_baseline: {self.expr_err_recon:.4f}",
        ]
        return "\n".join(lines) + "\n"


def evaluate(state_or_path, pairs: list[tuple[Sample, Sample]], embedder=None,
             out_dir=None) -> EvalReport:
    """Swap every (src, tgt) pair, score with the sprite oracles, and report.

    The gallery holds the oracle embeddings of all source samples; the
    reconstruction baseline re-synthesizes each target with its own identity
    and scores it with the same estimators.
    """
    from .embedder import SpriteOracleEmbedder
    from .swapping import swap

    from .trainer import load_checkpoint

    if not pairs:
        raise ValueError("need at least one evaluation pair")
    state = state_or_path if isinstance(state_or_path, TrainState) else load_checkpoint(state_or_path)
    oracle = embedder or SpriteOracleEmbedder()

    sources = [src for src, _ in pairs]
    targets = [tgt for _, tgt in pairs]
    gallery = Gallery(
        embeddings=oracle.embed(sources),
        labels=[s.identity_label for s in sources],
    )

    swaps = []
    recons = []
    rows = []
    for src, tgt in pairs:
        res = swap(state, src, tgt)
        rec = swap(state, tgt, tgt)
        swaps.append(res.image)
        recons.append(rec.image)
        rows.append({
            "src_label": src.identity_label,
            "tgt_label": tgt.identity_label,
            "similarity_to_src": res.similarity_to_src,
            "similarity_to_tgt": res.similarity_to_tgt,
        })

    acc = id_retrieval(oracle.embed(swaps), [s.identity_label for s in sources], gallery)
    pose = SpritePoseEstimator()
    expr = SpriteExpressionEstimator()
    report = EvalReport(
        n_pairs=len(pairs),
        id_retrieval_acc=acc,
        pose_err=pose_error(swaps, targets, pose),
        expr_err=expression_error(swaps, targets, expr),
        pose_err_recon=pose_error(recons, targets, pose),
        expr_err_recon=expression_error(recons, targets, expr),
        config_fingerprint=config_fingerprint(state.cfg),
        rows=rows,
    )
    if out_dir is not None:
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        (out / "report.txt").write_text(report.to_text())
        with open(out / "pairs.csv", "w") as fh:
            fh.write("src_label,tgt_label,similarity_to_src,similarity_to_tgt\n")
            for r in rows:
                fh.write(f"{r['src_label']},{r['tgt_label']},"
                         f"{r['similarity_to_src']!r},{r['similarity_to_tgt']!r}\n")
    return report
