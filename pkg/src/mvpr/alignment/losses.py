"""Alignment and metric-learning losses with exact gradients.

The teacher-student alignment loss is the mean squared difference over all
descriptor entries; the teacher side is always treated as a constant, so
gradients reach only the student. The four metric losses operate on a
batch of embeddings with place-id labels (and optional real/synt domain
tags for cross-domain triplet mining).

Default hyperparameters are common literature values, overridable per
call; they are not tuned.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from ..errors import ContractViolation, InputError
from .tape import Tensor, l2norm_rows

METRIC_LOSS_KINDS = ("contrastive", "triplet", "ntxent", "multisimilarity")

DEFAULT_MARGIN = 0.1
DEFAULT_TEMPERATURE = 0.07
DEFAULT_MS_ALPHA = 2.0
DEFAULT_MS_BETA = 50.0
DEFAULT_MS_LAMBDA = 1.0


@dataclass(frozen=True)
class LossValue:
    value: float
    grad: np.ndarray  # w.r.t. the trainable input, flattened
    warning: str | None = None

    def __post_init__(self):
        if not math.isfinite(self.value) or not np.all(np.isfinite(self.grad)):
            raise ContractViolation("loss produced a non-finite value or gradient")


def mse_loss_t(teacher_out: np.ndarray, student_out: Tensor) -> Tensor:
    """Mean over all B*D squared differences; teacher is constant."""
    teacher_out = np.asarray(teacher_out, dtype=np.float64)
    if teacher_out.shape != student_out.shape:
        raise ContractViolation(
            f"teacher {teacher_out.shape} and student {student_out.shape} differ"
        )
    diff = student_out - Tensor(teacher_out)
    return (diff * diff).mean()


def mse_alignment_loss(teacher_out: np.ndarray, student_out: np.ndarray) -> LossValue:
    student = Tensor(np.asarray(student_out, dtype=np.float64), requires_grad=True)
    loss = mse_loss_t(teacher_out, student)
    loss.backward()
    return LossValue(value=float(loss.data), grad=student.grad.reshape(-1))


def _pairwise_sq_dists(emb: Tensor) -> Tensor:
    """(B, B) squared Euclidean distances, clamped at zero."""
    b = emb.shape[0]
    gram = emb @ emb.T
    sq = (emb * emb).sum(axis=1)
    d2 = sq.reshape(b, 1) + sq.reshape(1, b) + gram * -2.0
    return d2.relu()  # clamp float residue like -1e-16


def _label_masks(labels: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    same = labels[:, None] == labels[None, :]
    eye = np.eye(len(labels), dtype=bool)
    return same & ~eye, ~same


def _contrastive(emb: Tensor, labels, margin: float) -> tuple[Tensor, str | None]:
    # Hadsell-style: positives pull with squared distance, negatives push
    # with a squared hinge at the margin; averaged over all unordered pairs.
    b = emb.shape[0]
    pos, neg = _label_masks(labels)
    upper = np.triu(np.ones((b, b), dtype=bool), k=1)
    d2 = _pairwise_sq_dists(emb)
    d = d2.sqrt()
    hinge = (margin - d).relu()
    per_pair = d2 * (pos & upper).astype(float) + hinge * hinge * (neg & upper).astype(float)
    n_pairs = b * (b - 1) // 2
    return per_pair.sum() * (1.0 / n_pairs), None


def _mine_triplets(labels, domains):
    anchors, positives, negatives = [], [], []
    n = len(labels)
    is_anchor = [True] * n
    is_candidate = [True] * n
    if domains is not None:
        is_anchor = [d == "real" for d in domains]
        is_candidate = [d == "synt" for d in domains]
    for a in range(n):
        if not is_anchor[a]:
            continue
        pos_idx = [
            p for p in range(n) if p != a and is_candidate[p] and labels[p] == labels[a]
        ]
        neg_idx = [
            q for q in range(n) if is_candidate[q] and labels[q] != labels[a]
        ]
        for p in pos_idx:
            for q in neg_idx:
                anchors.append(a)
                positives.append(p)
                negatives.append(q)
    return anchors, positives, negatives


def _triplet(emb: Tensor, labels, domains, margin: float) -> tuple[Tensor, str | None]:
    anchors, positives, negatives = _mine_triplets(labels, domains)
    if not anchors:
        return None, "no valid triplets in batch"
    d = _pairwise_sq_dists(emb).sqrt()
    d_ap = d.gather2d(anchors, positives)
    d_an = d.gather2d(anchors, negatives)
    return ((d_ap - d_an) + margin).relu().mean(), None


def _masked_logsumexp_rows(s: Tensor, mask: np.ndarray) -> Tensor:
    """log sum_k exp(s_ik) over mask columns, row-wise, max-shifted."""
    shift = np.where(mask, s.data, -np.inf).max(axis=1, keepdims=True)
    expd = (s - Tensor(shift)).exp() * mask.astype(float)
    return expd.sum(axis=1).log() + Tensor(shift[:, 0])


def _ntxent(emb: Tensor, labels, temperature: float) -> tuple[Tensor, str | None]:
    # one term per ordered positive pair: -log softmax over the anchor's row
    b = emb.shape[0]
    pos, _ = _label_masks(labels)
    if not pos.any():
        return None, "no positive pairs in batch"
    normed = l2norm_rows(emb)
    sims = (normed @ normed.T) * (1.0 / temperature)
    off_diag = ~np.eye(b, dtype=bool)
    lse = _masked_logsumexp_rows(sims, off_diag)
    per_pair = lse.reshape(b, 1) - sims
    return (per_pair * pos.astype(float)).sum() * (1.0 / pos.sum()), None


def _multisimilarity(
    emb: Tensor, labels, alpha: float, beta: float, lam: float
) -> tuple[Tensor, str | None]:
    b = emb.shape[0]
    pos, neg = _label_masks(labels)
    normed = l2norm_rows(emb)
    sims = normed @ normed.T
    exp_pos = ((sims - lam) * -alpha).exp() * pos.astype(float)
    exp_neg = ((sims - lam) * beta).exp() * neg.astype(float)
    pos_term = (exp_pos.sum(axis=1) + 1.0).log() * (1.0 / alpha)
    neg_term = (exp_neg.sum(axis=1) + 1.0).log() * (1.0 / beta)
    return (pos_term + neg_term).sum() * (1.0 / b), None


def metric_loss_t(
    kind: str,
    emb: Tensor,
    labels,
    domains=None,
    *,
    margin: float = DEFAULT_MARGIN,
    temperature: float = DEFAULT_TEMPERATURE,
    alpha: float = DEFAULT_MS_ALPHA,
    beta: float = DEFAULT_MS_BETA,
    lam: float = DEFAULT_MS_LAMBDA,
) -> tuple[Tensor | None, str | None]:
    if kind not in METRIC_LOSS_KINDS:
        raise InputError(f"unknown metric loss {kind!r} (choose from {METRIC_LOSS_KINDS})")
    labels = np.asarray(labels)
    if emb.shape[0] < 2:
        raise ContractViolation("metric losses need a batch of at least 2")
    if len(labels) != emb.shape[0]:
        raise ContractViolation("one label per embedding required")
    if kind == "contrastive":
        return _contrastive(emb, labels, margin)
    if kind == "triplet":
        return _triplet(emb, labels, domains, margin)
    if kind == "ntxent":
        return _ntxent(emb, labels, temperature)
    return _multisimilarity(emb, labels, alpha, beta, lam)


def metric_loss(kind: str, embeddings: np.ndarray, labels, domains=None, **hyper) -> LossValue:
    """Loss value and exact gradient w.r.t. the embedding matrix."""
    emb = Tensor(np.asarray(embeddings, dtype=np.float64), requires_grad=True)
    loss, warning = metric_loss_t(kind, emb, labels, domains, **hyper)
    if loss is None:
        return LossValue(value=0.0, grad=np.zeros(emb.data.size), warning=warning)
    loss.backward()
    return LossValue(value=float(loss.data), grad=emb.grad.reshape(-1), warning=warning)
