"""Large-margin cosine loss for one classifier head, and the two-head sum.

Inputs and head rows are L2-normalized on the fly, so the head can store raw
weights and the optimizer can update them directly. All math is float64; the
per-sample log-sum-exp uses a max shift so the loss stays finite for any
scale. Gradients are exact, including the Jacobian of the normalizations.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import InvalidLabel, NotNormalized, ShapeError

# Rows with a smaller L2 norm cannot be meaningfully normalized.
_MIN_ROW_NORM = 1e-12


@dataclass
class DescriptorBatch:
    """A batch of descriptors with their class labels.

    The training pipeline feeds unit rows (within 1e-9); the loss kernel
    itself re-normalizes, so scaling a row by a positive constant does not
    change the loss.
    """

    vectors: np.ndarray  # (B, d) float64
    labels: np.ndarray  # (B,) int

    def __post_init__(self):
        self.vectors = np.asarray(self.vectors, dtype=np.float64)
        self.labels = np.asarray(self.labels, dtype=np.int64)
        if self.vectors.ndim != 2:
            raise ShapeError(f"vectors must be 2D, got shape {self.vectors.shape}")
        if self.labels.shape != (self.vectors.shape[0],):
            raise ShapeError(
                f"labels shape {self.labels.shape} does not match batch "
                f"size {self.vectors.shape[0]}"
            )

    def __len__(self) -> int:
        return self.vectors.shape[0]


@dataclass
class HeadWeights:
    """One classifier head: a raw (unnormalized) C x d weight matrix."""

    matrix: np.ndarray

    def __post_init__(self):
        self.matrix = np.asarray(self.matrix, dtype=np.float64)
        if self.matrix.ndim != 2:
            raise ShapeError(f"head matrix must be 2D, got shape {self.matrix.shape}")

    @property
    def num_classes(self) -> int:
        return self.matrix.shape[0]


@dataclass(frozen=True)
class CosfaceParams:
    scale_s: float = 30.0
    margin_m: float = 0.4


def check_unit_rows(matrix: np.ndarray, tol: float, what: str = "rows") -> None:
    """Raise NotNormalized unless every row is unit-norm within tol."""
    norms = np.linalg.norm(matrix, axis=1)
    bad = np.where(np.abs(norms - 1.0) > tol)[0]
    if bad.size:
        raise NotNormalized(
            f"{what}: {bad.size} row(s) not unit-norm within {tol} "
            f"(first offender: row {bad[0]}, norm {norms[bad[0]]!r})"
        )


def _normalize_rows(matrix: np.ndarray, what: str) -> tuple[np.ndarray, np.ndarray]:
    norms = np.linalg.norm(matrix, axis=1)
    if not np.all(np.isfinite(norms)) or np.any(norms <= _MIN_ROW_NORM):
        raise NotNormalized(f"{what}: row with zero or non-finite norm")
    return matrix / norms[:, None], norms


def _margin_logits(
    batch: DescriptorBatch, head: HeadWeights, p: CosfaceParams
) -> tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
    """Normalize, check labels, and build the margin-adjusted scaled logits."""
    if batch.vectors.shape[1] != head.matrix.shape[1]:
        raise ShapeError(
            f"descriptor dim {batch.vectors.shape[1]} != head dim "
            f"{head.matrix.shape[1]}"
        )
    n_classes = head.num_classes
    bad = np.where((batch.labels < 0) | (batch.labels >= n_classes))[0]
    if bad.size:
        raise InvalidLabel(
            f"label {batch.labels[bad[0]]} out of range [0, {n_classes}) "
            f"at batch row {bad[0]}"
        )
    x_unit, x_norms = _normalize_rows(batch.vectors, "descriptor batch")
    w_unit, w_norms = _normalize_rows(head.matrix, "head weights")
    cosines = x_unit @ w_unit.T
    logits = p.scale_s * cosines
    rows = np.arange(len(batch))
    logits[rows, batch.labels] = p.scale_s * (cosines[rows, batch.labels] - p.margin_m)
    return logits, x_unit, x_norms, w_unit, w_norms


def cosface_loss(
    batch: DescriptorBatch, head: HeadWeights, p: CosfaceParams
) -> tuple[float, np.ndarray]:
    """Mean large-margin cosine loss over the batch, plus the B x C logits.

    Per sample: -log( e^{s(cos t_y - m)} / (e^{s(cos t_y - m)} +
    sum_{j != y} e^{s cos t_j}) ), evaluated via a max-shifted
    log-sum-exp. Always finite and >= 0.
    """
    logits, _, _, _, _ = _margin_logits(batch, head, p)
    shift = logits.max(axis=1, keepdims=True)
    lse = shift[:, 0] + np.log(np.exp(logits - shift).sum(axis=1))
    per_sample = lse - logits[np.arange(len(batch)), batch.labels]
    return float(per_sample.mean()), logits


def cosface_grad(
    batch: DescriptorBatch, head: HeadWeights, p: CosfaceParams
) -> tuple[np.ndarray, np.ndarray]:
    """Gradients of the mean loss w.r.t. the raw inputs and raw head rows.

    Both normalizations are differentiated through: for a raw row u with
    unit direction u_hat, grad_raw = (g - (g . u_hat) u_hat) / ||u||.
    """
    logits, x_unit, x_norms, w_unit, w_norms = _margin_logits(batch, head, p)
    b = len(batch)
    shift = logits.max(axis=1, keepdims=True)
    expd = np.exp(logits - shift)
    probs = expd / expd.sum(axis=1, keepdims=True)
    probs[np.arange(b), batch.labels] -= 1.0
    dcos = (p.scale_s / b) * probs  # (B, C), d loss / d cosines

    g_x_unit = dcos @ w_unit  # (B, d)
    g_w_unit = dcos.T @ x_unit  # (C, d)
    grad_inputs = (
        g_x_unit - (g_x_unit * x_unit).sum(axis=1, keepdims=True) * x_unit
    ) / x_norms[:, None]
    grad_head = (
        g_w_unit - (g_w_unit * w_unit).sum(axis=1, keepdims=True) * w_unit
    ) / w_norms[:, None]
    return grad_inputs, grad_head


def combined_loss(
    batch_lat: DescriptorBatch | None,
    head_lat: HeadWeights | None,
    batch_front: DescriptorBatch | None,
    head_front: HeadWeights | None,
    p: CosfaceParams,
) -> float:
    """Sum of the lateral and frontal head losses; an empty side adds 0."""
    total = 0.0
    for batch, head in ((batch_lat, head_lat), (batch_front, head_front)):
        if batch is None or len(batch) == 0:
            continue
        if head is None:
            raise ShapeError("non-empty batch paired with a missing head")
        loss, _ = cosface_loss(batch, head, p)
        total += loss
    return total
