"""Training configuration and the dimension-driven default schedule."""

from __future__ import annotations

import hashlib
import json
from dataclasses import asdict, dataclass, replace
from typing import Optional

from .optim import OPTIMIZERS

LOSS_KINDS = ("gram", "literal-orthonormal")

# (max dim, blocks, lr, batch, epochs); first row whose bound covers d wins.
# Rows are per-dimension settings known to train well. At d=4096 two models were
# trained with different learning rates; 1e-5 is used.
SCHEDULE = (
    (1024, 1, 5e-5, 2048, 100),
    (1600, 1, 5e-5, 2048, 150),
    (2304, 2, 5e-5, 1024, 200),
    (3072, 2, 5e-5, 1024, 250),
    (3584, 3, 1e-5, 1024, 250),
    (None, 3, 1e-5, 1024, 300),
)


def default_hypers(d: int) -> tuple:
    """(blocks, lr, batch, epochs) for embedding dimension ``d``."""
    if d < 1:
        raise ValueError(f"dimension must be >= 1, got {d}")
    for bound, blocks, lr, batch, epochs in SCHEDULE:
        if bound is None or d <= bound:
            return blocks, lr, batch, epochs
    raise AssertionError("unreachable")


@dataclass(frozen=True)
class TrainConfig:
    """Unset (None) fields are filled from :func:`default_hypers` by :meth:`resolve`.

    ``holdout`` withholds that fraction of neutral rows from training entirely
    so Gram drift can be measured on unseen words afterwards.
    ``transform_bias`` (baseline only) projects transformed neutral words onto
    the transformed bias rows instead of the fixed ones.
    """

    lam: float = 0.2
    lr: Optional[float] = None
    batch_size: Optional[int] = None
    epochs: Optional[int] = None
    blocks: Optional[int] = None
    optimizer: str = "adam"
    seed: int = 0
    neutral_sample: Optional[int] = None
    loss: str = "gram"
    holdout: float = 0.0
    transform_bias: bool = False

    def __post_init__(self):
        if not 0.0 <= self.lam <= 1.0:
            raise ValueError(f"lambda must lie in [0, 1], got {self.lam}")
        if self.lr is not None and not self.lr >= 0:
            raise ValueError(f"lr must be >= 0, got {self.lr}")
        for name in ("batch_size", "blocks", "neutral_sample"):
            val = getattr(self, name)
            if val is not None and val < 1:
                raise ValueError(f"{name} must be positive, got {val}")
        if self.epochs is not None and self.epochs < 0:
            raise ValueError(f"epochs must be >= 0, got {self.epochs}")
        if self.optimizer not in OPTIMIZERS:
            raise ValueError(f"optimizer must be one of {OPTIMIZERS}, got {self.optimizer!r}")
        if self.loss not in LOSS_KINDS:
            raise ValueError(f"loss must be one of {LOSS_KINDS}, got {self.loss!r}")
        if not 0.0 <= self.holdout < 1.0:
            raise ValueError(f"holdout must lie in [0, 1), got {self.holdout}")

    def resolve(self, d: int) -> "TrainConfig":
        blocks, lr, batch, epochs = default_hypers(d)
        return replace(
            self,
            blocks=self.blocks if self.blocks is not None else blocks,
            lr=self.lr if self.lr is not None else lr,
            batch_size=self.batch_size if self.batch_size is not None else batch,
            epochs=self.epochs if self.epochs is not None else epochs,
        )

    def to_dict(self) -> dict:
        return asdict(self)

    def digest(self) -> str:
        blob = json.dumps(self.to_dict(), sort_keys=True).encode()
        return hashlib.sha256(blob).hexdigest()
