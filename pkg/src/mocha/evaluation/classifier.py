"""Small window classifiers for recognition-accuracy scoring.

A two-layer network over flattened windows stands in for the large-scale
motion classifiers used at paper scale; it is plenty for the toy corpus,
where actions and characters are linearly separable almost everywhere.
"""

from __future__ import annotations

import torch
from torch import nn

from ..errors import DataError


class WindowClassifier(nn.Module):
    def __init__(self, T: int, n_joint: int, n_labels: int, hidden: int = 128):
        super().__init__()
        self.n_labels = n_labels
        self.net = nn.Sequential(
            nn.Flatten(-3),
            nn.Linear(T * n_joint * 15, hidden),
            nn.GELU(),
            nn.Linear(hidden, n_labels),
        )

    def forward(self, windows: torch.Tensor) -> torch.Tensor:
        return self.net(windows)


def train_window_classifier(
    windows: torch.Tensor,
    labels: torch.Tensor,
    n_labels: int,
    steps: int = 200,
    batch_size: int = 32,
    lr: float = 1e-3,
    seed: int = 0,
) -> WindowClassifier:
    if windows.shape[0] != labels.shape[0]:
        raise DataError("windows and labels disagree on sample count")
    if int(labels.max()) >= n_labels or int(labels.min()) < 0:
        raise DataError(f"labels must lie in [0, {n_labels})")
    torch.manual_seed(seed)
    model = WindowClassifier(windows.shape[1], windows.shape[2], n_labels)
    opt = torch.optim.AdamW(model.parameters(), lr=lr)
    gen = torch.Generator().manual_seed(seed)
    x = windows.to(torch.float32)
    for _ in range(steps):
        idx = torch.randint(x.shape[0], (batch_size,), generator=gen)
        logits = model(x[idx])
        loss = nn.functional.cross_entropy(logits, labels[idx])
        opt.zero_grad()
        loss.backward()
        opt.step()
    model.eval()
    return model


def recognition_accuracy(
    model, samples: torch.Tensor, labels: torch.Tensor, topk: int = 1
) -> float:
    """Fraction of samples whose true label lands in the classifier's top k."""
    with torch.no_grad():
        logits = model(samples.to(torch.float32))
    n_labels = logits.shape[-1]
    if int(labels.max()) >= n_labels or int(labels.min()) < 0:
        raise DataError(
            f"labels must lie in [0, {n_labels}) to score this classifier"
        )
    k = min(topk, n_labels)
    top = logits.topk(k, dim=-1).indices
    hit = (top == labels[:, None]).any(dim=-1)
    return float(hit.to(torch.float64).mean())
