"""Datasets: a synthetic toy set for CI and the CIFAR pair for real runs."""

from __future__ import annotations

import os

import numpy as np
import torch

TOY_SAMPLES = 1024
DATA_DIR_ENV = "ARCHEVAL_DATA_DIR"


def toy_dataset(input_shape, n_classes, seed=0, n_samples=TOY_SAMPLES):
    """Linearly separable synthetic set: each class shifts the per-channel
    means by its own prototype, so global-average-pool features separate it.
    Returns (x_train, y_train, x_val, y_val) tensors with a 3:1 split."""
    c, h, w = input_shape
    rng = np.random.default_rng(seed)
    prototypes = rng.normal(0.0, 1.0, size=(n_classes, c))
    labels = rng.integers(0, n_classes, size=n_samples)
    images = prototypes[labels][:, :, None, None] + rng.normal(0.0, 0.8, size=(n_samples, c, h, w))
    x = torch.as_tensor(images, dtype=torch.float32)
    y = torch.as_tensor(labels, dtype=torch.long)
    split = (n_samples * 3) // 4
    return x[:split], y[:split], x[split:], y[split:]


def cifar_datasets(name: str, seed: int = 0):
    """CIFAR-10/100 with the standard search-time preprocessing and a
    40k/10k train/validation split.  The dataset directory comes from
    $ARCHEVAL_DATA_DIR (default ./data); files must already be present or
    downloadable."""
    import torchvision
    from torchvision import transforms

    root = os.environ.get(DATA_DIR_ENV, "data")
    mean = (0.4914, 0.4822, 0.4465)
    std = (0.2470, 0.2435, 0.2616)
    train_tf = transforms.Compose(
        [
            transforms.RandomCrop(32, padding=4),
            transforms.RandomHorizontalFlip(),
            transforms.ToTensor(),
            transforms.Normalize(mean, std),
        ]
    )
    val_tf = transforms.Compose([transforms.ToTensor(), transforms.Normalize(mean, std)])
    cls = {"cifar10": torchvision.datasets.CIFAR10, "cifar100": torchvision.datasets.CIFAR100}[name]
    train_full = cls(root=root, train=True, download=True, transform=train_tf)
    val_full = cls(root=root, train=True, download=True, transform=val_tf)
    generator = torch.Generator().manual_seed(seed)
    perm = torch.randperm(len(train_full), generator=generator)
    train_idx, val_idx = perm[:40_000], perm[40_000:]
    train = torch.utils.data.Subset(train_full, train_idx.tolist())
    val = torch.utils.data.Subset(val_full, val_idx.tolist())
    return train, val


def cutout(batch: torch.Tensor, size: int, generator: torch.Generator) -> torch.Tensor:
    """Zero a random size x size square per image (final-retraining helper)."""
    out = batch.clone()
    _, _, h, w = out.shape
    for i in range(out.size(0)):
        cy = int(torch.randint(0, h, (1,), generator=generator))
        cx = int(torch.randint(0, w, (1,), generator=generator))
        y0, y1 = max(0, cy - size // 2), min(h, cy + size // 2)
        x0, x1 = max(0, cx - size // 2), min(w, cx + size // 2)
        out[i, :, y0:y1, x0:x1] = 0.0
    return out
