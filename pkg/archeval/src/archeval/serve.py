"""Protocol server: build, train, and score one model per request line.

Pinned seeds make identical requests yield identical errors: every request
re-seeds torch from the server's base seed before the model is built, and
the dataset is generated once per (shape, classes) from the same base seed.
"""

from __future__ import annotations

import json
import sys
from dataclasses import dataclass, field

import torch
from torch import nn

from .data import cutout, toy_dataset
from .model import GraphModel

MODE_DEFAULT_EPOCHS = {"toy": 2, "cifar10": 36, "cifar100": 36}
AUX_LOSS_WEIGHT = 0.4


def train_and_score(
    model: GraphModel,
    data,
    *,
    epochs: int,
    seed: int,
    batch_size: int = 128,
    lr: float = 0.025,
    momentum: float = 0.9,
    weight_decay: float = 5e-4,
    use_cutout: bool = False,
) -> float:
    """SGD + cosine schedule; returns 1 - validation accuracy."""
    x_train, y_train, x_val, y_val = data
    generator = torch.Generator().manual_seed(seed)
    optimizer = torch.optim.SGD(
        model.parameters(), lr=lr, momentum=momentum, weight_decay=weight_decay
    )
    scheduler = torch.optim.lr_scheduler.CosineAnnealingLR(optimizer, T_max=max(1, epochs))
    criterion = nn.CrossEntropyLoss()

    model.train()
    for _ in range(epochs):
        perm = torch.randperm(len(x_train), generator=generator)
        for start in range(0, len(perm), batch_size):
            idx = perm[start : start + batch_size]
            batch = x_train[idx]
            if use_cutout:
                batch = cutout(batch, size=8, generator=generator)
            optimizer.zero_grad()
            out = model(batch)
            if isinstance(out, tuple):
                logits, aux_logits = out
                loss = criterion(logits, y_train[idx]) + AUX_LOSS_WEIGHT * criterion(
                    aux_logits, y_train[idx]
                )
            else:
                loss = criterion(out, y_train[idx])
            loss.backward()
            optimizer.step()
        scheduler.step()

    model.eval()
    correct = 0
    with torch.no_grad():
        for start in range(0, len(x_val), batch_size):
            logits = model(x_val[start : start + batch_size])
            correct += int((logits.argmax(dim=1) == y_val[start : start + batch_size]).sum())
    return 1.0 - correct / len(x_val)


@dataclass
class Server:
    mode: str = "toy"
    seed: int = 0
    aux_head: bool = False
    use_cutout: bool = False
    _toy_cache: dict = field(default_factory=dict)

    def _toy_data(self, input_shape, n_classes):
        key = (tuple(input_shape), n_classes)
        if key not in self._toy_cache:
            self._toy_cache[key] = toy_dataset(input_shape, n_classes, seed=self.seed)
        return self._toy_cache[key]

    def handle(self, doc: dict) -> dict:
        rid = doc.get("id")
        try:
            arch = doc["arch"]
            epochs = int(doc.get("epochs") or MODE_DEFAULT_EPOCHS[self.mode])
            torch.manual_seed(self.seed)
            model = GraphModel(arch, aux_head=self.aux_head)
            if self.mode == "toy":
                data = self._toy_data(arch["input_shape"], arch["n_classes"])
            else:
                data = self._cifar_tensors(arch)
            error = train_and_score(
                model, data, epochs=epochs, seed=self.seed, use_cutout=self.use_cutout
            )
            return {"v": 1, "id": rid, "status": "ok", "error": float(error)}
        except Exception as exc:  # stay alive; the engine treats this as failed
            return {"v": 1, "id": rid, "status": "failed", "diagnostics": f"{type(exc).__name__}: {exc}"}

    def _cifar_tensors(self, arch):
        from .data import cifar_datasets

        train, val = cifar_datasets(self.mode, seed=self.seed)
        loader = torch.utils.data.DataLoader(train, batch_size=len(train))
        x_train, y_train = next(iter(loader))
        loader = torch.utils.data.DataLoader(val, batch_size=len(val))
        x_val, y_val = next(iter(loader))
        return x_train, y_train, x_val, y_val

    def serve(self, stdin=None, stdout=None) -> int:
        stdin = stdin or sys.stdin
        stdout = stdout or sys.stdout
        for line in stdin:
            line = line.strip()
            if not line:
                continue
            try:
                doc = json.loads(line)
            except json.JSONDecodeError:
                continue  # no id to answer with
            if not isinstance(doc, dict) or "id" not in doc:
                continue
            response = self.handle(doc)
            stdout.write(json.dumps(response) + "\n")
            stdout.flush()
        return 0
