"""Self-describing checkpoint container.

Layout (all integers little-endian)::

    magic        8 bytes   b"HPUNCKPT"
    version      uint32    FORMAT_VERSION
    header_len   uint32    length of the JSON header in bytes
    header       UTF-8 JSON, keys sorted, no whitespace
    payload      float32 little-endian tensors, back to back

The header carries the model config, label scheme, vocabulary tokens and
their SHA-256, the best validation loss and its epoch, and a tensor table of
``{name, shape, offset}`` entries where ``offset`` counts bytes from the
start of the payload. Nothing time- or host-dependent is written, so equal
parameters give equal files.
"""

from __future__ import annotations

import json
import math
import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np
import torch

from .model import ModelConfig, TokenClassifier
from .schemes import LabelScheme, Task
from .tokenizer import Vocab

MAGIC = b"HPUNCKPT"
FORMAT_VERSION = 1


class CheckpointError(ValueError):
    pass


class VocabMismatch(CheckpointError):
    pass


@dataclass
class Checkpoint:
    config: ModelConfig
    state: dict[str, torch.Tensor]
    vocab: Vocab
    scheme: LabelScheme
    best_val_loss: float | None = None
    epoch_of_best: int = 0

    def __post_init__(self) -> None:
        self.state = {k: v.detach().to(torch.float32).cpu().clone() for k, v in self.state.items()}
        reference = TokenClassifier(self.config).state_dict()
        if set(reference) != set(self.state):
            missing = sorted(set(reference) ^ set(self.state))
            raise CheckpointError(f"tensor names disagree with config: {missing[:5]}")
        for name, tensor in self.state.items():
            if tensor.shape != reference[name].shape:
                raise CheckpointError(f"{name}: shape {tuple(tensor.shape)} != {tuple(reference[name].shape)}")
            if not torch.isfinite(tensor).all():
                raise CheckpointError(f"{name} has non-finite entries")
        if self.config.vocab_size != len(self.vocab):
            raise VocabMismatch(f"config vocab_size {self.config.vocab_size} != vocab {len(self.vocab)}")
        if self.config.num_labels != len(self.scheme):
            raise CheckpointError("num_labels disagrees with the label scheme")

    @property
    def vocab_sha256(self) -> str:
        return self.vocab.sha256

    def build_model(self) -> TokenClassifier:
        model = TokenClassifier(self.config)
        model.load_state_dict(self.state)
        model.eval()
        return model

    def check_vocab(self, vocab: Vocab) -> None:
        if vocab.sha256 != self.vocab_sha256:
            raise VocabMismatch("vocabulary hash differs from the one the model was trained with")

    def to_bytes(self) -> bytes:
        tensors, chunks, offset = [], [], 0
        for name in sorted(self.state):
            arr = self.state[name].numpy().astype("<f4", copy=False)
            raw = arr.tobytes(order="C")
            tensors.append({"name": name, "shape": list(arr.shape), "offset": offset})
            chunks.append(raw)
            offset += len(raw)
        loss = self.best_val_loss
        header = {
            "config": self.config.to_dict(),
            "scheme": {"task": self.scheme.task.value, "labels": list(self.scheme.labels)},
            "vocab": list(self.vocab.tokens),
            "vocab_sha256": self.vocab_sha256,
            "best_val_loss": None if loss is None or math.isnan(loss) else float(loss),
            "epoch_of_best": self.epoch_of_best,
            "tensors": tensors,
        }
        blob = json.dumps(header, sort_keys=True, separators=(",", ":"), ensure_ascii=False).encode("utf-8")
        return MAGIC + struct.pack("<II", FORMAT_VERSION, len(blob)) + blob + b"".join(chunks)

    @classmethod
    def from_bytes(cls, data: bytes) -> Checkpoint:
        if data[:8] != MAGIC:
            raise CheckpointError("not a checkpoint file")
        version, header_len = struct.unpack("<II", data[8:16])
        if version != FORMAT_VERSION:
            raise CheckpointError(f"unsupported checkpoint version {version}")
        header = json.loads(data[16 : 16 + header_len].decode("utf-8"))
        payload = memoryview(data)[16 + header_len :]
        vocab = Vocab(tuple(header["vocab"]))
        if vocab.sha256 != header["vocab_sha256"]:
            raise VocabMismatch("embedded vocabulary does not match its recorded hash")
        state = {}
        for entry in header["tensors"]:
            count = math.prod(entry["shape"])
            start = entry["offset"]
            arr = np.frombuffer(payload[start : start + 4 * count], dtype="<f4")
            if arr.size != count:
                raise CheckpointError(f"truncated tensor {entry['name']}")
            state[entry["name"]] = torch.from_numpy(arr.astype(np.float32).reshape(entry["shape"]))
        scheme = LabelScheme(Task(header["scheme"]["task"]), tuple(header["scheme"]["labels"]))
        return cls(
            ModelConfig(**header["config"]),
            state,
            vocab,
            scheme,
            header["best_val_loss"],
            header["epoch_of_best"],
        )

    def save(self, path: str | Path) -> None:
        Path(path).write_bytes(self.to_bytes())

    @classmethod
    def load(cls, path: str | Path) -> Checkpoint:
        return cls.from_bytes(Path(path).read_bytes())
