"""Transformer-encoder token classifier: encoder stack plus a linear label head."""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass

import torch
import torch.nn as nn
import torch.nn.functional as F

from .tokenizer import IGNORE_INDEX


class ShapeMismatch(ValueError):
    pass


class AllIgnored(ValueError):
    pass


class NonFinite(FloatingPointError):
    pass


@dataclass(frozen=True)
class ModelConfig:
    vocab_size: int
    num_labels: int = 7
    num_layers: int = 2
    hidden_size: int = 64
    num_heads: int = 4
    ff_size: int = 256
    max_len: int = 512
    dropout: float = 0.1
    seed: int = 0
    layer_norm_eps: float = 1e-12

    def __post_init__(self) -> None:
        for name in ("vocab_size", "num_labels", "num_layers", "hidden_size", "num_heads", "ff_size"):
            if getattr(self, name) < 1:
                raise ValueError(f"{name} must be positive")
        if self.max_len < 2:
            raise ValueError("max_len must hold CLS and SEP")
        if self.hidden_size % self.num_heads:
            raise ValueError("hidden_size must be divisible by num_heads")
        if not 0.0 <= self.dropout < 1.0:
            raise ValueError("dropout must lie in [0, 1)")

    @classmethod
    def full_scale(cls, vocab_size: int, num_labels: int = 7, **kw) -> ModelConfig:
        """12 layers, hidden 768: the pretrained-encoder size the recipe was tuned on."""
        return cls(vocab_size, num_labels, num_layers=12, hidden_size=768, num_heads=12, ff_size=3072, **kw)

    def to_dict(self) -> dict:
        return asdict(self)


def parameter_count(config: ModelConfig) -> int:
    """Closed-form count of trainable scalars."""
    h, f = config.hidden_size, config.ff_size
    embeddings = config.vocab_size * h + config.max_len * h + 2 * h
    layer = 4 * (h * h + h) + 2 * h + (h * f + f) + (f * h + h) + 2 * h
    head = h * config.num_labels + config.num_labels
    return embeddings + config.num_layers * layer + head


class SelfAttention(nn.Module):
    def __init__(self, config: ModelConfig) -> None:
        super().__init__()
        self.num_heads = config.num_heads
        self.head_dim = config.hidden_size // config.num_heads
        self.query = nn.Linear(config.hidden_size, config.hidden_size)
        self.key = nn.Linear(config.hidden_size, config.hidden_size)
        self.value = nn.Linear(config.hidden_size, config.hidden_size)
        self.output = nn.Linear(config.hidden_size, config.hidden_size)
        self.dropout = nn.Dropout(config.dropout)

    def _heads(self, x: torch.Tensor) -> torch.Tensor:
        b, t, _ = x.shape
        return x.view(b, t, self.num_heads, self.head_dim).transpose(1, 2)

    def forward(self, x: torch.Tensor, pad: torch.Tensor) -> torch.Tensor:
        b, t, h = x.shape
        q, k, v = self._heads(self.query(x)), self._heads(self.key(x)), self._heads(self.value(x))
        scores = q @ k.transpose(-1, -2) / math.sqrt(self.head_dim)
        scores = scores.masked_fill(pad[:, None, None, :], float("-inf"))
        probs = self.dropout(torch.softmax(scores, dim=-1))
        ctx = (probs @ v).transpose(1, 2).reshape(b, t, h)
        return self.output(ctx)


class EncoderLayer(nn.Module):
    """Post-norm block: x = LN(x + attn(x)); x = LN(x + ff(x))."""

    def __init__(self, config: ModelConfig) -> None:
        super().__init__()
        self.attention = SelfAttention(config)
        self.attention_norm = nn.LayerNorm(config.hidden_size, eps=config.layer_norm_eps)
        self.ff_in = nn.Linear(config.hidden_size, config.ff_size)
        self.ff_out = nn.Linear(config.ff_size, config.hidden_size)
        self.ff_norm = nn.LayerNorm(config.hidden_size, eps=config.layer_norm_eps)
        self.dropout = nn.Dropout(config.dropout)

    def forward(self, x: torch.Tensor, pad: torch.Tensor) -> torch.Tensor:
        x = self.attention_norm(x + self.dropout(self.attention(x, pad)))
        ff = self.ff_out(self.dropout(F.gelu(self.ff_in(x))))
        return self.ff_norm(x + self.dropout(ff))


class TokenClassifier(nn.Module):
    def __init__(self, config: ModelConfig) -> None:
        super().__init__()
        self.config = config
        # torch's default init draws from the global RNG; keep the caller's stream intact.
        with torch.random.fork_rng(devices=[]):
            self.token_embedding = nn.Embedding(config.vocab_size, config.hidden_size)
            self.position_embedding = nn.Embedding(config.max_len, config.hidden_size)
            self.embedding_norm = nn.LayerNorm(config.hidden_size, eps=config.layer_norm_eps)
            self.dropout = nn.Dropout(config.dropout)
            self.layers = nn.ModuleList(EncoderLayer(config) for _ in range(config.num_layers))
            self.classifier = nn.Linear(config.hidden_size, config.num_labels)
        self.reset_parameters()

    @torch.no_grad()
    def reset_parameters(self) -> None:
        """Normal(0, 0.02) weights and embeddings, zero biases, unit norms."""
        gen = torch.Generator().manual_seed(self.config.seed)
        for module in self.modules():
            if isinstance(module, (nn.Linear, nn.Embedding)):
                nn.init.normal_(module.weight, 0.0, 0.02, generator=gen)
                if getattr(module, "bias", None) is not None:
                    module.bias.zero_()
            elif isinstance(module, nn.LayerNorm):
                module.weight.fill_(1.0)
                module.bias.zero_()

    def forward(self, ids: torch.Tensor, attention_mask: torch.Tensor | None = None) -> torch.Tensor:
        squeeze = ids.dim() == 1
        if squeeze:
            ids = ids.unsqueeze(0)
            attention_mask = None if attention_mask is None else attention_mask.unsqueeze(0)
        if attention_mask is None:
            attention_mask = torch.ones_like(ids)
        if ids.dim() != 2 or attention_mask.shape != ids.shape:
            raise ShapeMismatch(f"ids {tuple(ids.shape)} vs mask {tuple(attention_mask.shape)}")
        t = ids.shape[1]
        if t > self.config.max_len:
            raise ShapeMismatch(f"length {t} exceeds max_len {self.config.max_len}")
        if ids.numel() and (ids.min() < 0 or ids.max() >= self.config.vocab_size):
            raise ShapeMismatch("token id outside vocabulary")

        pos = torch.arange(t, device=ids.device)
        x = self.token_embedding(ids) + self.position_embedding(pos)[None]
        x = self.dropout(self.embedding_norm(x))
        pad = attention_mask == 0
        for layer in self.layers:
            x = layer(x, pad)
        logits = self.classifier(x)
        return logits[0] if squeeze else logits


def init(config: ModelConfig) -> TokenClassifier:
    return TokenClassifier(config)


def loss(logits: torch.Tensor, label_ids: torch.Tensor) -> tuple[torch.Tensor, int]:
    """Mean cross-entropy over non-ignored positions, and how many there were."""
    if logits.shape[:-1] != label_ids.shape:
        raise ShapeMismatch(f"logits {tuple(logits.shape)} vs labels {tuple(label_ids.shape)}")
    flat_logits = logits.reshape(-1, logits.shape[-1])
    flat_labels = label_ids.reshape(-1)
    count = int((flat_labels != IGNORE_INDEX).sum())
    if count == 0:
        raise AllIgnored("every position carries the ignore label")
    total = F.cross_entropy(flat_logits, flat_labels, ignore_index=IGNORE_INDEX, reduction="sum")
    return total / count, count


def backward(
    model: TokenClassifier,
    ids: torch.Tensor,
    attention_mask: torch.Tensor,
    label_ids: torch.Tensor,
) -> tuple[float, dict[str, torch.Tensor]]:
    """Loss value and the exact gradient of the loss for every named parameter."""
    model.zero_grad(set_to_none=True)
    value, _ = loss(model(ids, attention_mask), label_ids)
    if not torch.isfinite(value):
        raise NonFinite(f"loss is {value.item()}")
    value.backward()
    grads = {}
    for name, p in model.named_parameters():
        g = torch.zeros_like(p) if p.grad is None else p.grad
        if not torch.isfinite(g).all():
            raise NonFinite(f"gradient of {name} is not finite")
        grads[name] = g
    return value.item(), grads


@torch.no_grad()
def adamw_step(
    params: list[torch.Tensor],
    grads: list[torch.Tensor],
    state: list[dict],
    lr: float = 5e-5,
    betas: tuple[float, float] = (0.9, 0.999),
    eps: float = 1e-8,
    weight_decay: float = 0.01,
) -> None:
    """One in-place AdamW update with decoupled weight decay.

    ``state`` holds one dict per parameter; an empty dict starts from zero
    moments at step 0.
    """
    beta1, beta2 = betas
    for p, g, st in zip(params, grads, state):
        if not st:
            st["step"] = 0
            st["exp_avg"] = torch.zeros_like(p)
            st["exp_avg_sq"] = torch.zeros_like(p)
        st["step"] += 1
        m, v = st["exp_avg"], st["exp_avg_sq"]
        m.mul_(beta1).add_(g, alpha=1 - beta1)
        v.mul_(beta2).addcmul_(g, g, value=1 - beta2)
        m_hat = m / (1 - beta1 ** st["step"])
        v_hat = v / (1 - beta2 ** st["step"])
        p.mul_(1 - lr * weight_decay)
        p.sub_(lr * m_hat / (v_hat.sqrt() + eps))


class AdamW(torch.optim.Optimizer):
    def __init__(self, params, lr=5e-5, betas=(0.9, 0.999), eps=1e-8, weight_decay=0.01):
        if lr < 0:
            raise ValueError(f"invalid learning rate {lr}")
        super().__init__(params, dict(lr=lr, betas=betas, eps=eps, weight_decay=weight_decay))

    @torch.no_grad()
    def step(self, closure=None):
        loss_value = None
        if closure is not None:
            with torch.enable_grad():
                loss_value = closure()
        for group in self.param_groups:
            params = [p for p in group["params"] if p.grad is not None]
            adamw_step(
                params,
                [p.grad for p in params],
                [self.state[p] for p in params],
                lr=group["lr"],
                betas=group["betas"],
                eps=group["eps"],
                weight_decay=group["weight_decay"],
            )
        return loss_value


@torch.no_grad()
def predict(
    model: TokenClassifier, ids: torch.Tensor, attention_mask: torch.Tensor
) -> tuple[list[list[int]], list[list[float]]]:
    """Argmax label index per character (lowest index wins ties), with its probability.

    Rows are ``[CLS] chars [SEP] [PAD]...``; CLS, SEP and padding are dropped.
    """
    was_training = model.training
    model.eval()
    try:
        squeeze = ids.dim() == 1
        if squeeze:
            ids, attention_mask = ids[None], attention_mask[None]
        logits = model(ids, attention_mask)
        probs = torch.softmax(logits, dim=-1)
        best = torch.argmax(logits, dim=-1)
    finally:
        model.train(was_training)
    labels, confidences = [], []
    for row, length in enumerate(attention_mask.sum(dim=1).tolist()):
        n = int(length) - 2
        idx = best[row, 1 : 1 + n]
        labels.append(idx.tolist())
        confidences.append(probs[row, 1 : 1 + n].gather(-1, idx[:, None]).squeeze(-1).tolist())
    return labels, confidences
