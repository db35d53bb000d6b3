"""Parameterized layers built on the autodiff substrate.

Composable pieces: linear maps, layer norm, embeddings, scaled dot-product
multi-head attention, and the gated recurrent memory used by both the event
and sentence transformers.  Every layer exposes ``parameters()`` returning a
flat name -> Tensor mapping so optimizers and checkpoints see one namespace.
"""

from __future__ import annotations

import numpy as np

from .autodiff import Tensor, concat, softmax

NEG_INF = -1e9


class Layer:
    """Base class: collects parameters from Tensor/Layer/list attributes."""

    def parameters(self) -> dict[str, Tensor]:
        out: dict[str, Tensor] = {}
        for name, value in vars(self).items():
            if isinstance(value, Tensor) and value.requires_grad:
                out[name] = value
            elif isinstance(value, Layer):
                for sub, t in value.parameters().items():
                    out[f"{name}.{sub}"] = t
            elif isinstance(value, (list, tuple)):
                for i, item in enumerate(value):
                    if isinstance(item, Layer):
                        for sub, t in item.parameters().items():
                            out[f"{name}.{i}.{sub}"] = t
        return out


def xavier_uniform(shape: tuple[int, int], rng: np.random.Generator, dtype) -> np.ndarray:
    bound = float(np.sqrt(6.0 / (shape[0] + shape[1])))
    return rng.uniform(-bound, bound, size=shape).astype(dtype)


class Linear(Layer):
    def __init__(self, dim_in: int, dim_out: int, rng: np.random.Generator,
                 bias: bool = True, dtype=np.float64):
        self.weight = Tensor(xavier_uniform((dim_in, dim_out), rng, dtype), requires_grad=True)
        self.bias = Tensor(np.zeros(dim_out, dtype=dtype), requires_grad=True) if bias else None

    def __call__(self, x: Tensor) -> Tensor:
        if x.shape[-1] != self.weight.shape[0]:
            raise ValueError(
                f"linear: input dim {x.shape[-1]} != weight dim {self.weight.shape[0]}"
            )
        y = x @ self.weight
        if self.bias is not None:
            y = y + self.bias
        return y


class LayerNorm(Layer):
    def __init__(self, dim: int, dtype=np.float64, eps: float = 1e-5):
        self.gain = Tensor(np.ones(dim, dtype=dtype), requires_grad=True)
        self.shift = Tensor(np.zeros(dim, dtype=dtype), requires_grad=True)
        self.eps = eps

    def __call__(self, x: Tensor) -> Tensor:
        mu = x.mean(axis=-1, keepdims=True)
        centered = x - mu
        var = (centered**2).mean(axis=-1, keepdims=True)
        return centered / ((var + self.eps) ** 0.5) * self.gain + self.shift


class Embedding(Layer):
    def __init__(self, num: int, dim: int, rng: np.random.Generator, dtype=np.float64):
        self.weight = Tensor(
            (rng.standard_normal((num, dim)) * 0.02).astype(dtype), requires_grad=True
        )

    def __call__(self, ids) -> Tensor:
        return self.weight[np.asarray(ids, dtype=np.intp)]


class FeedForward(Layer):
    """Two-layer position-wise MLP with ReLU."""

    def __init__(self, dim: int, hidden: int, rng, dtype=np.float64):
        self.lin1 = Linear(dim, hidden, rng, dtype=dtype)
        self.lin2 = Linear(hidden, dim, rng, dtype=dtype)

    def __call__(self, x: Tensor) -> Tensor:
        return self.lin2(self.lin1(x).relu())


class MLP(Layer):
    """Linear -> ReLU -> Linear, for encoders whose output dim differs."""

    def __init__(self, dim_in: int, dim_hidden: int, dim_out: int, rng, dtype=np.float64):
        self.lin1 = Linear(dim_in, dim_hidden, rng, dtype=dtype)
        self.lin2 = Linear(dim_hidden, dim_out, rng, dtype=dtype)

    def __call__(self, x: Tensor) -> Tensor:
        return self.lin2(self.lin1(x).relu())


class MultiHeadAttention(Layer):
    def __init__(self, dim: int, heads: int, rng, dtype=np.float64):
        if dim % heads != 0:
            raise ValueError(f"model dim {dim} not divisible by {heads} heads")
        self.heads = heads
        self.dim_head = dim // heads
        self.proj_q = Linear(dim, dim, rng, dtype=dtype)
        self.proj_k = Linear(dim, dim, rng, dtype=dtype)
        self.proj_v = Linear(dim, dim, rng, dtype=dtype)
        self.proj_out = Linear(dim, dim, rng, dtype=dtype)

    def __call__(self, queries: Tensor, keys_values: Tensor, mask: np.ndarray | None = None) -> Tensor:
        """``queries`` (nq, d) attends over ``keys_values`` (nk, d).

        ``mask`` is an additive (nq, nk) array; masked positions carry a large
        negative value so their post-softmax weight is 0.
        """
        nq, nk = queries.shape[0], keys_values.shape[0]
        h, dh = self.heads, self.dim_head
        q = self.proj_q(queries).reshape(nq, h, dh).transpose(1, 0, 2)
        k = self.proj_k(keys_values).reshape(nk, h, dh).transpose(1, 0, 2)
        v = self.proj_v(keys_values).reshape(nk, h, dh).transpose(1, 0, 2)
        scores = (q @ k.transpose(0, 2, 1)) * (1.0 / float(np.sqrt(dh)))
        if mask is not None:
            scores = scores + Tensor(mask[None, :, :].astype(scores.data.dtype))
        attn = softmax(scores, axis=-1)
        out = (attn @ v).transpose(1, 0, 2).reshape(nq, h * dh)
        return self.proj_out(out)


class MemoryUpdater(Layer):
    """Gated recurrent update of memory slots from the step's hidden states.

    The slots attend over [memory; hidden states]; the attended summary and
    the previous memory feed a tanh candidate and a sigmoid gate, and the new
    memory is the gated convex combination of the two.
    """

    def __init__(self, dim: int, heads: int, rng, dtype=np.float64):
        self.attn = MultiHeadAttention(dim, heads, rng, dtype=dtype)
        self.cand_mem = Linear(dim, dim, rng, bias=False, dtype=dtype)
        self.cand_att = Linear(dim, dim, rng, dtype=dtype)
        self.gate_mem = Linear(dim, dim, rng, bias=False, dtype=dtype)
        self.gate_att = Linear(dim, dim, rng, dtype=dtype)

    def __call__(self, memory: Tensor, hidden: Tensor) -> Tensor:
        summary = self.attn(memory, concat([memory, hidden], axis=0))
        candidate = (self.cand_mem(memory) + self.cand_att(summary)).tanh()
        gate = (self.gate_mem(memory) + self.gate_att(summary)).sigmoid()
        return gate * memory + (1.0 - gate) * candidate


class MemTransformerLayer(Layer):
    def __init__(self, dim: int, heads: int, rng, dtype=np.float64):
        self.attn = MultiHeadAttention(dim, heads, rng, dtype=dtype)
        self.norm1 = LayerNorm(dim, dtype=dtype)
        self.ffn = FeedForward(dim, 4 * dim, rng, dtype=dtype)
        self.norm2 = LayerNorm(dim, dtype=dtype)
        self.mem_update = MemoryUpdater(dim, heads, rng, dtype=dtype)

    def __call__(self, x: Tensor, memory: Tensor, self_mask: np.ndarray | None):
        n, slots = x.shape[0], memory.shape[0]
        context = concat([memory, x], axis=0)
        if self_mask is not None:
            mask = np.concatenate(
                [np.zeros((n, slots), dtype=self_mask.dtype), self_mask], axis=1
            )
        else:
            mask = None
        h1 = self.norm1(x + self.attn(x, context, mask))
        h2 = self.norm2(h1 + self.ffn(h1))
        new_memory = self.mem_update(memory, h2)
        return h2, new_memory


class MemTransformer(Layer):
    """Stack of memory-augmented layers; one memory slot matrix per layer."""

    def __init__(self, layers: int, dim: int, heads: int, slots: int, rng, dtype=np.float64):
        self.layers = [MemTransformerLayer(dim, heads, rng, dtype=dtype) for _ in range(layers)]
        self.slots = slots
        self.dim = dim
        self.dtype = dtype

    def initial_memory(self) -> list[Tensor]:
        return [
            Tensor(np.zeros((self.slots, self.dim), dtype=self.dtype))
            for _ in self.layers
        ]

    def __call__(self, x: Tensor, memories: list[Tensor], self_mask: np.ndarray | None = None):
        new_memories = []
        for layer, memory in zip(self.layers, memories):
            x, new_mem = layer(x, memory, self_mask)
            new_memories.append(new_mem)
        return x, new_memories


def sinusoidal_encoding(length: int, dim: int, dtype=np.float64) -> np.ndarray:
    """Standard fixed sinusoidal position table (length, dim)."""
    pos = np.arange(length, dtype=np.float64)[:, None]
    idx = np.arange(dim, dtype=np.float64)[None, :]
    angle = pos / np.power(10000.0, 2.0 * (idx // 2) / dim)
    table = np.where(idx % 2 == 0, np.sin(angle), np.cos(angle))
    return table.astype(dtype)


def causal_mask(n: int, dtype=np.float64) -> np.ndarray:
    """Additive (n, n) mask hiding future positions."""
    return np.triu(np.full((n, n), NEG_INF, dtype=dtype), k=1)
