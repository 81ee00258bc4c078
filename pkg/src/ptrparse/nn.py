"""Neural building blocks: embeddings, char CNN, recurrent cells, MLPs, biaffines.

Everything is built from the autodiff ops, operates on single examples
(vectors and small matrices, no batch dimension), and threads randomness
through explicit ``numpy.random.Generator`` arguments.
"""

from __future__ import annotations

import numpy as np

from . import autodiff as ad
from .autodiff import Tensor
from .errors import ConfigError


def glorot(rng, fan_in: int, fan_out: int, shape) -> np.ndarray:
    limit = np.sqrt(6.0 / (fan_in + fan_out))
    return rng.uniform(-limit, limit, size=shape)


class Module:
    """Base with recursive named-parameter discovery in attribute order."""

    def parameters(self):
        """Yield (name, tensor) pairs for all trainable tensors, depth-first."""
        for key, value in vars(self).items():
            yield from _walk(key, value)


def _walk(prefix, value):
    if isinstance(value, Tensor):
        if value.requires_grad:
            yield prefix, value
    elif isinstance(value, Module):
        for name, p in value.parameters():
            yield f"{prefix}.{name}", p
    elif isinstance(value, (list, tuple)):
        for i, item in enumerate(value):
            yield from _walk(f"{prefix}.{i}", item)


class Embedding(Module):
    """Lookup table of trainable row vectors."""

    def __init__(self, size: int, dim: int, rng, frozen: bool = False, unk_index=None):
        if size < 1 or dim < 1:
            raise ConfigError(f"embedding needs positive size and dim, got {size}x{dim}")
        self.weight = Tensor(rng.uniform(-0.1, 0.1, size=(size, dim)), requires_grad=not frozen)
        self.unk_index = unk_index

    @property
    def size(self):
        return self.weight.data.shape[0]

    @property
    def dim(self):
        return self.weight.data.shape[1]

    def lookup(self, index: int) -> Tensor:
        if index < 0:
            raise IndexError(f"negative embedding index {index}")
        if index >= self.size:
            if self.unk_index is None:
                raise IndexError(f"embedding index {index} out of range for size {self.size}")
            index = self.unk_index
        return ad.row(self.weight, index)


class CharCnn(Module):
    """Character convolution with max-over-time pooling.

    One pad symbol is added on each side, so a word of any length yields at
    least one window.  No activation follows the convolution; pooling is
    applied directly to the affine filter responses.
    """

    def __init__(self, char_vocab_size: int, char_dim: int, filters: int, window: int,
                 pad_index: int, rng, unk_index=None):
        if window < 1:
            raise ConfigError(f"window must be positive, got {window}")
        self.embedding = Embedding(char_vocab_size, char_dim, rng, unk_index=unk_index)
        self.filters = Tensor(glorot(rng, window * char_dim, filters, (window * char_dim, filters)),
                              requires_grad=True)
        self.bias = Tensor(np.zeros(filters), requires_grad=True)
        self.window = window
        self.pad_index = pad_index

    @property
    def out_dim(self):
        return self.filters.data.shape[1]

    def __call__(self, char_ids) -> Tensor:
        padded = [self.pad_index] + list(char_ids) + [self.pad_index]
        table = ad.stack([self.embedding.lookup(c) for c in padded])
        width = self.window * self.embedding.dim
        windows = [ad.reshape(ad.rows(table, i, i + self.window), (width,))
                   for i in range(len(padded) - self.window + 1)]
        responses = ad.add(ad.matmul(ad.stack(windows), self.filters), self.bias)
        return ad.max_over_rows(responses)


class LstmCell(Module):
    """Single LSTM cell; gate order i, f, g, o; forget bias initialized to 1."""

    def __init__(self, input_dim: int, hidden_dim: int, rng):
        h = hidden_dim
        self.w_x = Tensor(glorot(rng, input_dim, 4 * h, (4 * h, input_dim)), requires_grad=True)
        self.w_h = Tensor(glorot(rng, h, 4 * h, (4 * h, h)), requires_grad=True)
        bias = np.zeros(4 * h)
        bias[h : 2 * h] = 1.0
        self.bias = Tensor(bias, requires_grad=True)
        self.hidden_dim = h

    def step(self, x: Tensor, h: Tensor, c: Tensor, h_matmul: Tensor = None):
        # h_matmul, when given, replaces h inside the gate transformations
        # only; recurrent dropout masks enter here so the cell state update
        # itself stays a bounded combination of unscaled values.
        n = self.hidden_dim
        hm = h_matmul if h_matmul is not None else h
        pre = ad.add(ad.add(ad.matmul(self.w_x, x), ad.matmul(self.w_h, hm)), self.bias)
        i = ad.sigmoid(ad.narrow(pre, 0, n))
        f = ad.sigmoid(ad.narrow(pre, n, 2 * n))
        g = ad.tanh(ad.narrow(pre, 2 * n, 3 * n))
        o = ad.sigmoid(ad.narrow(pre, 3 * n, 4 * n))
        c_new = ad.add(ad.mul(f, c), ad.mul(i, g))
        h_new = ad.mul(o, ad.tanh(c_new))
        return h_new, c_new


class GruCell(Module):
    """Single GRU cell; update gate z keeps the previous hidden state at z=1."""

    def __init__(self, input_dim: int, hidden_dim: int, rng):
        h = hidden_dim
        self.w_rz = Tensor(glorot(rng, input_dim, 2 * h, (2 * h, input_dim)), requires_grad=True)
        self.u_rz = Tensor(glorot(rng, h, 2 * h, (2 * h, h)), requires_grad=True)
        self.b_rz = Tensor(np.zeros(2 * h), requires_grad=True)
        self.w_n = Tensor(glorot(rng, input_dim, h, (h, input_dim)), requires_grad=True)
        self.u_n = Tensor(glorot(rng, h, h, (h, h)), requires_grad=True)
        self.b_n = Tensor(np.zeros(h), requires_grad=True)
        self.hidden_dim = h

    def step(self, x: Tensor, h: Tensor, h_matmul: Tensor = None) -> Tensor:
        # The convex update keeps the raw h: with an inverted-dropout mask in
        # the z*h term the state would grow by the keep-scale every step.
        n = self.hidden_dim
        hm = h_matmul if h_matmul is not None else h
        rz = ad.sigmoid(ad.add(ad.add(ad.matmul(self.w_rz, x), ad.matmul(self.u_rz, hm)), self.b_rz))
        r = ad.narrow(rz, 0, n)
        z = ad.narrow(rz, n, 2 * n)
        cand = ad.tanh(ad.add(ad.add(ad.matmul(self.w_n, x), ad.matmul(self.u_n, ad.mul(r, hm))), self.b_n))
        one_minus_z = ad.sub(Tensor(np.ones(n)), z)
        return ad.add(ad.mul(z, h), ad.mul(one_minus_z, cand))


def _shared_mask(dim: int, rate: float, rng) -> Tensor:
    keep = (rng.random(dim) >= rate) / (1.0 - rate)
    return Tensor(keep)


class BiRecurrentEncoder(Module):
    """Stacked bidirectional recurrent encoder (LSTM or GRU cells).

    Dropout is variational: one mask per sequence for each recurrent
    connection, and one mask per sequence between layers.
    """

    def __init__(self, cell: str, layers: int, input_dim: int, hidden_dim: int, rng,
                 recurrent_dropout: float = 0.0, layer_dropout: float = 0.0):
        if cell not in ("lstm", "gru"):
            raise ConfigError(f"unknown encoder cell {cell!r}")
        if layers < 1:
            raise ConfigError(f"encoder needs at least one layer, got {layers}")
        make = LstmCell if cell == "lstm" else GruCell
        self.forward_cells = []
        self.backward_cells = []
        for layer in range(layers):
            in_dim = input_dim if layer == 0 else 2 * hidden_dim
            self.forward_cells.append(make(in_dim, hidden_dim, rng))
            self.backward_cells.append(make(in_dim, hidden_dim, rng))
        self.cell = cell
        self.hidden_dim = hidden_dim
        self.recurrent_dropout = recurrent_dropout
        self.layer_dropout = layer_dropout

    @property
    def out_dim(self):
        return 2 * self.hidden_dim

    def _run_direction(self, cell, seq, training, rng):
        h = Tensor(np.zeros(self.hidden_dim))
        c = Tensor(np.zeros(self.hidden_dim)) if self.cell == "lstm" else None
        mask = None
        if training and self.recurrent_dropout > 0.0:
            mask = _shared_mask(self.hidden_dim, self.recurrent_dropout, rng)
        outputs = []
        for x in seq:
            h_in = ad.mul(h, mask) if mask is not None else None
            if self.cell == "lstm":
                h, c = cell.step(x, h, c, h_matmul=h_in)
            else:
                h = cell.step(x, h, h_matmul=h_in)
            outputs.append(h)
        return outputs

    def encode(self, inputs, training: bool = False, rng=None):
        """Map a list of input vectors to a list of 2*hidden_dim state vectors."""
        seq = list(inputs)
        for layer, (fw, bw) in enumerate(zip(self.forward_cells, self.backward_cells)):
            if layer > 0 and training and self.layer_dropout > 0.0:
                mask = _shared_mask(seq[0].data.shape[0], self.layer_dropout, rng)
                seq = [ad.mul(x, mask) for x in seq]
            left = self._run_direction(fw, seq, training, rng)
            right = self._run_direction(bw, list(reversed(seq)), training, rng)
            right.reverse()
            seq = [ad.concat([l, r]) for l, r in zip(left, right)]
        return seq


class MlpElu(Module):
    """Single dense layer with ELU activation; accepts vectors or row matrices."""

    def __init__(self, input_dim: int, output_dim: int, rng):
        self.weight = Tensor(glorot(rng, input_dim, output_dim, (input_dim, output_dim)),
                             requires_grad=True)
        self.bias = Tensor(np.zeros(output_dim), requires_grad=True)

    def __call__(self, x: Tensor) -> Tensor:
        return ad.elu(ad.add(ad.matmul(x, self.weight), self.bias))


class Biaffine(Module):
    """Bilinear-plus-linear scorer over a pair of vectors.

    score(a, b) = a' W b  +  U . a  +  V . b  +  bias.
    """

    def __init__(self, left_dim: int, right_dim: int, rng):
        self.w = Tensor(glorot(rng, left_dim, right_dim, (left_dim, right_dim)), requires_grad=True)
        self.u = Tensor(np.zeros(left_dim), requires_grad=True)
        self.v = Tensor(np.zeros(right_dim), requires_grad=True)
        self.b = Tensor(np.zeros(()), requires_grad=True)

    def score(self, a: Tensor, b: Tensor) -> Tensor:
        bilinear = ad.matmul(ad.matmul(a, self.w), b)
        return ad.add(ad.add(ad.add(bilinear, ad.matmul(self.u, a)), ad.matmul(self.v, b)), self.b)

    def score_rows(self, a: Tensor, rows_matrix: Tensor) -> Tensor:
        """Score ``a`` against every row of a matrix at once; returns a vector."""
        bilinear = ad.matmul(rows_matrix, ad.matmul(a, self.w))
        linear = ad.add(ad.matmul(self.u, a), ad.matmul(rows_matrix, self.v))
        return ad.add(ad.add(bilinear, linear), self.b)


class BiaffineLabeler(Module):
    """Per-label biaffine scores for a vector pair; returns one score per label."""

    def __init__(self, left_dim: int, right_dim: int, labels: int, rng):
        self.w = Tensor(glorot(rng, left_dim, labels * right_dim, (left_dim, labels * right_dim)),
                        requires_grad=True)
        self.u = Tensor(np.zeros((labels, left_dim)), requires_grad=True)
        self.v = Tensor(np.zeros((labels, right_dim)), requires_grad=True)
        self.b = Tensor(np.zeros(labels), requires_grad=True)
        self.labels = labels
        self.right_dim = right_dim

    def scores(self, a: Tensor, b: Tensor) -> Tensor:
        bilinear = ad.matmul(ad.reshape(ad.matmul(a, self.w), (self.labels, self.right_dim)), b)
        linear = ad.add(ad.matmul(self.u, a), ad.matmul(self.v, b))
        return ad.add(ad.add(bilinear, linear), self.b)
