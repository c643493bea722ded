"""LSTM and ConvLSTM cell steps, sequence unrolling, and BPTT.

Both cells share the gate layout

    f = sigmoid(Wxf.x + Whf.h + [peephole] + bf)
    i = sigmoid(Wxi.x + Whi.h + [peephole] + bi)
    cand = tanh(Wxc.x + Whc.h + bc)
    c = f*c_prev + i*cand
    o = sigmoid(Wxo.x + Who.h + [peephole on c] + bo)
    h = o * tanh(c)

where the LSTM uses matrix products and no peepholes, and the ConvLSTM uses
same-padded convolutions plus Hadamard peephole weights on the cell state.
With a 1x1 grid, 1x1 kernels and zero peepholes the two coincide exactly.

Biases default to zero. Initial states default to zeros. Gradients flow
through unrolled sequences (backpropagation through time) because the steps
are ordinary taped tensor ops.
"""
from __future__ import annotations

from dataclasses import dataclass, fields

import numpy as np

from .errors import ShapeError
from .tensor import Tensor, add, conv2d, matmul, mul, parameter, sigmoid, tanh


@dataclass
class LstmState:
    h: Tensor
    c: Tensor


@dataclass
class ConvLstmState:
    h: Tensor
    c: Tensor


@dataclass
class LstmParams:
    """Weights (input_size, hidden) / (hidden, hidden) and per-unit biases."""

    w_xi: Tensor
    w_hi: Tensor
    w_xf: Tensor
    w_hf: Tensor
    w_xc: Tensor
    w_hc: Tensor
    w_xo: Tensor
    w_ho: Tensor
    b_i: Tensor
    b_f: Tensor
    b_c: Tensor
    b_o: Tensor

    @classmethod
    def init(cls, input_size: int, hidden_size: int, rng: np.random.Generator, scale=0.08):
        def w(rows, cols):
            return parameter(rng.uniform(-scale, scale, size=(rows, cols)))

        return cls(
            w_xi=w(input_size, hidden_size), w_hi=w(hidden_size, hidden_size),
            w_xf=w(input_size, hidden_size), w_hf=w(hidden_size, hidden_size),
            w_xc=w(input_size, hidden_size), w_hc=w(hidden_size, hidden_size),
            w_xo=w(input_size, hidden_size), w_ho=w(hidden_size, hidden_size),
            b_i=parameter(np.zeros(hidden_size)), b_f=parameter(np.zeros(hidden_size)),
            b_c=parameter(np.zeros(hidden_size)), b_o=parameter(np.zeros(hidden_size)),
        )

    @property
    def hidden_size(self) -> int:
        return self.w_hi.data.shape[0]

    @property
    def input_size(self) -> int:
        return self.w_xi.data.shape[0]

    def tensors(self) -> list[Tensor]:
        return [getattr(self, f.name) for f in fields(self)]


def lstm_step(params: LstmParams, x_t: Tensor, prev: LstmState) -> LstmState:
    """One LSTM step; x_t is (input,) or (n, input), state is (hidden,) or (n, hidden)."""
    if x_t.data.shape[-1] != params.input_size:
        raise ShapeError(f"input width {x_t.data.shape[-1]} != {params.input_size}")
    if prev.h.data.shape != prev.c.data.shape:
        raise ShapeError("h and c must share a shape")
    f = sigmoid(_affine(x_t, params.w_xf, prev.h, params.w_hf, params.b_f))
    i = sigmoid(_affine(x_t, params.w_xi, prev.h, params.w_hi, params.b_i))
    cand = tanh(_affine(x_t, params.w_xc, prev.h, params.w_hc, params.b_c))
    c = add(mul(f, prev.c), mul(i, cand))
    o = sigmoid(_affine(x_t, params.w_xo, prev.h, params.w_ho, params.b_o))
    return LstmState(h=mul(o, tanh(c)), c=c)


def _affine(x, wx, h, wh, b):
    return add(add(matmul(x, wx), matmul(h, wh)), b)


@dataclass
class ConvLstmParams:
    """Gate kernels (kh, kw, Cin/Chid, Chid), elementwise peepholes, per-channel biases.

    Peephole weights have the cell state's spatial shape (H, W, Chid), so a
    parameter set is tied to one grid size.
    """

    w_xi: Tensor
    w_hi: Tensor
    w_xf: Tensor
    w_hf: Tensor
    w_xc: Tensor
    w_hc: Tensor
    w_xo: Tensor
    w_ho: Tensor
    w_ci: Tensor
    w_cf: Tensor
    w_co: Tensor
    b_i: Tensor
    b_f: Tensor
    b_c: Tensor
    b_o: Tensor

    @classmethod
    def init(cls, grid_hw: tuple[int, int], in_channels: int, hidden_channels: int,
             kernel_hw: tuple[int, int], rng: np.random.Generator, scale=0.08,
             zero_peepholes=False):
        kh, kw = kernel_hw

        def k(cin):
            return parameter(rng.uniform(-scale, scale, size=(kh, kw, cin, hidden_channels)))

        def peep():
            shape = (grid_hw[0], grid_hw[1], hidden_channels)
            if zero_peepholes:
                return parameter(np.zeros(shape))
            return parameter(rng.uniform(-scale, scale, size=shape))

        return cls(
            w_xi=k(in_channels), w_hi=k(hidden_channels),
            w_xf=k(in_channels), w_hf=k(hidden_channels),
            w_xc=k(in_channels), w_hc=k(hidden_channels),
            w_xo=k(in_channels), w_ho=k(hidden_channels),
            w_ci=peep(), w_cf=peep(), w_co=peep(),
            b_i=parameter(np.zeros(hidden_channels)), b_f=parameter(np.zeros(hidden_channels)),
            b_c=parameter(np.zeros(hidden_channels)), b_o=parameter(np.zeros(hidden_channels)),
        )

    @property
    def hidden_channels(self) -> int:
        return self.w_hi.data.shape[3]

    @property
    def in_channels(self) -> int:
        return self.w_xi.data.shape[2]

    def tensors(self) -> list[Tensor]:
        return [getattr(self, f.name) for f in fields(self)]


def convlstm_step(params: ConvLstmParams, x_t: Tensor, prev: ConvLstmState) -> ConvLstmState:
    """One ConvLSTM step on (H, W, C) or (n, H, W, C) grids; spatial dims preserved."""
    if x_t.data.shape[-1] != params.in_channels:
        raise ShapeError(f"input channels {x_t.data.shape[-1]} != {params.in_channels}")

    def gate_pre(wx, wh, b):
        return add(add(conv2d(x_t, wx, padding="same"), conv2d(prev.h, wh, padding="same")), b)

    i = sigmoid(add(gate_pre(params.w_xi, params.w_hi, params.b_i), mul(params.w_ci, prev.c)))
    f = sigmoid(add(gate_pre(params.w_xf, params.w_hf, params.b_f), mul(params.w_cf, prev.c)))
    cand = tanh(gate_pre(params.w_xc, params.w_hc, params.b_c))
    c = add(mul(f, prev.c), mul(i, cand))
    o = sigmoid(add(gate_pre(params.w_xo, params.w_ho, params.b_o), mul(params.w_co, c)))
    return ConvLstmState(h=mul(o, tanh(c)), c=c)


class LstmCell:
    """LSTM step function bound to one parameter set."""

    def __init__(self, params: LstmParams):
        self.params = params

    def step(self, x_t: Tensor, prev: LstmState) -> LstmState:
        return lstm_step(self.params, x_t, prev)

    def initial_state(self, x_t: Tensor) -> LstmState:
        hidden = self.params.hidden_size
        shape = (hidden,) if x_t.data.ndim == 1 else (x_t.data.shape[0], hidden)
        return LstmState(h=Tensor(np.zeros(shape)), c=Tensor(np.zeros(shape)))


class ConvLstmCell:
    """ConvLSTM step function bound to one parameter set."""

    def __init__(self, params: ConvLstmParams):
        self.params = params

    def step(self, x_t: Tensor, prev: ConvLstmState) -> ConvLstmState:
        return convlstm_step(self.params, x_t, prev)

    def initial_state(self, x_t: Tensor) -> ConvLstmState:
        shape = x_t.data.shape[:-1] + (self.params.hidden_channels,)
        return ConvLstmState(h=Tensor(np.zeros(shape)), c=Tensor(np.zeros(shape)))


def unroll(cell, sequence, init=None):
    """Run a cell across a sequence; returns the list of states, one per step."""
    sequence = list(sequence)
    if not sequence:
        raise ShapeError("unroll needs a non-empty sequence")
    state = cell.initial_state(sequence[0]) if init is None else init
    states = []
    for x_t in sequence:
        state = cell.step(x_t, state)
        states.append(state)
    return states
