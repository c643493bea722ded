"""LSTM / ConvLSTM cell semantics, the reduction equivalence, and BPTT."""
import numpy as np
import pytest

from conftest import assert_grad_close, central_diff_grad
from waveanom import tensor as T
from waveanom.errors import ShapeError
from waveanom.recurrent import (ConvLstmCell, ConvLstmParams, ConvLstmState,
                                LstmCell, LstmParams, LstmState, convlstm_step,
                                lstm_step, unroll)


def sigmoid(x):
    return 1.0 / (1.0 + np.exp(-x))


def scalar_lstm_oracle(w, x, h_prev, c_prev):
    """Hand transcription of the gate equations for width-1 everything."""
    f = sigmoid(w["xf"] * x + w["hf"] * h_prev + w["bf"])
    i = sigmoid(w["xi"] * x + w["hi"] * h_prev + w["bi"])
    cand = np.tanh(w["xc"] * x + w["hc"] * h_prev + w["bc"])
    c = f * c_prev + i * cand
    o = sigmoid(w["xo"] * x + w["ho"] * h_prev + w["bo"])
    return o * np.tanh(c), c


def zero_lstm(input_size=1, hidden=1):
    return LstmParams.init(input_size, hidden, np.random.default_rng(0), scale=0.0)


def make_scalar_lstm(w):
    p = zero_lstm()
    for name, val in w.items():
        field = {"xi": "w_xi", "hi": "w_hi", "xf": "w_xf", "hf": "w_hf",
                 "xc": "w_xc", "hc": "w_hc", "xo": "w_xo", "ho": "w_ho",
                 "bi": "b_i", "bf": "b_f", "bc": "b_c", "bo": "b_o"}[name]
        t = getattr(p, field)
        t.data = np.full_like(t.data, val)
    return p


class TestLstmStep:
    def test_all_zero_params_halve_the_cell(self):
        p = zero_lstm()
        out = lstm_step(p, T.Tensor([0.0]), LstmState(T.Tensor([0.0]), T.Tensor([1.0])))
        np.testing.assert_allclose(out.c.data, [0.5])
        np.testing.assert_allclose(out.h.data, [0.5 * np.tanh(0.5)])

    def test_all_ones_weights_zero_inputs(self):
        w = {k: 1.0 for k in ["xi", "hi", "xf", "hf", "xc", "hc", "xo", "ho"]}
        w.update({"bi": 0.0, "bf": 0.0, "bc": 0.0, "bo": 0.0})
        p = make_scalar_lstm(w)
        out = lstm_step(p, T.Tensor([0.0]), LstmState(T.Tensor([0.0]), T.Tensor([0.0])))
        np.testing.assert_allclose(out.c.data, [0.0])
        np.testing.assert_allclose(out.h.data, [0.0])

    @pytest.mark.parametrize("seed", range(10))
    def test_random_scalar_cell_matches_oracle(self, seed):
        r = np.random.default_rng(seed)
        w = {k: r.normal() for k in
             ["xi", "hi", "xf", "hf", "xc", "hc", "xo", "ho", "bi", "bf", "bc", "bo"]}
        p = make_scalar_lstm(w)
        x, h0, c0 = r.normal(size=3)
        got = lstm_step(p, T.Tensor([x]), LstmState(T.Tensor([h0]), T.Tensor([c0])))
        want_h, want_c = scalar_lstm_oracle(w, x, h0, c0)
        np.testing.assert_allclose(got.h.data, [want_h], atol=1e-14)
        np.testing.assert_allclose(got.c.data, [want_c], atol=1e-14)

    def test_gate_ranges(self, rng):
        p = LstmParams.init(3, 4, rng, scale=0.5)
        x = T.Tensor(rng.normal(size=(3,)))
        st = LstmState(T.Tensor(rng.normal(size=(4,))), T.Tensor(rng.normal(size=(4,))))
        out = lstm_step(p, x, st)
        # h = o * tanh(c) with o in (0,1) implies |h| < |tanh(c)| <= 1
        assert np.all(np.abs(out.h.data) < 1.0)

    def test_forget_extremes(self, rng):
        p = LstmParams.init(2, 3, rng, scale=0.1)
        c0 = rng.normal(size=(3,))
        x = T.Tensor(rng.normal(size=(2,)))
        st = LstmState(T.Tensor(np.zeros(3)), T.Tensor(c0))
        # f -> 0 and i -> 0: cell forgets
        p.b_f.data = np.full(3, -40.0)
        p.b_i.data = np.full(3, -40.0)
        out = lstm_step(p, x, st)
        np.testing.assert_allclose(out.c.data, np.zeros(3), atol=1e-9)
        # f -> 1 and i -> 0: cell carried through
        p.b_f.data = np.full(3, 40.0)
        out = lstm_step(p, x, st)
        np.testing.assert_allclose(out.c.data, c0, atol=1e-9)

    def test_shape_mismatch(self, rng):
        p = LstmParams.init(3, 4, rng)
        with pytest.raises(ShapeError):
            lstm_step(p, T.Tensor(np.zeros(5)), LstmState(T.Tensor(np.zeros(4)), T.Tensor(np.zeros(4))))


class TestConvLstmStep:
    def test_reduces_to_lstm_on_1x1(self):
        for seed in range(100):
            r = np.random.default_rng(seed)
            lstm = LstmParams.init(1, 1, r, scale=0.7)
            conv = ConvLstmParams.init((1, 1), 1, 1, (1, 1), r, zero_peepholes=True)
            for name in ["w_xi", "w_hi", "w_xf", "w_hf", "w_xc", "w_hc", "w_xo", "w_ho"]:
                getattr(conv, name).data = getattr(lstm, name).data.reshape(1, 1, 1, 1).copy()
            for name in ["b_i", "b_f", "b_c", "b_o"]:
                getattr(lstm, name).data = r.normal(size=(1,))
                getattr(conv, name).data = getattr(lstm, name).data.copy()
            x, h0, c0 = r.normal(size=3)
            ls = lstm_step(lstm, T.Tensor([x]), LstmState(T.Tensor([h0]), T.Tensor([c0])))
            cs = convlstm_step(conv, T.Tensor([[[x]]]),
                               ConvLstmState(T.Tensor([[[h0]]]), T.Tensor([[[c0]]])))
            assert abs(ls.h.data[0] - cs.h.data[0, 0, 0]) < 1e-12
            assert abs(ls.c.data[0] - cs.c.data[0, 0, 0]) < 1e-12

    def test_zero_params_halve_the_cell_everywhere(self, rng):
        p = ConvLstmParams.init((2, 3), 1, 2, (1, 3), rng, scale=0.0, zero_peepholes=True)
        c0 = np.ones((2, 3, 2))
        out = convlstm_step(p, T.Tensor(np.zeros((2, 3, 1))),
                            ConvLstmState(T.Tensor(np.zeros((2, 3, 2))), T.Tensor(c0)))
        np.testing.assert_allclose(out.c.data, 0.5 * c0)

    def test_spatial_shape_preserved(self, rng):
        p = ConvLstmParams.init((4, 5), 2, 3, (3, 3), rng)
        x = T.Tensor(rng.normal(size=(4, 5, 2)))
        st = ConvLstmCell(p).initial_state(x)
        out = convlstm_step(p, x, st)
        assert out.h.data.shape == (4, 5, 3)
        assert out.c.data.shape == (4, 5, 3)

    def test_channel_mismatch(self, rng):
        p = ConvLstmParams.init((2, 2), 2, 3, (1, 1), rng)
        x = T.Tensor(rng.normal(size=(2, 2, 4)))
        with pytest.raises(ShapeError):
            convlstm_step(p, x, ConvLstmCell(p).initial_state(T.Tensor(np.zeros((2, 2, 2)))))

    def test_gate_ranges_elementwise(self, rng):
        p = ConvLstmParams.init((3, 3), 1, 2, (3, 3), rng, scale=0.6)
        x = T.Tensor(rng.normal(size=(3, 3, 1)))
        st = ConvLstmState(T.Tensor(rng.normal(size=(3, 3, 2))), T.Tensor(rng.normal(size=(3, 3, 2))))
        out = convlstm_step(p, x, st)
        assert np.all(np.abs(out.h.data) < 1.0)


class TestUnroll:
    def test_single_step_matches_step(self, rng):
        p = LstmParams.init(2, 3, rng)
        cell = LstmCell(p)
        x = T.Tensor(rng.normal(size=(2,)))
        states = unroll(cell, [x])
        direct = lstm_step(p, x, cell.initial_state(x))
        np.testing.assert_array_equal(states[0].h.data, direct.h.data)

    def test_zero_parameter_cell_closed_form(self):
        # gates are 0.5 and the candidate is 0, so c_t = c_0 / 2^t.
        p = zero_lstm()
        cell = LstmCell(p)
        seq = [T.Tensor([0.0])] * 5
        init = LstmState(T.Tensor([0.0]), T.Tensor([1.0]))
        states = unroll(cell, seq, init)
        for t, st in enumerate(states, start=1):
            np.testing.assert_allclose(st.c.data, [0.5 ** t], atol=1e-14)
            np.testing.assert_allclose(st.h.data, [0.5 * np.tanh(0.5 ** t)], atol=1e-14)

    def test_empty_sequence(self, rng):
        with pytest.raises(ShapeError):
            unroll(LstmCell(LstmParams.init(1, 1, rng)), [])

    @pytest.mark.parametrize("length", [1, 2, 3, 4, 5, 6])
    def test_lstm_bptt_matches_finite_differences(self, length):
        r = np.random.default_rng(length)
        p = LstmParams.init(2, 2, r, scale=0.4)
        seq_data = [r.normal(size=(2,)) for _ in range(length)]
        params = p.tensors()

        def build():
            states = unroll(LstmCell(p), [T.Tensor(s) for s in seq_data])
            acc = T.sum_(T.mul(states[-1].h, states[-1].h))
            for st in states[:-1]:
                acc = T.add(acc, T.sum_(T.mul(st.h, st.h)))
            return acc

        grads = T.gradients(build(), params)
        for p_, g in zip(params, grads):
            num = central_diff_grad(lambda _: float(build().data), p_.data)
            assert_grad_close(g, num)

    @pytest.mark.parametrize("length", [1, 2, 3, 4, 5, 6])
    def test_convlstm_bptt_matches_finite_differences(self, length):
        r = np.random.default_rng(40 + length)
        p = ConvLstmParams.init((1, 3), 1, 2, (1, 3), r, scale=0.4)
        seq_data = [r.normal(size=(1, 3, 1)) for _ in range(length)]
        params = p.tensors()

        def build():
            states = unroll(ConvLstmCell(p), [T.Tensor(s) for s in seq_data])
            return T.sum_(T.mul(states[-1].h, states[-1].h))

        grads = T.gradients(build(), params)
        for p_, g in zip(params, grads):
            num = central_diff_grad(lambda _: float(build().data), p_.data)
            assert_grad_close(g, num)
