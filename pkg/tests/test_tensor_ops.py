"""Layer primitives against brute-force oracles."""
import numpy as np
import pytest

from waveanom import tensor as T
from waveanom.errors import ShapeError


def conv_oracle(img, ker, stride=(1, 1), flip=False):
    """Literal double-sum cross-correlation / convolution on (H,W,Cin) x (kh,kw,Cin,Cout)."""
    h, w, cin = img.shape
    kh, kw, _, cout = ker.shape
    sh, sw = stride
    ho = (h - kh) // sh + 1
    wo = (w - kw) // sw + 1
    out = np.zeros((ho, wo, cout))
    for y in range(ho):
        for x in range(wo):
            for i in range(kh):
                for j in range(kw):
                    for ci in range(cin):
                        for co in range(cout):
                            if flip:
                                # kernel index (i, j) pairs with the spatially
                                # opposite input sample: I[x - i, y - j] form.
                                v = img[y * sh + kh - 1 - i, x * sw + kw - 1 - j, ci]
                            else:
                                v = img[y * sh + i, x * sw + j, ci]
                            out[y, x, co] += ker[i, j, ci, co] * v
    return out


def as3(m):
    return np.asarray(m, dtype=float)[:, :, None]


def ker(m):
    return np.asarray(m, dtype=float)[:, :, None, None]


class TestConv2d:
    def test_identity_kernel(self, rng):
        img = rng.normal(size=(3, 3, 1))
        out = T.conv2d(T.Tensor(img), T.Tensor(ker([[1.0]])))
        np.testing.assert_allclose(out.data, img)

    def test_quarter_kernel(self):
        img = as3([[1.0, 2.0], [3.0, 4.0]])
        out = T.conv2d(T.Tensor(img), T.Tensor(np.full((2, 2, 1, 1), 0.25)))
        np.testing.assert_allclose(out.data, [[[2.5]]])

    def test_flip_vs_noflip_asymmetric(self):
        img = as3([[1.0, 2.0], [3.0, 4.0]])
        k = ker([[0.0, 1.0], [0.0, 0.0]])
        plain = T.conv2d(T.Tensor(img), T.Tensor(k), flip=False)
        flipped = T.conv2d(T.Tensor(img), T.Tensor(k), flip=True)
        assert plain.data[0, 0, 0] != flipped.data[0, 0, 0]
        np.testing.assert_allclose(plain.data, conv_oracle(img, k, flip=False))
        np.testing.assert_allclose(flipped.data, conv_oracle(img, k, flip=True))

    @pytest.mark.parametrize("flip", [False, True])
    @pytest.mark.parametrize("stride", [(1, 1), (2, 1), (2, 2)])
    def test_random_against_oracle(self, rng, stride, flip):
        for _ in range(5):
            img = rng.normal(size=(6, 7, 2))
            k = rng.normal(size=(2, 3, 2, 3))
            got = T.conv2d(T.Tensor(img), T.Tensor(k), stride=stride, flip=flip)
            np.testing.assert_allclose(got.data, conv_oracle(img, k, stride, flip), atol=1e-12)

    def test_same_padding_keeps_size(self, rng):
        img = rng.normal(size=(5, 6, 2))
        k = rng.normal(size=(3, 3, 2, 4))
        out = T.conv2d(T.Tensor(img), T.Tensor(k), padding="same")
        assert out.shape == (5, 6, 4)

    def test_linearity(self, rng):
        x = rng.normal(size=(5, 5, 2))
        y = rng.normal(size=(5, 5, 2))
        k = rng.normal(size=(3, 3, 2, 3))
        a, b = 1.7, -0.4
        mixed = T.conv2d(T.Tensor(a * x + b * y), T.Tensor(k))
        parts = a * T.conv2d(T.Tensor(x), T.Tensor(k)).data + b * T.conv2d(T.Tensor(y), T.Tensor(k)).data
        np.testing.assert_allclose(mixed.data, parts, atol=1e-10)

    def test_channel_mismatch(self, rng):
        with pytest.raises(ShapeError):
            T.conv2d(T.Tensor(rng.normal(size=(4, 4, 2))), T.Tensor(rng.normal(size=(2, 2, 3, 1))))

    def test_kernel_too_large(self, rng):
        with pytest.raises(ShapeError):
            T.conv2d(T.Tensor(rng.normal(size=(2, 2, 1))), T.Tensor(rng.normal(size=(3, 3, 1, 1))))


class TestMaxPool:
    def test_2x2(self):
        out = T.max_pool(T.Tensor(as3([[1.0, 2.0], [3.0, 4.0]])), (2, 2))
        np.testing.assert_allclose(out.data, [[[4.0]]])

    def test_constant_input(self):
        out = T.max_pool(T.Tensor(np.full((4, 4, 2), 3.5)), (2, 2))
        np.testing.assert_allclose(out.data, np.full((2, 2, 2), 3.5))

    def test_random_against_oracle(self, rng):
        img = rng.normal(size=(4, 4, 3))
        out = T.max_pool(T.Tensor(img), (2, 2))
        for y in range(2):
            for x in range(2):
                for c in range(3):
                    assert out.data[y, x, c] == img[2 * y:2 * y + 2, 2 * x:2 * x + 2, c].max()

    def test_uneven_padding(self, rng):
        img = rng.normal(size=(3, 5, 1))
        out = T.max_pool(T.Tensor(img), (2, 2))
        assert out.shape == (2, 3, 1)
        assert out.data[1, 2, 0] == img[2, 4, 0]  # lone corner survives the -inf pad

    def test_window_too_large(self, rng):
        with pytest.raises(ShapeError):
            T.max_pool(T.Tensor(rng.normal(size=(2, 2, 1))), (3, 3))

    def test_tie_routes_to_lowest_flat_index(self):
        img = np.zeros((2, 2, 1))
        x = T.parameter(img)
        out = T.max_pool(x, (2, 2))
        T.sum_(out).backward()
        expect = np.zeros((2, 2, 1))
        expect[0, 0, 0] = 1.0
        np.testing.assert_array_equal(x.grad, expect)


class TestActivations:
    def test_sigmoid_zero(self):
        assert T.sigmoid(T.Tensor([0.0])).data[0] == 0.5

    def test_sigmoid_extremes_stable(self):
        out = T.sigmoid(T.Tensor([-800.0, 800.0])).data
        assert np.all(np.isfinite(out))
        assert 0.0 <= out[0] < 1e-300 and out[1] == 1.0

    def test_tanh_relu(self):
        assert T.tanh(T.Tensor([0.0])).data[0] == 0.0
        assert T.relu(T.Tensor([-1.0])).data[0] == 0.0

    def test_softmax_uniform(self):
        np.testing.assert_allclose(T.softmax(T.Tensor([0.0, 0.0, 0.0])).data, np.full(3, 1 / 3))

    def test_softmax_rows_sum_to_one(self, rng):
        x = rng.normal(size=(20, 7)) * 50
        y = T.softmax(T.Tensor(x), axis=1).data
        np.testing.assert_allclose(y.sum(axis=1), np.ones(20), atol=1e-12)
        assert np.all(y > 0)

    def test_activation_dispatch(self):
        assert T.activation("relu", T.Tensor([-2.0, 2.0])).data.tolist() == [0.0, 2.0]
        with pytest.raises(ShapeError):
            T.activation("gelu", T.Tensor([0.0]))


class TestDense:
    def test_identity(self, rng):
        x = rng.normal(size=(3,))
        out = T.dense(T.Tensor(x), T.Tensor(np.eye(3)), T.Tensor(np.zeros(3)))
        np.testing.assert_allclose(out.data, x)

    def test_small(self):
        out = T.dense(T.Tensor([1.0, 2.0]), T.Tensor([[1.0], [1.0]]), T.Tensor([0.0]))
        np.testing.assert_allclose(out.data, [3.0])

    def test_random_against_triple_loop(self, rng):
        x = rng.normal(size=(4, 5))
        w = rng.normal(size=(5, 3))
        b = rng.normal(size=(3,))
        want = np.zeros((4, 3))
        for i in range(4):
            for j in range(3):
                for k_ in range(5):
                    want[i, j] += x[i, k_] * w[k_, j]
                want[i, j] += b[j]
        got = T.dense(T.Tensor(x), T.Tensor(w), T.Tensor(b))
        np.testing.assert_allclose(got.data, want, atol=1e-12)

    def test_mismatch(self, rng):
        with pytest.raises(ShapeError):
            T.dense(T.Tensor(rng.normal(size=(4,))), T.Tensor(rng.normal(size=(3, 2))), T.Tensor(np.zeros(2)))
