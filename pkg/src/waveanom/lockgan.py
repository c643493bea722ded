"""Conditional GAN with lock-alternating training.

The discriminator (repeated ConvLSTM + pooling modules, with the one-hot
label concatenated at the final dense layer) scores records as real vs
generated and carries a class-probability head; the generator maps noise
through a ConvLSTM encoder-decoder (strided convolution instead of pooling)
to synthetic records.

Training alternates under a lock: the discriminator is first trained alone
for a few epochs against the frozen initial generator, then each cycle runs
d_steps discriminator updates with the generator frozen followed by g_steps
generator updates with the discriminator frozen. "Frozen" is literal -- the
locked network's weights are bit-identical at every optimizer step of the
other's phase.

Records are flat float vectors; a RecordLayout says how they fold into a
(time, height, width, channels) grid sequence for the ConvLSTM cells.
"""
from __future__ import annotations

import hashlib
import json
import math
import struct
from dataclasses import asdict, dataclass, field

import numpy as np

from . import tensor as T
from .errors import ConfigError, CorruptModelError, DataError, NumericalError, ShapeError
from .features import FeatureMatrix
from .optim import OptimizerState
from .recurrent import ConvLstmCell, ConvLstmParams, unroll

PROB_CLAMP = 1e-12
INIT_SCALE = 0.08  # uniform weight init half-width

# ---------------------------------------------------------------------------
# losses and the optimum-discriminator identities


def _as_prob_tensor(p):
    p = p if isinstance(p, T.Tensor) else T.Tensor(np.asarray(p, dtype=np.float64))
    return T.clip(p, PROB_CLAMP, 1.0 - PROB_CLAMP)


def bce_loss(y, p) -> T.Tensor:
    """Binary cross-entropy, averaged over the batch."""
    y = y if isinstance(y, T.Tensor) else T.Tensor(np.asarray(y, dtype=np.float64))
    p = _as_prob_tensor(p)
    if y.data.shape != p.data.shape:
        raise ShapeError(f"target shape {y.data.shape} != prediction shape {p.data.shape}")
    term = T.add(T.mul(y, T.log(p)), T.mul(1.0 - y, T.log(1.0 - p)))
    return T.mean(T.mul(term, T.Tensor(-1.0)))


def discriminator_loss(d_real, d_fake) -> T.Tensor:
    """-1/2 E log D(x) - 1/2 E log(1 - D(G(z)))."""
    real = T.mean(T.log(_as_prob_tensor(d_real)))
    fake = T.mean(T.log(1.0 - _as_prob_tensor(d_fake)))
    return T.mul(T.add(real, fake), T.Tensor(-0.5))


def generator_loss(d_fake, variant: str = "saturating") -> T.Tensor:
    """Saturating: mean log(1 - D(G(z))); nonsaturating: -mean log D(G(z))."""
    p = _as_prob_tensor(d_fake)
    if variant == "saturating":
        return T.mean(T.log(1.0 - p))
    if variant == "nonsaturating":
        return T.mul(T.mean(T.log(p)), T.Tensor(-1.0))
    raise ConfigError(f"unknown generator loss variant {variant!r}")


def _discriminator_loss_logits(real_logit: T.Tensor, fake_logit: T.Tensor) -> T.Tensor:
    """discriminator_loss computed from logits: stable and never gradient-dead."""
    real = T.mean(T.log_sigmoid(real_logit))
    fake = T.mean(T.log_sigmoid(T.mul(fake_logit, T.Tensor(-1.0))))  # log(1 - sigmoid(x))
    return T.mul(T.add(real, fake), T.Tensor(-0.5))


def _generator_loss_logits(fake_logit: T.Tensor, variant: str) -> T.Tensor:
    """generator_loss computed from logits."""
    if variant == "saturating":
        return T.mean(T.log_sigmoid(T.mul(fake_logit, T.Tensor(-1.0))))
    return T.mul(T.mean(T.log_sigmoid(fake_logit)), T.Tensor(-1.0))


def class_cross_entropy(class_probs: T.Tensor, labels_onehot: np.ndarray) -> T.Tensor:
    """Mean negative log-likelihood of the true class."""
    p = T.clip(class_probs, PROB_CLAMP, 1.0)
    picked = T.sum_(T.mul(T.log(p), T.Tensor(labels_onehot)), axis=1)
    return T.mul(T.mean(picked), T.Tensor(-1.0))


def optimal_discriminator(p_data, p_g) -> np.ndarray:
    """D*(x) = p_data / (p_data + p_g) on a shared finite support; 0/0 -> 1/2."""
    p_data = np.asarray(p_data, dtype=np.float64)
    p_g = np.asarray(p_g, dtype=np.float64)
    if p_data.shape != p_g.shape:
        raise DataError("distributions need a shared support")
    if (p_data < 0).any() or (p_g < 0).any():
        raise DataError("negative probability mass")
    for name, p in (("p_data", p_data), ("p_g", p_g)):
        if abs(p.sum() - 1.0) > 1e-9:
            raise DataError(f"{name} must sum to 1")
    total = p_data + p_g
    out = np.full_like(p_data, 0.5)
    np.divide(p_data, total, out=out, where=total > 0)
    return out


def jensen_shannon(p, q) -> float:
    """JSD with natural logs and the midpoint mixture."""
    p = np.asarray(p, dtype=np.float64)
    q = np.asarray(q, dtype=np.float64)
    m = 0.5 * (p + q)

    def kl(a, b):
        mask = a > 0
        return float((a[mask] * np.log(a[mask] / b[mask])).sum())

    return 0.5 * kl(p, m) + 0.5 * kl(q, m)


def minimax_value_at_optimum(p_data, p_g) -> float:
    """Adversarial value at D*: 2 JSD(p_g || p_data) - 2 ln 2."""
    optimal_discriminator(p_data, p_g)  # validate the inputs
    return 2.0 * jensen_shannon(p_g, p_data) - 2.0 * math.log(2.0)


# ---------------------------------------------------------------------------
# layouts and specs


@dataclass(frozen=True)
class RecordLayout:
    """How a flat record folds into a ConvLSTM input sequence."""

    time_steps: int
    height: int
    width: int
    channels: int = 1

    @property
    def record_width(self) -> int:
        return self.time_steps * self.height * self.width * self.channels

    @property
    def grid(self) -> tuple[int, int]:
        return (self.height, self.width)


def default_kernel(grid) -> tuple[int, int]:
    return (min(3, grid[0]), min(3, grid[1]))


@dataclass
class GeneratorSpec:
    noise_dim: int
    layout: RecordLayout
    encoder_channels: list[int] = field(default_factory=lambda: [4])
    decoder_channels: list[int] = field(default_factory=lambda: [4])
    kernel: tuple[int, int] | None = None
    output_activation: str = "linear"  # or "tanh"

    def __post_init__(self):
        if isinstance(self.layout, (tuple, list)):
            self.layout = RecordLayout(*self.layout)
        if self.kernel is None:
            self.kernel = default_kernel(self.layout.grid)
        self.kernel = tuple(self.kernel)
        if self.noise_dim < 1 or not self.encoder_channels or not self.decoder_channels:
            raise ConfigError("generator spec needs noise_dim >= 1 and non-empty channel plans")
        if self.output_activation not in ("linear", "tanh"):
            raise ConfigError(f"unsupported output activation {self.output_activation!r}")

    @property
    def output_width(self) -> int:
        return self.layout.record_width


@dataclass
class DiscriminatorSpec:
    class_count: int
    layout: RecordLayout
    repeat_count: int = 5
    channels: list[int] | None = None
    kernel: tuple[int, int] | None = None

    def __post_init__(self):
        if isinstance(self.layout, (tuple, list)):
            self.layout = RecordLayout(*self.layout)
        if self.repeat_count < 1:
            raise ConfigError("repeat_count must be >= 1")
        if self.channels is None:
            self.channels = [4] * self.repeat_count
        if len(self.channels) != self.repeat_count:
            raise ConfigError("need one channel width per repeated module")
        if self.class_count < 2:
            raise ConfigError("class_count must be >= 2")
        if self.kernel is None:
            self.kernel = default_kernel(self.layout.grid)
        self.kernel = tuple(self.kernel)


@dataclass
class LganConfig:
    epochs: int = 100          # alternation cycles; 50/100/200 are the CLI presets
    batch: int = 32
    d_pretrain_epochs: int = 5
    d_steps: int = 1
    g_steps: int = 1
    seed: int = 0
    lambda_info: float = 0.0   # mutual-information hook; only 0 is supported
    generator_loss_variant: str = "saturating"
    class_supervision: str = "always"  # or "pretrain_only"
    class_loss_weight: float = 1.0
    noise_dim: int = 16
    gen_channels: int = 4
    disc_channels: int = 4
    disc_repeat: int = 5
    d_optimizer: dict = field(default_factory=lambda: {"rule": "adam", "learning_rate": 1e-4})
    g_optimizer: dict = field(default_factory=lambda: {
        "rule": "sgd_momentum", "learning_rate": 0.005, "momentum": 0.6, "l2": 0.1})

    def __post_init__(self):
        for name in ("epochs", "batch", "d_pretrain_epochs", "d_steps", "g_steps"):
            if getattr(self, name) < (0 if name == "d_pretrain_epochs" else 1):
                raise ConfigError(f"{name} must be positive")
        if self.lambda_info != 0.0:
            raise ConfigError("lambda_info != 0 is not supported; the hook is fixed at zero")
        if self.generator_loss_variant not in ("saturating", "nonsaturating"):
            raise ConfigError(f"unknown generator loss variant {self.generator_loss_variant!r}")
        if self.class_supervision not in ("always", "pretrain_only"):
            raise ConfigError(f"unknown class_supervision mode {self.class_supervision!r}")


# ---------------------------------------------------------------------------
# networks


def _pool_window(grid) -> tuple[int, int]:
    return (min(2, grid[0]), min(2, grid[1]))


def _pooled(grid) -> tuple[int, int]:
    wh, ww = _pool_window(grid)
    return (-(-grid[0] // wh), -(-grid[1] // ww))


class Discriminator:
    """Stacked ConvLSTM+pooling modules with a label-conditioned dense head."""

    def __init__(self, spec: DiscriminatorSpec, rng: np.random.Generator):
        self.spec = spec
        layout = spec.layout
        self.modules: list[ConvLstmParams] = []
        grid = layout.grid
        in_ch = layout.channels
        for ch in spec.channels:
            kern = (min(spec.kernel[0], grid[0]), min(spec.kernel[1], grid[1]))
            self.modules.append(ConvLstmParams.init(grid, in_ch, ch, kern, rng, INIT_SCALE))
            grid = _pooled(grid)
            in_ch = ch
        self.final_grid = grid
        flat = grid[0] * grid[1] * spec.channels[-1]
        self.w_real = T.parameter(rng.uniform(-INIT_SCALE, INIT_SCALE, (flat + spec.class_count, 1)))
        self.b_real = T.parameter(np.zeros(1))
        self.w_cls = T.parameter(rng.uniform(-INIT_SCALE, INIT_SCALE, (flat + spec.class_count, spec.class_count)))
        self.b_cls = T.parameter(np.zeros(spec.class_count))

    def named_params(self) -> dict[str, T.Tensor]:
        out = {}
        for i, mod in enumerate(self.modules):
            for name, t in zip([f.name for f in mod.__dataclass_fields__.values()], mod.tensors()):
                out[f"d.m{i}.{name}"] = t
        out["d.head.w_real"] = self.w_real
        out["d.head.b_real"] = self.b_real
        out["d.head.w_cls"] = self.w_cls
        out["d.head.b_cls"] = self.b_cls
        return out

    def params(self) -> list[T.Tensor]:
        return list(self.named_params().values())

    def forward(self, records: T.Tensor, labels_onehot: T.Tensor) -> "DiscriminatorOutput":
        layout = self.spec.layout
        if records.data.ndim == 1:
            records = T.reshape(records, (1, -1))
        if labels_onehot.data.ndim == 1:
            labels_onehot = T.reshape(labels_onehot, (1, -1))
        n, width = records.data.shape
        if width != layout.record_width:
            raise ShapeError(f"record width {width} != layout width {layout.record_width}")
        if labels_onehot.data.shape != (n, self.spec.class_count):
            raise ShapeError(f"label condition must be (n, {self.spec.class_count})")

        step_w = layout.height * layout.width * layout.channels
        pieces = T.split_axis(records, [step_w] * layout.time_steps, axis=1)
        seq = [T.reshape(p, (n, layout.height, layout.width, layout.channels)) for p in pieces]
        grid = layout.grid
        for mod in self.modules:
            states = unroll(ConvLstmCell(mod), seq)
            window = _pool_window(grid)
            if window == (1, 1):
                seq = [st.h for st in states]
            else:
                seq = [T.max_pool(st.h, window) for st in states]
            grid = _pooled(grid)
        flat = T.reshape(seq[-1], (n, -1))
        conditioned = T.concat([flat, labels_onehot], axis=1)
        real_logit = T.reshape(T.dense(conditioned, self.w_real, self.b_real), (n,))
        class_logits = T.dense(conditioned, self.w_cls, self.b_cls)
        return DiscriminatorOutput(
            real_prob=T.sigmoid(real_logit), real_logit=real_logit,
            class_probs=T.softmax(class_logits, axis=1), class_logits=class_logits)


@dataclass
class DiscriminatorOutput:
    real_prob: T.Tensor
    real_logit: T.Tensor
    class_probs: T.Tensor
    class_logits: T.Tensor


def conditional_discriminator_forward(disc: Discriminator, record, label_onehot):
    """(real_prob, class_probs) for one record under a label condition."""
    out = disc.forward(T.Tensor(np.asarray(record, dtype=np.float64)),
                       T.Tensor(np.asarray(label_onehot, dtype=np.float64)))
    return out.real_prob, out.class_probs


class Generator:
    """Noise -> ConvLSTM encoder-decoder -> dense record head.

    Interior activations are rectifiers; downsampling before the head is a
    strided convolution rather than pooling.
    """

    def __init__(self, spec: GeneratorSpec, rng: np.random.Generator):
        self.spec = spec
        layout = spec.layout
        grid = layout.grid
        first_ch = spec.encoder_channels[0]
        step_w = grid[0] * grid[1] * first_ch

        def u(shape):
            return T.parameter(rng.uniform(-INIT_SCALE, INIT_SCALE, shape))

        self.w_in = [u((spec.noise_dim, step_w)) for _ in range(layout.time_steps)]
        self.b_in = [T.parameter(np.zeros(step_w)) for _ in range(layout.time_steps)]

        kern = (min(spec.kernel[0], grid[0]), min(spec.kernel[1], grid[1]))
        self.encoder: list[ConvLstmParams] = []
        in_ch = first_ch
        for ch in spec.encoder_channels:
            self.encoder.append(ConvLstmParams.init(grid, in_ch, ch, kern, rng, INIT_SCALE))
            in_ch = ch
        self.decoder: list[ConvLstmParams] = []
        dec_in = spec.encoder_channels[-1]
        for ch in spec.decoder_channels:
            self.decoder.append(ConvLstmParams.init(grid, dec_in, ch, kern, rng, INIT_SCALE))
            dec_in = ch

        mix_ch = spec.decoder_channels[-1]
        stride = _pool_window(grid)
        self.mix_stride = stride
        self.k_mix = u((stride[0], stride[1], layout.time_steps * mix_ch, mix_ch))
        mixed_grid = _pooled(grid)
        mixed_flat = mixed_grid[0] * mixed_grid[1] * mix_ch
        self.w_out = u((mixed_flat, spec.output_width))
        self.b_out = T.parameter(np.zeros(spec.output_width))

    def named_params(self) -> dict[str, T.Tensor]:
        out = {}
        for t_idx, (w, b) in enumerate(zip(self.w_in, self.b_in)):
            out[f"g.in{t_idx}.w"] = w
            out[f"g.in{t_idx}.b"] = b
        for stage, mods in (("enc", self.encoder), ("dec", self.decoder)):
            for i, mod in enumerate(mods):
                for name, t in zip([f.name for f in mod.__dataclass_fields__.values()], mod.tensors()):
                    out[f"g.{stage}{i}.{name}"] = t
        out["g.mix.k"] = self.k_mix
        out["g.out.w"] = self.w_out
        out["g.out.b"] = self.b_out
        return out

    def params(self) -> list[T.Tensor]:
        return list(self.named_params().values())

    def forward(self, z: T.Tensor) -> T.Tensor:
        spec = self.spec
        layout = spec.layout
        if z.data.ndim == 1:
            z = T.reshape(z, (1, -1))
        n = z.data.shape[0]
        if z.data.shape[1] != spec.noise_dim:
            raise ShapeError(f"noise width {z.data.shape[1]} != {spec.noise_dim}")
        grid = layout.grid
        seq = [T.reshape(T.relu(T.dense(z, w, b)),
                         (n, grid[0], grid[1], spec.encoder_channels[0]))
               for w, b in zip(self.w_in, self.b_in)]
        enc_states = None
        for mod in self.encoder:
            enc_states = unroll(ConvLstmCell(mod), seq)
            seq = [st.h for st in enc_states]
        summary = enc_states[-1]
        dec_input = [summary.h] * layout.time_steps
        for i, mod in enumerate(self.decoder):
            cell = ConvLstmCell(mod)
            init = summary if (i == 0 and mod.hidden_channels == summary.h.data.shape[-1]) else None
            dec_states = unroll(cell, dec_input, init)
            dec_input = [st.h for st in dec_states]
        stacked = T.concat(dec_input, axis=-1)
        mixed = T.relu(T.conv2d(stacked, self.k_mix, stride=self.mix_stride, padding="same"))
        flat = T.reshape(mixed, (n, -1))
        out = T.dense(flat, self.w_out, self.b_out)
        if spec.output_activation == "tanh":
            out = T.tanh(out)
        return out


# ---------------------------------------------------------------------------
# training


@dataclass
class LganModel:
    generator_spec: GeneratorSpec
    discriminator_spec: DiscriminatorSpec
    generator: Generator
    discriminator: Discriminator
    config: LganConfig
    class_names: list[str]
    history: dict
    # how records were prepared for training (selected feature names, window
    # depth, standardization); carried in the model file so evaluation can
    # reproduce the exact input transform
    preprocessing: dict | None = None

    def weights(self) -> dict[str, np.ndarray]:
        named = {}
        named.update({k: v.data for k, v in self.generator.named_params().items()})
        named.update({k: v.data for k, v in self.discriminator.named_params().items()})
        return named


def weight_checksum(params: list[T.Tensor]) -> str:
    h = hashlib.sha256()
    for p in params:
        h.update(np.ascontiguousarray(p.data).tobytes())
    return h.hexdigest()


def _onehot(labels: np.ndarray, class_count: int) -> np.ndarray:
    out = np.zeros((len(labels), class_count))
    out[np.arange(len(labels)), labels] = 1.0
    return out


def train_lgan(train_set: FeatureMatrix, config: LganConfig,
               layout: RecordLayout | None = None,
               rng: np.random.Generator | None = None,
               on_step=None) -> LganModel:
    """Lock-alternating training over a rebalanced training matrix.

    on_step(phase, epoch, step) fires after every optimizer step; phases are
    'pretrain', 'disc' and 'gen'. Bit-reproducible for a fixed seed.
    """
    if rng is None:
        rng = np.random.default_rng(config.seed)
    n, width = train_set.values.shape
    if layout is None:
        layout = RecordLayout(1, 1, width, 1)
    if layout.record_width != width:
        raise ConfigError(f"layout width {layout.record_width} != record width {width}")
    class_count = max(len(train_set.class_names), int(train_set.labels.max()) + 1, 2)

    gen_spec = GeneratorSpec(noise_dim=config.noise_dim, layout=layout,
                             encoder_channels=[config.gen_channels],
                             decoder_channels=[config.gen_channels])
    disc_spec = DiscriminatorSpec(class_count=class_count, layout=layout,
                                  repeat_count=config.disc_repeat,
                                  channels=[config.disc_channels] * config.disc_repeat)
    generator = Generator(gen_spec, rng)
    discriminator = Discriminator(disc_spec, rng)
    g_params = generator.params()
    d_params = discriminator.params()
    d_opt = OptimizerState(**config.d_optimizer)
    g_opt = OptimizerState(**config.g_optimizer)

    x = train_set.values
    y_onehot = _onehot(train_set.labels.astype(np.int64), class_count)
    uniform = np.full(class_count, 1.0 / class_count)
    m = config.batch

    def sample_real():
        idx = rng.choice(n, size=m, replace=m > n)
        return x[idx], y_onehot[idx]

    def fake_batch(batch_size, attached: bool):
        z = T.Tensor(rng.standard_normal((batch_size, config.noise_dim)))
        fakes = generator.forward(z)
        return fakes if attached else fakes.detach()

    def fake_conditions(batch_size) -> np.ndarray:
        # Generated samples carry uniformly sampled one-hot conditions so the
        # condition's marginal cannot separate real from fake on its own.
        return _onehot(rng.integers(0, class_count, size=batch_size), class_count)

    def d_update(with_class: bool) -> float:
        real_x, real_y = sample_real()
        bs = len(real_x)
        fakes = fake_batch(bs, attached=False)
        if with_class:
            # one fused forward: [real | real | fake] conditioned on
            # [true labels | uniform | sampled one-hots]; the adversarial
            # loss reads the first and last segments, class supervision the
            # middle one (under the uniform condition used at inference).
            batch = T.concat([T.Tensor(real_x), T.Tensor(real_x), fakes], axis=0)
            conds = np.vstack([real_y, np.tile(uniform, (bs, 1)), fake_conditions(bs)])
            out = discriminator.forward(batch, T.Tensor(conds))
            logits = T.split_axis(out.real_logit, [bs, bs, bs], axis=0)
            cls_mid = T.split_axis(out.class_probs, [bs, bs, bs], axis=0)[1]
            loss = _discriminator_loss_logits(logits[0], logits[2])
            loss = T.add(loss, T.mul(class_cross_entropy(cls_mid, real_y),
                                     T.Tensor(config.class_loss_weight)))
        else:
            batch = T.concat([T.Tensor(real_x), fakes], axis=0)
            conds = np.vstack([real_y, fake_conditions(bs)])
            out = discriminator.forward(batch, T.Tensor(conds))
            logits = T.split_axis(out.real_logit, [bs, bs], axis=0)
            loss = _discriminator_loss_logits(logits[0], logits[1])
        for p in d_params:
            p.zero_grad()
        T.gradients(loss, d_params)
        d_opt.step(d_params)
        return float(loss.data)

    def g_update() -> float:
        bs = min(m, n)
        fakes = fake_batch(bs, attached=True)
        out = discriminator.forward(fakes, T.Tensor(fake_conditions(bs)))
        loss = _generator_loss_logits(out.real_logit, config.generator_loss_variant)
        for p in g_params + d_params:
            p.zero_grad()
        T.gradients(loss, g_params)
        g_opt.step(g_params)
        return float(loss.data)

    def check(value: float, epoch: int):
        if not math.isfinite(value):
            raise NumericalError(f"training diverged (non-finite loss) at epoch {epoch}")
        return value

    history = {"pretrain_d_loss": [], "d_loss": [], "g_loss": []}
    supervise_adversarial = config.class_supervision == "always"

    for epoch in range(config.d_pretrain_epochs):
        losses = []
        for step in range(config.d_steps):
            losses.append(check(d_update(with_class=True), epoch))
            if on_step:
                on_step("pretrain", epoch, step)
        history["pretrain_d_loss"].append(float(np.mean(losses)))

    for epoch in range(config.epochs):
        d_losses = []
        for step in range(config.d_steps):
            d_losses.append(check(d_update(with_class=supervise_adversarial), epoch))
            if on_step:
                on_step("disc", epoch, step)
        g_losses = []
        for step in range(config.g_steps):
            g_losses.append(check(g_update(), epoch))
            if on_step:
                on_step("gen", epoch, step)
        history["d_loss"].append(float(np.mean(d_losses)))
        history["g_loss"].append(float(np.mean(g_losses)))

    return LganModel(generator_spec=gen_spec, discriminator_spec=disc_spec,
                     generator=generator, discriminator=discriminator,
                     config=config, class_names=list(train_set.class_names),
                     history=history)


@dataclass
class DiscOnlyModel:
    """Discriminator trained as a plain supervised classifier (no adversary)."""

    spec: DiscriminatorSpec
    discriminator: Discriminator
    history: dict


def train_disc_classifier(train_set: FeatureMatrix, config: LganConfig,
                          layout: RecordLayout | None = None,
                          rng: np.random.Generator | None = None) -> DiscOnlyModel:
    """Class-head supervision only; the baseline the lock training is compared to."""
    if rng is None:
        rng = np.random.default_rng(config.seed)
    n, width = train_set.values.shape
    if layout is None:
        layout = RecordLayout(1, 1, width, 1)
    class_count = max(len(train_set.class_names), int(train_set.labels.max()) + 1, 2)
    spec = DiscriminatorSpec(class_count=class_count, layout=layout,
                             repeat_count=config.disc_repeat,
                             channels=[config.disc_channels] * config.disc_repeat)
    disc = Discriminator(spec, rng)
    params = disc.params()
    opt = OptimizerState(**config.d_optimizer)
    x = train_set.values
    y_onehot = _onehot(train_set.labels.astype(np.int64), class_count)
    uniform = np.full(class_count, 1.0 / class_count)
    history = {"class_loss": []}
    total_epochs = config.d_pretrain_epochs + config.epochs
    for epoch in range(total_epochs):
        losses = []
        for _ in range(config.d_steps):
            idx = rng.choice(n, size=config.batch, replace=config.batch > n)
            out = disc.forward(T.Tensor(x[idx]),
                               T.Tensor(np.tile(uniform, (len(idx), 1))))
            loss = class_cross_entropy(out.class_probs, y_onehot[idx])
            if not math.isfinite(float(loss.data)):
                raise NumericalError(f"classifier diverged at epoch {epoch}")
            for p in params:
                p.zero_grad()
            T.gradients(loss, params)
            opt.step(params)
            losses.append(float(loss.data))
        history["class_loss"].append(float(np.mean(losses)))
    return DiscOnlyModel(spec=spec, discriminator=disc, history=history)


def classify_disc_only(model: DiscOnlyModel, records) -> tuple[np.ndarray, np.ndarray]:
    records = np.asarray(records, dtype=np.float64)
    rows = records[None, :] if records.ndim == 1 else records
    k = model.spec.class_count
    cond = np.full((rows.shape[0], k), 1.0 / k)
    out = model.discriminator.forward(T.Tensor(rows), T.Tensor(cond))
    probs = out.class_probs.data
    return probs.argmax(axis=1), probs


def classify(model: LganModel, record) -> tuple[int, np.ndarray]:
    """Class id and probabilities from the discriminator's class head.

    The label condition is the uniform vector at inference: the class head
    never sees a true label outside training.
    """
    record = np.asarray(record, dtype=np.float64)
    squeeze = record.ndim == 1
    rows = record[None, :] if squeeze else record
    if rows.shape[1] != model.discriminator_spec.layout.record_width:
        raise ShapeError(f"record width {rows.shape[1]} != "
                         f"{model.discriminator_spec.layout.record_width}")
    k = model.discriminator_spec.class_count
    cond = np.full((rows.shape[0], k), 1.0 / k)
    out = model.discriminator.forward(T.Tensor(rows), T.Tensor(cond))
    probs = out.class_probs.data
    ids = probs.argmax(axis=1)
    if squeeze:
        return int(ids[0]), probs[0]
    return ids, probs


# ---------------------------------------------------------------------------
# persistence

_MAGIC = b"WVNMLGAN"
_FORMAT_VERSION = 1


def _canonical_json(obj) -> bytes:
    return json.dumps(obj, sort_keys=True, separators=(",", ":")).encode("utf-8")


def _spec_digest(gen_spec: GeneratorSpec, disc_spec: DiscriminatorSpec) -> str:
    blob = _canonical_json({"generator": _spec_dict(gen_spec),
                            "discriminator": _spec_dict(disc_spec)})
    return hashlib.sha256(blob).hexdigest()


def _spec_dict(spec) -> dict:
    d = asdict(spec)
    d["layout"] = list(asdict(spec.layout).values())
    if "kernel" in d:
        d["kernel"] = list(spec.kernel)
    return d


def save_model(model: LganModel, path):
    """Versioned container: header JSON, raw little-endian float64 weight
    blocks in sorted name order, trailing sha256."""
    weights = model.weights()
    names = sorted(weights)
    header = {
        "format_version": _FORMAT_VERSION,
        "spec_digest": _spec_digest(model.generator_spec, model.discriminator_spec),
        "generator_spec": _spec_dict(model.generator_spec),
        "discriminator_spec": _spec_dict(model.discriminator_spec),
        "config": asdict(model.config),
        "class_names": model.class_names,
        "history": model.history,
        "preprocessing": model.preprocessing,
        "weights": [{"name": n, "shape": list(weights[n].shape)} for n in names],
    }
    header_bytes = _canonical_json(header)
    body = bytearray()
    body += _MAGIC
    body += struct.pack("<II", _FORMAT_VERSION, len(header_bytes))
    body += header_bytes
    for n in names:
        body += np.ascontiguousarray(weights[n], dtype="<f8").tobytes()
    body += hashlib.sha256(bytes(body)).digest()
    with open(path, "wb") as fh:
        fh.write(bytes(body))


def load_model(path) -> LganModel:
    with open(path, "rb") as fh:
        blob = fh.read()
    if len(blob) < len(_MAGIC) + 8 + 32 or blob[:len(_MAGIC)] != _MAGIC:
        raise CorruptModelError(f"{path}: not a model file")
    payload, digest = blob[:-32], blob[-32:]
    if hashlib.sha256(payload).digest() != digest:
        raise CorruptModelError(f"{path}: checksum mismatch (truncated or corrupt)")
    version, header_len = struct.unpack_from("<II", blob, len(_MAGIC))
    if version != _FORMAT_VERSION:
        raise CorruptModelError(f"{path}: unsupported format version {version}")
    header_start = len(_MAGIC) + 8
    header = json.loads(blob[header_start:header_start + header_len].decode("utf-8"))

    gen_spec = GeneratorSpec(**{**header["generator_spec"],
                                "layout": RecordLayout(*header["generator_spec"]["layout"])})
    disc_spec = DiscriminatorSpec(**{**header["discriminator_spec"],
                                     "layout": RecordLayout(*header["discriminator_spec"]["layout"])})
    if _spec_digest(gen_spec, disc_spec) != header["spec_digest"]:
        raise CorruptModelError(f"{path}: spec digest mismatch")
    config = LganConfig(**header["config"])

    rng = np.random.default_rng(0)  # shapes only; weights are overwritten below
    generator = Generator(gen_spec, rng)
    discriminator = Discriminator(disc_spec, rng)
    named = {}
    named.update(generator.named_params())
    named.update(discriminator.named_params())

    offset = header_start + header_len
    for entry in header["weights"]:
        shape = tuple(entry["shape"])
        count = int(np.prod(shape)) if shape else 1
        end = offset + 8 * count
        if end > len(payload):
            raise CorruptModelError(f"{path}: weight block {entry['name']} out of bounds")
        arr = np.frombuffer(payload, dtype="<f8", count=count, offset=offset).reshape(shape)
        if entry["name"] not in named:
            raise CorruptModelError(f"{path}: unexpected weight {entry['name']}")
        target = named[entry["name"]]
        if target.data.shape != shape:
            raise CorruptModelError(f"{path}: shape mismatch for {entry['name']}")
        target.data = arr.copy()
        offset = end
    if offset != len(payload):
        raise CorruptModelError(f"{path}: trailing bytes after weight blocks")

    return LganModel(generator_spec=gen_spec, discriminator_spec=disc_spec,
                     generator=generator, discriminator=discriminator,
                     config=config, class_names=list(header["class_names"]),
                     history=header["history"],
                     preprocessing=header.get("preprocessing"))
