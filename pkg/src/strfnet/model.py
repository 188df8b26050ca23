"""Full detection model: first-layer 2D convolutions (generic kernels,
STRF-parameterized kernels, or both), residual blocks that downsample
the band axis, a per-frame fully connected reduction, a stacked
bidirectional GRU, self-attentive pooling and a small MLP with a two-way
softmax.

Parameters live in a flat dict of arrays so the optimizer, checkpointing
and freezing are uniform. STRF kernels contribute exactly 4 trainable
scalars each; their dense kernel gradient is contracted with the
analytic parameter jacobian during backward.
"""

from __future__ import annotations

from dataclasses import asdict, dataclass

import numpy as np

from .frontend import FrontendConfig, mel_filterbank
from .hilbert import design_hilbert_fir
from .layers import (attention_pool_backward, attention_pool_forward,
                     batchnorm_backward, batchnorm_forward, conv2d_backward,
                     conv2d_forward, cross_entropy_backward,
                     cross_entropy_forward, dense_backward, dense_forward,
                     relu_backward, relu_forward, same_same_padding,
                     same_valid_padding, softmax)
from .recurrent import bigru_backward, bigru_forward, init_gru_layer
from .strf import DOWNWARD, UPWARD, KernelBank, StrfParams

FIRST_LAYER_MODES = ("generic", "strf", "hybrid")
_GRU_KEYS = ("fwd_w", "fwd_u", "fwd_b", "bwd_w", "bwd_u", "bwd_b")


def bands_per_octave(band_centers_hz: np.ndarray, sample_rate: int,
                     lo_hz: float = 500.0) -> float:
    """Average band density over the upper mel axis, in bands/octave.

    Mel bands are not log-spaced, so a spectral modulation in
    cycles/octave has no exact counterpart on this axis; the average
    density between ``lo_hz`` and Nyquist is the conversion constant
    used throughout.
    """
    nyquist = sample_rate / 2
    n = int(np.count_nonzero((band_centers_hz >= lo_hz) & (band_centers_hz <= nyquist)))
    return n / float(np.log2(nyquist / lo_hz))


@dataclass(frozen=True)
class ModelConfig:
    """Architecture description; every width is configurable."""

    first_layer: str = "strf"
    n_strf_kernels: int = 60
    n_generic_kernels: int = 0
    n_input_bands: int = 40
    frame_rate_hz: float = 100.22727272727273
    strf_time_support_s: float = 0.5
    strf_channel_support: int = 15
    channels_per_octave: float = 8.663
    n_residual_blocks: int = 4
    residual_channels: int = 64
    fc_dim: int = 128
    gru_hidden: int = 256
    gru_layers: int = 2
    attention_dim: int = 128
    mlp_hidden: int = 128
    n_outputs: int = 2

    def __post_init__(self):
        if self.first_layer not in FIRST_LAYER_MODES:
            raise ValueError(f"first_layer must be one of {FIRST_LAYER_MODES}")
        if self.first_layer == "strf" and (self.n_strf_kernels < 1 or self.n_generic_kernels != 0):
            raise ValueError("strf mode takes n_strf_kernels >= 1 and no generic kernels")
        if self.first_layer == "generic" and (self.n_generic_kernels < 1 or self.n_strf_kernels != 0):
            raise ValueError("generic mode takes n_generic_kernels >= 1 and no STRF kernels")
        if self.first_layer == "hybrid" and min(self.n_strf_kernels, self.n_generic_kernels) < 1:
            raise ValueError("hybrid mode needs both kernel counts >= 1")
        if self.n_input_bands < self.strf_channel_support:
            raise ValueError("first-layer kernels are wider than the input band axis")
        for name in ("n_residual_blocks", "residual_channels", "fc_dim", "gru_hidden",
                     "gru_layers", "attention_dim", "mlp_hidden", "n_outputs"):
            if getattr(self, name) < 1:
                raise ValueError(f"{name} must be >= 1")

    @classmethod
    def for_frontend(cls, frontend: FrontendConfig, sample_rate: int, **overrides) -> "ModelConfig":
        _, centers = mel_filterbank(sample_rate, frontend.dft_size, frontend.n_mel_bands)
        fields = dict(
            n_input_bands=frontend.n_mel_bands,
            frame_rate_hz=frontend.frame_rate_hz(sample_rate),
            channels_per_octave=bands_per_octave(centers, sample_rate),
        )
        fields.update(overrides)
        return cls(**fields)

    @property
    def kernel_time_frames(self) -> int:
        return int(round(self.strf_time_support_s * self.frame_rate_hz))

    @property
    def total_kernels(self) -> int:
        return self.n_generic_kernels + self.n_strf_kernels

    def band_axis_sizes(self) -> list[int]:
        """Band-axis width after the first layer and after each block."""
        f = self.n_input_bands - self.strf_channel_support + 1
        sizes = [f]
        for _ in range(self.n_residual_blocks):
            f = (f - 1) // 2 + 1  # 3x3 kernel, pad 1, band stride 2
            sizes.append(f)
        return sizes

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> "ModelConfig":
        return cls(**d)


def parameter_count(params: dict) -> int:
    """Trainable scalars; an STRF bank entry is its (n, 4) scalar array."""
    return int(sum(v.size for v in params.values()))


def residual_block_forward(x, params, buffers, new_buffers, prefix, train,
                           stride=(1, 2)):
    """conv-BN-ReLU twice plus a skip path.

    The skip is a strided 1x1 projection when ``{prefix}.proj.w`` exists,
    otherwise the identity (valid only for stride 1 and equal channels).
    """
    y1, c1 = conv2d_forward(x, params[f"{prefix}.conv1.w"], stride=stride,
                            padding=same_same_padding(3, 3))
    y1, b1, m1, v1 = batchnorm_forward(y1, params[f"{prefix}.bn1.gamma"],
                                       params[f"{prefix}.bn1.beta"],
                                       buffers[f"{prefix}.bn1.mean"],
                                       buffers[f"{prefix}.bn1.var"], train)
    new_buffers[f"{prefix}.bn1.mean"], new_buffers[f"{prefix}.bn1.var"] = m1, v1
    a1, r1 = relu_forward(y1)
    y2, c2 = conv2d_forward(a1, params[f"{prefix}.conv2.w"], stride=(1, 1),
                            padding=same_same_padding(3, 3))
    y2, b2, m2, v2 = batchnorm_forward(y2, params[f"{prefix}.bn2.gamma"],
                                       params[f"{prefix}.bn2.beta"],
                                       buffers[f"{prefix}.bn2.mean"],
                                       buffers[f"{prefix}.bn2.var"], train)
    new_buffers[f"{prefix}.bn2.mean"], new_buffers[f"{prefix}.bn2.var"] = m2, v2
    a2, r2 = relu_forward(y2)
    if f"{prefix}.proj.w" in params:
        skip, cs = conv2d_forward(x, params[f"{prefix}.proj.w"], stride=stride,
                                  padding=((0, 0), (0, 0)))
    else:
        if stride != (1, 1) or a2.shape != x.shape:
            raise ValueError("identity skip requires stride 1 and matching shapes")
        skip, cs = x, None
    return a2 + skip, (c1, b1, r1, c2, b2, r2, cs)


def residual_block_backward(gy, cache, grads, prefix):
    c1, b1, r1, c2, b2, r2, cs = cache
    g = relu_backward(gy, r2)
    g, grads[f"{prefix}.bn2.gamma"], grads[f"{prefix}.bn2.beta"] = batchnorm_backward(g, b2)
    g, grads[f"{prefix}.conv2.w"] = conv2d_backward(g, c2)
    g = relu_backward(g, r1)
    g, grads[f"{prefix}.bn1.gamma"], grads[f"{prefix}.bn1.beta"] = batchnorm_backward(g, b1)
    gx, grads[f"{prefix}.conv1.w"] = conv2d_backward(g, c1)
    if cs is not None:
        g_skip, grads[f"{prefix}.proj.w"] = conv2d_backward(gy, cs)
        gx = gx + g_skip
    else:
        gx = gx + gy
    return gx


def strf_conv_forward(x, bank: KernelBank, stride=(1, 1), padding=None):
    """First-layer convolution with assembled STRF kernels.

    Runs the ordinary conv2d on the dense kernels, so outputs are
    identical to conv2d by construction.
    """
    kern = bank.kernels()
    w = np.transpose(kern, (1, 2, 0))[:, :, None, :]
    if padding is None:
        padding = same_valid_padding(*bank.shape)
    y, cache = conv2d_forward(x, w, stride, padding)
    return y, (cache, bank)


def strf_conv_backward(gy, cache):
    """Maps the output gradient to (grad_input, per-kernel 4-scalar grads)."""
    conv_cache, bank = cache
    gx, gw = conv2d_backward(gy, conv_cache)
    jac = bank.jacobians()  # (n, 4, T, F)
    gscalars = np.einsum("tfn,nptf->np", gw[:, :, 0, :], jac)
    return gx, gscalars


class STRFNetModel:
    """Stateless compute graph; parameters and BN buffers travel as dicts."""

    def __init__(self, config: ModelConfig):
        self.config = config
        self.fir = design_hilbert_fir()
        # (scalar bytes, kernel tensor, bank): skips reassembly when the
        # STRF scalars did not change between calls
        self._kernel_memo: tuple | None = None

    # -- parameter construction -------------------------------------------

    def _strf_params(self, row, index: int) -> StrfParams:
        cfg = self.config
        return StrfParams(
            spectral_mod=float(row[0]), temporal_mod=float(row[1]),
            spectral_phase=float(row[2]), temporal_phase=float(row[3]),
            direction=UPWARD if index % 2 == 0 else DOWNWARD,
            time_support_s=cfg.strf_time_support_s,
            channel_support=cfg.strf_channel_support,
            frame_rate=cfg.frame_rate_hz,
            channels_per_octave=cfg.channels_per_octave,
        )

    def make_bank(self, scalars: np.ndarray) -> KernelBank:
        params = [self._strf_params(row, i) for i, row in enumerate(scalars)]
        return KernelBank(params=params, fir=self.fir)

    def init_params(self, rng: np.random.Generator) -> tuple[dict, dict]:
        """Fresh (params, buffers); draw order is fixed for reproducibility."""
        cfg = self.config
        params: dict[str, np.ndarray] = {}
        buffers: dict[str, np.ndarray] = {}
        kh, kw = cfg.kernel_time_frames, cfg.strf_channel_support
        if cfg.n_strf_kernels:
            scalars = np.column_stack([
                rng.uniform(0.0, 0.2, cfg.n_strf_kernels),
                rng.uniform(0.0, 10.0, cfg.n_strf_kernels),
                rng.uniform(0.0, 2 * np.pi, cfg.n_strf_kernels),
                rng.uniform(0.0, 2 * np.pi, cfg.n_strf_kernels),
            ])
            params["strf.scalars"] = scalars
        if cfg.n_generic_kernels:
            params["generic.kernels"] = rng.normal(
                0.0, np.sqrt(2.0 / (kh * kw)), size=(kh, kw, 1, cfg.n_generic_kernels))
        k_total = cfg.total_kernels
        params["bn0.gamma"] = np.ones(k_total)
        params["bn0.beta"] = np.zeros(k_total)
        buffers["bn0.mean"] = np.zeros(k_total)
        buffers["bn0.var"] = np.ones(k_total)
        cin = k_total
        for i in range(cfg.n_residual_blocks):
            cout = cfg.residual_channels
            for name, shape in ((f"res{i}.conv1.w", (3, 3, cin, cout)),
                                (f"res{i}.conv2.w", (3, 3, cout, cout)),
                                (f"res{i}.proj.w", (1, 1, cin, cout))):
                fan_in = shape[0] * shape[1] * shape[2]
                params[name] = rng.normal(0.0, np.sqrt(2.0 / fan_in), size=shape)
            for bn in ("bn1", "bn2"):
                params[f"res{i}.{bn}.gamma"] = np.ones(cout)
                params[f"res{i}.{bn}.beta"] = np.zeros(cout)
                buffers[f"res{i}.{bn}.mean"] = np.zeros(cout)
                buffers[f"res{i}.{bn}.var"] = np.ones(cout)
            cin = cout
        flat_dim = self.config.band_axis_sizes()[-1] * cin
        params["fc.w"] = rng.normal(0.0, np.sqrt(2.0 / flat_dim), size=(flat_dim, cfg.fc_dim))
        params["fc.b"] = np.zeros(cfg.fc_dim)
        din = cfg.fc_dim
        for l in range(cfg.gru_layers):
            layer = init_gru_layer(din, cfg.gru_hidden, rng)
            for key in _GRU_KEYS:
                params[f"gru{l}.{key}"] = layer[key]
            din = 2 * cfg.gru_hidden
        params["att.w"] = rng.normal(0.0, np.sqrt(1.0 / din), size=(din, cfg.attention_dim))
        params["att.b"] = np.zeros(cfg.attention_dim)
        params["att.v"] = rng.normal(0.0, np.sqrt(1.0 / cfg.attention_dim),
                                     size=cfg.attention_dim)
        params["mlp.w1"] = rng.normal(0.0, np.sqrt(2.0 / din), size=(din, cfg.mlp_hidden))
        params["mlp.b1"] = np.zeros(cfg.mlp_hidden)
        params["mlp.w2"] = rng.normal(0.0, np.sqrt(1.0 / cfg.mlp_hidden),
                                      size=(cfg.mlp_hidden, cfg.n_outputs))
        params["mlp.b2"] = np.zeros(cfg.n_outputs)
        return params, buffers

    # -- forward / backward -------------------------------------------------

    def _first_layer_kernels(self, params) -> tuple[np.ndarray, KernelBank | None]:
        cfg = self.config
        pieces = []
        bank = None
        if cfg.n_generic_kernels:
            pieces.append(params["generic.kernels"])
        if cfg.n_strf_kernels:
            scalars = params["strf.scalars"]
            key = scalars.tobytes()
            if self._kernel_memo is None or self._kernel_memo[0] != key:
                bank = self.make_bank(scalars)
                w_strf = np.transpose(bank.kernels(), (1, 2, 0))[:, :, None, :]
                self._kernel_memo = (key, w_strf, bank)
            _, w_strf, bank = self._kernel_memo
            pieces.append(w_strf)
        w = pieces[0] if len(pieces) == 1 else np.concatenate(pieces, axis=3)
        return w, bank

    def forward(self, params: dict, buffers: dict, x: np.ndarray, train: bool = False):
        """x: (batch, frames, bands) -> (logits, caches, updated buffers)."""
        cfg = self.config
        if x.ndim != 3 or x.shape[2] != cfg.n_input_bands:
            raise ValueError(f"expected (batch, frames, {cfg.n_input_bands}) input, "
                             f"got {x.shape}")
        caches: dict = {}
        new_buffers = dict(buffers)
        w_first, bank = self._first_layer_kernels(params)
        caches["bank"] = bank
        h = x[:, :, :, None]
        kh, kw = w_first.shape[:2]
        h, caches["conv0"] = conv2d_forward(h, w_first, stride=(1, 1),
                                            padding=same_valid_padding(kh, kw))
        h, caches["bn0"], new_buffers["bn0.mean"], new_buffers["bn0.var"] = \
            batchnorm_forward(h, params["bn0.gamma"], params["bn0.beta"],
                              buffers["bn0.mean"], buffers["bn0.var"], train)
        h, caches["relu0"] = relu_forward(h)
        for i in range(cfg.n_residual_blocks):
            h, caches[f"res{i}"] = residual_block_forward(
                h, params, buffers, new_buffers, f"res{i}", train)
        caches["block_shape"] = h.shape
        b, t = h.shape[0], h.shape[1]
        h = h.reshape(b, t, -1)
        h, caches["fc"] = dense_forward(h, params["fc.w"], params["fc.b"])
        h, caches["fc_relu"] = relu_forward(h)
        layer_params = [{k: params[f"gru{l}.{k}"] for k in _GRU_KEYS}
                        for l in range(cfg.gru_layers)]
        h, caches["gru"] = bigru_forward(h, layer_params)
        h, caches["att"] = attention_pool_forward(h, params["att.w"], params["att.b"],
                                                  params["att.v"])
        h, caches["mlp1"] = dense_forward(h, params["mlp.w1"], params["mlp.b1"])
        h, caches["mlp_relu"] = relu_forward(h)
        logits, caches["mlp2"] = dense_forward(h, params["mlp.w2"], params["mlp.b2"])
        return logits, caches, new_buffers

    def predict_proba(self, params: dict, buffers: dict, x: np.ndarray) -> np.ndarray:
        logits, _, _ = self.forward(params, buffers, x, train=False)
        return softmax(logits)

    def loss_and_grads(self, params: dict, buffers: dict, x: np.ndarray,
                       labels: np.ndarray, train: bool = True):
        """Mean cross-entropy plus gradients for every trainable array.

        Returns (loss, probs, grads, updated buffers).
        """
        cfg = self.config
        logits, caches, new_buffers = self.forward(params, buffers, x, train=train)
        loss, probs, ce_cache = cross_entropy_forward(logits, np.asarray(labels))
        grads: dict[str, np.ndarray] = {}
        g = cross_entropy_backward(ce_cache)
        g, grads["mlp.w2"], grads["mlp.b2"] = dense_backward(g, caches["mlp2"])
        g = relu_backward(g, caches["mlp_relu"])
        g, grads["mlp.w1"], grads["mlp.b1"] = dense_backward(g, caches["mlp1"])
        g, grads["att.w"], grads["att.b"], grads["att.v"] = \
            attention_pool_backward(g, caches["att"])
        g, gru_grads = bigru_backward(g, caches["gru"])
        for l, layer in enumerate(gru_grads):
            for key in _GRU_KEYS:
                grads[f"gru{l}.{key}"] = layer[key]
        g = relu_backward(g, caches["fc_relu"])
        g, grads["fc.w"], grads["fc.b"] = dense_backward(g, caches["fc"])
        g = g.reshape(caches["block_shape"])
        for i in range(cfg.n_residual_blocks - 1, -1, -1):
            g = residual_block_backward(g, caches[f"res{i}"], grads, f"res{i}")
        g = relu_backward(g, caches["relu0"])
        g, grads["bn0.gamma"], grads["bn0.beta"] = batchnorm_backward(g, caches["bn0"])
        _, gw_first = conv2d_backward(g, caches["conv0"])
        if cfg.n_generic_kernels:
            grads["generic.kernels"] = gw_first[:, :, :, : cfg.n_generic_kernels]
        if cfg.n_strf_kernels:
            gw_strf = gw_first[:, :, 0, cfg.n_generic_kernels :]
            jac = caches["bank"].jacobians()
            grads["strf.scalars"] = np.einsum("tfn,nptf->np", gw_strf, jac)
        return loss, probs, grads, new_buffers
