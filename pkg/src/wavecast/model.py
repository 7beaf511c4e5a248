"""Frequency-aware forecaster with exogenous-to-endogenous cross-attention.

Pipeline for one window (leading batch axes broadcast through every step):

    x [L, F], z [L, C]
      -> value embedding + sinusoidal positions          [L, D]
      -> n_layers x (dual-basis frequency map, temporal attention)
      -> variate tokens: endogenous [F, D], exogenous [C, D]
      -> cross-attention (endogenous queries, exogenous keys/values)
      -> shared linear head per endogenous token        [F, H]
"""

from __future__ import annotations

from dataclasses import asdict, dataclass, field, fields, replace
from typing import Iterable, Mapping, Optional, Union

import numpy as np

from . import autodiff as ad
from .autodiff import Tensor
from .errors import ConfigurationError

ENDO_NAMES = tuple(f"wg{i}" for i in range(1, 10))
EXO_NAMES = ("surge", "heave", "pitch")


@dataclass(frozen=True)
class ModelConfig:
    L: int = 48
    H: int = 48
    F: int = 9
    C: int = 3
    D: int = 32
    n_heads: int = 4
    d_head: int = 8
    n_layers: int = 2
    dropout_rate: float = 0.1
    enable_dbfm: bool = True
    enable_ta: bool = True
    enable_e2eca: bool = True
    target_indices: tuple = (5, 6, 7, 8)
    seed: int = 0
    scaled_attention: bool = False
    ln_eps: float = 1e-5

    def __post_init__(self):
        object.__setattr__(self, "target_indices", tuple(int(i) for i in self.target_indices))
        if self.n_heads * self.d_head != self.D:
            raise ConfigurationError(f"n_heads*d_head = {self.n_heads * self.d_head} != D = {self.D}")
        if self.L < 2 or self.L % 2:
            raise ConfigurationError(f"look-back L must be even and >= 2, got {self.L}")
        if self.D % 2:
            raise ConfigurationError(f"embedding width D must be even, got {self.D}")
        if self.H < 1 or self.F < 1 or self.n_layers < 1:
            raise ConfigurationError("H, F and n_layers must be positive")
        if self.C < 1:
            raise ConfigurationError("at least one exogenous variate is required")
        if not 0.0 <= self.dropout_rate < 1.0:
            raise ConfigurationError(f"dropout_rate must lie in [0, 1), got {self.dropout_rate}")
        if not self.target_indices:
            raise ConfigurationError("target_indices must be nonempty")
        if any(not 0 <= i < self.F for i in self.target_indices):
            raise ConfigurationError(f"target_indices {self.target_indices} out of range for F={self.F}")
        if not self.enable_e2eca:
            raise ConfigurationError("the cross-attention stage cannot be disabled")

    @property
    def temporal_branch(self) -> bool:
        return self.enable_dbfm or self.enable_ta

    def to_dict(self) -> dict:
        d = asdict(self)
        d["target_indices"] = list(self.target_indices)
        return d

    @classmethod
    def from_dict(cls, d: Mapping) -> "ModelConfig":
        known = {f.name for f in fields(cls)}
        extra = set(d) - known
        if extra:
            raise ConfigurationError(f"unknown model config keys: {sorted(extra)}")
        return cls(**dict(d))

    def with_ablation(self, name: str) -> "ModelConfig":
        return replace(self, **ABLATIONS[name])


# Table-3 style toggles; cross-attention is always on.
ABLATIONS = {
    "e2eca": dict(enable_dbfm=False, enable_ta=False),
    "ta-e2eca": dict(enable_dbfm=False, enable_ta=True),
    "dbfm-e2eca": dict(enable_dbfm=True, enable_ta=False),
    "full": dict(enable_dbfm=True, enable_ta=True),
}


@dataclass(frozen=True)
class DbfmBases:
    """Real inverse-DFT weights for the half spectrum, each ``(L/2+1, L)``."""

    w_cos: np.ndarray
    w_sin: np.ndarray

    @classmethod
    def build(cls, L: int) -> "DbfmBases":
        if L < 2 or L % 2:
            raise ConfigurationError(f"basis length must be even, got {L}")
        k = np.arange(L // 2 + 1)[:, None]
        n = np.arange(L)[None, :]
        ang = 2.0 * np.pi * ((k * n) % L) / L
        a = np.full((L // 2 + 1, 1), 2.0)
        a[0] = a[-1] = 1.0
        b = np.full((L // 2 + 1, 1), 2.0)
        b[0] = b[-1] = 0.0
        w_cos = a / L * np.cos(ang)
        w_sin = -b / L * np.sin(ang)
        w_cos.setflags(write=False)
        w_sin.setflags(write=False)
        return cls(w_cos, w_sin)

    @property
    def L(self) -> int:
        return self.w_cos.shape[1]


_BASES_CACHE: dict[int, DbfmBases] = {}


def bases_for(L: int) -> DbfmBases:
    if L not in _BASES_CACHE:
        _BASES_CACHE[L] = DbfmBases.build(L)
    return _BASES_CACHE[L]


# --- parameters -----------------------------------------------------------


def param_shapes(cfg: ModelConfig) -> dict[str, tuple]:
    """Every learnable array, in a fixed order (init and checkpoints rely on it)."""
    D, dh = cfg.D, cfg.d_head
    shapes: dict[str, tuple] = {"embed": (cfg.F, D)}
    for layer in range(cfg.n_layers):
        shapes[f"dbfm{layer}.proj"] = (2 * D, D)
        shapes[f"dbfm{layer}.ln_gain"] = (D,)
        shapes[f"dbfm{layer}.ln_bias"] = (D,)
        for h in range(cfg.n_heads):
            for w in ("wq", "wk", "wv"):
                shapes[f"ta{layer}.{w}.{h}"] = (D, dh)
        shapes[f"ta{layer}.wo"] = (D, D)
        shapes[f"ta{layer}.ln_gain"] = (D,)
        shapes[f"ta{layer}.ln_bias"] = (D,)
    shapes["bridge"] = (D, cfg.F)
    shapes["en_variate_embed"] = (cfg.L, D)
    shapes["ex_variate_embed"] = (cfg.L, D)
    for h in range(cfg.n_heads):
        for w in ("wq", "wk", "wv"):
            shapes[f"ca.{w}.{h}"] = (D, dh)
    shapes["ca.wo"] = (D, D)
    shapes["ca.ln_gain"] = (D,)
    shapes["ca.ln_bias"] = (D,)
    shapes["head"] = (D, cfg.H)
    shapes["head_bias"] = (cfg.H,)
    return shapes


TEMPORAL_PREFIXES = ("embed", "dbfm", "ta", "bridge")
HEAD_NAMES = ("head", "head_bias")


@dataclass
class ModelParams:
    """Named float64 arrays; ordering follows :func:`param_shapes`."""

    arrays: dict[str, np.ndarray] = field(default_factory=dict)

    def __getitem__(self, name: str) -> np.ndarray:
        return self.arrays[name]

    def __setitem__(self, name: str, value: np.ndarray) -> None:
        self.arrays[name] = value

    def __iter__(self):
        return iter(self.arrays)

    def __len__(self) -> int:
        return len(self.arrays)

    def items(self):
        return self.arrays.items()

    def names(self) -> list[str]:
        return list(self.arrays)

    def copy(self) -> "ModelParams":
        return ModelParams({k: v.copy() for k, v in self.arrays.items()})

    def n_values(self) -> int:
        return int(sum(v.size for v in self.arrays.values()))

    def leaves(self, trainable: Optional[Iterable[str]] = None) -> dict[str, Tensor]:
        """Wrap arrays as tensors; only ``trainable`` names (default all) require grad."""
        keep = set(self.arrays) if trainable is None else set(trainable)
        return {k: Tensor(v, requires_grad=k in keep) for k, v in self.arrays.items()}

    def check(self, cfg: ModelConfig) -> None:
        expected = param_shapes(cfg)
        if list(expected) != list(self.arrays):
            missing = sorted(set(expected) - set(self.arrays))
            extra = sorted(set(self.arrays) - set(expected))
            raise ConfigurationError(f"parameter names differ from config (missing {missing}, extra {extra})")
        for k, shape in expected.items():
            if self.arrays[k].shape != shape:
                raise ConfigurationError(f"{k}: shape {self.arrays[k].shape}, config wants {shape}")


def init_params(cfg: ModelConfig) -> ModelParams:
    """Glorot-uniform matrices, zero biases, unit layer-norm gains."""
    rng = np.random.default_rng(cfg.seed)
    out = {}
    for name, shape in param_shapes(cfg).items():
        if name.endswith("ln_gain"):
            out[name] = np.ones(shape)
        elif name.endswith("ln_bias") or name == "head_bias":
            out[name] = np.zeros(shape)
        else:
            bound = np.sqrt(6.0 / (shape[0] + shape[1]))
            out[name] = rng.uniform(-bound, bound, size=shape)
    return ModelParams(out)


def init_bound(shape: tuple) -> float:
    return float(np.sqrt(6.0 / (shape[0] + shape[1])))


# --- building blocks ------------------------------------------------------

ParamSource = Union[ModelParams, Mapping[str, Tensor]]


def _tensors(p: ParamSource) -> Mapping[str, Tensor]:
    if isinstance(p, ModelParams):
        return {k: Tensor(v) for k, v in p.items()}
    return p


def _check_last(t: Tensor, shape: tuple, what: str) -> None:
    if tuple(t.shape[-len(shape):]) != tuple(shape):
        raise ad.DimensionError(f"{what}: expected trailing shape {shape}, got {t.shape}")


def position_encoding(L: int, D: int) -> np.ndarray:
    if D % 2:
        raise ConfigurationError(f"position encoding needs even width, got {D}")
    t = np.arange(L)[:, None]
    i = np.arange(D // 2)[None, :]
    ang = t / np.power(10000.0, 2.0 * i / D)
    pe = np.empty((L, D))
    pe[:, 0::2] = np.sin(ang)
    pe[:, 1::2] = np.cos(ang)
    return pe


def value_embedding(x, p: ParamSource) -> Tensor:
    emb = _tensors(p)["embed"]
    x = ad._wrap(x)
    if x.shape[-1] != emb.shape[0]:
        raise ad.DimensionError(f"value embedding: input width {x.shape[-1]} != {emb.shape[0]}")
    return ad.matmul(x, emb)


def dbfm_features(e: Tensor, bases: DbfmBases) -> tuple[Tensor, Tensor]:
    """Cosine- and sine-basis reconstructions (F_R, F_I) of each channel."""
    if e.shape[-2] != bases.L:
        raise ad.DimensionError(f"dbfm: series length {e.shape[-2]} != basis length {bases.L}")
    re, im = ad.rdft(e)
    f_r = ad.matmul(Tensor(bases.w_cos.T), re)
    f_i = ad.matmul(Tensor(bases.w_sin.T), im)
    return f_r, f_i


def dbfm_forward(e, bases: DbfmBases, p: ParamSource, layer: int, eps: float = 1e-5) -> Tensor:
    t = _tensors(p)
    e = ad._wrap(e)
    f_r, f_i = dbfm_features(e, bases)
    g = ad.concat([f_r, f_i], axis=-1)
    mixed = ad.matmul(g, t[f"dbfm{layer}.proj"])
    return ad.layer_norm(ad.add(e, mixed), t[f"dbfm{layer}.ln_gain"], t[f"dbfm{layer}.ln_bias"], eps)


def dropout(x: Tensor, rate: float, rng: Optional[np.random.Generator]) -> Tensor:
    """Inverted dropout; identity when ``rate`` is 0 or no generator is given."""
    if rate <= 0.0 or rng is None:
        return x
    keep = rng.random(x.shape) >= rate
    return ad.mask_multiply(x, keep / (1.0 - rate))


def _split_heads(t: Tensor, n_heads: int) -> Tensor:
    """``[..., n, h*d] -> [..., h, n, d]``."""
    lead = t.shape[:-2]
    n, width = t.shape[-2:]
    t = ad.reshape(t, lead + (n, n_heads, width // n_heads))
    k = len(lead)
    return ad.permute(t, tuple(range(k)) + (k + 1, k, k + 2))


def _merge_heads(t: Tensor) -> Tensor:
    """``[..., h, n, d] -> [..., n, h*d]`` (head-major concatenation)."""
    lead = t.shape[:-3]
    h, n, d = t.shape[-3:]
    k = len(lead)
    t = ad.permute(t, tuple(range(k)) + (k + 1, k, k + 2))
    return ad.reshape(t, lead + (n, h * d))


def _multi_head(q_src, kv_src, t, prefix, n_heads, scaled):
    """softmax(QK^T)V for every head at once.

    The per-head projection matrices are concatenated column-wise, so head h
    owns columns ``h*d:(h+1)*d`` of the fused projection.  Returns the
    concatenated head outputs and the weights ``[..., h, n_q, n_kv]``.
    """
    fused = {
        w: ad.concat([t[f"{prefix}.{w}.{h}"] for h in range(n_heads)], axis=-1)
        for w in ("wq", "wk", "wv")
    }
    q = _split_heads(ad.matmul(q_src, fused["wq"]), n_heads)
    k = _split_heads(ad.matmul(kv_src, fused["wk"]), n_heads)
    v = _split_heads(ad.matmul(kv_src, fused["wv"]), n_heads)
    scores = ad.matmul(q, ad.transpose(k))
    if scaled:
        scores = ad.mul(scores, 1.0 / np.sqrt(q.shape[-1]))
    a = ad.softmax_rows(scores)
    return _merge_heads(ad.matmul(a, v)), a.data


def temporal_attention(
    e,
    p: ParamSource,
    layer: int,
    train: bool = False,
    *,
    n_heads: int,
    rate: float = 0.0,
    rng: Optional[np.random.Generator] = None,
    scaled: bool = False,
    eps: float = 1e-5,
    trace: Optional[dict] = None,
) -> Tensor:
    t = _tensors(p)
    e = ad._wrap(e)
    pre = f"ta{layer}"
    cat, weights = _multi_head(e, e, t, pre, n_heads, scaled)
    out = ad.matmul(cat, t[f"{pre}.wo"])
    if train:
        out = dropout(out, rate, rng)
    if trace is not None:
        trace.setdefault("temporal", []).append(weights)
    return ad.layer_norm(ad.add(e, out), t[f"{pre}.ln_gain"], t[f"{pre}.ln_bias"], eps)


def variate_tokens(x, z, e_out: Optional[Tensor], p: ParamSource, cfg: ModelConfig) -> tuple[Tensor, Tensor]:
    t = _tensors(p)
    x, z = ad._wrap(x), ad._wrap(z)
    _check_last(x, (cfg.L, cfg.F), "endogenous input")
    _check_last(z, (cfg.L, cfg.C), "exogenous input")
    src = x
    if e_out is not None:
        src = ad.add(x, ad.matmul(e_out, t["bridge"]))
    v_en = ad.matmul(ad.transpose(src), t["en_variate_embed"])
    v_ex = ad.matmul(ad.transpose(z), t["ex_variate_embed"])
    return v_en, v_ex


def cross_attention(
    v_en,
    v_ex,
    p: ParamSource,
    *,
    n_heads: int,
    scaled: bool = False,
    eps: float = 1e-5,
    trace: Optional[dict] = None,
) -> Tensor:
    t = _tensors(p)
    v_en, v_ex = ad._wrap(v_en), ad._wrap(v_ex)
    if v_ex.shape[-2] == 0:
        raise ConfigurationError("cross-attention needs at least one exogenous token")
    cat, weights = _multi_head(v_en, v_ex, t, "ca", n_heads, scaled)
    attended = ad.matmul(cat, t["ca.wo"])
    if trace is not None:
        trace["cross_heads"] = weights
        trace["cross"] = weights.mean(axis=-3)
    return ad.layer_norm(ad.add(v_en, attended), t["ca.ln_gain"], t["ca.ln_bias"], eps)


def forward(
    x,
    z,
    p: ParamSource,
    cfg: ModelConfig,
    train: bool = False,
    rng: Optional[np.random.Generator] = None,
    trace: Optional[dict] = None,
) -> Tensor:
    """Predict ``[..., F, H]`` from ``x [..., L, F]`` and ``z [..., L, C]``.

    With ``train`` set, dropout masks come from ``rng`` (seeded from
    ``cfg.seed`` when omitted).  Pass a dict as ``trace`` to collect the
    attention matrices.
    """
    t = _tensors(p)
    x, z = ad._wrap(x), ad._wrap(z)
    if train and rng is None:
        rng = np.random.default_rng(cfg.seed)
    rate = cfg.dropout_rate
    try:
        _check_last(x, (cfg.L, cfg.F), "endogenous input")
        _check_last(z, (cfg.L, cfg.C), "exogenous input")
    except ad.DimensionError as exc:
        raise ad.DimensionError(f"forward/input: {exc}") from exc

    e = None
    if cfg.temporal_branch:
        try:
            e = ad.add(value_embedding(x, t), Tensor(position_encoding(cfg.L, cfg.D)))
            bases = bases_for(cfg.L)
            for layer in range(cfg.n_layers):
                if cfg.enable_dbfm:
                    e = dbfm_forward(e, bases, t, layer, cfg.ln_eps)
                if cfg.enable_ta:
                    e = temporal_attention(
                        e, t, layer, train,
                        n_heads=cfg.n_heads, rate=rate, rng=rng,
                        scaled=cfg.scaled_attention, eps=cfg.ln_eps, trace=trace,
                    )
        except (ad.DimensionError, ConfigurationError) as exc:
            raise type(exc)(f"forward/temporal branch: {exc}") from exc

    v_en, v_ex = variate_tokens(x, z, e, t, cfg)
    try:
        u = cross_attention(
            v_en, v_ex, t, n_heads=cfg.n_heads, scaled=cfg.scaled_attention, eps=cfg.ln_eps, trace=trace
        )
    except (ad.DimensionError, ConfigurationError) as exc:
        raise type(exc)(f"forward/cross-attention: {exc}") from exc
    if train:
        u = dropout(u, rate, rng)
    return ad.add(ad.matmul(u, t["head"]), t["head_bias"])


def mse_loss(yhat, y, targets) -> Tensor:
    """Mean squared error over the target rows (axis -2) and every horizon step."""
    targets = list(targets)
    if not targets:
        raise ConfigurationError("mse_loss needs at least one target row")
    yhat = ad._wrap(yhat)
    y = np.asarray(y.data if isinstance(y, Tensor) else y, dtype=np.float64)
    sel = ad.take(yhat, targets, axis=-2)
    return ad.mean(ad.square(ad.sub(sel, np.take(y, targets, axis=-2))))
