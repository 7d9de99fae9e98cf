"""The four emulator architectures and their parameter sets.

Every model maps a window stack [B, H, W, C] to a next-step window
[B, W, 2] (real and imaginary part).

    linear  last time step, flattened W*C -> 2W, no hidden layer
    dense   time-distributed dense(K, relu) -> flatten -> dense(K, relu) -> 2W
    conv    kernel over the H time steps at each spatial point, F = K // 4
            filters, relu -> flatten -> dense(K, relu) -> 2W
    gru     time-distributed dense(K, relu) -> GRU(K, relu candidate),
            final hidden state -> 2W
"""
from __future__ import annotations

from dataclasses import asdict, dataclass

import numpy as np

from . import autodiff as ad
from .autodiff import Tensor

KINDS = ("linear", "dense", "conv", "gru")


@dataclass(frozen=True)
class ModelSpec:
    kind: str = "gru"
    K: int = 69
    W: int = 23
    H: int = 4
    C: int = 3
    reset_after: bool = False

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown model kind {self.kind!r}; expected one of {KINDS}")
        if self.W < 1 or self.H < 1 or self.C not in (2, 3):
            raise ValueError(f"invalid window shape W={self.W}, H={self.H}, C={self.C}")
        if self.kind != "linear" and self.K < 1:
            raise ValueError(f"hidden size K must be >= 1, got {self.K}")
        if self.kind == "conv" and self.K // 4 < 1:
            raise ValueError(f"conv model needs K >= 4 (F = K // 4), got K={self.K}")

    @property
    def F(self) -> int:
        return self.K // 4

    @property
    def out_size(self) -> int:
        return 2 * self.W

    @property
    def input_shape(self) -> tuple[int, int, int]:
        return (self.H, self.W, self.C)

    def to_dict(self) -> dict:
        return asdict(self)


def parameter_shapes(spec: ModelSpec) -> dict[str, tuple]:
    """Ordered parameter names and shapes (the checkpoint order)."""
    wc, k, out = spec.W * spec.C, spec.K, spec.out_size
    if spec.kind == "linear":
        return {"out.W": (wc, out), "out.b": (out,)}
    if spec.kind == "dense":
        return {"td.W": (wc, k), "td.b": (k,), "hidden.W": (spec.H * k, k), "hidden.b": (k,),
                "out.W": (k, out), "out.b": (out,)}
    if spec.kind == "conv":
        f = spec.F
        return {"conv.W": (spec.H * spec.C, f), "conv.b": (f,), "hidden.W": (spec.W * f, k),
                "hidden.b": (k,), "out.W": (k, out), "out.b": (out,)}
    shapes = {"td.W": (wc, k), "td.b": (k,), "gru.W": (k, 3 * k), "gru.U": (k, 3 * k),
              "gru.b": (3 * k,)}
    if spec.reset_after:
        shapes["gru.b_rec"] = (3 * k,)
    shapes.update({"out.W": (k, out), "out.b": (out,)})
    return shapes


def param_count(spec: ModelSpec) -> int:
    return int(sum(np.prod(s) for s in parameter_shapes(spec).values()))


def build_model(spec: ModelSpec, seed: int = 0) -> dict[str, np.ndarray]:
    """Uniform fan-in initialisation, limit sqrt(3 / fan_in); zero biases."""
    rng = np.random.default_rng(seed)
    params = {}
    for name, shape in parameter_shapes(spec).items():
        if len(shape) == 1:
            params[name] = np.zeros(shape, dtype=np.float32)
        else:
            lim = np.sqrt(3.0 / shape[0])
            params[name] = rng.uniform(-lim, lim, size=shape).astype(np.float32)
    return params


def forward(spec: ModelSpec, p: dict[str, Tensor], x: Tensor) -> Tensor:
    """Run the model on ``x`` [B, H, W, C]; returns [B, W, 2]."""
    if x.shape[1:] != spec.input_shape:
        raise ValueError(f"input shape {x.shape[1:]} does not match model {spec.input_shape}")
    b, h, w, c = x.shape
    if spec.kind == "linear":
        last = ad.reshape(x[:, h - 1], (b, w * c))
        y = last @ p["out.W"] + p["out.b"]
    elif spec.kind == "dense":
        td = ad.relu(ad.reshape(x, (b * h, w * c)) @ p["td.W"] + p["td.b"])
        hid = ad.relu(ad.reshape(td, (b, h * spec.K)) @ p["hidden.W"] + p["hidden.b"])
        y = hid @ p["out.W"] + p["out.b"]
    elif spec.kind == "conv":
        # [B, H, W, C] -> [B, W, H, C]: one kernel application per spatial point
        cols = ad.reshape(ad.permute(x, (0, 2, 1, 3)), (b * w, h * c))
        feat = ad.relu(cols @ p["conv.W"] + p["conv.b"])
        hid = ad.relu(ad.reshape(feat, (b, w * spec.F)) @ p["hidden.W"] + p["hidden.b"])
        y = hid @ p["out.W"] + p["out.b"]
    else:
        k = spec.K
        td = ad.relu(ad.reshape(x, (b * h, w * c)) @ p["td.W"] + p["td.b"])
        xp = ad.reshape(td @ p["gru.W"] + p["gru.b"], (b, h, 3 * k))
        state = Tensor(np.zeros((b, k), dtype=x.dtype))
        b_rec = p.get("gru.b_rec")
        for t in range(h):
            state = ad.gru_cell(xp[:, t], state, p["gru.U"], b_rec)
        y = state @ p["out.W"] + p["out.b"]
    return ad.reshape(y, (b, w, 2))


def as_tensors(params: dict[str, np.ndarray], requires_grad: bool = False, dtype=None) -> dict[str, Tensor]:
    return {n: Tensor(a, requires_grad=requires_grad, name=n, dtype=dtype) for n, a in params.items()}


class Emulator:
    """A model spec plus frozen parameters, callable on window batches."""

    def __init__(self, spec: ModelSpec, params: dict[str, np.ndarray]):
        shapes = parameter_shapes(spec)
        if list(params) != list(shapes) or any(params[n].shape != s for n, s in shapes.items()):
            raise ValueError(f"parameters do not match the {spec.kind} layout")
        self.spec = spec
        self.params = params
        self._frozen = as_tensors(params)

    @classmethod
    def init(cls, spec: ModelSpec, seed: int = 0) -> "Emulator":
        return cls(spec, build_model(spec, seed))

    @property
    def n_params(self) -> int:
        return param_count(self.spec)

    def predict_windows(self, windows: np.ndarray, centers=None, step=None) -> np.ndarray:
        x = Tensor(np.asarray(windows, dtype=np.float32))
        return forward(self.spec, self._frozen, x).data

    __call__ = predict_windows
