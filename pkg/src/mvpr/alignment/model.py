"""Embedding models: small conv/dense nets ending in L2 normalization.

A model is an architecture descriptor plus one flat float64 parameter
vector. The descriptor is plain JSON so it can live inside checkpoints:

    {"input_shape": [3, 32, 32],
     "layers": [{"op": "conv3x3", "out": 8}, {"op": "relu"},
                {"op": "avgpool2"}, {"op": "flatten"},
                {"op": "dense", "out": 64}, {"op": "l2norm"}]}
"""

from __future__ import annotations

import json
import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from ..errors import ContractViolation, FormatError, InputError, UnsupportedVersion
from .tape import Tensor, avgpool2, conv3x3, l2norm_rows

CHECKPOINT_MAGIC = b"MVPRMODL"
CHECKPOINT_VERSION = 1

_PARAM_OPS = {"conv3x3", "dense"}
_ALL_OPS = {"conv3x3", "relu", "avgpool2", "flatten", "dense", "l2norm"}


@dataclass(frozen=True)
class LayerSpec:
    op: str
    out: int | None = None  # channels for conv3x3, width for dense

    def to_json(self) -> dict:
        return {"op": self.op} if self.out is None else {"op": self.op, "out": self.out}


@dataclass(frozen=True)
class Architecture:
    input_shape: tuple[int, int, int]  # (C, H, W)
    layers: tuple[LayerSpec, ...]

    def __post_init__(self):
        if not self.layers or self.layers[-1].op != "l2norm":
            raise InputError("architecture must end with an l2norm layer")
        for spec in self.layers:
            if spec.op not in _ALL_OPS:
                raise InputError(f"unknown layer op {spec.op!r}")
            if (spec.op in _PARAM_OPS) != (spec.out is not None):
                raise InputError(f"layer {spec.op!r} out-size mismatch")
        self.plan()  # validates shape propagation

    def plan(self):
        """Per-layer (spec, in_shape, param_slices) with shapes resolved."""
        shape: tuple = self.input_shape
        offset = 0
        plan = []
        for spec in self.layers:
            entry = {"spec": spec, "in_shape": shape}
            if spec.op == "conv3x3":
                if len(shape) != 3:
                    raise InputError("conv3x3 needs a (C, H, W) input")
                c, h, w = shape
                n_w, n_b = spec.out * c * 9, spec.out
                entry["w"] = (offset, offset + n_w, (spec.out, c, 3, 3))
                entry["b"] = (offset + n_w, offset + n_w + n_b, (spec.out,))
                offset += n_w + n_b
                shape = (spec.out, h, w)
            elif spec.op == "avgpool2":
                if len(shape) != 3 or shape[1] % 2 or shape[2] % 2:
                    raise InputError(f"avgpool2 cannot halve shape {shape}")
                shape = (shape[0], shape[1] // 2, shape[2] // 2)
            elif spec.op == "flatten":
                shape = (int(np.prod(shape)),)
            elif spec.op == "dense":
                if len(shape) != 1:
                    raise InputError("dense needs a flat input (add a flatten layer)")
                n_w, n_b = spec.out * shape[0], spec.out
                entry["w"] = (offset, offset + n_w, (spec.out, shape[0]))
                entry["b"] = (offset + n_w, offset + n_w + n_b, (spec.out,))
                offset += n_w + n_b
                shape = (spec.out,)
            elif spec.op == "l2norm":
                if len(shape) != 1:
                    raise InputError("l2norm needs a flat input")
            # relu keeps shape
            plan.append(entry)
        if len(shape) != 1:
            raise InputError("architecture must produce a flat descriptor")
        return plan, offset, shape[0]

    @property
    def param_count(self) -> int:
        return self.plan()[1]

    @property
    def output_dim(self) -> int:
        return self.plan()[2]

    def to_json(self) -> str:
        return json.dumps(
            {
                "input_shape": list(self.input_shape),
                "layers": [s.to_json() for s in self.layers],
            },
            sort_keys=True,
        )

    @classmethod
    def from_json(cls, text: str) -> "Architecture":
        try:
            raw = json.loads(text)
            layers = tuple(LayerSpec(op=l["op"], out=l.get("out")) for l in raw["layers"])
            return cls(input_shape=tuple(raw["input_shape"]), layers=layers)
        except (KeyError, TypeError, json.JSONDecodeError) as exc:
            raise FormatError(f"bad architecture descriptor: {exc}") from exc


def conv_embedding_architecture(
    input_shape=(3, 32, 32), embed_dim=64, channels=(8, 16, 32)
) -> Architecture:
    """Default desk-scale net: conv blocks with 2x pooling, dense head."""
    layers: list[LayerSpec] = []
    for ch in channels:
        layers += [LayerSpec("conv3x3", ch), LayerSpec("relu"), LayerSpec("avgpool2")]
    layers += [LayerSpec("flatten"), LayerSpec("dense", embed_dim), LayerSpec("l2norm")]
    return Architecture(input_shape=tuple(input_shape), layers=tuple(layers))


def linear_embedding_architecture(input_shape=(3, 32, 32), embed_dim=64) -> Architecture:
    return Architecture(
        input_shape=tuple(input_shape),
        layers=(LayerSpec("flatten"), LayerSpec("dense", embed_dim), LayerSpec("l2norm")),
    )


def identity_architecture(input_shape=(3, 32, 32)) -> Architecture:
    """Zero-parameter model: flatten then normalize."""
    return Architecture(
        input_shape=tuple(input_shape), layers=(LayerSpec("flatten"), LayerSpec("l2norm"))
    )


class EmbeddingModel:
    """Architecture plus flat parameter vector; forward is pure."""

    def __init__(self, architecture: Architecture, params: np.ndarray):
        self.architecture = architecture
        self.params = np.ascontiguousarray(params, dtype=np.float64).reshape(-1)
        if len(self.params) != architecture.param_count:
            raise InputError(
                f"parameter count {len(self.params)} != architecture "
                f"{architecture.param_count}"
            )

    @classmethod
    def initialized(cls, architecture: Architecture, seed: int = 0) -> "EmbeddingModel":
        """He-style init for conv/dense weights, zero biases, seeded."""
        rng = np.random.default_rng(seed)
        plan, count, _ = architecture.plan()
        params = np.zeros(count)
        for entry in plan:
            if "w" not in entry:
                continue
            lo, hi, shape = entry["w"]
            fan_in = int(np.prod(shape[1:]))
            params[lo:hi] = rng.normal(0.0, np.sqrt(2.0 / fan_in), size=hi - lo)
        return cls(architecture, params)

    @property
    def output_dim(self) -> int:
        return self.architecture.output_dim

    def copy(self) -> "EmbeddingModel":
        return EmbeddingModel(self.architecture, self.params.copy())

    def forward_tensor(self, batch: np.ndarray, params: Tensor) -> Tensor:
        """Differentiable forward; batch (B, C, H, W) or (B, D) for flat nets."""
        batch = np.asarray(batch, dtype=np.float64)
        expected = self.architecture.input_shape
        if batch.shape[1:] != expected:
            raise ContractViolation(
                f"batch shape {batch.shape[1:]} != model input {expected}"
            )
        plan, _, _ = self.architecture.plan()
        x = Tensor(batch)
        for entry in plan:
            op = entry["spec"].op
            if op == "conv3x3":
                lo, hi, wshape = entry["w"]
                blo, bhi, _ = entry["b"]
                x = conv3x3(x, params.slice1d(lo, hi).reshape(*wshape),
                            params.slice1d(blo, bhi))
            elif op == "relu":
                x = x.relu()
            elif op == "avgpool2":
                x = avgpool2(x)
            elif op == "flatten":
                x = x.reshape(x.shape[0], -1)
            elif op == "dense":
                lo, hi, wshape = entry["w"]
                blo, bhi, _ = entry["b"]
                x = x @ params.slice1d(lo, hi).reshape(*wshape).T
                x = x + params.slice1d(blo, bhi)
            elif op == "l2norm":
                x = l2norm_rows(x)
        return x


def forward(model: EmbeddingModel, batch: np.ndarray) -> np.ndarray:
    """Descriptor matrix (B, output_dim) with unit-norm rows."""
    return model.forward_tensor(batch, Tensor(model.params)).data


def save_checkpoint(model: EmbeddingModel, path) -> None:
    desc = model.architecture.to_json().encode("utf-8")
    with open(path, "wb") as fh:
        fh.write(CHECKPOINT_MAGIC)
        fh.write(struct.pack("<I", CHECKPOINT_VERSION))
        fh.write(struct.pack("<I", len(desc)))
        fh.write(desc)
        fh.write(struct.pack("<Q", len(model.params)))
        fh.write(model.params.astype("<f8").tobytes())


def load_checkpoint(path) -> EmbeddingModel:
    try:
        blob = Path(path).read_bytes()
    except OSError as exc:
        raise FormatError(f"cannot read checkpoint {path}: {exc}") from exc
    try:
        if blob[:8] != CHECKPOINT_MAGIC:
            raise FormatError(f"{path}: not a model checkpoint")
        (version,) = struct.unpack_from("<I", blob, 8)
        if version != CHECKPOINT_VERSION:
            raise UnsupportedVersion(f"{path}: checkpoint version {version} unsupported")
        (desc_len,) = struct.unpack_from("<I", blob, 12)
        desc = blob[16 : 16 + desc_len].decode("utf-8")
        (count,) = struct.unpack_from("<Q", blob, 16 + desc_len)
        start = 16 + desc_len + 8
        params = np.frombuffer(blob[start : start + 8 * count], dtype="<f8")
        if len(params) != count:
            raise FormatError(f"{path}: truncated parameter block")
    except (struct.error, IndexError, UnicodeDecodeError) as exc:
        raise FormatError(f"{path}: corrupt checkpoint: {exc}") from exc
    return EmbeddingModel(Architecture.from_json(desc), params.copy())
