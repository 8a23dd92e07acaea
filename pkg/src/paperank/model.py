"""Latent multi-step refinement model over fixed document embeddings.

The scorer stack: an encoder maps [target embedding ‖ reference context] to an
initial hidden state, a shared gated cell refines that state for a fixed number
of steps, and an affine (optionally two-layer) scorer reads a scalar score off
every intermediate state. The gate bias starts negative so early updates are
gentle refinements of the encoder output rather than replacements.
"""

from __future__ import annotations

import hashlib
import json
import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .autodiff import Tensor, concat, stack

CHECKPOINT_MAGIC = b"PRNK"
CHECKPOINT_VERSION = 1

# Serialization order of the parameter blob; fixed forever for format stability.
PARAM_ORDER = (
    "ctx_w",
    "ctx_b",
    "enc_w",
    "enc_b",
    "gate_w",
    "gate_b",
    "cand_w",
    "cand_b",
    "score_hidden_w",
    "score_hidden_b",
    "score_out_w",
    "score_out_b",
)


class ModelError(ValueError):
    pass


@dataclass
class ModelParams:
    """All trainable weights plus the shape metadata needed to use them."""

    embed_dim: int
    hidden_dim: int
    steps: int  # refinement step count m
    scorer_layers: int  # 1 = affine scorer, 2 = one tanh hidden layer
    seed: int
    weights: dict[str, np.ndarray]

    def validate(self) -> None:
        dp, d = self.embed_dim, self.hidden_dim
        expected = param_shapes(dp, d)
        for name in PARAM_ORDER:
            if name not in self.weights:
                raise ModelError(f"missing parameter {name!r}")
            got = self.weights[name].shape
            if got != expected[name]:
                raise ModelError(f"parameter {name!r} has shape {got}, expected {expected[name]}")
            if not np.all(np.isfinite(self.weights[name])):
                raise ModelError(f"parameter {name!r} contains non-finite values")
        if self.scorer_layers not in (1, 2):
            raise ModelError(f"scorer_layers must be 1 or 2, got {self.scorer_layers}")
        if self.steps < 1:
            raise ModelError("step count must be positive")

    def copy(self) -> "ModelParams":
        return ModelParams(
            embed_dim=self.embed_dim,
            hidden_dim=self.hidden_dim,
            steps=self.steps,
            scorer_layers=self.scorer_layers,
            seed=self.seed,
            weights={k: v.copy() for k, v in self.weights.items()},
        )


@dataclass(frozen=True)
class RefinementTrace:
    """Hidden states h^(0..m) and per-step scores for one paper."""

    hidden: np.ndarray  # (m + 1, d)
    scores: np.ndarray  # (m + 1,)


def param_shapes(embed_dim: int, hidden_dim: int) -> dict[str, tuple[int, ...]]:
    dp, d = embed_dim, hidden_dim
    return {
        "ctx_w": (d, dp),
        "ctx_b": (d,),
        "enc_w": (d, dp + d),
        "enc_b": (d,),
        "gate_w": (d, 2 * d),
        "gate_b": (d,),
        "cand_w": (d, 2 * d),
        "cand_b": (d,),
        "score_hidden_w": (d, d),
        "score_hidden_b": (d,),
        "score_out_w": (d,),
        "score_out_b": (),
    }


def init_params(
    embed_dim: int,
    hidden_dim: int = 64,
    steps: int = 8,
    scorer_layers: int = 1,
    seed: int = 0,
) -> ModelParams:
    """Symmetric uniform init in ±1/sqrt(fan_in); gate bias -1, other biases 0."""
    rng = np.random.default_rng(seed)
    shapes = param_shapes(embed_dim, hidden_dim)
    weights: dict[str, np.ndarray] = {}
    for name, shape in shapes.items():
        if name.endswith("_b"):
            fill = -1.0 if name == "gate_b" else 0.0
            weights[name] = np.full(shape, fill, dtype=np.float64)
        else:
            fan_in = shape[-1]
            bound = 1.0 / np.sqrt(fan_in)
            weights[name] = rng.uniform(-bound, bound, size=shape)
    params = ModelParams(
        embed_dim=embed_dim,
        hidden_dim=hidden_dim,
        steps=steps,
        scorer_layers=scorer_layers,
        seed=seed,
        weights=weights,
    )
    params.validate()
    return params


class ParamTensors:
    """Autodiff leaves for one ModelParams; shared across a training run."""

    def __init__(self, params: ModelParams):
        params.validate()
        self.meta = params
        self.tensors = {name: Tensor(params.weights[name]) for name in PARAM_ORDER}

    def __getitem__(self, name: str) -> Tensor:
        return self.tensors[name]

    def zero_grad(self) -> None:
        for t in self.tensors.values():
            t.zero_grad()

    def sgd_step(self, lr: float, clip: float = 0.0) -> None:
        if clip > 0.0:
            total = np.sqrt(
                sum(float(np.sum(t.grad**2)) for t in self.tensors.values() if t.grad is not None)
            )
            scale = clip / total if total > clip else 1.0
        else:
            scale = 1.0
        for t in self.tensors.values():
            if t.grad is not None:
                t.data -= lr * scale * t.grad

    def to_params(self) -> ModelParams:
        out = self.meta.copy()
        out.weights = {name: self.tensors[name].data.copy() for name in PARAM_ORDER}
        return out


def reference_mean(reference_embs: list[np.ndarray], embed_dim: int) -> np.ndarray:
    """Mean of the reference embeddings; the zero vector when there are none."""
    if not reference_embs:
        return np.zeros(embed_dim, dtype=np.float64)
    return np.mean(np.asarray(reference_embs, dtype=np.float64), axis=0)


def _check_input(x: np.ndarray, embed_dim: int) -> np.ndarray:
    x = np.asarray(x, dtype=np.float64)
    if x.shape != (embed_dim,):
        raise ModelError(f"embedding has shape {x.shape}, model expects ({embed_dim},)")
    return x


def forward_tensors(
    target_emb: np.ndarray,
    reference_embs: list[np.ndarray],
    pt: ParamTensors,
) -> tuple[list[Tensor], list[Tensor]]:
    """Unrolled forward pass; returns ([h^(0..m)], [score^(0..m)]) as tensors."""
    meta = pt.meta
    x = _check_input(target_emb, meta.embed_dim)
    rmean = reference_mean([_check_input(r, meta.embed_dim) for r in reference_embs], meta.embed_dim)

    c = pt["ctx_w"] @ rmean + pt["ctx_b"]
    h = (pt["enc_w"] @ concat([Tensor(x), c]) + pt["enc_b"]).tanh()

    def score(hj: Tensor) -> Tensor:
        if meta.scorer_layers == 2:
            hj = (pt["score_hidden_w"] @ hj + pt["score_hidden_b"]).tanh()
        return pt["score_out_w"] @ hj + pt["score_out_b"]

    hidden = [h]
    scores = [score(h)]
    for _ in range(meta.steps):
        z = concat([h, c])
        g = (pt["gate_w"] @ z + pt["gate_b"]).sigmoid()
        cand = (pt["cand_w"] @ z + pt["cand_b"]).tanh()
        h = (1.0 - g) * h + g * cand
        hidden.append(h)
        scores.append(score(h))
    return hidden, scores


def encode_input(
    target_emb: np.ndarray, reference_embs: list[np.ndarray], params: ModelParams
) -> tuple[np.ndarray, np.ndarray]:
    """Initial hidden state h^(0) and the reference context vector."""
    pt = ParamTensors(params)
    x = _check_input(target_emb, params.embed_dim)
    rmean = reference_mean(
        [_check_input(r, params.embed_dim) for r in reference_embs], params.embed_dim
    )
    c = pt["ctx_w"] @ rmean + pt["ctx_b"]
    h0 = (pt["enc_w"] @ concat([Tensor(x), c]) + pt["enc_b"]).tanh()
    return h0.data.copy(), c.data.copy()


def refine_step(h: np.ndarray, c: np.ndarray, params: ModelParams) -> np.ndarray:
    """One gated update: h <- (1 - g) * h + g * tanh-candidate."""
    pt = ParamTensors(params)
    z = concat([Tensor(np.asarray(h, dtype=np.float64)), Tensor(np.asarray(c, dtype=np.float64))])
    g = (pt["gate_w"] @ z + pt["gate_b"]).sigmoid()
    cand = (pt["cand_w"] @ z + pt["cand_b"]).tanh()
    return ((1.0 - g) * Tensor(h) + g * cand).data.copy()


def forward(
    target_emb: np.ndarray, reference_embs: list[np.ndarray], params: ModelParams
) -> RefinementTrace:
    hidden, scores = forward_tensors(target_emb, reference_embs, ParamTensors(params))
    return RefinementTrace(
        hidden=np.stack([h.data for h in hidden]),
        scores=np.array([float(s.data) for s in scores]),
    )


def predict(
    target_emb: np.ndarray, reference_embs: list[np.ndarray], params: ModelParams
) -> float:
    """Final-step score; the model's evaluation of one paper."""
    return float(forward(target_emb, reference_embs, params).scores[-1])


# -- checkpoint format -----------------------------------------------------
#
# magic "PRNK" | uint32 LE header length | UTF-8 JSON header | parameter blob
# of little-endian float32 values, arrays flattened row-major in PARAM_ORDER.


def save_checkpoint(params: ModelParams, path: str | Path, extra: dict | None = None) -> None:
    params.validate()
    header = {
        "format_version": CHECKPOINT_VERSION,
        "embed_dim": params.embed_dim,
        "hidden_dim": params.hidden_dim,
        "steps": params.steps,
        "scorer_layers": params.scorer_layers,
        "seed": params.seed,
        "param_order": list(PARAM_ORDER),
    }
    if extra:
        header["extra"] = extra
    header_bytes = json.dumps(header, sort_keys=True).encode("utf-8")
    blob = b"".join(
        np.ascontiguousarray(params.weights[name], dtype="<f4").tobytes() for name in PARAM_ORDER
    )
    with Path(path).open("wb") as fh:
        fh.write(CHECKPOINT_MAGIC)
        fh.write(struct.pack("<I", len(header_bytes)))
        fh.write(header_bytes)
        fh.write(blob)


def load_checkpoint(path: str | Path) -> tuple[ModelParams, dict]:
    raw = Path(path).read_bytes()
    if raw[:4] != CHECKPOINT_MAGIC:
        raise ModelError(f"not a checkpoint file: {path}")
    (hlen,) = struct.unpack("<I", raw[4:8])
    header = json.loads(raw[8 : 8 + hlen].decode("utf-8"))
    if header.get("format_version") != CHECKPOINT_VERSION:
        raise ModelError(f"unsupported checkpoint version {header.get('format_version')}")
    shapes = param_shapes(header["embed_dim"], header["hidden_dim"])
    blob = np.frombuffer(raw[8 + hlen :], dtype="<f4")
    expected = sum(int(np.prod(shapes[name])) for name in PARAM_ORDER)
    if blob.size != expected:
        raise ModelError(f"checkpoint blob has {blob.size} values, expected {expected}")
    weights: dict[str, np.ndarray] = {}
    offset = 0
    for name in PARAM_ORDER:
        size = int(np.prod(shapes[name]))
        weights[name] = blob[offset : offset + size].astype(np.float64).reshape(shapes[name])
        offset += size
    params = ModelParams(
        embed_dim=header["embed_dim"],
        hidden_dim=header["hidden_dim"],
        steps=header["steps"],
        scorer_layers=header["scorer_layers"],
        seed=header["seed"],
        weights=weights,
    )
    params.validate()
    return params, header.get("extra", {})


def params_digest(params: ModelParams) -> str:
    h = hashlib.sha256()
    for name in PARAM_ORDER:
        h.update(np.ascontiguousarray(params.weights[name], dtype="<f8").tobytes())
    return h.hexdigest()
