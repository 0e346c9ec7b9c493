"""
Generator and discriminator networks built from GNN layers on the autodiff
tape, their initialization, the AdamW optimizer and checkpoint files.

Each GNN layer is an edge-conditioned convolution (a filter network maps the
edge feature to a per-edge weight matrix, messages are mean-aggregated at the
target), a dense transform, per-graph feature normalization and LeakyReLU.
"""

import json
import math
from dataclasses import asdict, dataclass, field, fields
from typing import Any, Dict, List, Mapping, Optional, Tuple

import numpy as np

from . import autodiff as ad
from .autodiff import Tape, Tensor
from .errors import NonFiniteGradient, ParseError, ShapeMismatch, ValidationError
from .geometry import Canonicalization, Layout, canonical_transform
from .graph import DistanceMatrix, Graph
from .utils import atomic_write_text, make_rng

CHECKPOINT_FORMAT = "advlayout-checkpoint"
CHECKPOINT_VERSION = 1
NORM_VARIANCE_FLOOR = 1e-12

Params = Dict[str, np.ndarray]
Bound = Dict[str, Tensor]


@dataclass(frozen=True)
class ArchConfig:
    """Network sizes. Defaults are the desk-scale sizes; ``full_scale()`` gives the full ones."""

    gen_layers: int = 6
    gen_dim: int = 8
    dis_layers: int = 3
    dis_dim: int = 16
    leaky_slope: float = 0.01

    def __post_init__(self) -> None:
        for name in ("gen_layers", "gen_dim", "dis_layers", "dis_dim"):
            if getattr(self, name) <= 0:
                raise ValidationError(f"{name} must be positive")
        if not 0.0 < self.leaky_slope < 1.0:
            raise ValidationError("leaky_slope must be in (0, 1)")

    @classmethod
    def full_scale(cls) -> "ArchConfig":
        return cls(gen_layers=31, gen_dim=8, dis_layers=9, dis_dim=16)

    @classmethod
    def from_dict(cls, data: Mapping[str, Any]) -> "ArchConfig":
        known = {f.name for f in fields(cls)}
        unknown = set(data) - known
        if unknown:
            raise ValidationError(f"unknown arch config keys: {sorted(unknown)}")
        return cls(**data)


def _layer_shapes(prefix: str, fin: int, fout: int) -> List[Tuple[str, Tuple[int, int]]]:
    return [
        (f"{prefix}.filter.w", (1, fin * fout)),
        (f"{prefix}.filter.b", (1, fin * fout)),
        (f"{prefix}.root.w", (fin, fout)),
        (f"{prefix}.root.b", (1, fout)),
        (f"{prefix}.dense.w", (fout, fout)),
        (f"{prefix}.dense.b", (1, fout)),
        (f"{prefix}.norm.scale", (1, fout)),
        (f"{prefix}.norm.shift", (1, fout)),
    ]


def _init_param(name: str, shape: Tuple[int, int], rng: np.random.Generator) -> np.ndarray:
    if name.endswith(".scale"):
        return np.ones(shape)
    if name.endswith((".b", ".shift")):
        return np.zeros(shape)
    limit = math.sqrt(6.0 / (shape[0] + shape[1]))
    return rng.uniform(-limit, limit, size=shape)


def _expansion_matrices(fin: int, fout: int) -> Tuple[np.ndarray, np.ndarray]:
    """R repeats each input feature fout times; S sums the fin blocks per output."""
    repeat = np.zeros((fin, fin * fout))
    collect = np.zeros((fin * fout, fout))
    for f in range(fin):
        for o in range(fout):
            repeat[f, f * fout + o] = 1.0
            collect[f * fout + o, o] = 1.0
    return repeat, collect


def feature_norm(h: Tensor, scale: Tensor, shift: Tensor) -> Tensor:
    """Normalize each feature over the graph's nodes, then apply scale/shift."""
    centered = ad.sub(h, ad.mean_rows(h))
    variance = ad.mean_rows(ad.elementwise_mul(centered, centered))
    floor = np.where(variance.value < NORM_VARIANCE_FLOOR, 1.0, 0.0)
    inv_std = ad.pow_scalar(ad.add(variance, floor), -0.5)
    return ad.add(ad.elementwise_mul(ad.elementwise_mul(centered, inv_std), scale), shift)


def gnn_layer_forward(
    params: Bound,
    prefix: str,
    node_feats: Tensor,
    edge_feats: Tensor,
    g: Graph,
    tape: Tape,
    slope: float = 0.01,
) -> Tensor:
    """
    One GNN layer. ``edge_feats`` holds one row per directed edge in the order
    of ``Graph.edge_index()``.
    """
    filter_w = params[f"{prefix}.filter.w"]
    fin = params[f"{prefix}.root.w"].shape[0]
    fout = params[f"{prefix}.root.w"].shape[1]
    if node_feats.shape != (g.node_count, fin):
        raise ShapeMismatch(f"{prefix}: node features {node_feats.shape}, expected ({g.node_count}, {fin})")
    src, dst = g.edge_index()
    if edge_feats.shape != (src.size, filter_w.shape[0]):
        raise ShapeMismatch(f"{prefix}: edge features {edge_feats.shape}, expected ({src.size}, 1)")

    repeat, collect = _expansion_matrices(fin, fout)
    edge_weights = ad.add(ad.matmul(edge_feats, filter_w), params[f"{prefix}.filter.b"])
    source = ad.matmul(ad.gather_rows(node_feats, src), tape.constant(repeat))
    messages = ad.matmul(ad.elementwise_mul(source, edge_weights), tape.constant(collect))
    aggregated = ad.scatter_mean(messages, dst, g.node_count)

    conv = ad.add(aggregated, ad.add(ad.matmul(node_feats, params[f"{prefix}.root.w"]), params[f"{prefix}.root.b"]))
    dense = ad.add(ad.matmul(conv, params[f"{prefix}.dense.w"]), params[f"{prefix}.dense.b"])
    normed = feature_norm(dense, params[f"{prefix}.norm.scale"], params[f"{prefix}.norm.shift"])
    return ad.leaky_relu(normed, slope)


class _Network:
    """Named parameter arrays plus tape binding."""

    def __init__(self, arch: ArchConfig, params: Params):
        self.arch = arch
        self.params = params

    def bind(self, tape: Tape, trainable: bool) -> Bound:
        """Place parameters on the tape as variables (trainable) or constants (frozen)."""
        make = tape.variable if trainable else tape.constant
        return {name: make(value) for name, value in self.params.items()}

    def parameter_count(self) -> int:
        return int(sum(v.size for v in self.params.values()))

    def copy(self) -> "_Network":
        return type(self)(self.arch, {k: v.copy() for k, v in self.params.items()})


class GeneratorNet(_Network):
    """Stacked GNN layers over the initial positions, then a 2-D projection."""

    @staticmethod
    def shapes(arch: ArchConfig) -> List[Tuple[str, Tuple[int, int]]]:
        shapes = []
        fin = 2
        for layer in range(arch.gen_layers):
            shapes.extend(_layer_shapes(f"gen.layer{layer}", fin, arch.gen_dim))
            fin = arch.gen_dim
        shapes.append(("gen.proj.w", (arch.gen_dim, 2)))
        shapes.append(("gen.proj.b", (1, 2)))
        return shapes


class DiscriminatorNet(_Network):
    """Canonicalization front, GNN layers, global mean pooling and a score head."""

    @staticmethod
    def shapes(arch: ArchConfig) -> List[Tuple[str, Tuple[int, int]]]:
        shapes = []
        fin = 2
        for layer in range(arch.dis_layers):
            shapes.extend(_layer_shapes(f"dis.layer{layer}", fin, arch.dis_dim))
            fin = arch.dis_dim
        shapes.append(("dis.score.w", (arch.dis_dim, 1)))
        shapes.append(("dis.score.b", (1, 1)))
        return shapes


def init_params(cfg: ArchConfig, seed: int = 0) -> Tuple[GeneratorNet, DiscriminatorNet]:
    """Uniform ±√(6/(fan_in+fan_out)) weights, zero biases, unit norm scale."""
    rng = make_rng(seed, "init_params")
    gen = {name: _init_param(name, shape, rng) for name, shape in GeneratorNet.shapes(cfg)}
    dis = {name: _init_param(name, shape, rng) for name, shape in DiscriminatorNet.shapes(cfg)}
    return GeneratorNet(cfg, gen), DiscriminatorNet(cfg, dis)


def init_edge_lengths(g: Graph, init: Layout) -> np.ndarray:
    src, dst = g.edge_index()
    delta = init.positions[src] - init.positions[dst]
    return np.linalg.norm(delta, axis=1, keepdims=True)


def generator_forward(
    params: Bound,
    arch: ArchConfig,
    g: Graph,
    d: DistanceMatrix,
    init: Layout,
    tape: Tape,
) -> Tensor:
    """Node positions (N×2) as a tape tensor, differentiable w.r.t. bound parameters."""
    if init.node_count != g.node_count:
        raise ShapeMismatch(f"initial layout has {init.node_count} rows, graph has {g.node_count} nodes")
    h = tape.constant(init.positions)
    edge_feats = tape.constant(init_edge_lengths(g, init))
    for layer in range(arch.gen_layers):
        h = gnn_layer_forward(params, f"gen.layer{layer}", h, edge_feats, g, tape, arch.leaky_slope)
    return ad.add(ad.matmul(h, params["gen.proj.w"]), params["gen.proj.b"])


def canonicalize_on_tape(x: Tensor, d: DistanceMatrix, transform: Optional[Canonicalization] = None) -> Tensor:
    """
    Canonicalization with a differentiable centroid; rotation and scale are
    computed from the forward value and enter as constants.
    """
    if transform is None:
        transform = canonical_transform(Layout(x.value), d)
    centered = ad.sub(x, ad.mean_rows(x))
    rotated = ad.matmul(centered, Tensor(transform.rotation, x.tape))
    return ad.scalar_mul(rotated, transform.scale)


def discriminator_forward(
    params: Bound,
    arch: ArchConfig,
    g: Graph,
    d: DistanceMatrix,
    x: Tensor,
    tape: Tape,
    transform: Optional[Canonicalization] = None,
) -> Tensor:
    """Goodness score (1×1) of layout ``x`` for graph ``g``."""
    if x.shape != (g.node_count, 2):
        raise ShapeMismatch(f"layout tensor {x.shape}, expected ({g.node_count}, 2)")
    h = canonicalize_on_tape(x, d, transform)
    src, dst = g.edge_index()
    edge_feats = ad.l2_norm_rows(ad.sub(ad.gather_rows(h, src), ad.gather_rows(h, dst)))
    for layer in range(arch.dis_layers):
        h = gnn_layer_forward(params, f"dis.layer{layer}", h, edge_feats, g, tape, arch.leaky_slope)
    pooled = ad.mean_rows(h)
    return ad.add(ad.matmul(pooled, params["dis.score.w"]), params["dis.score.b"])


def generate(net: GeneratorNet, g: Graph, d: DistanceMatrix, init: Layout) -> Layout:
    """Inference: run the generator with all parameters as constants."""
    tape = Tape()
    out = generator_forward(net.bind(tape, trainable=False), net.arch, g, d, init, tape)
    return Layout(out.value, graph_id=init.graph_id)


def score(net: DiscriminatorNet, g: Graph, d: DistanceMatrix, x: Layout) -> float:
    tape = Tape()
    out = discriminator_forward(net.bind(tape, trainable=False), net.arch, g, d, tape.constant(x.positions), tape)
    return out.item()


@dataclass
class OptimizerState:
    """AdamW state. ``weight_decay`` is the per-step parameter multiplier."""

    lr: float = 0.001
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    weight_decay: float = 0.99
    lr_decay: float = 0.997
    step: int = 0
    m: Dict[str, np.ndarray] = field(default_factory=dict)
    v: Dict[str, np.ndarray] = field(default_factory=dict)

    def decay_lr(self) -> None:
        self.lr *= self.lr_decay

    def copy(self) -> "OptimizerState":
        clone = OptimizerState(**{f.name: getattr(self, f.name) for f in fields(self) if f.name not in ("m", "v")})
        clone.m = {k: v.copy() for k, v in self.m.items()}
        clone.v = {k: v.copy() for k, v in self.v.items()}
        return clone


def adamw_step(params: Params, grads: Mapping[str, np.ndarray], state: OptimizerState) -> Params:
    """
    Decoupled weight decay (multiply by ``weight_decay``) followed by the
    bias-corrected Adam update. Returns new arrays; ``state`` is advanced.
    """
    for name, grad in grads.items():
        if name not in params:
            raise ShapeMismatch(f"gradient for unknown parameter {name}")
        if grad.shape != params[name].shape:
            raise ShapeMismatch(f"{name}: gradient {grad.shape} vs parameter {params[name].shape}")
        if not np.all(np.isfinite(grad)):
            raise NonFiniteGradient(f"non-finite gradient for {name}")

    step = state.step + 1
    correction1 = 1.0 - state.beta1 ** step
    correction2 = 1.0 - state.beta2 ** step
    updated = {}
    for name, value in params.items():
        grad = grads.get(name)
        if grad is None:
            grad = np.zeros_like(value)
        m = state.m.get(name, np.zeros_like(value))
        v = state.v.get(name, np.zeros_like(value))
        m = state.beta1 * m + (1.0 - state.beta1) * grad
        v = state.beta2 * v + (1.0 - state.beta2) * grad * grad
        decayed = value * state.weight_decay
        updated[name] = decayed - state.lr * (m / correction1) / (np.sqrt(v / correction2) + state.eps)
        state.m[name] = m
        state.v[name] = v
    state.step = step
    return updated


@dataclass
class ModelState:
    """Everything a training run needs to resume: networks, optimizers, history."""

    arch: ArchConfig
    generator: GeneratorNet
    discriminator: DiscriminatorNet
    gen_opt: OptimizerState
    dis_opt: OptimizerState
    epoch: int = 0
    history: List[Dict[str, Any]] = field(default_factory=list)
    train_config: Dict[str, Any] = field(default_factory=dict)

    @classmethod
    def initial(cls, arch: ArchConfig, seed: int, lr: float = 0.001, lr_decay: float = 0.997,
                weight_decay: float = 0.99) -> "ModelState":
        gen, dis = init_params(arch, seed)
        return cls(
            arch=arch,
            generator=gen,
            discriminator=dis,
            gen_opt=OptimizerState(lr=lr, lr_decay=lr_decay, weight_decay=weight_decay),
            dis_opt=OptimizerState(lr=lr, lr_decay=lr_decay, weight_decay=weight_decay),
        )

    def copy(self) -> "ModelState":
        return ModelState(
            arch=self.arch,
            generator=self.generator.copy(),  # type: ignore[arg-type]
            discriminator=self.discriminator.copy(),  # type: ignore[arg-type]
            gen_opt=self.gen_opt.copy(),
            dis_opt=self.dis_opt.copy(),
            epoch=self.epoch,
            history=[dict(record) for record in self.history],
            train_config=dict(self.train_config),
        )


def _encode_arrays(arrays: Mapping[str, np.ndarray]) -> Dict[str, Any]:
    return {name: {"shape": list(a.shape), "data": [float(x) for x in a.ravel()]} for name, a in arrays.items()}


def _decode_arrays(data: Mapping[str, Any]) -> Dict[str, np.ndarray]:
    return {name: np.array(entry["data"], dtype=float).reshape(entry["shape"]) for name, entry in data.items()}


def _encode_optimizer(state: OptimizerState) -> Dict[str, Any]:
    scalars = {f.name: getattr(state, f.name) for f in fields(state) if f.name not in ("m", "v")}
    return {**scalars, "m": _encode_arrays(state.m), "v": _encode_arrays(state.v)}


def _decode_optimizer(data: Mapping[str, Any]) -> OptimizerState:
    scalars = {k: v for k, v in data.items() if k not in ("m", "v")}
    state = OptimizerState(**scalars)
    state.m = _decode_arrays(data.get("m", {}))
    state.v = _decode_arrays(data.get("v", {}))
    return state


def checkpoint_text(state: ModelState) -> str:
    payload = {
        "format": CHECKPOINT_FORMAT,
        "version": CHECKPOINT_VERSION,
        "arch": asdict(state.arch),
        "train_config": state.train_config,
        "epoch": state.epoch,
        "generator": _encode_arrays(state.generator.params),
        "discriminator": _encode_arrays(state.discriminator.params),
        "gen_opt": _encode_optimizer(state.gen_opt),
        "dis_opt": _encode_optimizer(state.dis_opt),
        "history": state.history,
    }
    return json.dumps(payload, sort_keys=True, separators=(",", ":")) + "\n"


def save_checkpoint(state: ModelState, path: str) -> None:
    atomic_write_text(path, checkpoint_text(state))


def load_checkpoint(path: str) -> ModelState:
    try:
        with open(path, 'r') as f:
            payload = json.load(f)
    except json.JSONDecodeError as e:
        raise ParseError(f"malformed checkpoint {path}: {e}") from None
    except OSError as e:
        raise ParseError(f"cannot read checkpoint {path}: {e}") from None
    if payload.get("format") != CHECKPOINT_FORMAT:
        raise ParseError(f"{path} is not an advlayout checkpoint")
    if payload.get("version") != CHECKPOINT_VERSION:
        raise ParseError(f"unsupported checkpoint version {payload.get('version')}")
    try:
        arch = ArchConfig.from_dict(payload["arch"])
        state = ModelState(
            arch=arch,
            generator=GeneratorNet(arch, _decode_arrays(payload["generator"])),
            discriminator=DiscriminatorNet(arch, _decode_arrays(payload["discriminator"])),
            gen_opt=_decode_optimizer(payload["gen_opt"]),
            dis_opt=_decode_optimizer(payload["dis_opt"]),
            epoch=int(payload["epoch"]),
            history=list(payload.get("history", [])),
            train_config=dict(payload.get("train_config", {})),
        )
    except (KeyError, TypeError, ValueError) as e:
        raise ParseError(f"malformed checkpoint {path}: {e}") from None
    expected = dict(GeneratorNet.shapes(arch) + DiscriminatorNet.shapes(arch))
    stored = {**state.generator.params, **state.discriminator.params}
    missing = set(expected) - set(stored)
    if missing:
        raise ValidationError(f"checkpoint is missing parameters: {sorted(missing)}")
    for name, value in stored.items():
        if expected.get(name) != value.shape:
            raise ValidationError(f"checkpoint parameter {name} has shape {value.shape}, expected {expected.get(name)}")
    return state
