"""Graph scheduling networks: shared encoder, priority head, value head.

The encoder embeds per-node features, runs message-passing layers that
mix each node with the mean of its neighbors, then self-attention blocks
over all nodes (residual, no normalization). Variants drop one stage:
``gnn_only`` replaces the attention blocks with extra message-passing
layers so depth stays comparable, ``transformer_only`` skips message
passing entirely.

Networks are layout-agnostic: parameters depend only on the hidden width,
so one checkpoint can score any warehouse. forward() reads just
``adjacency``, ``height`` and ``width`` from the graph argument.
"""

from __future__ import annotations

import dataclasses
import json
import math
from dataclasses import dataclass

import numpy as np

from . import autodiff as ad
from .autodiff import Tensor
from .environment import Action, SimState, encode_state, FEATURE_DIM

VARIANTS = ("full", "gnn_only", "transformer_only")


class CheckpointError(ValueError):
    pass


@dataclass(frozen=True)
class NetConfig:
    hidden: int = 64
    gnn_layers: int = 3
    attention_blocks: int = 4
    variant: str = "full"
    # Multiplier on the actor's score-head init. Values well below 1 start
    # the policy near uniform, which delays commitment while the critic is
    # still inaccurate; the optimizer grows the head back at its own pace.
    head_init_scale: float = 1.0

    def __post_init__(self):
        if self.hidden < 1:
            raise ValueError("hidden width must be positive")
        if self.variant not in VARIANTS:
            raise ValueError(f"variant must be one of {VARIANTS}")
        if self.gnn_layers < 0 or self.attention_blocks < 0:
            raise ValueError("layer counts cannot be negative")
        if self.head_init_scale <= 0:
            raise ValueError("head_init_scale must be positive")

    @property
    def sage_count(self) -> int:
        if self.variant == "transformer_only":
            return 0
        if self.variant == "gnn_only":
            # Attention blocks are swapped for extra message passing.
            return self.gnn_layers + self.attention_blocks
        return self.gnn_layers

    @property
    def attn_count(self) -> int:
        return 0 if self.variant == "gnn_only" else self.attention_blocks


def _attn_keys(i: int) -> list[str]:
    return [
        f"attn{i}.wq", f"attn{i}.wk", f"attn{i}.wv",
        f"attn{i}.ff1.w", f"attn{i}.ff1.b",
        f"attn{i}.ff2.w", f"attn{i}.ff2.b",
    ]


def _encoder_specs(cfg: NetConfig) -> list[tuple[str, tuple[int, int]]]:
    h = cfg.hidden
    specs = [("embed.w", (FEATURE_DIM, h)), ("embed.b", (1, h))]
    for i in range(cfg.sage_count):
        specs += [(f"sage{i}.w", (2 * h, h)), (f"sage{i}.b", (1, h))]
    for i in range(cfg.attn_count):
        shapes = [(h, h), (h, h), (h, h), (h, h), (1, h), (h, h), (1, h)]
        specs += list(zip(_attn_keys(i), shapes))
    return specs


def _glorot(rng: np.random.Generator, shape: tuple[int, int]) -> np.ndarray:
    fan_in, fan_out = shape
    limit = math.sqrt(6.0 / (fan_in + fan_out))
    return rng.uniform(-limit, limit, size=shape)


# Neighbor-averaging matrices keyed by adjacency identity. Row v holds
# 1/deg(v) at v's neighbors, so M @ h is the per-node neighbor mean;
# isolated nodes come out as zero rows. Bounded FIFO eviction.
_MEAN_CACHE: dict[int, tuple[object, Tensor]] = {}
_MEAN_CACHE_LIMIT = 64


def _neighbor_mean_matrix(adjacency) -> Tensor:
    key = id(adjacency)
    hit = _MEAN_CACHE.get(key)
    if hit is not None and hit[0] is adjacency:
        return hit[1]
    n = len(adjacency)
    m = np.zeros((n, n))
    for v, nbrs in enumerate(adjacency):
        if nbrs:
            m[v, list(nbrs)] = 1.0 / len(nbrs)
    t = Tensor(m)
    if len(_MEAN_CACHE) >= _MEAN_CACHE_LIMIT:
        _MEAN_CACHE.pop(next(iter(_MEAN_CACHE)))
    _MEAN_CACHE[key] = (adjacency, t)
    return t


class _EncoderNet:
    """Parameter store plus the shared node-embedding forward pass."""

    _head_specs: list[tuple[str, tuple[int, int]]] = []

    def __init__(self, config: NetConfig = NetConfig(), seed: int = 0):
        self.config = config
        self.seed = seed
        rng = np.random.default_rng(seed)
        self.params: dict[str, Tensor] = {}
        for name, shape in _encoder_specs(config) + self._head_specs_for(config):
            data = np.zeros(shape) if name.endswith(".b") else _glorot(rng, shape)
            self.params[name] = Tensor(data, requires_grad=True)

    def _head_specs_for(self, cfg: NetConfig) -> list[tuple[str, tuple[int, int]]]:
        raise NotImplementedError

    def parameters(self) -> list[Tensor]:
        return list(self.params.values())

    def _scaled_features(self, graph, mp: float, features: np.ndarray) -> Tensor:
        x = np.array(features, dtype=np.float64)
        x[:, 3] /= graph.height - 1
        x[:, 4] /= graph.width - 1
        x[:, 5] /= mp
        x[:, 7] /= mp
        return Tensor(x)

    def _encode(self, graph, mp: float, features: np.ndarray) -> Tensor:
        p = self.params
        h = ad.linear(self._scaled_features(graph, mp, features),
                      p["embed.w"], p["embed.b"])
        if self.config.sage_count:
            mean_matrix = _neighbor_mean_matrix(graph.adjacency)
        for i in range(self.config.sage_count):
            nbr = ad.matmul(mean_matrix, h)
            h = ad.linear(ad.concat_cols([h, nbr]), p[f"sage{i}.w"],
                          p[f"sage{i}.b"], activation="relu")
        inv_sqrt_dk = 1.0 / math.sqrt(self.config.hidden)
        for i in range(self.config.attn_count):
            h = ad.add(h, ad.attention(h, p[f"attn{i}.wq"], p[f"attn{i}.wk"],
                                       p[f"attn{i}.wv"], inv_sqrt_dk))
            ff = ad.linear(h, p[f"attn{i}.ff1.w"], p[f"attn{i}.ff1.b"],
                           activation="relu")
            ff = ad.linear(ff, p[f"attn{i}.ff2.w"], p[f"attn{i}.ff2.b"])
            h = ad.add(h, ff)
        return h


class PolicyNet(_EncoderNet):
    """Scores legal targets and normalizes them into action log-probs."""

    def __init__(self, config: NetConfig = NetConfig(), seed: int = 0):
        super().__init__(config, seed)
        if config.head_init_scale != 1.0:
            self.params["priority.w"].data *= config.head_init_scale

    def _head_specs_for(self, cfg: NetConfig) -> list[tuple[str, tuple[int, int]]]:
        return [("priority.w", (cfg.hidden, 1)), ("priority.b", (1, 1))]

    def forward(self, graph, mp: float, features: np.ndarray,
                legal_targets) -> Tensor:
        """Log-probabilities, shape (1, k), aligned with legal_targets."""
        h = self._encode(graph, mp, features)
        scores = ad.linear(h, self.params["priority.w"], self.params["priority.b"])
        picked = ad.gather_rows(scores, np.asarray(legal_targets, dtype=np.intp))
        return ad.log_softmax(ad.transpose(picked))

    def action_probs(self, graph, mp, features, legal_targets) -> np.ndarray:
        return np.exp(self.forward(graph, mp, features, legal_targets).data[0])


class ValueNet(_EncoderNet):
    """Pools node embeddings into a single state-value estimate."""

    def _head_specs_for(self, cfg: NetConfig) -> list[tuple[str, tuple[int, int]]]:
        h = cfg.hidden
        return [("value1.w", (h, h)), ("value1.b", (1, h)),
                ("value2.w", (h, 1)), ("value2.b", (1, 1))]

    def forward(self, graph, mp: float, features: np.ndarray) -> Tensor:
        h = self._encode(graph, mp, features)
        pooled = ad.sum_rows(h)
        v = ad.linear(pooled, self.params["value1.w"], self.params["value1.b"],
                      activation="relu")
        return ad.linear(v, self.params["value2.w"], self.params["value2.b"])

    def value(self, graph, mp, features) -> float:
        return self.forward(graph, mp, features).item()


class AgentPolicy:
    """Greedy wrapper giving a trained scorer the baseline decide() shape."""

    name = "agent"

    def __init__(self, graph, instance, net: PolicyNet):
        self.graph = graph
        self.instance = instance
        self.net = net

    def decide(self, state: SimState, legal: list[Action], rng=None) -> Action:
        features = encode_state(self.graph, state, self.instance)
        probs = self.net.action_probs(
            self.graph, self.instance.mp, features, [a.target for a in legal]
        )
        return legal[int(np.argmax(probs))]


def _pack(params: dict[str, Tensor]) -> dict:
    return {
        name: {"shape": list(t.data.shape), "values": t.data.reshape(-1).tolist()}
        for name, t in params.items()
    }


def _unpack(net: _EncoderNet, blob: dict, role: str) -> None:
    if set(blob) != set(net.params):
        raise CheckpointError(f"{role} parameter names do not match the config")
    for name, entry in blob.items():
        shape = tuple(entry["shape"])
        if shape != net.params[name].data.shape:
            raise CheckpointError(f"{role} parameter {name} has shape {shape}")
        net.params[name].data = np.array(entry["values"]).reshape(shape)


def save_checkpoint(path, policy: PolicyNet, value: ValueNet,
                    meta: dict | None = None) -> None:
    if policy.config != value.config:
        raise CheckpointError("policy and value configs differ")
    payload = {
        "format": 1,
        "config": dataclasses.asdict(policy.config),
        "seed": policy.seed,
        "policy": _pack(policy.params),
        "value": _pack(value.params),
        "meta": meta or {},
    }
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(payload, fh)
        fh.write("\n")


def load_checkpoint(path) -> tuple[PolicyNet, ValueNet, dict]:
    with open(path, encoding="utf-8") as fh:
        try:
            payload = json.load(fh)
        except json.JSONDecodeError as err:
            raise CheckpointError(f"unreadable checkpoint: {err}") from err
    try:
        config = NetConfig(**payload["config"])
        seed = payload["seed"]
        policy = PolicyNet(config, seed)
        value = ValueNet(config, seed)
        _unpack(policy, payload["policy"], "policy")
        _unpack(value, payload["value"], "value")
        meta = payload.get("meta", {})
    except (KeyError, TypeError) as err:
        raise CheckpointError(f"missing or malformed checkpoint field: {err}") from err
    return policy, value, meta
