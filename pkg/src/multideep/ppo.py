"""Clipped-surrogate policy optimization over whole retrieval episodes.

Rollouts run complete episodes on freshly sampled due dates, so a batch
is always a union of episodes. Advantages are one-step temporal
differences from the stored critic values, normalized per batch; value
targets are frozen at collection time by default, or re-bootstrapped
each epoch from the previous epoch's critic predictions when
``value_target_mode="lagged"`` (one extra Bellman backup per epoch,
which speeds value propagation under the 0.99 discount). Updates walk
the batch one transition at a time, pushing 1/B-scaled gradients through
the tape, and step the policy optimizer before the value optimizer each
epoch.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass, field

import numpy as np

from . import autodiff as ad
from .autodiff import Adam, Tensor
from .environment import RetrievalEnv
from .policy_net import PolicyNet, ValueNet
from .warehouse import DueDateConfig, LayoutParams, WarehouseGraph, compute_mp, generate_instance


class NonFiniteLossError(RuntimeError):
    """An update produced a NaN or infinite loss."""


VALUE_TARGET_MODES = ("frozen", "lagged")


@dataclass(frozen=True)
class PPOConfig:
    lr: float = 3e-4
    gamma: float = 0.99
    clip_ratio: float = 0.2
    batch_transitions: int = 1024
    epochs_per_batch: int = 4
    entropy_coef: float = 0.0
    value_target_mode: str = "frozen"
    adv_eps: float = 1e-8

    def __post_init__(self):
        if not 0.0 <= self.gamma <= 1.0:
            raise ValueError("gamma must lie in [0, 1]")
        if self.clip_ratio <= 0.0:
            raise ValueError("clip ratio must be positive")
        if self.batch_transitions < 1 or self.epochs_per_batch < 1:
            raise ValueError("batch size and epoch count must be positive")
        if self.value_target_mode not in VALUE_TARGET_MODES:
            raise ValueError(f"value_target_mode must be one of {VALUE_TARGET_MODES}")


@dataclass(frozen=True)
class Transition:
    features: np.ndarray
    legal_targets: tuple[int, ...]
    action_index: int
    log_prob: float
    reward: float
    value: float
    next_value: float
    done: bool


@dataclass(frozen=True)
class EpisodeStats:
    instance_seed: int
    reset_seed: int
    total_tardiness: float
    transitions: int
    mean_entropy: float


@dataclass(frozen=True)
class CurvePoint:
    episode: int
    total_tardiness: float
    running_avg_20: float


@dataclass(frozen=True)
class UpdateStats:
    transitions: int
    policy_loss: tuple[float, ...]
    value_loss: tuple[float, ...]
    clip_fraction: tuple[float, ...]


@dataclass
class TrainResult:
    policy: PolicyNet
    value: ValueNet
    curve: list[CurvePoint] = field(default_factory=list)
    updates: list[UpdateStats] = field(default_factory=list)
    wall_seconds: float = 0.0


def one_step_advantage(reward: float, gamma: float, value: float,
                       next_value: float, done: bool) -> float:
    return reward + gamma * next_value * (0.0 if done else 1.0) - value


def value_target(reward: float, gamma: float, next_value: float, done: bool) -> float:
    return reward + gamma * next_value * (0.0 if done else 1.0)


def normalized_advantages(batch: list[Transition], gamma: float,
                          eps: float = 1e-8) -> np.ndarray:
    raw = np.array([
        one_step_advantage(t.reward, gamma, t.value, t.next_value, t.done)
        for t in batch
    ])
    return (raw - raw.mean()) / (raw.std() + eps)


def clipped_surrogate(ratio: Tensor, advantage: float, clip: float) -> Tensor:
    """Pessimistic surrogate: min of the raw and clipped ratio objectives."""
    plain = ad.scale(ratio, advantage)
    clipped = ad.scale(ad.clamp(ratio, 1.0 - clip, 1.0 + clip), advantage)
    return ad.minimum(plain, clipped)


def _sample_index(probs: np.ndarray, rng: np.random.Generator) -> int:
    edge = np.cumsum(probs)
    return int(min(np.searchsorted(edge, rng.random(), side="right"),
                   len(probs) - 1))


class PPOTrainer:
    """Owns the rollout loop and the two optimizers for one layout."""

    def __init__(self, graph: WarehouseGraph, due_config: DueDateConfig,
                 policy: PolicyNet, value: ValueNet,
                 config: PPOConfig = PPOConfig(), seed: int = 0):
        self.graph = graph
        self.due_config = due_config
        self.policy = policy
        self.value = value
        self.config = config
        self.mp = compute_mp(graph)
        self.rng = np.random.default_rng(seed)
        self.policy_opt = Adam(policy.parameters(), lr=config.lr)
        self.value_opt = Adam(value.parameters(), lr=config.lr)

    # ------------------------------------------------------------ rollouts

    def run_episode(self) -> tuple[list[Transition], EpisodeStats]:
        instance_seed = int(self.rng.integers(1 << 31))
        reset_seed = int(self.rng.integers(1 << 31))
        instance = generate_instance(self.graph, self.due_config, instance_seed)
        env = RetrievalEnv(self.graph, instance)
        state = env.reset(reset_seed)

        transitions: list[Transition] = []
        entropies: list[float] = []
        actions = env.legal_actions(state)
        features = env.encode(state)
        legal = tuple(a.target for a in actions)
        log_probs = self.policy.forward(self.graph, self.mp, features, legal).data[0]
        state_value = self.value.value(self.graph, self.mp, features)

        while True:
            entropies.append(float(-(np.exp(log_probs) * log_probs).sum()))
            index = _sample_index(np.exp(log_probs), self.rng)
            state, outcome = env.step(state, actions[index])
            if outcome.done:
                transitions.append(Transition(
                    features, legal, index, float(log_probs[index]),
                    outcome.reward, state_value, 0.0, True,
                ))
                break
            next_actions = env.legal_actions(state)
            next_features = env.encode(state)
            next_legal = tuple(a.target for a in next_actions)
            next_log_probs = self.policy.forward(
                self.graph, self.mp, next_features, next_legal
            ).data[0]
            next_value = self.value.value(self.graph, self.mp, next_features)
            transitions.append(Transition(
                features, legal, index, float(log_probs[index]),
                outcome.reward, state_value, next_value, False,
            ))
            actions, features, legal = next_actions, next_features, next_legal
            log_probs, state_value = next_log_probs, next_value

        stats = EpisodeStats(instance_seed, reset_seed,
                             env.total_tardiness(state), len(transitions),
                             float(np.mean(entropies)))
        return transitions, stats

    # ------------------------------------------------------------- updates

    def update(self, batch: list[Transition]) -> UpdateStats:
        """Optimize both nets for epochs_per_batch passes over the batch.

        Lagged value-target mode expects whole episodes in collection
        order: each non-terminal record's successor state is the next
        record, so the previous epoch's predictions can re-bootstrap the
        targets.
        """
        cfg = self.config
        size = len(batch)
        advantages = normalized_advantages(batch, cfg.gamma, cfg.adv_eps)
        targets = np.array([value_target(t.reward, cfg.gamma, t.next_value, t.done)
                            for t in batch])
        rewards = np.array([t.reward for t in batch])
        # Successor row per record; terminal records point at the zero pad.
        succ = np.array([size if t.done else i + 1 for i, t in enumerate(batch)])
        policy_losses, value_losses, clip_fractions = [], [], []
        for _ in range(cfg.epochs_per_batch):
            self.policy_opt.zero_grad()
            loss_sum = 0.0
            ratios: list[float] = []
            for t, adv in zip(batch, advantages):
                term = self.policy_objective(t, float(adv), ratios)
                contrib = ad.scale(term, -1.0 / size)
                loss_sum += contrib.item()
                contrib.backward()
            if not math.isfinite(loss_sum):
                raise NonFiniteLossError(f"policy loss became {loss_sum}")
            policy_losses.append(loss_sum)
            clipped = sum(1 for r in ratios
                          if abs(r - 1.0) > cfg.clip_ratio)
            clip_fractions.append(clipped / size)
            self.policy_opt.step()

            self.value_opt.zero_grad()
            loss_sum = 0.0
            preds = np.empty(size + 1)
            preds[size] = 0.0
            for i, t in enumerate(batch):
                pred = self.value.forward(self.graph, self.mp, t.features)
                preds[i] = pred.item()
                contrib = ad.scale(ad.mse(pred, Tensor([[targets[i]]])), 1.0 / size)
                loss_sum += contrib.item()
                contrib.backward()
            if not math.isfinite(loss_sum):
                raise NonFiniteLossError(f"value loss became {loss_sum}")
            value_losses.append(loss_sum)
            self.value_opt.step()
            if cfg.value_target_mode == "lagged":
                targets = rewards + cfg.gamma * preds[succ]
        return UpdateStats(size, tuple(policy_losses), tuple(value_losses),
                           tuple(clip_fractions))

    def policy_objective(self, t: Transition, advantage: float,
                         ratio_out: list[float] | None = None) -> Tensor:
        """Per-transition surrogate (entropy included when configured)."""
        log_probs = self.policy.forward(self.graph, self.mp, t.features,
                                        t.legal_targets)
        chosen = ad.gather_rows(ad.transpose(log_probs), [t.action_index])
        ratio = ad.exp(ad.sub(chosen, Tensor([[t.log_prob]])))
        if ratio_out is not None:
            ratio_out.append(ratio.item())
        term = clipped_surrogate(ratio, advantage, self.config.clip_ratio)
        if self.config.entropy_coef > 0.0:
            # Entropy bonus enters the maximized objective, so the plogp
            # sum (negative entropy) is subtracted here.
            plogp = ad.sum_all(ad.mul(ad.exp(log_probs), log_probs))
            term = ad.sub(term, ad.scale(plogp, self.config.entropy_coef))
        return term

    # ------------------------------------------------------------ training

    def train(self, episodes: int, on_episode=None) -> TrainResult:
        start = time.perf_counter()
        result = TrainResult(self.policy, self.value)
        tardiness: list[float] = []
        buffer: list[Transition] = []
        for episode in range(episodes):
            transitions, stats = self.run_episode()
            buffer.extend(transitions)
            tardiness.append(stats.total_tardiness)
            window = tardiness[-20:]
            result.curve.append(CurvePoint(
                episode, stats.total_tardiness, sum(window) / len(window)
            ))
            if on_episode is not None:
                on_episode(result.curve[-1])
            if len(buffer) >= self.config.batch_transitions:
                result.updates.append(self.update(buffer))
                buffer.clear()
        if buffer:
            result.updates.append(self.update(buffer))
            buffer.clear()
        result.wall_seconds = time.perf_counter() - start
        return result


def train_scheduler(layout: LayoutParams, due_config: DueDateConfig,
                    policy: PolicyNet, value: ValueNet, episodes: int,
                    config: PPOConfig = PPOConfig(), seed: int = 0,
                    on_episode=None) -> TrainResult:
    from .warehouse import build_layout

    trainer = PPOTrainer(build_layout(layout), due_config, policy, value,
                         config, seed)
    return trainer.train(episodes, on_episode)
