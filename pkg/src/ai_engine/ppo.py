"""
PPO building blocks for the sequential-decision MDP.

Every SDM step of every episode is one datapoint. Returns are one-replication
Monte-Carlo estimates (undiscounted reverse cumulative reward over the whole
episode); advantages bootstrap with the value net on the next SDM state, or on
the next epoch's first state after an epoch's last step, and with 0 after the
last epoch.
"""
from dataclasses import dataclass, replace

import numpy as np

from src.ai_engine.policy import EncoderConfig, PolicyParams, ValueParams
from src.ai_engine.schemas import TrainConfig
from src.env.pattern import RewardSpec, TrafficPattern
from src.infra.errors import NonFiniteError
from src.infra.logger import log_latency, logger
from src.nn.network import backward, forward
from src.nn.optim import OptimizerState, adam_step
from src.sdm.engine import EpisodeResult
from src.worker import EpisodeJob, run_episodes

EVAL_CHUNK = 8192


@dataclass
class Dataset:
    num_episodes: int          # K, the 1/K factor of the surrogate estimate
    encoder: EncoderConfig
    episode: np.ndarray        # (n,)
    epoch: np.ndarray          # (n,)
    step: np.ndarray           # (n,)
    raw: np.ndarray            # (n, F) raw counts of the pre-step state
    action: np.ndarray         # (n,) flat trip index
    behavior_prob: np.ndarray  # (n,)
    reward: np.ndarray         # (n,)
    returns: np.ndarray        # (n,) NaN until compute_returns
    advantages: np.ndarray     # (n,) NaN until compute_advantages
    start_raw: np.ndarray      # (K, H, F) raw counts of s_{t,1}
    requests: np.ndarray       # (K,)
    fulfilled: np.ndarray      # (K,)
    episode_reward: np.ndarray # (K,)

    def __len__(self) -> int:
        return self.action.shape[0]

    def features(self, idx=slice(None)) -> np.ndarray:
        return self.encoder.normalize(self.raw[idx])

    def masks(self, idx=slice(None)) -> np.ndarray:
        return self.encoder.mask_from_raw(self.raw[idx])

    def subset(self, idx) -> "Dataset":
        """Datapoint subset (minibatch); episode-level arrays are kept whole."""
        return replace(
            self,
            episode=self.episode[idx], epoch=self.epoch[idx], step=self.step[idx], raw=self.raw[idx],
            action=self.action[idx], behavior_prob=self.behavior_prob[idx], reward=self.reward[idx],
            returns=self.returns[idx], advantages=self.advantages[idx],
        )

    def fulfilled_fractions(self) -> np.ndarray:
        out = np.ones(self.num_episodes)
        served = self.requests > 0
        out[served] = self.fulfilled[served] / self.requests[served]
        return out

    @classmethod
    def from_episodes(cls, episodes: list[EpisodeResult], encoder: EncoderConfig) -> "Dataset":
        F = encoder.feature_length
        cols = {k: [] for k in ("episode", "epoch", "step", "action", "behavior_prob", "reward")}
        raws = []
        for k, ep in enumerate(episodes):
            for r in ep.records:
                cols["episode"].append(k)
                cols["epoch"].append(r.epoch)
                cols["step"].append(r.step)
                cols["action"].append(r.action.index(encoder.R))
                cols["behavior_prob"].append(r.behavior_prob)
                cols["reward"].append(r.reward)
                raws.append(r.observation)
        n = len(raws)
        return cls(
            num_episodes=len(episodes),
            encoder=encoder,
            episode=np.asarray(cols["episode"], dtype=np.int64),
            epoch=np.asarray(cols["epoch"], dtype=np.int64),
            step=np.asarray(cols["step"], dtype=np.int64),
            raw=np.stack(raws) if n else np.zeros((0, F), dtype=encoder.raw_dtype),
            action=np.asarray(cols["action"], dtype=np.int64),
            behavior_prob=np.asarray(cols["behavior_prob"], dtype=np.float64),
            reward=np.asarray(cols["reward"], dtype=np.float64),
            returns=np.full(n, np.nan),
            advantages=np.full(n, np.nan),
            start_raw=np.stack([np.stack(ep.epoch_starts) for ep in episodes]),
            requests=np.array([ep.total_requests for ep in episodes], dtype=np.int64),
            fulfilled=np.array([ep.fulfilled for ep in episodes], dtype=np.int64),
            episode_reward=np.array([ep.total_reward for ep in episodes], dtype=np.float64),
        )


def _chunks(n: int, size: int):
    for start in range(0, n, size):
        yield slice(start, min(start + size, n))


@log_latency
def collect_rollouts(policy: PolicyParams, pattern: TrafficPattern, rewards: RewardSpec, K: int,
                     seed: int, iteration: int = 0, workers: int = 1) -> Dataset:
    """Run the policy for K episodes; returns and advantages are left unfilled."""
    jobs = [EpisodeJob(policy, pattern, rewards, seed, iteration, k, policy.encoder) for k in range(K)]
    episodes = run_episodes(jobs, workers)
    dataset = Dataset.from_episodes(episodes, policy.encoder)
    logger.info(f"⚡ Collected {len(dataset)} datapoints from {K} episodes")
    return dataset


def compute_returns(dataset: Dataset) -> Dataset:
    returns = np.empty(len(dataset))
    for k in range(dataset.num_episodes):
        idx = np.flatnonzero(dataset.episode == k)
        returns[idx] = np.cumsum(dataset.reward[idx][::-1])[::-1]
    dataset.returns = returns
    return dataset


def value_predictions(vparams: ValueParams, epochs: np.ndarray, raw: np.ndarray) -> np.ndarray:
    """Value estimates in reward units."""
    out = np.empty(raw.shape[0])
    for sl in _chunks(raw.shape[0], EVAL_CHUNK):
        pred, _ = forward(vparams.network, epochs[sl], vparams.encoder.normalize(raw[sl]))
        out[sl] = pred[:, 0]
    return out * vparams.return_scale


def value_loss(vparams: ValueParams, dataset: Dataset) -> float:
    """Mean squared error of the value net against the Monte-Carlo returns."""
    if len(dataset) == 0:
        return 0.0
    pred = value_predictions(vparams, dataset.epoch, dataset.raw)
    return float(np.mean((pred - dataset.returns) ** 2))


def ensure_optimizer(params, lr: float, cfg: TrainConfig) -> OptimizerState:
    if params.optimizer is None:
        params.optimizer = OptimizerState.for_params(
            params.network.params, lr, params.network.param_groups, {"embedding": cfg.embedding_l2},
            beta1=cfg.adam_beta1, beta2=cfg.adam_beta2, eps=cfg.adam_eps,
        )
    return params.optimizer


@log_latency
def fit_value(vparams: ValueParams, dataset: Dataset, cfg: TrainConfig, rng: np.random.Generator):
    """
    Minibatch Adam on the squared error against returns / return_scale.
    Returns (vparams, mean loss of the last pass), the loss in reward units squared.
    """
    opt = replace(ensure_optimizer(vparams, cfg.value_lr, cfg), lr=cfg.value_lr)
    net, n = vparams.network, len(dataset)
    scale = vparams.return_scale
    targets = dataset.returns / scale
    last_pass = []
    for _ in range(cfg.value_passes):
        last_pass = []
        order = rng.permutation(n)
        for sl in _chunks(n, cfg.minibatch_size):
            idx = order[sl]
            pred, tape = forward(net, dataset.epoch[idx], dataset.features(idx))
            err = pred[:, 0] - targets[idx]
            loss = float(np.mean(err ** 2)) * scale ** 2
            if not np.isfinite(loss):
                raise NonFiniteError("value loss is not finite")
            grads = backward(tape, (2.0 / len(idx)) * err[:, None])
            params, opt = adam_step(net.params, grads, opt)
            net.set_params(params)
            last_pass.append(loss)
    vparams.optimizer = opt
    return vparams, float(np.mean(last_pass)) if last_pass else 0.0


def compute_advantages(vparams: ValueParams, dataset: Dataset, normalize: bool = False) -> Dataset:
    n, H = len(dataset), dataset.encoder.H
    values = value_predictions(vparams, dataset.epoch, dataset.raw)
    K = dataset.num_episodes
    start_epochs = np.tile(np.arange(1, H + 1), K)
    start_values = value_predictions(vparams, start_epochs, dataset.start_raw.reshape(K * H, -1)).reshape(K, H)

    next_values = np.zeros(n)
    if n:
        same_epoch = np.zeros(n, dtype=bool)
        same_epoch[:-1] = (dataset.episode[1:] == dataset.episode[:-1]) & (dataset.epoch[1:] == dataset.epoch[:-1])
        next_values[same_epoch] = values[1:][same_epoch[:-1]]
        # last step of epoch t bootstraps on s_{t+1,1}; after epoch H the value is 0
        boundary = ~same_epoch & (dataset.epoch < H)
        next_values[boundary] = start_values[dataset.episode[boundary], dataset.epoch[boundary]]
    adv = dataset.reward + next_values - values
    if normalize and n > 1:
        adv = (adv - adv.mean()) / (adv.std() + 1e-8)
    dataset.advantages = adv
    return dataset


def _taken_probs(theta: PolicyParams, dataset: Dataset, sl):
    probs, tape = forward(theta.network, dataset.epoch[sl], dataset.features(sl), dataset.masks(sl))
    rows = np.arange(probs.shape[0])
    return probs, rows, tape


def surrogate_loss(theta: PolicyParams, dataset: Dataset, epsilon: float):
    """Clipped surrogate estimate L̂ and its gradient (ascent direction)."""
    total = 0.0
    grads = {k: np.zeros_like(v) for k, v in theta.network.params.items()}
    K = dataset.num_episodes
    for sl in _chunks(len(dataset), EVAL_CHUNK):
        probs, rows, tape = _taken_probs(theta, dataset, sl)
        behavior = dataset.behavior_prob[sl]
        adv = dataset.advantages[sl]
        actions = dataset.action[sl]
        with np.errstate(divide="ignore", invalid="ignore"):
            ratio = probs[rows, actions] / behavior
        if not np.all(np.isfinite(ratio)):
            raise NonFiniteError("probability ratio is not finite (zero behavior probability on a taken action)")
        unclipped = ratio * adv
        clipped = np.clip(ratio, 1.0 - epsilon, 1.0 + epsilon) * adv
        total += float(np.minimum(unclipped, clipped).sum())
        active = unclipped <= clipped
        g_out = np.zeros_like(probs)
        g_out[rows, actions] = np.where(active, adv / behavior, 0.0) / K
        for name, g in backward(tape, g_out).items():
            grads[name] += g
    return total / K, grads


def approx_kl(dataset: Dataset, theta: PolicyParams) -> float:
    """Mean of log π_ξ(a|s) - log π_θ(a|s) over the recorded actions."""
    if len(dataset) == 0:
        return 0.0
    acc = 0.0
    for sl in _chunks(len(dataset), EVAL_CHUNK):
        probs, rows, _ = _taken_probs(theta, dataset, sl)
        acc += float(np.sum(np.log(dataset.behavior_prob[sl]) - np.log(probs[rows, dataset.action[sl]])))
    return acc / len(dataset)


@dataclass
class PolicyUpdateStats:
    surrogate: float
    approx_kl: float
    steps: int
    stopped_early: bool


@log_latency
def update_policy(theta: PolicyParams, dataset: Dataset, cfg: TrainConfig, lr: float, epsilon: float,
                  rng: np.random.Generator) -> PolicyUpdateStats:
    """Maximize L̂ with minibatch Adam; stop once a minibatch's approximate KL exceeds the target."""
    opt = replace(ensure_optimizer(theta, lr, cfg), lr=lr)
    net, n = theta.network, len(dataset)
    # L̂ summed over the minibatches of the latest full pass (partial pass if it stopped in the first)
    surrogate, kl, steps = 0.0, 0.0, 0
    for p in range(cfg.policy_passes):
        current = 0.0
        order = rng.permutation(n)
        for sl in _chunks(n, cfg.minibatch_size):
            batch = dataset.subset(order[sl])
            objective, grads = surrogate_loss(theta, batch, epsilon)
            if not np.isfinite(objective):
                raise NonFiniteError("surrogate objective is not finite")
            params, opt = adam_step(net.params, {k: -g for k, g in grads.items()}, opt)
            net.set_params(params)
            theta.optimizer = opt
            current += objective
            steps += 1
            kl = approx_kl(batch, theta)
            if kl > cfg.kl_target:
                logger.info(f"⚠️ KL {kl:.4f} above target {cfg.kl_target} after {steps} steps, stopping early")
                return PolicyUpdateStats(surrogate if p else current, kl, steps, True)
        surrogate = current
    theta.optimizer = opt
    return PolicyUpdateStats(surrogate, kl, steps, False)
