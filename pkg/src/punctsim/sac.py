"""Soft actor-critic over per-TTI puncturing decisions.

One TTI is one episode of M mini-slot steps sharing the same eMBB schedule;
the environment reward arrives only at the final mini-slot.  Twin critics
with target copies regress on entropy-regularised one-step targets; the
actor ascends the min-critic value of its reparameterised samples.  The
critic is always evaluated on feasible (enforced) actions when building
targets, while the actor's own objective differentiates through the raw
sampling path, never through the projection.
"""

from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .core import CellConfig, PuncturingVector, ScheduleVector
from .enforcer import enforce_batch
from .neural import (
    AdamState,
    MlpParams,
    action_to_scs,
    adam_step,
    backward,
    forward,
    init_mlp,
    load_adam,
    load_mlp,
    sample_squashed,
    save_adam,
    save_mlp,
    split_head,
    squashed_log_prob_grads,
    LOG_SIGMA_MAX,
    LOG_SIGMA_MIN,
)


@dataclass(frozen=True)
class ExperienceRecord:
    """One TTI: schedule, admitted counts, applied punctures, final reward."""

    alloc: tuple                # per-user SC counts
    k: tuple                    # per-mini-slot admitted packet counts
    punctures: tuple            # M tuples of applied per-user SC punctures
    reward: float

    def __post_init__(self):
        if len(self.punctures) != len(self.k):
            raise ValueError("need one puncture vector per mini-slot")
        for row in self.punctures:
            if len(row) != len(self.alloc):
                raise ValueError("puncture row length mismatch")


class ReplayBuffer:
    """Fixed-capacity FIFO ring with uniform with-replacement sampling."""

    def __init__(self, capacity: int):
        if capacity < 1:
            raise ValueError("capacity must be >= 1")
        self.capacity = capacity
        self._records = []
        self._next = 0

    def __len__(self):
        return len(self._records)

    def push(self, record: ExperienceRecord):
        if len(self._records) < self.capacity:
            self._records.append(record)
        else:
            self._records[self._next] = record
            self._next = (self._next + 1) % self.capacity

    def sample(self, size: int, rng: np.random.Generator) -> list:
        if not self._records:
            raise ValueError("cannot sample from an empty buffer")
        idx = rng.integers(0, len(self._records), size=size)
        return [self._records[i] for i in idx]


@dataclass(frozen=True)
class AgentHyper:
    discount: float = 0.95
    zeta: float = 0.2            # entropy weight
    batch: int = 256
    soft_rate: float = 0.005
    lr: float = 3e-4
    buffer_capacity: int = 20_000
    actor_hidden: tuple = (128,)
    critic_hidden: tuple = (256, 256)
    actor_final_scale: float = 0.01


@dataclass
class SacAgent:
    cell: CellConfig
    cfg: AgentHyper
    actor: MlpParams
    critic1: MlpParams
    critic2: MlpParams
    target1: MlpParams
    target2: MlpParams
    adam_actor: AdamState = field(default=None)
    adam_c1: AdamState = field(default=None)
    adam_c2: AdamState = field(default=None)

    @property
    def act_dim(self) -> int:
        return self.cell.num_embb


def make_agent(cell: CellConfig, cfg: AgentHyper,
               rng: np.random.Generator) -> SacAgent:
    e = cell.num_embb
    actor_sizes = [e + 1, *cfg.actor_hidden, 2 * e]
    critic_sizes = [2 * e + 1, *cfg.critic_hidden, 1]
    actor = init_mlp(actor_sizes, rng, final_scale=cfg.actor_final_scale)
    c1 = init_mlp(critic_sizes, rng)
    c2 = init_mlp(critic_sizes, rng)
    agent = SacAgent(cell=cell, cfg=cfg, actor=actor, critic1=c1, critic2=c2,
                     target1=c1.copy(), target2=c2.copy())
    agent.adam_actor = AdamState.zeros_like(actor)
    agent.adam_c1 = AdamState.zeros_like(c1)
    agent.adam_c2 = AdamState.zeros_like(c2)
    return agent


def actor_input(alloc, j: int, cell: CellConfig) -> np.ndarray:
    """Normalised [schedule, branch index] column for one branch."""
    x = np.empty((cell.num_embb + 1, 1))
    x[:-1, 0] = np.asarray(alloc, dtype=float) / cell.total_scs
    x[-1, 0] = j / cell.num_branches
    return x


def critic_input(alloc, k_tau: int, y_tau, cell: CellConfig) -> np.ndarray:
    """Normalised [schedule, mini-slot count, puncture vector] column."""
    e = cell.num_embb
    x = np.empty((2 * e + 1, 1))
    x[:e, 0] = np.asarray(alloc, dtype=float) / cell.total_scs
    x[e, 0] = k_tau / cell.num_branches
    x[e + 1:, 0] = np.asarray(y_tau, dtype=float) / cell.total_scs
    return x


def _stack(batch) -> tuple:
    alloc = np.array([rec.alloc for rec in batch], dtype=float)
    k = np.array([rec.k for rec in batch], dtype=np.int64)
    punct = np.array([rec.punctures for rec in batch], dtype=float)
    reward = np.array([rec.reward for rec in batch], dtype=float)
    return alloc, k, punct, reward


def _critic_inputs(arrays, cell: CellConfig) -> np.ndarray:
    alloc, k, punct, _ = arrays
    h, m = k.shape
    alloc_rep = np.repeat(alloc, m, axis=0)
    k_flat = k.reshape(-1).astype(float)
    y_flat = punct.reshape(h * m, -1)
    return np.vstack([alloc_rep.T / cell.total_scs,
                      k_flat[None, :] / cell.num_branches,
                      y_flat.T / cell.total_scs])


def critic_targets(agent: SacAgent, arrays, rng: np.random.Generator) -> np.ndarray:
    """Entropy-regularised one-step targets for every (record, mini-slot).

    Terminal mini-slots take the TTI reward.  Earlier ones bootstrap from
    the target critics at the next mini-slot's branch, with a freshly
    sampled action made feasible before evaluation.  Branch 0 is the
    all-zero puncture vector and carries no entropy term.
    """
    cell, cfg = agent.cell, agent.cfg
    alloc, k, _, reward = arrays
    h, m = k.shape
    e = alloc.shape[1]
    n_total = cell.total_scs
    cap = cell.num_branches

    pair_h = np.repeat(np.arange(h), m)
    pair_tau = np.tile(np.arange(m), h)
    y = np.empty(h * m)
    last = pair_tau == m - 1
    y[last] = reward[pair_h[last]]

    nl_idx = np.flatnonzero(~last)
    next_k = k[pair_h[nl_idx], pair_tau[nl_idx] + 1]
    nl_alloc = alloc[pair_h[nl_idx]]
    actions = np.zeros((nl_idx.size, e))
    log_pi = np.zeros(nl_idx.size)
    pos = np.flatnonzero(next_k > 0)
    if pos.size:
        x = np.vstack([nl_alloc[pos].T / n_total,
                       next_k[pos][None, :].astype(float) / cap])
        raw, _ = forward(agent.actor, x)
        mu, log_sigma = split_head(raw, e)
        eps = rng.standard_normal(mu.shape)
        a, lp, _ = sample_squashed(mu, log_sigma, eps)
        b = action_to_scs(a, nl_alloc[pos].T)
        enforced = enforce_batch(b.T, nl_alloc[pos],
                                 next_k[pos] * cell.urllc_sc_len)
        actions[pos] = enforced
        log_pi[pos] = lp

    x_next = np.vstack([nl_alloc.T / n_total,
                        next_k[None, :].astype(float) / cap,
                        actions.T / n_total])
    q1, _ = forward(agent.target1, x_next)
    q2, _ = forward(agent.target2, x_next)
    q_min = np.minimum(q1[0], q2[0])
    y[nl_idx] = cfg.discount * (q_min - cfg.zeta * log_pi)
    return y


def compute_target(agent: SacAgent, record: ExperienceRecord, tau: int,
                   rng: np.random.Generator) -> float:
    """Single (record, mini-slot) target; see critic_targets."""
    arrays = _stack([record])
    m = len(record.k)
    return float(critic_targets(agent, arrays, rng)[tau])


def critic_loss_grads(critic: MlpParams, x: np.ndarray, y: np.ndarray):
    """MSE regression loss and parameter gradients for one critic."""
    q, cache = forward(critic, x)
    err = q[0] - y
    loss = float(np.mean(np.square(err)))
    dy = (2.0 / err.size) * err[None, :]
    grads, _ = backward(critic, cache, dy)
    return loss, grads


def critic_update(agent: SacAgent, batch, rng: np.random.Generator) -> tuple:
    """One Adam step on each critic against shared frozen targets."""
    arrays = _stack(batch)
    x = _critic_inputs(arrays, agent.cell)
    y = critic_targets(agent, arrays, rng)
    losses = []
    for critic, state in ((agent.critic1, agent.adam_c1),
                          (agent.critic2, agent.adam_c2)):
        loss, grads = critic_loss_grads(critic, x, y)
        adam_step(critic, grads, state, lr=agent.cfg.lr)
        losses.append(loss)
    return tuple(losses)


def actor_objective_grads(actor: MlpParams, critics, cell: CellConfig,
                          zeta: float, alloc_rows: np.ndarray,
                          j_rows: np.ndarray, eps: np.ndarray, denom: int):
    """Mean min-critic value of fresh samples, minus entropy penalty.

    Pure in (actor, eps): finite differences over actor parameters with a
    fixed noise matrix must match the returned gradients.  Gradients flow
    through the tanh-Gaussian sampling path and the critics' inputs; the
    critics' parameters and the feasibility projection stay out of the
    differentiation path.
    """
    e = cell.num_embb
    n_total = cell.total_scs
    cap = cell.num_branches
    x = np.vstack([alloc_rows.T / n_total,
                   j_rows[None, :].astype(float) / cap])
    raw, cache = forward(actor, x)
    mu, log_sigma = split_head(raw, e)
    sigma = np.exp(log_sigma)
    a, log_pi, _ = sample_squashed(mu, log_sigma, eps)
    b = action_to_scs(a, alloc_rows.T)

    xc = np.vstack([alloc_rows.T / n_total,
                    j_rows[None, :].astype(float) / cap,
                    b / n_total])
    q1, cache1 = forward(critics[0], xc)
    q2, cache2 = forward(critics[1], xc)
    q_min = np.minimum(q1[0], q2[0])
    objective = float((q_min - zeta * log_pi).sum() / denom)

    win1 = q1[0] <= q2[0]
    dx_sum = np.zeros_like(xc)
    for critic, cache_c, win in ((critics[0], cache1, win1),
                                 (critics[1], cache2, ~win1)):
        dy = (win.astype(float) / denom)[None, :]
        _, dxi = backward(critic, cache_c, dy)
        dx_sum += dxi
    dq_db = dx_sum[e + 1:, :] / n_total
    one_m_a2 = 1.0 - np.square(a)
    dq_du = dq_db * (alloc_rows.T * 0.5) * one_m_a2
    dlp_du, dlp_dls = squashed_log_prob_grads(a, sigma, eps)
    scale = zeta / denom
    g_mu = dq_du - scale * dlp_du
    g_ls = dq_du * sigma * eps - scale * dlp_dls
    gate = (raw[e:] > LOG_SIGMA_MIN) & (raw[e:] < LOG_SIGMA_MAX)
    g_out = np.vstack([g_mu, np.where(gate, g_ls, 0.0)])
    grads, _ = backward(actor, cache, g_out)
    return objective, grads


def actor_update(agent: SacAgent, batch, rng: np.random.Generator) -> float:
    """One ascent step on the actor; critics frozen.  Returns the objective."""
    arrays = _stack(batch)
    alloc, k, _, _ = arrays
    h, m = k.shape
    k_flat = k.reshape(-1)
    sel = np.flatnonzero(k_flat > 0)
    if sel.size == 0:
        return 0.0
    pair_h = np.repeat(np.arange(h), m)
    alloc_rows = alloc[pair_h[sel]]
    j_rows = k_flat[sel]
    eps = rng.standard_normal((agent.cell.num_embb, sel.size))
    objective, grads = actor_objective_grads(
        agent.actor, (agent.critic1, agent.critic2), agent.cell,
        agent.cfg.zeta, alloc_rows, j_rows, eps, denom=h * m)
    neg = MlpParams(weights=[-w for w in grads.weights],
                    biases=[-b for b in grads.biases])
    adam_step(agent.actor, neg, agent.adam_actor, lr=agent.cfg.lr)
    return objective


def soft_update(agent: SacAgent, rho: float | None = None):
    """Polyak blend of critic weights into the target copies."""
    rho = agent.cfg.soft_rate if rho is None else rho
    for src, dst in ((agent.critic1, agent.target1),
                     (agent.critic2, agent.target2)):
        for ws, wd in zip(src.weights, dst.weights):
            wd *= 1.0 - rho
            wd += rho * ws
        for bs, bd in zip(src.biases, dst.biases):
            bd *= 1.0 - rho
            bd += rho * bs


def policy_branch_actions(agent: SacAgent, alloc, branches,
                          rngs=None, deterministic: bool = False):
    """Raw squashed actions for the requested branch indices.

    branches: iterable of j >= 1.  With `deterministic` the mean action
    tanh(mu) is returned; otherwise each branch draws its noise from its
    own generator in `rngs` so evaluation order cannot matter.
    """
    e = agent.cell.num_embb
    branches = list(branches)
    x = np.empty((e + 1, len(branches)))
    x[:-1, :] = (np.asarray(alloc, dtype=float) / agent.cell.total_scs)[:, None]
    x[-1, :] = np.asarray(branches, dtype=float) / agent.cell.num_branches
    raw, _ = forward(agent.actor, x)
    mu, log_sigma = split_head(raw, e)
    if deterministic:
        return np.tanh(mu)
    eps = np.empty_like(mu)
    for col, j in enumerate(branches):
        eps[:, col] = rngs[j].standard_normal(e)
    a, _, _ = sample_squashed(mu, log_sigma, eps)
    return a


_NET_FILES = ("actor", "critic1", "critic2", "target1", "target2")


def save_agent(directory, agent: SacAgent):
    """One file per network plus optimiser state, all in the binary format."""
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    nets = (agent.actor, agent.critic1, agent.critic2,
            agent.target1, agent.target2)
    for name, net in zip(_NET_FILES, nets):
        save_mlp(directory / f"{name}.net", net)
    save_adam(directory / "actor.adam", agent.adam_actor, agent.actor.sizes)
    save_adam(directory / "critic1.adam", agent.adam_c1, agent.critic1.sizes)
    save_adam(directory / "critic2.adam", agent.adam_c2, agent.critic2.sizes)


def load_agent(directory, cell: CellConfig, cfg: AgentHyper) -> SacAgent:
    directory = Path(directory)
    nets = {}
    for name in _NET_FILES:
        path = directory / f"{name}.net"
        if not path.exists():
            raise FileNotFoundError(f"checkpoint file missing: {path}")
        nets[name] = load_mlp(path)
    e = cell.num_embb
    if nets["actor"].sizes[0] != e + 1 or nets["actor"].sizes[-1] != 2 * e:
        raise ValueError("actor checkpoint does not match cell dimensions")
    if nets["critic1"].sizes[0] != 2 * e + 1:
        raise ValueError("critic checkpoint does not match cell dimensions")
    agent = SacAgent(cell=cell, cfg=cfg, actor=nets["actor"],
                     critic1=nets["critic1"], critic2=nets["critic2"],
                     target1=nets["target1"], target2=nets["target2"])
    agent.adam_actor = load_adam(directory / "actor.adam", nets["actor"].sizes)
    agent.adam_c1 = load_adam(directory / "critic1.adam", nets["critic1"].sizes)
    agent.adam_c2 = load_adam(directory / "critic2.adam", nets["critic2"].sizes)
    return agent
