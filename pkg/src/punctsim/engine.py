"""Simulation engine: ties channel, scheduler, traffic, policy and PHY
into a per-TTI loop, plus the curriculum pretraining driver.

Every random draw comes from a named substream of the master seed, so
runs are reproducible bit for bit and the evaluation order of codebook
branches cannot change any result.
"""

import time
from dataclasses import dataclass, field

import numpy as np

from .baselines import rp_puncture, sef_puncture
from .core import (
    CellConfig,
    DecodeOutcome,
    PuncturingVector,
    ScheduleVector,
    TtiTrace,
    compute_reward,
    goodput_bits,
    goodput_scs,
)
from .enforcer import enforce_batch
from .neural import action_to_scs
from .phy import (
    ChannelParams,
    DecodabilityModel,
    LinkQuality,
    decode_user,
    erasure_prob,
    snr_from_distance,
)
from .sac import (
    AgentHyper,
    ExperienceRecord,
    ReplayBuffer,
    SacAgent,
    actor_update,
    critic_update,
    make_agent,
    policy_branch_actions,
    soft_update,
)
from .scheduler import DEFAULT_MCS_TABLE, PfState, pf_schedule, select_mcs
from .seeding import substream
from .traffic import TrafficConfig, UrllcQueue, draw_arrivals

POLICIES = ("rp", "sef", "cyrus")


@dataclass
class Streams:
    """Named random substreams.  Each consumer owns exactly one stream."""

    traffic: np.random.Generator
    channel: np.random.Generator
    scenario: np.random.Generator
    batch: np.random.Generator
    target_noise: np.random.Generator
    actor_noise: np.random.Generator
    agent_init: np.random.Generator
    branch: dict            # j -> generator, one per codebook column


def make_streams(master_seed: int, num_branches: int) -> Streams:
    return Streams(
        traffic=substream(master_seed, "traffic"),
        channel=substream(master_seed, "channel"),
        scenario=substream(master_seed, "scenario"),
        batch=substream(master_seed, "training-batch"),
        target_noise=substream(master_seed, "target-noise"),
        actor_noise=substream(master_seed, "actor-noise"),
        agent_init=substream(master_seed, "agent-init"),
        branch={j: substream(master_seed, "policy-branch", j)
                for j in range(1, num_branches + 1)},
    )


@dataclass
class Codebook:
    """Puncture vector per admissible packet count, column j sums to j*L."""

    columns: tuple          # (num_branches + 1) rows of per-user SC counts
    gen_ns: int             # wall-clock build time, all branches

    def column(self, j: int) -> tuple:
        return self.columns[j]

    @property
    def per_branch_us(self) -> float:
        branches = len(self.columns) - 1
        return self.gen_ns / 1e3 / max(branches, 1)


def build_codebook(agent: SacAgent, schedule: ScheduleVector,
                   streams: Streams, deterministic: bool = False) -> Codebook:
    """All branches in one actor forward, then one batched enforcement."""
    cell = agent.cell
    cap = cell.num_branches
    alloc = np.asarray(schedule.alloc, dtype=float)
    t0 = time.perf_counter_ns()
    branches = list(range(1, cap + 1))
    a = policy_branch_actions(agent, alloc, branches,
                              rngs=streams.branch, deterministic=deterministic)
    b = action_to_scs(a, alloc[:, None])
    alloc_rows = np.tile(alloc, (cap, 1))
    demands = np.array(branches) * cell.urllc_sc_len
    enforced = enforce_batch(b.T, alloc_rows, demands)
    gen_ns = time.perf_counter_ns() - t0
    zero = tuple(0 for _ in range(cell.num_embb))
    columns = [zero]
    for row in enforced:
        columns.append(tuple(int(v) for v in row))
    return Codebook(columns=tuple(columns), gen_ns=gen_ns)


def baseline_rows(policy: str, schedule: ScheduleVector, admitted,
                  urllc_sc_len: int) -> list:
    """Per-mini-slot puncture vectors for the rule-based policies."""
    fn = rp_puncture if policy == "rp" else sef_puncture
    rows = []
    for k_tau in admitted:
        if k_tau == 0:
            rows.append(tuple(0 for _ in schedule.alloc))
        else:
            rows.append(fn(schedule, k_tau * urllc_sc_len).punct)
    return rows


@dataclass
class World:
    """All mutable simulation state for one run."""

    cell: CellConfig
    traffic_cfg: TrafficConfig
    channel: ChannelParams
    distances: tuple                # per-eMBB-user distance to the cell, m
    decoder: DecodabilityModel
    policy: str
    streams: Streams
    mcs_table: tuple = DEFAULT_MCS_TABLE
    agent: SacAgent = None
    train: bool = False
    deterministic_policy: bool = False
    pf: PfState = None
    queue: UrllcQueue = None
    buffer: ReplayBuffer = None
    tti: int = 0

    def __post_init__(self):
        if self.policy not in POLICIES:
            raise ValueError(f"unknown policy: {self.policy}")
        if len(self.distances) != self.cell.num_embb:
            raise ValueError("need one distance per eMBB user")
        if self.policy == "cyrus" and self.agent is None:
            raise ValueError("cyrus policy needs an agent")
        if self.pf is None:
            self.pf = PfState.cold_start(self.cell.num_embb)
        if self.queue is None:
            self.queue = UrllcQueue()
        if self.buffer is None and self.agent is not None:
            self.buffer = ReplayBuffer(self.agent.cfg.buffer_capacity)


def make_world(cell: CellConfig, traffic_cfg: TrafficConfig,
               channel: ChannelParams, distances, decoder: DecodabilityModel,
               policy: str, master_seed: int, agent: SacAgent = None,
               hyper: AgentHyper = None, train: bool = False,
               deterministic_policy: bool = False,
               mcs_table=DEFAULT_MCS_TABLE, pf_beta: float = None) -> World:
    """Build a run-ready world; a missing agent is drawn from agent-init."""
    streams = make_streams(master_seed, cell.num_branches)
    if policy == "cyrus" and agent is None:
        agent = make_agent(cell, hyper if hyper is not None else AgentHyper(),
                           streams.agent_init)
    pf = None
    if pf_beta is not None:
        pf = PfState.cold_start(cell.num_embb, beta=pf_beta)
    return World(cell=cell, traffic_cfg=traffic_cfg, channel=channel,
                 distances=tuple(float(d) for d in distances),
                 decoder=decoder, policy=policy, streams=streams,
                 mcs_table=mcs_table, agent=agent, train=train,
                 deterministic_policy=deterministic_policy, pf=pf)


def _draw_links(world: World) -> tuple:
    """Per-user shadowed SNR, MCS pick and erasure probability."""
    e = world.cell.num_embb
    shadow = world.streams.channel.normal(0.0, world.channel.shadowing_std_db,
                                          size=e)
    entries, qualities, rates = [], [], []
    for u in range(e):
        snr = snr_from_distance(world.distances[u], world.channel) + shadow[u]
        entry = select_mcs(snr, world.mcs_table)
        q = LinkQuality(snr_db=snr,
                        sc_erasure_prob=erasure_prob(snr, entry.snr_req_db))
        entries.append(entry)
        qualities.append(q)
        rates.append((1.0 - q.sc_erasure_prob) * entry.bits_per_symbol)
    return entries, qualities, rates


def _train_step(world: World):
    agent, buf = world.agent, world.buffer
    if len(buf) < agent.cfg.batch:
        return
    batch = buf.sample(agent.cfg.batch, world.streams.batch)
    critic_update(agent, batch, world.streams.target_noise)
    actor_update(agent, batch, world.streams.actor_noise)
    soft_update(agent)


def run_tti(world: World) -> TtiTrace:
    """Advance the world by one TTI and return its trace."""
    cell = world.cell
    m = cell.minislots
    entries, qualities, rates = _draw_links(world)
    schedule = pf_schedule(world.pf, rates, [en.index for en in entries], cell)

    raw = draw_arrivals(world.traffic_cfg, m, world.streams.traffic)
    profile = world.queue.step(raw, cell.num_branches)
    admitted = profile.admitted

    codebook = None
    if world.policy == "cyrus":
        codebook = build_codebook(world.agent, schedule, world.streams,
                                  deterministic=world.deterministic_policy)
        rows = [codebook.column(k_tau) for k_tau in admitted]
    else:
        rows = baseline_rows(world.policy, schedule, admitted,
                             cell.urllc_sc_len)
    for k_tau, row in zip(admitted, rows):
        PuncturingVector(row).check_against(schedule)
        if sum(row) != k_tau * cell.urllc_sc_len:
            raise AssertionError("puncture mass must match demand")

    ok = []
    for u in range(cell.num_embb):
        per_slot = tuple(rows[tau][u] for tau in range(m))
        ok.append(decode_user(world.decoder, schedule.alloc[u], entries[u],
                              per_slot, qualities[u], m,
                              world.streams.channel))
    outcome = DecodeOutcome(ok)
    reward = compute_reward(schedule, outcome, cell.total_scs)

    if world.agent is not None and world.train:
        world.buffer.push(ExperienceRecord(
            alloc=schedule.alloc, k=tuple(admitted),
            punctures=tuple(tuple(r) for r in rows), reward=reward))
        _train_step(world)

    trace = TtiTrace(tti=world.tti, schedule=schedule, admitted=tuple(admitted),
                     applied=tuple(tuple(r) for r in rows), outcome=outcome,
                     reward=reward, queue_len=world.queue.backlog,
                     gen_ns=codebook.gen_ns if codebook is not None else 0)
    world.tti += 1
    return trace


def run_many(world: World, num_ttis: int) -> list:
    return [run_tti(world) for _ in range(num_ttis)]


# ---------------------------------------------------------------------------
# curriculum pretraining


@dataclass(frozen=True)
class CurriculumStage:
    """Fixed per-TTI packet load, rising across stages."""

    packets: int
    window: int             # TTIs sharing one synthetic schedule
    episodes: int

    def __post_init__(self):
        if self.packets < 0 or self.window < 1 or self.episodes < 1:
            raise ValueError("bad curriculum stage")


DEFAULT_CURRICULUM = (
    CurriculumStage(1, 50, 10_000),
    CurriculumStage(2, 40, 10_000),
    CurriculumStage(3, 30, 10_000),
    CurriculumStage(4, 20, 14_000),
    CurriculumStage(5, 10, 14_000),
    CurriculumStage(6, 5, 14_000),
    CurriculumStage(7, 2, 14_000),
    CurriculumStage(8, 1, 14_000),
    CurriculumStage(9, 1, 14_000),
)


def _synthetic_schedule(cell: CellConfig, mcs_table,
                        rng: np.random.Generator) -> ScheduleVector:
    """Uniform random RB ownership and MCS picks; covers the whole band."""
    owners = rng.integers(0, cell.num_embb, size=cell.num_rbs)
    alloc = np.bincount(owners, minlength=cell.num_embb) * cell.rb_size
    mcs = rng.integers(0, len(mcs_table), size=cell.num_embb)
    return ScheduleVector(alloc=alloc.tolist(), mcs=mcs.tolist())


def _place_packets(packets: int, minislots: int,
                   rng: np.random.Generator) -> tuple:
    """Spread a fixed packet count uniformly over the mini-slots."""
    if packets == 0:
        return tuple(0 for _ in range(minislots))
    counts = rng.multinomial(packets, np.full(minislots, 1.0 / minislots))
    return tuple(int(c) for c in counts)


def acl_pretrain(agent: SacAgent, decoder: DecodabilityModel = None,
                 stages=DEFAULT_CURRICULUM, master_seed: int = 0,
                 mcs_table=DEFAULT_MCS_TABLE, progress=None) -> list:
    """Train on synthetic scenarios of rising difficulty.

    Each window draws one random schedule; every TTI places the stage's
    packet count at random over the mini-slots and runs the admit,
    puncture, decode, reward, update pipeline.  Returns one reward array
    per stage.
    """
    cell = agent.cell
    m = cell.minislots
    streams = make_streams(master_seed, cell.num_branches)
    if decoder is None:
        decoder = DecodabilityModel("threshold")
    buf = ReplayBuffer(agent.cfg.buffer_capacity)
    per_stage = []
    for si, stage in enumerate(stages):
        rewards = np.empty(stage.episodes)
        queue = UrllcQueue()
        schedule = None
        for ep in range(stage.episodes):
            if ep % stage.window == 0:
                schedule = _synthetic_schedule(cell, mcs_table,
                                               streams.scenario)
                queue = UrllcQueue()
            raw = _place_packets(stage.packets, m, streams.scenario)
            profile = queue.step(raw, cell.num_branches)
            admitted = profile.admitted

            codebook = build_codebook(agent, schedule, streams)
            rows = [codebook.column(k_tau) for k_tau in admitted]
            ok = []
            for u in range(cell.num_embb):
                per_slot = tuple(rows[tau][u] for tau in range(m))
                entry = mcs_table[schedule.mcs[u]]
                quality = LinkQuality(snr_db=entry.snr_req_db,
                                      sc_erasure_prob=0.0)
                ok.append(decode_user(decoder, schedule.alloc[u], entry,
                                      per_slot, quality, m, streams.channel))
            reward = compute_reward(schedule, DecodeOutcome(ok),
                                    cell.total_scs)
            rewards[ep] = reward

            buf.push(ExperienceRecord(
                alloc=schedule.alloc, k=tuple(admitted),
                punctures=tuple(tuple(r) for r in rows), reward=reward))
            if len(buf) >= agent.cfg.batch:
                batch = buf.sample(agent.cfg.batch, streams.batch)
                critic_update(agent, batch, streams.target_noise)
                actor_update(agent, batch, streams.actor_noise)
                soft_update(agent)
            if progress is not None and (ep + 1) % 1000 == 0:
                progress(si, ep + 1, float(np.mean(rewards[max(0, ep - 255):ep + 1])))
        per_stage.append(rewards)
    return per_stage
