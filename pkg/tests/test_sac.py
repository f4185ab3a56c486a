import numpy as np
import pytest
import scipy.stats

from punctsim.core import CellConfig
from punctsim.neural import forward
from punctsim.sac import (
    AgentHyper,
    ExperienceRecord,
    ReplayBuffer,
    SacAgent,
    actor_objective_grads,
    compute_target,
    critic_loss_grads,
    critic_targets,
    critic_update,
    actor_update,
    load_agent,
    make_agent,
    save_agent,
    soft_update,
    _critic_inputs,
    _stack,
)


def _tiny_cell():
    return CellConfig(total_scs=24, num_embb=2, urllc_sc_len=12,
                      minislots=3, rb_size=12)


def _tiny_agent(zeta=0.2, seed=0):
    hyper = AgentHyper(zeta=zeta, batch=4, actor_hidden=(4,),
                       critic_hidden=(4,), buffer_capacity=32,
                       actor_final_scale=1.0)
    return make_agent(_tiny_cell(), hyper, np.random.default_rng(seed))


def _record(alloc=(12, 12), k=(1, 0, 2), reward=-0.25):
    rows = []
    for kt in k:
        if kt == 0:
            rows.append((0, 0))
        else:
            rows.append((6 * kt, 6 * kt))
    return ExperienceRecord(alloc=alloc, k=k, punctures=tuple(rows),
                            reward=reward)


def test_buffer_fifo_overwrites_oldest():
    buf = ReplayBuffer(capacity=3)
    recs = [_record(reward=-0.1 * i) for i in range(5)]
    for r in recs:
        buf.push(r)
    assert len(buf) == 3
    kept = {r.reward for r in buf._records}
    assert kept == {recs[2].reward, recs[3].reward, recs[4].reward}


def test_buffer_samples_uniformly():
    buf = ReplayBuffer(capacity=100)
    for i in range(100):
        buf.push(_record(reward=-i / 1000.0))
    rng = np.random.default_rng(77)
    draws = buf.sample(100_000, rng)
    counts = np.zeros(100)
    for r in draws:
        counts[int(round(-r.reward * 1000))] += 1
    stat = scipy.stats.chisquare(counts)
    assert stat.pvalue > 1e-3


def test_buffer_rejects_empty_sample():
    with pytest.raises(ValueError):
        ReplayBuffer(4).sample(1, np.random.default_rng(0))


def test_terminal_target_is_reward():
    agent = _tiny_agent()
    rec = _record(reward=-0.375)
    rng = np.random.default_rng(3)
    last = len(rec.k) - 1
    assert compute_target(agent, rec, last, rng) == -0.375


def test_zero_branch_target_has_no_entropy_term():
    # next mini-slot with k=0 bootstraps the zero action, entropy-free
    agent = _tiny_agent(zeta=5.0)   # huge zeta would show up if included
    rec = _record(k=(1, 0, 1))
    rng = np.random.default_rng(4)
    got = compute_target(agent, rec, 0, rng)
    cell = agent.cell
    x = np.array([[12 / 24], [12 / 24], [0.0], [0.0], [0.0]])
    q1, _ = forward(agent.target1, x)
    q2, _ = forward(agent.target2, x)
    expect = agent.cfg.discount * min(q1[0, 0], q2[0, 0])
    assert abs(got - expect) < 1e-12


def test_positive_branch_target_uses_min_critic_and_entropy():
    agent = _tiny_agent(zeta=0.0)
    rec = _record(k=(1, 2, 1))
    # with zeta 0 the target is discount * min-target-critic of the
    # enforced fresh sample; bound it by both critics evaluated directly
    rng = np.random.default_rng(8)
    got = compute_target(agent, rec, 0, rng)
    assert np.isfinite(got)
    arrays = _stack([rec])
    ys = critic_targets(agent, arrays, np.random.default_rng(8))
    assert abs(got - ys[0]) < 1e-12


def test_critic_gradients_match_fd():
    agent = _tiny_agent()
    batch = [_record(k=(1, 0, 2), reward=-0.3),
             _record(k=(0, 2, 1), reward=-0.6)]
    arrays = _stack(batch)
    x = _critic_inputs(arrays, agent.cell)
    y = critic_targets(agent, arrays, np.random.default_rng(5))
    loss, grads = critic_loss_grads(agent.critic1, x, y)
    h = 1e-6
    for layer in range(len(agent.critic1.weights)):
        w = agent.critic1.weights[layer]
        idx = (0, 0)
        orig = w[idx]
        w[idx] = orig + h
        lp, _ = critic_loss_grads(agent.critic1, x, y)
        w[idx] = orig - h
        lm, _ = critic_loss_grads(agent.critic1, x, y)
        w[idx] = orig
        fd = (lp - lm) / (2 * h)
        rel = abs(fd - grads.weights[layer][idx]) / max(1e-8, abs(fd))
        assert rel < 1e-3


def test_actor_gradients_match_fd():
    agent = _tiny_agent()
    rng = np.random.default_rng(9)
    alloc_rows = np.array([[12.0, 12.0], [24.0, 0.0]])
    j_rows = np.array([1, 2])
    eps = rng.standard_normal((2, 2))
    critics = (agent.critic1, agent.critic2)

    def objective():
        obj, _ = actor_objective_grads(agent.actor, critics, agent.cell,
                                       agent.cfg.zeta, alloc_rows, j_rows,
                                       eps, denom=6)
        return obj

    _, grads = actor_objective_grads(agent.actor, critics, agent.cell,
                                     agent.cfg.zeta, alloc_rows, j_rows,
                                     eps, denom=6)
    h = 1e-6
    checked = 0
    for layer in range(len(agent.actor.weights)):
        w = agent.actor.weights[layer]
        for idx in [(0, 0), (w.shape[0] - 1, w.shape[1] - 1)]:
            orig = w[idx]
            w[idx] = orig + h
            op = objective()
            w[idx] = orig - h
            om = objective()
            w[idx] = orig
            fd = (op - om) / (2 * h)
            got = grads.weights[layer][idx]
            assert abs(fd - got) < 1e-3 * max(1.0, abs(fd))
            checked += 1
    assert checked >= 4


def test_updates_run_and_soft_update_blends():
    agent = _tiny_agent()
    batch = [_record(k=(1, 1, 0), reward=-0.2),
             _record(k=(2, 0, 1), reward=-0.8)]
    before = [w.copy() for w in agent.critic1.weights]
    t_before = agent.target1.weights[0].copy()
    critic_update(agent, batch, np.random.default_rng(1))
    actor_update(agent, batch, np.random.default_rng(2))
    assert any(not np.array_equal(a, b)
               for a, b in zip(before, agent.critic1.weights))
    soft_update(agent, rho=0.25)
    expect = 0.75 * t_before + 0.25 * agent.critic1.weights[0]
    assert np.allclose(agent.target1.weights[0], expect)


def test_actor_update_skips_all_zero_branches():
    agent = _tiny_agent()
    batch = [_record(k=(0, 0, 0), reward=0.0)]
    w_before = [w.copy() for w in agent.actor.weights]
    out = actor_update(agent, batch, np.random.default_rng(0))
    assert out == 0.0
    assert all(np.array_equal(a, b)
               for a, b in zip(w_before, agent.actor.weights))


def test_agent_checkpoint_round_trip(tmp_path):
    agent = _tiny_agent()
    batch = [_record(), _record(k=(2, 1, 0))]
    critic_update(agent, batch, np.random.default_rng(1))
    save_agent(tmp_path, agent)
    again = load_agent(tmp_path, agent.cell, agent.cfg)
    for a, b in zip(agent.critic1.weights, again.critic1.weights):
        assert np.array_equal(a, b)
    assert again.adam_c1.t == agent.adam_c1.t


def test_load_agent_rejects_wrong_cell(tmp_path):
    agent = _tiny_agent()
    save_agent(tmp_path, agent)
    other = CellConfig(total_scs=36, num_embb=3, urllc_sc_len=12,
                       minislots=3, rb_size=12)
    with pytest.raises(ValueError):
        load_agent(tmp_path, other, agent.cfg)


def test_record_validation():
    with pytest.raises(ValueError):
        ExperienceRecord(alloc=(12, 12), k=(1, 1), punctures=((6, 6),),
                         reward=0.0)
