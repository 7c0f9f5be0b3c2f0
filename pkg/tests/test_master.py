import math

import numpy as np
import pytest

from qtstomo.bath import BathParams, marcus_rate
from qtstomo.eigensolver import EigenSet, OverlapTable, dense_eigh, overlaps
from qtstomo.master import (PopulationState, RateMatrix, assemble_rates, escape_rate, evolve,
                            initial_state, stationary)
from qtstomo.pauli import build_coupling, build_down_hamiltonian, build_kink_chain, build_source_hamiltonian
from qtstomo.tomography import coupler_for_kink


def levels(values):
    values = np.asarray(values, dtype=float)
    return EigenSet(values, np.eye(len(values)), np.zeros(len(values)))


def fdt_bath(W=0.2, T=0.25):
    return BathParams.from_fdt(W, T)


def two_state(gap=0.1, ov=1.0, bath=None, eps=0.0):
    bath = bath or fdt_bath()
    return assemble_rates(levels([gap]), levels([0.0]), OverlapTable(np.array([[ov]])), eps, bath)


def test_zero_overlap_gives_zero_rates():
    rm = two_state(ov=0.0)
    assert rm.forward[0, 0] == 0 and rm.backward[0, 0] == 0


def test_resonance_is_gaussian_maximum():
    b = fdt_bath()
    up, down = levels([0.0, 0.7]), levels([-1.0])
    tab = OverlapTable(np.array([[0.6], [0.4]]))
    eps_res = 0.7 - (-1.0) + b.eps_p
    grid = eps_res + np.linspace(-0.05, 0.05, 101)
    vals = [assemble_rates(up, down, tab, e, b).forward[1, 0] for e in grid]
    assert int(np.argmax(vals)) == 50
    assert vals[50] == pytest.approx(0.4 * math.sqrt(2 * math.pi) / b.W, rel=1e-14)


def test_log_ratio_is_energy_over_t():
    b = fdt_bath(0.17, 0.31)
    rng = np.random.default_rng(0)
    up, down = levels(np.sort(rng.normal(size=4))), levels(np.sort(rng.normal(size=3)))
    tab = OverlapTable(rng.uniform(0.05, 1, size=(4, 3)))
    eps = 0.2
    rm = assemble_rates(up, down, tab, eps, b)
    x = up.values[:, None] - down.values[None, :] - eps
    assert np.allclose(np.log(rm.backward.T) - np.log(rm.forward), x / b.T, atol=1e-10, rtol=0)


def test_escape_rate_examples():
    b = fdt_bath()
    rm = two_state(gap=0.3, bath=b, eps=0.3 + b.eps_p)
    assert escape_rate(rm) == pytest.approx(math.sqrt(2 * math.pi) / b.W, rel=1e-14)
    off = two_state(gap=0.3, bath=b, eps=0.3 + b.eps_p + 10 * b.W)
    assert escape_rate(off) / escape_rate(rm) == pytest.approx(math.exp(-50), rel=1e-10)
    with pytest.raises(IndexError):
        escape_rate(rm, 1)


def test_escape_rates_are_column_sums():
    b = fdt_bath()
    rng = np.random.default_rng(2)
    rm = assemble_rates(levels([0.0, 0.2, 0.5]), levels([-0.1, 0.1]),
                        OverlapTable(rng.uniform(size=(3, 2))), 0.0, b)
    G = rm.generator()
    assert np.allclose(G.sum(axis=0), 0, atol=1e-15)
    assert np.allclose(rm.down_escape, [escape_rate(rm, 0), escape_rate(rm, 1)])
    assert np.all(rm.forward >= 0) and np.all(rm.backward >= 0)


def test_no_rates_no_motion():
    rm = RateMatrix(np.zeros(1), np.zeros(2), np.zeros((2, 1)), np.zeros((1, 2)), 0.0)
    p0 = PopulationState(0.0, np.array([0.5, 0.25, 0.25]))
    traj = evolve(rm, p0, np.linspace(0, 5, 6))
    assert all(np.array_equal(s.p, p0.p) for s in traj)


def test_two_state_detailed_balance():
    b = fdt_bath()
    gap, eps = 0.1, 0.0
    rm = two_state(gap=gap, bath=b, eps=eps)
    kf, kb = rm.forward[0, 0], rm.backward[0, 0]
    t = np.linspace(0, 20 / (kf + kb), 11)
    traj = evolve(rm, initial_state(rm), t)
    # closed form: P_up(t) = kf/(kf+kb) (1 - exp(-(kf+kb) t))
    exact = kf / (kf + kb) * (1 - np.exp(-(kf + kb) * t))
    assert np.allclose([s.p[1] for s in traj], exact, atol=1e-8)
    ratio = traj[-1].p[1] / traj[-1].p[0]
    assert ratio == pytest.approx(math.exp(-(gap - eps) / b.T), rel=1e-6)
    st = stationary(rm)
    assert st[1] / st[0] == pytest.approx(math.exp(-(gap - eps) / b.T), rel=1e-10)


def n7_rates(l=4):
    b = BathParams.from_millikelvin(10, 12)
    hs = build_source_hamiltonian(build_kink_chain(7, 2.0, 2.0))
    up = dense_eigh(hs)
    up = EigenSet(up.values[:10], up.vectors[:, :10], up.residuals[:10])
    hd = build_down_hamiltonian(hs, build_coupling(coupler_for_kink(7, l, 2.0)))
    down_full = dense_eigh(hd)
    down = EigenSet(down_full.values[:1], down_full.vectors[:, :1], down_full.residuals[:1])
    eps = up.values[0] - down.values[0] + b.eps_p
    return assemble_rates(up, down, overlaps(up, down), eps, b), b


def test_initial_slope_and_conservation():
    rm, _ = n7_rates()
    g0 = escape_rate(rm)
    t1 = 1e-4 / g0
    t = np.concatenate([[0.0, t1], np.linspace(2 * t1, 10 / g0, 200)])
    traj = evolve(rm, initial_state(rm), t)
    slope = (traj[1].p[0] - 1.0) / t1
    assert slope == pytest.approx(-g0, rel=1e-3)
    for s in traj:
        assert abs(s.p.sum() - 1) < 1e-9
        assert s.p.min() >= -1e-12


def test_stationary_is_gibbs():
    rm, b = n7_rates(l=1)
    st = stationary(rm)
    assert np.linalg.norm(rm.generator() @ st) < 1e-15
    x = rm.up_energies - (rm.down_energies[0] + rm.eps)
    # populations span hundreds of decades; compare in log space
    assert np.allclose(np.log(st[1:] / st[0]), -x / b.T, atol=1e-9, rtol=0)


def test_fast_pair_relaxes_to_stationary():
    rm, b = n7_rates(l=1)
    g0 = escape_rate(rm)
    traj = evolve(rm, initial_state(rm), np.linspace(0, 200 / g0, 5))
    st = stationary(rm)
    # the other levels are fed at rates ~1e-10 and stay empty on this scale
    assert traj[-1].p[1] / traj[-1].p[0] == pytest.approx(st[1] / st[0], rel=1e-6)


def test_disconnected_levels_stay_empty():
    rm = RateMatrix(np.zeros(1), np.array([0.0, 5.0]), np.array([[1.0], [0.0]]),
                    np.array([[2.0, 0.0]]), 0.0)
    assert np.allclose(stationary(rm), [2 / 3, 1 / 3, 0.0])


def test_rejects_unnormalized_start():
    rm = two_state()
    with pytest.raises(ValueError):
        evolve(rm, PopulationState(0.0, np.array([0.7, 0.7])), [0, 1])
