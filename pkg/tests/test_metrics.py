import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from hypothesis.extra.numpy import arrays

from shadowban.dynamics import DynamicsParams
from shadowban.metrics import (PartisanSplit, edge_polarity_ban_stats, histogram, shadow_ban_rate,
                               summarize)
from shadowban.network import DirectedNetwork, generate_path, generate_sbm
from shadowban.policy import BanBudget, compute_coefficients, solve_policy


def path_policy():
    net, theta = generate_path(11)
    b = compute_coefficients(net, theta, "max-mean", DynamicsParams(0.003, 0.101))
    return net, theta, solve_policy(b, BanBudget(0.5, 1.0))


def test_summarize_linear():
    theta = np.linspace(0, 1, 11)
    f = summarize(theta)
    assert f.quantiles[2] == pytest.approx(0.5)
    assert f.quantiles[1] == pytest.approx(0.25)
    assert f.quantiles[3] == pytest.approx(0.75)
    assert f.mean_ban_strength == 0.0


def test_summarize_constant_and_zero_policy():
    net, _ = generate_path(4)
    f = summarize(np.full(4, 0.3), np.zeros(net.edge_count), network=net)
    assert set(f.quantiles) == {0.3}
    assert f.variance == 0.0
    assert f.mean_ban_strength == 0.0
    assert f.group_ban_rates == {"low": 0.0, "high": None}


def test_summarize_empty():
    with pytest.raises(ValueError):
        summarize([])


@given(arrays(np.float64, st.integers(1, 40), elements=st.floats(0, 1)))
def test_quantiles_monotone(theta):
    q = summarize(theta).quantiles
    assert all(a <= b for a, b in zip(q, q[1:]))


def test_path_ban_rate_initial_policy():
    net, theta, pol = path_policy()
    banned = np.zeros(11, bool)
    banned[net.source[pol.u > 0]] = True
    assert banned.sum() == 10 and not banned[10]
    rates = shadow_ban_rate(net, pol, theta)
    # <= 0.5 is low: six low users (all banned), five high with the top one clean
    assert rates == {"low": 1.0, "high": 4 / 5}


def test_ban_rate_zero_and_single_edge():
    net, theta = generate_path(5)
    assert shadow_ban_rate(net, np.zeros(net.edge_count), theta) == {"low": 0.0, "high": 0.0}
    u = np.zeros(net.edge_count)
    u[3] = 0.2  # edge 2 -> 1
    rates = shadow_ban_rate(net, u, theta)
    assert rates == {"low": 1 / 3, "high": 0.0}


def test_ban_rate_empty_group_is_absent():
    net = DirectedNetwork.from_edges(2, [(0, 1, 1.0)])
    assert shadow_ban_rate(net, [1.0], [0.1, 0.2]) == {"low": 0.5, "high": None}


@given(st.integers(0, 1000), st.floats(0.01, 1.0))
def test_ban_rate_depends_on_positivity_only(seed, scale):
    net, _ = generate_sbm([5, 5], [[0.6, 0.3], [0.3, 0.6]], [0, 0], seed)
    rng = np.random.default_rng(seed)
    theta = rng.random(10)
    u = rng.random(net.edge_count) * (rng.random(net.edge_count) < 0.3)
    if u.size and u.max() > 0:
        u = u / u.max()
    assert shadow_ban_rate(net, u, theta) == shadow_ban_rate(net, u * scale, theta)


def test_polarity_path_downward_only():
    net, theta, pol = path_policy()
    stats = edge_polarity_ban_stats(net, pol, theta)
    assert stats.upward_count == 0 and stats.neutral_count == 0
    assert stats.downward_count == 10
    assert stats.downward_mass == pytest.approx(10.0)


def test_polarity_zero_policy():
    net, theta = generate_path(6)
    stats = edge_polarity_ban_stats(net, np.zeros(net.edge_count), theta)
    assert (stats.upward_count, stats.downward_count, stats.neutral_count) == (0, 0, 0)


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 10_000))
def test_polarity_max_mean_never_bans_upward(seed):
    rng = np.random.default_rng(seed)
    n = int(rng.integers(4, 9))
    pairs = [(j, i) for j in range(n) for i in range(n) if i != j]
    chosen = rng.choice(len(pairs), size=min(20, len(pairs)), replace=False)
    net = DirectedNetwork.from_edges(n, [(*pairs[c], 1.0) for c in sorted(chosen)])
    theta = rng.random(n)
    b = compute_coefficients(net, theta, "max-mean", DynamicsParams(0.003, 1.0))
    pol = solve_policy(b, BanBudget(rng.random(), rng.random()))
    # brute force: every banned edge has a source below its target
    for e, (j, i, _) in enumerate(net.edges()):
        if pol.u[e] > 0:
            assert theta[j] < theta[i]
    assert edge_polarity_ban_stats(net, pol, theta).upward_count == 0


def test_histogram_cases():
    edges, dens = histogram([0.25, 0.75], 2)
    assert dens.tolist() == [1.0, 1.0]
    assert edges.tolist() == [0.0, 0.5, 1.0]
    _, dens = histogram(np.full(7, 0.42), 10)
    assert (dens > 0).sum() == 1
    edges, dens = histogram((np.arange(100) + 0.5) / 100, 10)
    assert np.sum(dens * np.diff(edges)) == pytest.approx(1.0)
    assert dens == pytest.approx(np.ones(10))
    with pytest.raises(ValueError):
        histogram([0.5], 0)


@given(arrays(np.float64, st.integers(1, 50), elements=st.floats(0, 1)), st.integers(1, 30))
def test_histogram_normalised(theta, bins):
    edges, dens = histogram(theta, bins)
    assert np.sum(dens * np.diff(edges)) == pytest.approx(1.0)


def test_split_threshold():
    assert PartisanSplit().high_mask([0.5, 0.5000001]).tolist() == [False, True]
    with pytest.raises(ValueError):
        PartisanSplit(float("nan"))
