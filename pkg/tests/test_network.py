import numpy as np
import pytest
from hypothesis import given, strategies as st

from zigzag_net import rng as crng
from zigzag_net.errors import InvalidProbability, NotFound
from zigzag_net.network import ErasureModel, Topology, channel_block, neighbors, sample_channel


def test_complete_two_by_one():
    topo = Topology.complete(2, 1)
    assert neighbors(topo, ("receiver", 0)) == (0, 1)
    assert neighbors(topo, ("sender", 1)) == (0,)


def test_missing_edge_excluded():
    topo = Topology.from_edges([(0, 0), (1, 0), (1, 1), (2, 1)])
    assert topo.in_neighbors(0) == (0, 1)
    assert topo.in_neighbors(1) == (1, 2)
    assert 2 not in topo.in_neighbors(0)
    assert topo.out_neighbors(1) == (0, 1)


def test_single_receiver_degree():
    assert len(Topology.single_receiver(7).in_neighbors(0)) == 7


def test_unknown_nodes():
    topo = Topology.complete(2, 1)
    with pytest.raises(NotFound):
        neighbors(topo, ("receiver", 3))
    with pytest.raises(NotFound):
        neighbors(topo, ("relay", 0))
    with pytest.raises(NotFound):
        Topology(2, 1, frozenset({(0, 1)}))


def test_isolated_nodes_rejected_for_experiments():
    with pytest.raises(ValueError):
        Topology(2, 2, frozenset({(0, 0), (1, 0)})).validate_for_experiment()
    with pytest.raises(ValueError):
        Topology(3, 1, frozenset({(0, 0), (1, 0)})).validate_for_experiment()


def test_p_zero_and_one():
    topo = Topology.complete(3, 2)
    for t in range(50):
        assert all(sample_channel(topo, 0.0, 5, t).connected.values())
        assert not any(sample_channel(topo, 1.0, 5, t).connected.values())


@pytest.mark.parametrize("p", [-0.1, 1.5, float("nan")])
def test_invalid_probability(p):
    with pytest.raises(InvalidProbability):
        sample_channel(Topology.complete(1, 1), p, 0, 0)


def test_sample_defined_on_edges_only():
    topo = Topology.from_edges([(0, 0), (1, 0), (1, 1), (2, 1)])
    s = sample_channel(topo, 0.5, 1, 3)
    assert set(s.connected) == set(topo.edges)


def test_connect_rate_one_million_slots():
    topo = Topology.complete(1, 1)
    block = channel_block(topo, ErasureModel(topo, 1 / 3), seed=11, trial=0, t0=0, nslots=1_000_000)
    assert abs(block[:, 0, 0].mean() - 2 / 3) < 0.002


def test_edges_uncorrelated():
    topo = Topology.complete(2, 1)
    block = channel_block(topo, ErasureModel(topo, 1 / 3), seed=3, trial=0, t0=0, nslots=1_000_000)
    rho = np.corrcoef(block[:, 0, 0].astype(float), block[:, 1, 0].astype(float))[0, 1]
    assert abs(rho) < 0.01


def test_block_matches_scalar_sampler():
    topo = Topology.from_edges([(0, 0), (1, 0), (1, 1), (2, 1)])
    model = ErasureModel(topo, 0.4)
    block = channel_block(topo, model, seed=9, trial=2, t0=100, nslots=40)
    for k in range(40):
        s = sample_channel(topo, model, 9, 100 + k, trial=2)
        for (i, j), c in s.connected.items():
            assert block[k, i, j] == c


@given(st.integers(0, 2**32), st.integers(0, 10**6), st.floats(0, 1))
def test_sampling_reproducible(seed, t, p):
    topo = Topology.complete(3, 2)
    assert sample_channel(topo, p, seed, t) == sample_channel(topo, p, seed, t)


def test_per_link_map():
    topo = Topology.complete(2, 1)
    m = ErasureModel(topo, {(0, 0): 0.0, (1, 0): 1.0})
    assert m.uniform is None
    s = sample_channel(topo, m, 0, 0)
    assert s.connected == {(0, 0): True, (1, 0): False}
    with pytest.raises(InvalidProbability):
        ErasureModel(topo, {(0, 0): 0.1})


def test_trial_streams_differ():
    a = [crng.draw(crng.trial_key(1, crng.Stream.CHANNEL, 0), t) for t in range(8)]
    b = [crng.draw(crng.trial_key(1, crng.Stream.CHANNEL, 1), t) for t in range(8)]
    c = [crng.draw(crng.trial_key(1, crng.Stream.TRANSMIT, 0), t) for t in range(8)]
    assert a != b and a != c


def test_below_is_unbiased_enough():
    key = crng.trial_key(0, crng.Stream.PAYLOAD, 0)
    counts = np.bincount([crng.below(crng.draw(key, t), 5) for t in range(50_000)], minlength=5)
    assert counts.min() > 9_600 and counts.max() < 10_400
