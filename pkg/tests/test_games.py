import json

import numpy as np
import pytest

from qldlab.games import (
    InvalidNetworkError,
    NetworkGame,
    RegularNetwork,
    ShapeError,
    all_rewards,
    build_circulant,
    build_full,
    build_ring,
    expected_payoff,
    game_from_json,
    game_to_json,
    random_strategy,
    reward,
    uniform_strategy,
)


def make_game(network, n, rng):
    payoffs = {}
    for k, l in network.sorted_edges():
        payoffs[(k, l)] = rng.standard_normal((n, n))
        payoffs[(l, k)] = rng.standard_normal((n, n))
    return NetworkGame(network, n, payoffs)


def zero_game(network, n):
    payoffs = {}
    for k, l in network.sorted_edges():
        payoffs[(k, l)] = np.zeros((n, n))
        payoffs[(l, k)] = np.zeros((n, n))
    return NetworkGame(network, n, payoffs)


class TestNetworks:
    def test_ring_triangle(self):
        net = build_ring(3)
        assert net.degree == 2
        assert len(net.edges) == 3

    def test_ring_five(self):
        net = build_ring(5)
        assert net.edges == frozenset({(0, 1), (1, 2), (2, 3), (3, 4), (0, 4)})

    def test_ring_fifty(self):
        net = build_ring(50)
        assert len(net.edges) == 50
        assert all(len(net.neighbours(k)) == 2 for k in range(50))

    def test_ring_too_small(self):
        with pytest.raises(InvalidNetworkError):
            build_ring(2)

    def test_full_two(self):
        net = build_full(2)
        assert net.degree == 1
        assert net.edges == frozenset({(0, 1)})

    def test_full_four(self):
        net = build_full(4)
        assert len(net.edges) == 6
        assert net.degree == 3

    def test_full_seven(self):
        net = build_full(7)
        assert len(net.edges) == 21
        assert net.degree == 6

    def test_full_too_small(self):
        with pytest.raises(InvalidNetworkError):
            build_full(1)

    def test_circulant_reduces_to_ring(self):
        assert build_circulant(6, [1]).edges == build_ring(6).edges

    def test_circulant_reduces_to_full(self):
        assert build_circulant(6, [1, 2, 3]).edges == build_full(6).edges

    def test_circulant_degree_by_enumeration(self):
        # oracle: enumerate the expected edge set by hand
        expected = set()
        for k in range(8):
            for d in (1, 2):
                expected.add(tuple(sorted((k, (k + d) % 8))))
        net = build_circulant(8, [1, 2])
        assert net.edges == frozenset(expected)
        assert net.degree == 4

    def test_circulant_half_offset_odd_degree(self):
        net = build_circulant(6, [1, 3])
        assert net.degree == 3

    def test_circulant_bad_offsets(self):
        with pytest.raises(InvalidNetworkError):
            build_circulant(8, [1, 1])
        with pytest.raises(InvalidNetworkError):
            build_circulant(8, [5])
        with pytest.raises(InvalidNetworkError):
            build_circulant(8, [0])

    @pytest.mark.parametrize("net", [build_ring(9), build_full(6), build_circulant(10, [1, 3])])
    def test_degree_regularity(self, net):
        degs = [len(net.neighbours(k)) for k in range(net.num_agents)]
        assert min(degs) == max(degs) == net.degree

    def test_irregular_rejected(self):
        with pytest.raises(InvalidNetworkError):
            RegularNetwork(4, frozenset({(0, 1), (1, 2)}))

    def test_self_loop_rejected(self):
        with pytest.raises(InvalidNetworkError):
            RegularNetwork(3, frozenset({(0, 0), (1, 2), (0, 1)}))


class TestReward:
    def test_zero_game(self):
        net = build_ring(4)
        g = zero_game(net, 3)
        x = uniform_strategy(4, 3)
        assert np.array_equal(reward(g, x, 0), np.zeros(3))

    def test_identity_edge(self):
        net = build_full(2)
        g = NetworkGame(net, 2, {(0, 1): np.eye(2), (1, 0): np.eye(2)})
        x = np.array([[0.5, 0.5], [1.0, 0.0]])
        # agent 1 plays (1,0); agent 0's reward is the first identity column
        assert np.allclose(reward(g, x, 0), [1.0, 0.0])

    def test_matches_loop_oracle(self):
        # brute-force triple loop over neighbours and both action indices
        rng = np.random.default_rng(5)
        net = build_ring(3)
        g = make_game(net, 3, rng)
        x = random_strategy(3, 3, rng)
        for k in range(3):
            expect = np.zeros(3)
            for l in net.neighbours(k):
                for i in range(3):
                    for j in range(3):
                        expect[i] += g.payoffs[(k, l)][i, j] * x[l, j]
            assert np.abs(reward(g, x, k) - expect).max() < 1e-12

    def test_expected_payoff_zero(self):
        net = build_ring(4)
        assert expected_payoff(zero_game(net, 2), uniform_strategy(4, 2), 1) == 0.0

    def test_expected_payoff_identity(self):
        net = build_full(2)
        g = NetworkGame(net, 2, {(0, 1): np.eye(2), (1, 0): np.eye(2)})
        x = np.array([[1.0, 0.0], [1.0, 0.0]])
        assert expected_payoff(g, x, 0) == pytest.approx(1.0)

    def test_expected_payoff_loop_oracle(self):
        rng = np.random.default_rng(11)
        net = build_full(4)
        g = make_game(net, 2, rng)
        x = random_strategy(4, 2, rng)
        for k in range(4):
            expect = 0.0
            for l in net.neighbours(k):
                for i in range(2):
                    for j in range(2):
                        expect += x[k, i] * g.payoffs[(k, l)][i, j] * x[l, j]
            assert abs(expected_payoff(g, x, k) - expect) < 1e-12

    @pytest.mark.parametrize("seed", range(5))
    def test_bilinearity_in_each_opponent(self, seed):
        rng = np.random.default_rng(seed)
        net = build_ring(5)
        g = make_game(net, 4, rng)
        x = random_strategy(5, 4, rng)
        y = x.copy()
        y[1] = random_strategy(1, 4, rng)[0]
        alpha = rng.uniform()
        mix = x.copy()
        mix[1] = alpha * x[1] + (1 - alpha) * y[1]
        blend = alpha * reward(g, x, 0) + (1 - alpha) * reward(g, y, 0)
        assert np.abs(reward(g, mix, 0) - blend).max() < 1e-12

    def test_reward_depends_only_on_neighbours(self):
        rng = np.random.default_rng(3)
        net = build_ring(6)
        g = make_game(net, 3, rng)
        x = random_strategy(6, 3, rng)
        far = x.copy()
        far[3] = random_strategy(1, 3, rng)[0]  # agent 3 is not adjacent to 0
        assert np.array_equal(reward(g, x, 0), reward(g, far, 0))

    def test_all_rewards_matches_per_agent(self):
        rng = np.random.default_rng(8)
        net = build_full(5)
        g = make_game(net, 3, rng)
        x = random_strategy(5, 3, rng)
        stacked = all_rewards(g, x)
        for k in range(5):
            assert np.abs(stacked[k] - reward(g, x, k)).max() < 1e-12

    def test_shape_mismatch(self):
        net = build_ring(4)
        g = zero_game(net, 3)
        with pytest.raises(ShapeError):
            reward(g, uniform_strategy(4, 2), 0)


class TestGameConstruction:
    def test_missing_direction_rejected(self):
        net = build_full(2)
        with pytest.raises(ShapeError):
            NetworkGame(net, 2, {(0, 1): np.eye(2)})

    def test_wrong_shape_rejected(self):
        net = build_full(2)
        with pytest.raises(ShapeError):
            NetworkGame(net, 2, {(0, 1): np.eye(2), (1, 0): np.eye(3)})

    def test_json_round_trip(self):
        rng = np.random.default_rng(2)
        net = build_ring(4)
        g = make_game(net, 3, rng)
        back = game_from_json(game_to_json(g))
        assert back.network.edges == g.network.edges
        assert back.num_actions == g.num_actions
        for edge, mat in g.payoffs.items():
            assert np.array_equal(back.payoffs[edge], mat)

    def test_json_document_shape(self):
        net = build_full(2)
        g = NetworkGame(net, 2, {(0, 1): np.eye(2), (1, 0): -np.eye(2)})
        doc = json.loads(game_to_json(g))
        assert doc["N"] == 2 and doc["n"] == 2 and doc["degree"] == 1
        assert doc["edges"] == [[0, 1]]
        assert doc["payoffs"]["0->1"] == [1.0, 0.0, 0.0, 1.0]
