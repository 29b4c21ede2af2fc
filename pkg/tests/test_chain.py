import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from ergodic_annealing import rng
from ergodic_annealing.chain import (
    ChainConfig,
    FiniteActionSpace,
    MatrixProposal,
    ProposalKernel,
    Trajectory,
    UniformProposal,
    UtilityTable,
    acceptance_probability,
    empirical_frequency,
    gibbs_distribution,
    limit_distribution,
    metropolis_step,
    run_chain,
    total_variation,
    transition_matrix,
)
from util import CountingGenerator, lazy_uniform_kernel, sinkhorn_symmetric


class TestAcceptanceProbability:
    def test_better_always_accepted(self):
        assert acceptance_probability(0.3, 0.7, 5.0) == 1.0

    def test_equal_always_accepted(self):
        for beta in (1e-6, 1.0, 1e6):
            assert acceptance_probability(0.42, 0.42, beta) == 1.0

    def test_half_for_log_two_gap(self):
        assert acceptance_probability(math.log(2), 0.0, 1.0) == pytest.approx(0.5, rel=1e-12)

    def test_huge_beta_underflows_to_zero(self):
        assert acceptance_probability(1.0, 0.0, 1e6) < 1e-300

    @pytest.mark.parametrize("bad", [math.nan, math.inf, -math.inf])
    def test_non_finite_utilities_rejected(self, bad):
        with pytest.raises(ValueError):
            acceptance_probability(bad, 0.0, 1.0)
        with pytest.raises(ValueError):
            acceptance_probability(0.0, bad, 1.0)

    @pytest.mark.parametrize("beta", [0.0, -1.0, math.nan, math.inf])
    def test_bad_beta_rejected(self, beta):
        with pytest.raises(ValueError):
            acceptance_probability(0.0, 1.0, beta)


class TestGibbsDistribution:
    def test_constant_utilities_give_uniform(self):
        p = gibbs_distribution([3.3, 3.3, 3.3], beta=7.0)
        assert np.allclose(p, [1 / 3] * 3, atol=1e-15)

    def test_two_actions_with_log_weights(self):
        p = gibbs_distribution([0.0, math.log(2)], beta=1.0)
        assert p == pytest.approx([1 / 3, 2 / 3], rel=1e-12)

    def test_extreme_utilities_do_not_overflow(self):
        p = gibbs_distribution([1000.0, 0.0], beta=1.0)
        assert np.all(np.isfinite(p))
        assert p[0] == pytest.approx(1.0, abs=1e-12)
        assert p.sum() == pytest.approx(1.0, abs=1e-12)

    def test_beta_zero_limit_bound(self):
        gen = rng.generator(5)
        for _ in range(20):
            u = gen.random(6)
            beta = 10 ** gen.uniform(-4, -1)
            tv = total_variation(gibbs_distribution(u, beta), np.full(6, 1 / 6))
            assert tv <= beta * (u.max() - u.min()) + 1e-15


class TestLimitDistribution:
    def test_two_way_tie(self):
        assert np.array_equal(limit_distribution([0.0, 5.0, 5.0]), [0.0, 0.5, 0.5])

    def test_unique_max(self):
        assert np.array_equal(limit_distribution([1.0, 2.0, 3.0]), [0.0, 0.0, 1.0])

    def test_constant_gives_uniform(self):
        assert np.allclose(limit_distribution([2.0] * 4), 0.25)

    def test_tolerance_ties(self):
        p = limit_distribution([1.0, 1.0 - 1e-13, 0.0])
        assert np.array_equal(p, [0.5, 0.5, 0.0])


class TestProposalKernels:
    def test_uniform_never_proposes_current(self):
        kernel = UniformProposal(5)
        gen = rng.generator(1)
        for _ in range(500):
            a = int(gen.random() * 5)
            assert kernel.sample(a, gen.random()) != a

    def test_uniform_matrix_is_symmetric_stochastic(self):
        q = UniformProposal(4).matrix()
        assert np.allclose(q.sum(axis=1), 1.0, atol=1e-15)
        assert np.array_equal(q, q.T)
        assert np.all(np.diag(q) == 0.0)

    def test_matrix_proposal_validates_row_sums(self):
        q = np.array([[0.5, 0.4], [0.4, 0.5]])
        with pytest.raises(ValueError, match="sum"):
            MatrixProposal(q)

    def test_matrix_proposal_validates_symmetry(self):
        q = np.array([[0.0, 1.0], [0.6, 0.4]])
        with pytest.raises(ValueError, match="symmetric"):
            MatrixProposal(q)

    def test_matrix_proposal_validates_irreducibility(self):
        q = np.zeros((4, 4))
        q[0, 1] = q[1, 0] = 1.0
        q[2, 3] = q[3, 2] = 1.0
        with pytest.raises(ValueError, match="irreducible"):
            MatrixProposal(q)

    def test_matrix_proposal_sampling_matches_rows(self):
        gen = rng.generator(3)
        q = sinkhorn_symmetric(5, gen)
        kernel = MatrixProposal(q)
        counts = np.zeros(5)
        draws = rng.generator(4).random(20000)
        for x in draws:
            counts[kernel.sample(2, float(x))] += 1
        assert np.allclose(counts / draws.size, q[2], atol=0.02)


class TestTransitionMatrix:
    def test_constant_utilities_give_back_q(self):
        gen = rng.generator(7)
        q = sinkhorn_symmetric(6, gen)
        p = transition_matrix([1.0] * 6, 2.0, MatrixProposal(q))
        assert np.allclose(p, q, atol=1e-15)

    def test_two_state_worked_example(self):
        kernel = MatrixProposal(np.array([[0.0, 1.0], [1.0, 0.0]]))
        p = transition_matrix([0.0, math.log(2)], 1.0, kernel)
        expected = np.array([[0.0, 1.0], [0.5, 0.5]])
        assert np.allclose(p, expected, atol=1e-15)

    def test_implicit_kernel_is_unsupported(self):
        class MoveOnly(ProposalKernel):
            n = 3

            def sample(self, current, x):
                return (current + 1) % 3

        with pytest.raises(ValueError, match="matrix"):
            transition_matrix([0.0, 1.0, 2.0], 1.0, MoveOnly())

    def test_rows_sum_to_one(self):
        gen = rng.generator(9)
        for _ in range(10):
            n = int(gen.integers(2, 9))
            q = sinkhorn_symmetric(n, gen)
            p = transition_matrix(gen.random(n), float(gen.uniform(0.1, 10)), MatrixProposal(q))
            assert np.all(p >= 0)
            assert np.max(np.abs(p.sum(axis=1) - 1.0)) < 1e-12

    def test_stationarity_of_gibbs(self):
        gen = rng.generator(11)
        u = gen.random(6)
        q = sinkhorn_symmetric(6, gen)
        p = transition_matrix(u, 1.7, MatrixProposal(q))
        pi = gibbs_distribution(u, 1.7)
        assert np.max(np.abs(pi @ p - pi)) < 1e-12

    def test_detailed_balance(self):
        gen = rng.generator(13)
        for beta in (0.1, 1.0, 10.0):
            u = gen.random(7)
            q = sinkhorn_symmetric(7, gen)
            p = transition_matrix(u, beta, MatrixProposal(q))
            pi = gibbs_distribution(u, beta)
            flows = pi[:, None] * p
            assert np.max(np.abs(flows - flows.T)) < 1e-12

    def test_argmax_invariance_under_constant_shift(self):
        gen = rng.generator(15)
        u = gen.random(5)
        q = sinkhorn_symmetric(5, gen)
        kernel = MatrixProposal(q)
        for c in (-3.0, 0.0, 17.5):
            assert np.max(np.abs(
                transition_matrix(u + c, 2.0, kernel) - transition_matrix(u, 2.0, kernel)
            )) < 1e-12
            assert np.max(np.abs(
                gibbs_distribution(u + c, 2.0) - gibbs_distribution(u, 2.0)
            )) < 1e-12
            assert np.array_equal(limit_distribution(u + c), limit_distribution(u))


class TestMetropolisStep:
    def test_draw_consumption_contract(self):
        u = [0.0, 1.0]
        kernel = UniformProposal(2)
        better = CountingGenerator(rng.generator(1))
        nxt = metropolis_step(0, u, 1.0, kernel, better)
        assert nxt == 1
        assert better.draws == 1  # improving proposal needs no acceptance draw
        worse = CountingGenerator(rng.generator(2))
        metropolis_step(1, u, 1.0, kernel, worse)
        assert worse.draws == 2  # proposal plus one acceptance draw

    def test_constant_utilities_accept_everything(self):
        u = [0.5] * 6
        kernel = UniformProposal(6)
        gen = rng.generator(3)
        a = 0
        for _ in range(200):
            counting = CountingGenerator(gen)
            a2 = metropolis_step(a, u, 1.0, kernel, counting)
            assert a2 != a and counting.draws == 1
            a = a2

    def test_greedy_limit_rejects_downhill(self):
        kernel = UniformProposal(2)
        gen = rng.generator(4)
        for _ in range(100):
            assert metropolis_step(1, [0.0, 1.0], 1e6, kernel, gen) == 1

    def test_two_state_acceptance_rate_matches_closed_form(self):
        u = np.array([0.0, math.log(2)])
        config = ChainConfig(inverse_temperature=1.0, seed=77)
        traj = run_chain(config, u, UniformProposal(2), 100_000).states
        at_one = traj[:-1] == 1
        moves = traj[1:][at_one] == 0
        rate = moves.mean()
        assert rate == pytest.approx(0.5, abs=0.01)


class TestRunChain:
    def test_single_step_trajectory_length(self):
        config = ChainConfig(inverse_temperature=1.0, seed=0)
        traj = run_chain(config, [0.0, 1.0, 2.0], UniformProposal(3), steps=1)
        assert len(traj) == 2

    def test_bit_reproducible(self):
        config = ChainConfig(inverse_temperature=0.8, seed=123456789)
        u = rng.generator(5).random(6)
        kernel = UniformProposal(6)
        t1 = run_chain(config, u, kernel, 5000)
        t2 = run_chain(config, u, kernel, 5000)
        assert np.array_equal(t1.states, t2.states)

    def test_constant_utilities_reduce_to_proposal_walk(self):
        n, steps = 5, 2000
        config = ChainConfig(inverse_temperature=3.0, seed=42)
        traj = run_chain(config, [1.0] * n, UniformProposal(n), steps).states
        draws = rng.generator(42).random(steps + 1)
        kernel = UniformProposal(n)
        cum, a0 = 0.0, n - 1
        for i in range(n - 1):
            cum += 1.0 / n
            if draws[0] < cum:
                a0 = i
                break
        assert traj[0] == a0
        for t in range(steps):
            assert traj[t + 1] == kernel.sample(int(traj[t]), float(draws[t + 1]))

    def test_ergodic_theorem_convergence(self):
        u = rng.generator(99).random(8)
        config = ChainConfig(inverse_temperature=1.0, seed=2024)
        traj = run_chain(config, u, UniformProposal(8), 200_000)
        tv = total_variation(empirical_frequency(traj), gibbs_distribution(u, 1.0))
        assert tv < 0.02

    def test_custom_initial_distribution(self):
        mu = np.array([1.0, 0.0, 0.0])
        config = ChainConfig(inverse_temperature=1.0, seed=9, initial_distribution=mu)
        traj = run_chain(config, [0.0, 0.0, 0.0], UniformProposal(3), 10)
        assert traj.states[0] == 0

    def test_explicit_matrix_kernel_runs(self):
        q = lazy_uniform_kernel(4, alpha=0.5)
        kernel = MatrixProposal(q)
        config = ChainConfig(inverse_temperature=1.0, seed=3)
        traj = run_chain(config, [0.1, 0.2, 0.3, 0.4], kernel, 500)
        assert len(traj) == 501


class TestEmpiricalFrequency:
    def test_direct_count(self):
        traj = Trajectory(states=np.array([0, 0, 1]), n_actions=2)
        assert np.allclose(empirical_frequency(traj), [2 / 3, 1 / 3])

    def test_point_mass_for_singleton(self):
        traj = Trajectory(states=np.array([2]), n_actions=4)
        assert np.array_equal(empirical_frequency(traj), [0, 0, 1, 0])

    def test_matches_recount(self):
        states = rng.generator(6).integers(0, 5, size=400)
        traj = Trajectory(states=states, n_actions=5)
        freq = empirical_frequency(traj)
        for a in range(5):
            assert freq[a] == np.count_nonzero(states == a) / states.size


class TestTotalVariation:
    def test_identical_is_zero(self):
        assert total_variation([0.3, 0.7], [0.3, 0.7]) == 0.0

    def test_disjoint_point_masses(self):
        assert total_variation([1.0, 0.0], [0.0, 1.0]) == 1.0

    def test_worked_example(self):
        assert total_variation([1.0, 0.0], [0.5, 0.5]) == pytest.approx(0.5)

    def test_shape_mismatch_rejected(self):
        with pytest.raises(ValueError):
            total_variation([1.0], [0.5, 0.5])


class TestDomainTypes:
    def test_space_needs_two_distinct_actions(self):
        with pytest.raises(ValueError):
            FiniteActionSpace(["a"])
        with pytest.raises(ValueError):
            FiniteActionSpace(["a", "a"])
        space = FiniteActionSpace(["x", "y", "z"])
        assert space.n == 3 and space.index("y") == 1

    def test_utilities_must_be_finite(self):
        with pytest.raises(ValueError):
            UtilityTable([1.0, math.inf])
        with pytest.raises(ValueError):
            UtilityTable([[1.0, 2.0]])

    def test_utilities_must_match_space(self):
        space = FiniteActionSpace(["a", "b"])
        with pytest.raises(ValueError):
            UtilityTable([1.0, 2.0, 3.0], space=space)

    def test_chain_config_validation(self):
        with pytest.raises(ValueError):
            ChainConfig(inverse_temperature=0.0, seed=1)
        with pytest.raises(ValueError):
            ChainConfig(inverse_temperature=1.0, seed=-1)
        with pytest.raises(ValueError):
            ChainConfig(inverse_temperature=1.0, seed=1, initial_distribution=np.array([0.5, 0.6]))

    def test_trajectory_validation(self):
        with pytest.raises(ValueError):
            Trajectory(states=np.array([], dtype=np.int64), n_actions=2)
        with pytest.raises(ValueError):
            Trajectory(states=np.array([0, 2]), n_actions=2)


@settings(max_examples=50, deadline=None)
@given(
    st.lists(st.floats(min_value=-50, max_value=50), min_size=2, max_size=8),
    st.floats(min_value=0.01, max_value=20.0),
)
def test_gibbs_is_distribution_property(values, beta):
    p = gibbs_distribution(values, beta)
    assert np.all(p >= 0)
    assert p.sum() == pytest.approx(1.0, abs=1e-9)
