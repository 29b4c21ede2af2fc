import numpy as np
import pytest

from ergodic_annealing import rng
from ergodic_annealing.chain import ChainConfig, MatrixProposal, UniformProposal, run_chain
from ergodic_annealing.schedule import (
    AnnealingSchedule,
    StopRule,
    beta_at,
    frozen,
    geometric_schedule,
    simulated_annealing,
)


class TestGeometricSchedule:
    def test_worked_example(self):
        sched = geometric_schedule(beta0=1.0, rho=0.05, loop_length=100)
        # thresholds t_k = (k + 1) * L
        assert sched.beta_at(0) == 1.0
        assert sched.beta_at(99) == 1.0
        assert sched.beta_at(100) == pytest.approx(1.05, rel=1e-15)
        assert sched.beta_at(199) == pytest.approx(1.05, rel=1e-15)
        assert sched.beta_at(200) == pytest.approx(1.05**2, rel=1e-15)

    @pytest.mark.parametrize("rho", [0.0, -0.1])
    def test_rho_must_be_strictly_positive(self, rho):
        with pytest.raises(ValueError, match="rho"):
            geometric_schedule(1.0, rho, 100)

    @pytest.mark.parametrize("bad", [{"beta0": 0.0}, {"beta0": -1.0}, {"loop_length": 0}])
    def test_other_parameter_validation(self, bad):
        kwargs = {"beta0": 1.0, "rho": 0.05, "loop_length": 10, **bad}
        with pytest.raises(ValueError):
            geometric_schedule(**kwargs)

    def test_unbounded_strictly_increasing(self):
        sched = geometric_schedule(2.0, 0.01, 5)
        levels = [sched.beta_at(5 * k) for k in range(200)]
        assert all(b2 > b1 for b1, b2 in zip(levels, levels[1:]))
        assert levels[-1] > 2.0 * 1.01**198

    def test_beta_steps_matches_beta_at(self):
        sched = geometric_schedule(0.7, 0.2, 7)
        steps = sched.beta_steps(100)
        assert np.array_equal(steps, [sched.beta_at(n) for n in range(100)])


class TestExplicitSchedule:
    def test_boundary_semantics(self):
        # t_k = 10 * (k + 1), beta_k = 2 ** k
        sched = AnnealingSchedule.explicit([(10 * (k + 1), 2.0**k) for k in range(8)])
        assert beta_at(sched, 0) == 1.0
        assert beta_at(sched, 9) == 1.0
        assert beta_at(sched, 10) == 2.0  # left boundary switches to the next level
        assert beta_at(sched, 10 * 6 - 1) == 2.0**5  # n = t_5 - 1
        assert beta_at(sched, 10**9) == 2.0**7  # held beyond the prefix

    def test_validation(self):
        with pytest.raises(ValueError):
            AnnealingSchedule.explicit([])
        with pytest.raises(ValueError):
            AnnealingSchedule.explicit([(10, 1.0), (5, 2.0)])
        with pytest.raises(ValueError):
            AnnealingSchedule.explicit([(10, 1.0), (20, 0.5)])

    def test_beta_steps_matches_beta_at(self):
        sched = AnnealingSchedule.explicit([(3, 0.5), (9, 1.5), (11, 4.0)])
        assert np.array_equal(sched.beta_steps(20), [sched.beta_at(n) for n in range(20)])

    def test_non_decreasing_piecewise_constant(self):
        sched = geometric_schedule(1.0, 0.3, 4)
        arr = sched.beta_steps(40)
        assert np.all(np.diff(arr) >= 0)
        for k in range(10):
            assert len(set(arr[4 * k: 4 * (k + 1)])) == 1


class TestFrozen:
    def test_all_identical_window(self):
        assert frozen(["a", "a", "a"], freeze_window=2)

    def test_change_inside_window(self):
        assert not frozen(["a", "b", "a"], freeze_window=2)

    def test_change_at_end(self):
        assert not frozen(["a", "a", "b"], freeze_window=2)

    def test_underfull_window_is_false(self):
        assert not frozen(["a", "a"], freeze_window=2)

    def test_only_trailing_window_counts(self):
        assert frozen(["b", "a", "a", "a"], freeze_window=2)


class TestStopRule:
    def test_validation(self):
        with pytest.raises(ValueError):
            StopRule(max_iterations=0)
        with pytest.raises(ValueError):
            StopRule(max_iterations=10, freeze_window=0)


class TestSimulatedAnnealing:
    def test_two_state_finds_maximum(self):
        sched = geometric_schedule(5.0, 0.05, 50)
        stop = StopRule(max_iterations=2000, freeze_window=100)
        hits = 0
        for s in range(100):
            res = simulated_annealing([0.0, 1.0], UniformProposal(2), sched, stop, rng.seed_sequence(31, s))
            hits += res.best_state == 1
        assert hits >= 99

    def test_freeze_window_one_stops_on_first_rejection(self):
        # state 1 is optimal and beta is huge: the first proposal from state 1
        # is rejected, leaving the state unchanged, which freezes the run.
        sched = geometric_schedule(1e6, 0.05, 1000)
        stop = StopRule(max_iterations=1000, freeze_window=1)
        res = simulated_annealing(
            [0.0, 1.0], UniformProposal(2), sched, stop,
            rng.seed_sequence(32), mu=np.array([0.0, 1.0]),
        )
        assert res.frozen
        assert res.iterations_used == 1
        assert res.final_state == 1

    def test_constant_utilities_best_is_constant(self):
        sched = geometric_schedule(1.0, 0.1, 10)
        stop = StopRule(max_iterations=500, freeze_window=1000)
        res = simulated_annealing([2.5] * 4, UniformProposal(4), sched, stop, rng.seed_sequence(33))
        assert res.best_value == 2.5
        assert res.final_value == 2.5

    def test_constant_schedule_equals_plain_chain(self):
        n, steps = 6, 700
        u = rng.generator(34).random(n)
        kernel = UniformProposal(n)
        sched = AnnealingSchedule.explicit([(10**9, 1.3)])
        stop = StopRule(max_iterations=steps, freeze_window=steps + 1)
        res = simulated_annealing(u, kernel, sched, stop, 3535, record_trace=True)
        traj = run_chain(ChainConfig(inverse_temperature=1.3, seed=3535), u, kernel, steps)
        assert np.array_equal([s for s, _, _ in res.trace], traj.states[1:])
        assert res.final_state == traj.states[-1]

    def test_best_dominates_final(self):
        gen = rng.generator(35)
        sched = geometric_schedule(0.5, 0.2, 20)
        stop = StopRule(max_iterations=300, freeze_window=400)
        for s in range(20):
            u = gen.random(10)
            res = simulated_annealing(u, UniformProposal(10), sched, stop, rng.seed_sequence(36, s))
            assert res.best_value >= res.final_value
            assert res.best_value == u[res.best_state]

    def test_trace_records_beta_and_acceptance(self):
        sched = geometric_schedule(1.0, 0.5, 5)
        stop = StopRule(max_iterations=20, freeze_window=100)
        res = simulated_annealing([0.0, 1.0, 2.0], UniformProposal(3), sched, stop, 37, record_trace=True)
        assert len(res.trace) == res.iterations_used
        betas = [b for _, b, _ in res.trace]
        assert betas == [sched.beta_at(n) for n in range(len(betas))]

    def test_monotone_beta_bootstrap(self):
        # local (ring) moves on a smooth unimodal hill: annealing must not be
        # worse than staying at beta0, by a 95% bootstrap on the mean gap.
        n = 201
        idx = np.arange(n)
        u = np.exp(-(((idx - 137) / (n / 6.0)) ** 2))
        ring = np.zeros((n, n))
        for i in range(n):
            ring[i, (i + 1) % n] = 0.5
            ring[i, (i - 1) % n] = 0.5
        kernel = MatrixProposal(ring)
        annealed = geometric_schedule(1.0, 0.3, 50)
        fixed = AnnealingSchedule.explicit([(10**9, 1.0)])
        stop = StopRule(max_iterations=2500, freeze_window=10**9)
        diffs = []
        for s in range(100):
            ra = simulated_annealing(u, kernel, annealed, stop, rng.seed_sequence(600, s))
            rf = simulated_annealing(u, kernel, fixed, stop, rng.seed_sequence(600, s))
            diffs.append(ra.best_value - rf.best_value)
        diffs = np.array(diffs)
        boot = rng.generator(601).choice(diffs, size=(2000, diffs.size), replace=True).mean(axis=1)
        assert np.percentile(boot, 2.5) >= 0.0
        assert diffs.mean() > 0.0
