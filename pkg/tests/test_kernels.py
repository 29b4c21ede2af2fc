"""Cross-lane agreement: the compiled and pure kernels share one contract.

Given the same bit generator state the two lanes must return bit-identical
results; the pure lane is additionally checked against the step-level
public operations.
"""

import numpy as np
import pytest
from numpy.random import Generator

from ergodic_annealing import _kernels, rng, steiner, tsp
from ergodic_annealing._kernels import _pure
from ergodic_annealing.chain import ChainConfig, MatrixProposal, UniformProposal, run_chain
from ergodic_annealing.macau import MultiplicativeUniformPayoff, TabularEstimator, macau_step
from ergodic_annealing.schedule import AnnealingSchedule
from util import sinkhorn_symmetric

try:
    from ergodic_annealing._kernels import _core
except ImportError:
    _core = None

needs_core = pytest.mark.skipif(_core is None, reason="compiled kernel lane not built")


def _tuples_equal(a, b):
    assert len(a) == len(b)
    for x, y in zip(a, b):
        if isinstance(x, np.ndarray) or isinstance(y, np.ndarray):
            assert x is not None and y is not None
            assert np.array_equal(np.asarray(x), np.asarray(y))
        elif x is None:
            assert y is None
        else:
            assert x == y


def test_backend_reports_a_lane():
    assert _kernels.backend_name() in ("pure", "cython")


def test_backend_env_override_selects_pure():
    import subprocess
    import sys

    out = subprocess.run(
        [sys.executable, "-c", "import ergodic_annealing as ea; print(ea.backend_name())"],
        env={"PATH": "/usr/bin:/bin", "ERGODIC_ANNEALING_BACKEND": "pure"},
        capture_output=True,
        text=True,
        check=True,
    )
    assert out.stdout.strip() == "pure"


def test_backend_env_override_rejects_unknown():
    import subprocess
    import sys

    out = subprocess.run(
        [sys.executable, "-c", "import ergodic_annealing"],
        env={"PATH": "/usr/bin:/bin", "ERGODIC_ANNEALING_BACKEND": "fortran"},
        capture_output=True,
        text=True,
    )
    assert out.returncode != 0
    assert "ERGODIC_ANNEALING_BACKEND" in out.stderr


@needs_core
class TestCrossLane:
    def test_metropolis_uniform(self):
        u = rng.generator(1).random(7)
        mu = np.full(7, 1 / 7)
        s1 = _pure.metropolis_chain(rng.bit_generator(2), u, 1.2, 4000, mu)
        s2 = _core.metropolis_chain(rng.bit_generator(2), u, 1.2, 4000, mu)
        assert np.array_equal(s1, s2)

    def test_metropolis_matrix(self):
        gen = rng.generator(3)
        u = gen.random(6)
        qcum = np.cumsum(sinkhorn_symmetric(6, gen), axis=1)
        mu = np.full(6, 1 / 6)
        s1 = _pure.metropolis_chain(rng.bit_generator(4), u, 0.6, 3000, mu, qcum)
        s2 = _core.metropolis_chain(rng.bit_generator(4), u, 0.6, 3000, mu, qcum)
        assert np.array_equal(s1, s2)

    @pytest.mark.parametrize("env_kind,width", [(0, 0.0), (1, 0.3), (2, 0.25)])
    def test_macau_all_environments(self, env_kind, width):
        means = rng.generator(5).random(5)
        mu = np.full(5, 1 / 5)
        prior = np.full(5, 0.5)
        r1 = _pure.macau_chain(rng.bit_generator(6), prior, means, 1.7, 8000, mu, env_kind, width)
        r2 = _core.macau_chain(rng.bit_generator(6), prior, means, 1.7, 8000, mu, env_kind, width)
        _tuples_equal(r1, r2)

    def test_macau_final_state_only(self):
        means = rng.generator(7).random(4)
        mu = np.full(4, 0.25)
        prior = np.full(4, 0.0)
        r1 = _pure.macau_chain(rng.bit_generator(8), prior, means, 1.0, 2000, mu, 2, 0.4, None, False)
        r2 = _core.macau_chain(rng.bit_generator(8), prior, means, 1.0, 2000, mu, 2, 0.4, None, False)
        _tuples_equal(r1, r2)
        assert r1[0].size == 1

    @pytest.mark.parametrize("estimate_costs", [False, True])
    def test_dst_anneal(self, estimate_costs):
        dag = steiner.generate_dst(
            steiner.DstGenParams(num_layers=5, max_nodes_per_layer=4, min_nodes_per_layer=2), 9
        )
        in_ptr, in_src = dag.csr()
        betas = AnnealingSchedule.geometric(1.0, 0.05, 60).beta_steps(5000)
        init = np.ones(dag.size, dtype=np.uint8)
        args = (in_ptr, in_src, dag.costs, dag.steiner_vertices, init, betas, 700,
                estimate_costs, 0.5)
        r1 = _pure.dst_anneal(rng.bit_generator(10), *args)
        r2 = _core.dst_anneal(rng.bit_generator(10), *args)
        _tuples_equal(r1, r2)

    @pytest.mark.parametrize("estimate_costs", [False, True])
    def test_tsp_anneal(self, estimate_costs):
        inst = tsp.generate_tsp(11, 11)
        betas = AnnealingSchedule.geometric(1.0, 0.05, 60).beta_steps(4000)
        init = np.arange(11, dtype=np.int64)
        args = (inst.distance_matrix(), init, betas, 600, estimate_costs, 0.5, 0.5)
        r1 = _pure.tsp_anneal(rng.bit_generator(12), *args)
        r2 = _core.tsp_anneal(rng.bit_generator(12), *args)
        _tuples_equal(r1, r2)

    def test_stream_position_advances_identically(self):
        # a kernel call must consume exactly the same number of draws per lane
        u = rng.generator(13).random(5)
        mu = np.full(5, 0.2)
        bg1 = rng.bit_generator(14)
        bg2 = rng.bit_generator(14)
        _pure.metropolis_chain(bg1, u, 2.0, 1000, mu)
        _core.metropolis_chain(bg2, u, 2.0, 1000, mu)
        tail1 = Generator(bg1).random(8)
        tail2 = Generator(bg2).random(8)
        assert np.array_equal(tail1, tail2)


class TestKernelMatchesStepOps:
    def test_run_chain_equals_metropolis_step_loop(self):
        n, steps, beta, seed = 6, 1500, 1.4, 21
        u = rng.generator(20).random(n)
        kernel = UniformProposal(n)
        traj = run_chain(ChainConfig(inverse_temperature=beta, seed=seed), u, kernel, steps)

        gen = Generator(rng.bit_generator(seed))
        x = gen.random()
        cum, a = 0.0, n - 1
        for i in range(n - 1):
            cum += 1.0 / n
            if x < cum:
                a = i
                break
        states = [a]
        from ergodic_annealing.chain import metropolis_step

        for _ in range(steps):
            a = metropolis_step(a, u, beta, kernel, gen)
            states.append(a)
        assert np.array_equal(traj.states, states)

    def test_run_chain_equals_step_loop_with_matrix_kernel(self):
        gen0 = rng.generator(22)
        n, steps, beta, seed = 5, 800, 0.9, 23
        u = gen0.random(n)
        kernel = MatrixProposal(sinkhorn_symmetric(n, gen0))
        traj = run_chain(ChainConfig(inverse_temperature=beta, seed=seed), u, kernel, steps)

        gen = Generator(rng.bit_generator(seed))
        x = gen.random()
        cum, a = 0.0, n - 1
        for i in range(n - 1):
            cum += 1.0 / n
            if x < cum:
                a = i
                break
        from ergodic_annealing.chain import metropolis_step

        states = [a]
        for _ in range(steps):
            a = metropolis_step(a, u, beta, kernel, gen)
            states.append(a)
        assert np.array_equal(traj.states, states)

    def test_macau_chain_equals_macau_step_loop(self):
        n, steps, beta, seed = 4, 1200, 1.1, 25
        means = rng.generator(24).random(n)
        env = MultiplicativeUniformPayoff(means, 0.3)
        kernel = UniformProposal(n)
        mu = np.full(n, 1 / n)
        states, est, counts = _kernels.macau_chain(
            rng.bit_generator(seed), np.full(n, 0.5), means, beta, steps, mu,
            env.kernel_kind, env.half_width,
        )

        gen = Generator(rng.bit_generator(seed))
        x = gen.random()
        cum, a = 0.0, n - 1
        for i in range(n - 1):
            cum += 1.0 / n
            if x < cum:
                a = i
                break
        estimator = TabularEstimator(0.5, n)
        seq = [a]
        for _ in range(steps):
            a, _ = macau_step(a, estimator, env, beta, kernel, gen)
            seq.append(a)
        assert np.array_equal(states, seq)
        assert np.array_equal(estimator.counts, counts)
        assert np.array_equal(estimator.estimates, est)

    def test_macau_counts_conserve_steps(self):
        means = rng.generator(26).random(5)
        _, _, counts = _kernels.macau_chain(
            rng.bit_generator(27), np.zeros(5), means, 1.0, 3000, np.full(5, 0.2), 1, 0.2
        )
        assert counts.sum() == 3000


class TestKernelValidation:
    def test_dst_rejects_infeasible_start(self):
        dag = steiner.generate_dst(
            steiner.DstGenParams(num_layers=4, max_nodes_per_layer=3, min_nodes_per_layer=2), 30
        )
        in_ptr, in_src = dag.csr()
        betas = np.full(10, 1.0)
        empty = np.zeros(dag.size, dtype=np.uint8)
        with pytest.raises(ValueError, match="infeasible"):
            _kernels.dst_anneal(rng.bit_generator(31), in_ptr, in_src, dag.costs,
                                dag.steiner_vertices, empty, betas, 5, False, 0.5)

    def test_tsp_rejects_tiny_tours(self):
        dist = np.zeros((3, 3))
        with pytest.raises(ValueError):
            _kernels.tsp_anneal(rng.bit_generator(32), dist, np.arange(3, dtype=np.int64),
                                np.full(10, 1.0), 5, False, 0.5, 0.5)
