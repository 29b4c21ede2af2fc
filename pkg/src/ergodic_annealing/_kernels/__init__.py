"""Hot-loop kernels with a compiled core and a pure-Python fallback.

The four long-running loops (Metropolis trajectories, Macau trajectories,
and the two problem annealers) exist twice: ``_core`` is a Cython
extension, ``_pure`` is plain numpy/Python. The compiled lane is selected
at import time when available; set ``ERGODIC_ANNEALING_BACKEND=pure`` (or
``cython``) to force a lane.

Both lanes implement one shared contract so that, given the same bit
generator state, they produce bit-identical results:

* all randomness is consumed as a stream of uniform doubles from the
  supplied numpy bit generator (``next_double``), in a fixed order:
  proposal draw(s), then at most one acceptance draw (only when the
  proposed payoff is strictly worse), then observation draws;
* index draws map ``x`` to ``int(x * m)`` (clamped to ``m - 1``);
* initial states scan the cumulative initial distribution with ``x < cum``;
* running means update as ``est = ((c - 1) / c) * est + v / c`` after
  incrementing the count ``c``, so the first observation replaces any
  prior exactly;
* uniform payoff noise is ``mean + w * (2x - 1)`` (additive) or
  ``mean * (1 + w * (2x - 1))`` (multiplicative);
* cost totals accumulate sequentially in index order.

``benchmarks/lane_benchmark.py`` times the two lanes against each other
and verifies they agree.
"""

import os

from ._pure import ENV_ADDITIVE, ENV_DETERMINISTIC, ENV_MULTIPLICATIVE

_requested = os.environ.get("ERGODIC_ANNEALING_BACKEND", "").strip().lower()

if _requested not in ("", "pure", "cython"):
    raise ImportError(
        f"ERGODIC_ANNEALING_BACKEND={_requested!r} not recognized (use 'pure' or 'cython')"
    )

if _requested == "pure":
    from . import _pure as _impl

    BACKEND = "pure"
else:
    try:
        from . import _core as _impl  # type: ignore[attr-defined]

        BACKEND = "cython"
    except ImportError:
        if _requested == "cython":
            raise
        from . import _pure as _impl

        BACKEND = "pure"

metropolis_chain = _impl.metropolis_chain
macau_chain = _impl.macau_chain
dst_anneal = _impl.dst_anneal
tsp_anneal = _impl.tsp_anneal


def backend_name() -> str:
    """Name of the lane selected at import time."""
    return BACKEND
