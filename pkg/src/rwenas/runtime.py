"""Process-level numeric determinism controls.

Multi-threaded BLAS kernels change floating-point reduction order, so
results would depend on machine load and thread count.  Entry points
pin BLAS to one thread once per process; application-level parallelism
(evaluating several candidates at once) stays available and cannot
change any individual result.
"""

from __future__ import annotations

from threadpoolctl import threadpool_limits

_controller = None


def pin_blas_single_thread() -> None:
    """Idempotently cap every BLAS/OpenMP pool at one thread."""
    global _controller
    if _controller is None:
        _controller = threadpool_limits(limits=1)
