"""Hot solver kernels with a compiled core and a pure-Python fallback.

The Cython extension ``_core`` is used when it was built; otherwise the
NumPy fallback takes over transparently.  Set ``OFDMALLOC_BACKEND=py`` or
``=c`` to force a backend (forcing ``c`` without the extension raises).
Both backends implement the same function set and are compared against each
other in the test suite and in ``benchmarks/bench_kernels.py``.
"""

import os

from . import _fallback

try:
    from . import _core
except ImportError:
    _core = None

_requested = os.environ.get("OFDMALLOC_BACKEND", "").strip().lower()
if _requested in ("", "auto"):
    _active = _core if _core is not None else _fallback
elif _requested in ("py", "python", "fallback"):
    _active = _fallback
elif _requested in ("c", "compiled", "cython"):
    if _core is None:
        raise ImportError(
            "OFDMALLOC_BACKEND=c requested but the compiled kernel extension is not built"
        )
    _active = _core
else:
    raise ImportError(f"unknown OFDMALLOC_BACKEND value: {_requested!r}")

BACKEND = _active.NAME

total_power_at_price = _active.total_power_at_price
carrier_segments = _active.carrier_segments
wsr_rates_powers = _active.wsr_rates_powers
effective_noise_floor = _active.effective_noise_floor
waterfill_to_target = _active.waterfill_to_target
minpower_sweep = _active.minpower_sweep
minrates_sweep = _active.minrates_sweep

__all__ = [
    "BACKEND",
    "total_power_at_price",
    "carrier_segments",
    "wsr_rates_powers",
    "effective_noise_floor",
    "waterfill_to_target",
    "minpower_sweep",
    "minrates_sweep",
]
