"""Kernel backend selection.

The compiled Cython extension is used when available; the pure-Python
reference implementation is the fallback.  Set GASNET_KERNELS=reference
(or =compiled) to force a backend, e.g. for the benchmark comparison.
"""

import os

_choice = os.environ.get("GASNET_KERNELS", "").strip().lower()

if _choice in ("", "compiled"):
    try:
        from gasnet._kernels._compiled import (  # noqa: F401
            BACKEND,
            curve_velocity,
            curve_velocity_deriv,
            interface_flux,
            max_char_speed,
            middle_state,
            pressure,
            pressure_deriv,
            sample,
            sound_integral,
            sound_speed,
            sweep_pipe,
        )
    except ImportError:
        if _choice == "compiled":
            raise
        from gasnet._kernels.reference import (  # noqa: F401
            BACKEND,
            curve_velocity,
            curve_velocity_deriv,
            interface_flux,
            max_char_speed,
            middle_state,
            pressure,
            pressure_deriv,
            sample,
            sound_integral,
            sound_speed,
            sweep_pipe,
        )
elif _choice == "reference":
    from gasnet._kernels.reference import (  # noqa: F401
        BACKEND,
        curve_velocity,
        curve_velocity_deriv,
        interface_flux,
        max_char_speed,
        middle_state,
        pressure,
        pressure_deriv,
        sample,
        sound_integral,
        sound_speed,
        sweep_pipe,
    )
else:
    raise ImportError(f"unknown GASNET_KERNELS backend {_choice!r}")
