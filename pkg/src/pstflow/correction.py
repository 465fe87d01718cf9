"""Transformer impedance correction factors.

Two sources of a scale factor are provided: angle-dependent lookup tables
(piecewise-linear, clamped at the ends) and the closed-form IEC 60909
short-circuit correction factor. They are independent; a branch that names a
table always uses the table.
"""

from __future__ import annotations

from bisect import bisect_right
from dataclasses import dataclass

from .grid_model import CorrectionTable


@dataclass(frozen=True)
class CorrectionEvaluation:
    angle_deg: float
    factor: float
    clamped: bool


def interpolate_factor(table: CorrectionTable, angle_deg: float) -> CorrectionEvaluation:
    """Evaluate ``table`` at ``angle_deg``.

    Breakpoints are returned exactly. Between breakpoints the factor is linear
    in angle; outside the table range it is held at the nearest end value and
    ``clamped`` is set.
    """
    angles = table.angles
    factors = table.factors
    if angle_deg < angles[0]:
        return CorrectionEvaluation(angle_deg, factors[0], True)
    if angle_deg > angles[-1]:
        return CorrectionEvaluation(angle_deg, factors[-1], True)
    # index of the segment's left breakpoint; a breakpoint hit lands on itself
    i = bisect_right(angles, angle_deg) - 1
    if angles[i] == angle_deg:
        return CorrectionEvaluation(angle_deg, factors[i], False)
    a1, a2 = angles[i], angles[i + 1]
    f1, f2 = factors[i], factors[i + 1]
    factor = f1 + (angle_deg - a1) / (a2 - a1) * (f2 - f1)
    return CorrectionEvaluation(angle_deg, factor, False)


def table_factor(table: CorrectionTable | None, angle_deg: float) -> float:
    """Shorthand returning just the factor; ``None`` means no correction."""
    if table is None:
        return 1.0
    return interpolate_factor(table, angle_deg).factor


def iec_correction_factor(x_t: float, c_max: float) -> float:
    """IEC 60909 network-transformer correction ``0.95 * c_max / (1 + 0.6 x_t)``.

    Args:
        x_t: transformer reactance in p.u. of its own rating.
        c_max: voltage factor of the low-voltage side. Not defaulted; the
            value depends on the voltage level and national annex.
    """
    if x_t < 0:
        raise ValueError(f"reactance must be non-negative, got {x_t}")
    if not c_max > 0:
        raise ValueError(f"c_max must be positive, got {c_max}")
    return 0.95 * c_max / (1.0 + 0.6 * x_t)


def per_unit_reactance(x_ohm: float, s_rt: float, v_rt: float) -> float:
    """Transformer reactance in p.u. of its rating.

    ``s_rt`` in MVA and ``v_rt`` in kV; MVA/kV^2 equals VA/V^2, so no extra
    scaling is needed.
    """
    if not s_rt > 0 or not v_rt > 0:
        raise ValueError("rated power and rated voltage must be positive")
    return x_ohm * s_rt / (v_rt * v_rt)


def corrected_impedance(z: complex, k: float) -> complex:
    """Scale the full series impedance (R and X) by ``k``."""
    if not k > 0:
        raise ValueError(f"correction factor must be positive, got {k}")
    return complex(k * z.real, k * z.imag)
