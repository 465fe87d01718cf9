"""Bus admittance matrix assembly with phase-shifting transformer stamps."""

from __future__ import annotations

import cmath
import math
from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

from .correction import table_factor
from .grid_model import Branch, Network


@dataclass(frozen=True)
class BranchStamp:
    """Two-port admittances of one branch; side i is the from bus."""

    y_ii: complex
    y_ik: complex
    y_ki: complex
    y_kk: complex

    def as_matrix(self) -> np.ndarray:
        return np.array([[self.y_ii, self.y_ik], [self.y_ki, self.y_kk]], dtype=complex)


def pst_branch_admittance(
    r_pu: float,
    x_pu: float,
    tap_ratio: float = 1.0,
    phase_shift_deg: float = 0.0,
    factor: float = 1.0,
) -> BranchStamp:
    """Series branch behind an ideal transformer ``T e^{j phi}`` at the from side.

    The series impedance is scaled by ``factor`` before inversion. For a
    non-zero shift the two transfer admittances have equal magnitude but
    arguments that differ by ``2 phi``.
    """
    z = complex(r_pu, x_pu)
    if z == 0:
        raise ZeroDivisionError("branch has zero series impedance")
    if not tap_ratio > 0:
        raise ValueError(f"tap ratio must be positive, got {tap_ratio}")
    if not factor > 0:
        raise ValueError(f"correction factor must be positive, got {factor}")
    y = 1.0 / (factor * z)
    t = cmath.rect(tap_ratio, math.radians(phase_shift_deg))
    return BranchStamp(
        y_ii=y / (tap_ratio * tap_ratio),
        y_ik=-y / t.conjugate(),
        y_ki=-y / t,
        y_kk=y,
    )


def branch_factor(net: Network, br: Branch, use_correction: bool) -> float:
    """Impedance scale factor applied to ``br`` (1.0 unless a table applies)."""
    xf = br.transformer
    if not use_correction or xf is None or xf.correction_table is None:
        return 1.0
    if xf.correction_table not in net.table_by_id:
        raise KeyError(f"branch {br.id}: unknown correction table {xf.correction_table!r}")
    return table_factor(net.table(xf.correction_table), xf.phase_shift_deg)


def branch_stamp(net: Network, br: Branch, use_correction: bool = True) -> BranchStamp:
    """Full stamp of an in-service branch, line charging included.

    Half the charging susceptance goes to each end's self admittance; it is
    not touched by the correction factor.
    """
    xf = br.transformer
    s = pst_branch_admittance(
        br.r_pu,
        br.x_pu,
        xf.tap_ratio if xf else 1.0,
        xf.phase_shift_deg if xf else 0.0,
        branch_factor(net, br, use_correction),
    )
    if br.b_pu:
        half = 0.5j * br.b_pu
        s = BranchStamp(s.y_ii + half, s.y_ik, s.y_ki, s.y_kk + half)
    return s


@dataclass(frozen=True)
class AdmittanceMatrix:
    bus_ids: tuple[int, ...]
    matrix: sp.csr_matrix

    @property
    def n(self) -> int:
        return len(self.bus_ids)

    def to_dense(self) -> np.ndarray:
        return self.matrix.toarray()

    def entry(self, from_id: int, to_id: int) -> complex:
        index = {bid: i for i, bid in enumerate(self.bus_ids)}
        return complex(self.matrix[index[from_id], index[to_id]])

    def entries(self) -> list[tuple[int, int, complex]]:
        """Stored non-zero entries as ``(bus_i, bus_k, value)`` sorted by ids."""
        coo = self.matrix.tocoo()
        rows = [
            (self.bus_ids[r], self.bus_ids[c], complex(v))
            for r, c, v in zip(coo.row, coo.col, coo.data)
            if v != 0
        ]
        rows.sort(key=lambda e: (e[0], e[1]))
        return rows

    def dump(self) -> str:
        """Text dump, one ``i k re im`` row per entry, 12 significant digits."""
        lines = [
            f"{i} {k} {_g12(v.real)} {_g12(v.imag)}" for i, k, v in self.entries()
        ]
        return "\n".join(lines) + ("\n" if lines else "")


def _g12(x: float) -> str:
    # + 0.0 folds -0.0 into 0.0
    return f"{x + 0.0:.12g}"


def assemble_ybus(net: Network, use_correction: bool = True) -> AdmittanceMatrix:
    """Assemble the complex nodal admittance matrix in ascending bus-id order.

    Out-of-service branches contribute nothing. Transformer branches naming a
    correction table are scaled by the table factor at their current phase
    shift when ``use_correction`` is set.
    """
    idx = net.bus_index
    rows: list[int] = []
    cols: list[int] = []
    vals: list[complex] = []
    for br in net.branches:
        if not br.status:
            continue
        s = branch_stamp(net, br, use_correction)
        i, k = idx[br.from_bus], idx[br.to_bus]
        rows += [i, i, k, k]
        cols += [i, k, i, k]
        vals += [s.y_ii, s.y_ik, s.y_ki, s.y_kk]
    n = len(idx)
    m = sp.coo_matrix(
        (np.array(vals, dtype=complex), (np.array(rows, dtype=int), np.array(cols, dtype=int))),
        shape=(n, n),
    ).tocsr()
    m.sum_duplicates()
    m.sort_indices()
    return AdmittanceMatrix(bus_ids=net.bus_ids, matrix=m)


def line_real_power(v_i: float, v_k: float, x_line: float, theta_ik_deg: float) -> float:
    """Real power over a lossless line, ``|Vi||Vk|/X * sin(theta_ik)`` in p.u."""
    if x_line == 0:
        raise ZeroDivisionError("line reactance is zero")
    return v_i * v_k / x_line * math.sin(math.radians(theta_ik_deg))
