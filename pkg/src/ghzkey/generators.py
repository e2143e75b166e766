"""Seeded payoff-matrix generators for each symmetry family."""

from __future__ import annotations

import numpy as np

from ghzkey.state import LABELS, PayoffMatrix, as_generator, complement, label_index

LOW, HIGH = 1.0, 10.0

# Label groups that share one value for a constrained player.
_GROUPS = {
    "case_i": [("000",), ("001", "101"), ("010", "110"), ("011", "111"), ("100",)],
    "case_ii": [("000",), ("001",), ("010",), ("011",), ("100", "101", "110", "111")],
    "case_iii": [("000",), ("001", "010", "011", "100", "101", "110", "111")],
    # NOT-dual rows with the partial-symmetric equalities folded in.
    "partial_sym_i": [("000", "001", "110", "111"), ("010", "011", "100", "101")],
    "partial_sym_ii": [("000", "011", "100", "111"), ("001", "010", "101", "110")],
    "partial_sym_iii": [LABELS],
    "not_dual": [(lab, complement(lab)) for lab in ("000", "001", "010", "011")],
}
FAMILIES = tuple(_GROUPS) + ("random", "ratio_distinct")


def _grouped_row(rng: np.random.Generator, groups) -> np.ndarray:
    row = np.empty(8)
    vals = rng.uniform(LOW, HIGH, size=len(groups))
    for v, g in zip(vals, groups):
        for lab in g:
            row[label_index(lab)] = v
    return row


def random_matrix(seed=None) -> PayoffMatrix:
    rng = as_generator(seed)
    return PayoffMatrix(rng.uniform(LOW, HIGH, size=(3, 8)))


def ratio_distinct_matrix() -> PayoffMatrix:
    """$^k_abc = 3 (abc)_2 + rank(k); every profile has its own payoff ratio."""
    n = np.arange(8)
    return PayoffMatrix(np.stack([3.0 * n + r for r in range(3)]))


def family_matrix(family: str, seed=None, trivial: bool = False) -> PayoffMatrix:
    """Random matrix whose A and B rows satisfy ``family``; Charlie's row is generic.

    Partial-symmetric and NOT-dual families also make Charlie's row NOT-dual.
    ``trivial`` (Case III only) sets $000 equal to the common value.
    """
    if family == "random":
        return random_matrix(seed)
    if family == "ratio_distinct":
        return ratio_distinct_matrix()
    if family not in _GROUPS:
        raise ValueError(f"unknown family {family!r}; choose from {FAMILIES}")
    rng = as_generator(seed)
    rows = [_grouped_row(rng, _GROUPS[family]) for _ in range(2)]
    if trivial:
        if family != "case_iii":
            raise ValueError("trivial only applies to case_iii")
        for row in rows:
            row[:] = row[1]
    dual = family.startswith("partial_sym") or family == "not_dual"
    rows.append(_grouped_row(rng, _GROUPS["not_dual"]) if dual else rng.uniform(LOW, HIGH, size=8))
    return PayoffMatrix(np.stack(rows), constrained=frozenset({"A", "B"}))
