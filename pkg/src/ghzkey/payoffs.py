"""Closed-form expected payoffs and their regime-specific reductions.

Every formula here is checked against :func:`ghzkey.state.expected_payoffs_oracle`
in the test suite. The general form carries one corrected phase argument; the
uncorrected variant is available through ``as_printed=True`` and its divergence
is tracked in the discrepancy ledger (see :mod:`ghzkey.discrepancy`).
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from ghzkey.state import (
    HALF_PI,
    LABELS,
    PLAYERS,
    DomainError,
    EntanglementConfig,
    PayoffMatrix,
    Strategy,
    StrategyTriple,
    complement,
    label_index,
    player_index,
)

NONENTANGLED = "nonentangled"
MAXENTANGLED = "maxentangled"
PARTIAL_DUAL = "partial_dual"
VARIANTS = (NONENTANGLED, MAXENTANGLED, PARTIAL_DUAL)

# Partially entangled branches, keyed by name: (delta, gamma).
BRANCH_I = (0.0, HALF_PI)
BRANCH_II = (HALF_PI, 0.0)
BRANCHES = {"i": BRANCH_I, "ii": BRANCH_II}

# beta_A - beta_B = pi and beta_A + beta_B = 2 pi, with beta_A = 3 pi/2 stored as -pi/2.
PARTIAL_BETAS = (-HALF_PI, HALF_PI, 0.0)

_SWAP = {"100": "011", "011": "100", "010": "101", "101": "010"}


def _alt_sum(row: np.ndarray) -> float:
    """sum_abc $_abc (-1)^(a+b+c)."""
    return float(sum(row[i] * (-1) ** lab.count("1") for i, lab in enumerate(LABELS)))


def _pattern_weight(Cs: Sequence[float], pattern: str) -> float:
    """Product of C_k (bit 0) or S_k (bit 1) over the three players."""
    w = 1.0
    for C, bit in zip(Cs, pattern):
        w *= C if bit == "0" else 1.0 - C
    return w


def _pattern_terms(s: StrategyTriple, as_printed: bool):
    """(pattern, label, partner, eta-order, xi-sign, phase) for the eight non-interference terms.

    eta-order 1 means eta1 multiplies the label entry and eta2 the partner entry.
    """
    aA, aB, aC = s.alphas
    bA, bB, bC = s.betas
    # The C_A S_B S_C phase is -alpha_A + beta_B + beta_C; the printed form has -beta_C.
    css_phase = -aA + bB - bC if as_printed else -aA + bB + bC
    return (
        ("000", "000", "111", 1, +1, aA + aB + aC),
        ("111", "000", "111", 2, -1, bA + bB + bC),
        ("001", "001", "110", 1, +1, aA + aB - bC),
        ("110", "001", "110", 2, -1, bA + bB - aC),
        ("100", "100", "011", 1, -1, -bA + aB + aC),
        ("011", "100", "011", 2, +1, css_phase),
        ("101", "101", "010", 1, -1, bA - aB + bC),
        ("010", "101", "010", 2, +1, aA - bB + aC),
    )


def interference_term(
    cfg: EntanglementConfig,
    s: StrategyTriple,
    m: PayoffMatrix,
    k: str | int,
    mu: float = 1.0,
) -> float:
    """The (1/8) sin(theta_A) sin(theta_B) sin(theta_C) {...} term of the general form.

    ``mu`` scales only the alternating-sum part (coherence of the initial state).
    """
    row = m.row(k)
    aA, aB, aC = s.alphas
    bA, bB, bC = s.betas
    sin3 = math.prod(math.sin(t) for t in s.thetas)
    e = {lab: row[label_index(lab)] for lab in LABELS}
    first = math.cos(cfg.delta) * math.sin(cfg.gamma) * math.cos(aA + aB + aC - bA - bB - bC) * mu * _alt_sum(row)
    second = math.cos(cfg.gamma) * math.sin(cfg.delta) * (
        (e["000"] - e["111"]) * math.cos(aA + aB + aC + bA + bB + bC)
        + (e["110"] - e["001"]) * math.cos(aA + aB - aC + bA + bB - bC)
        + (e["010"] - e["101"]) * math.cos(aA - aB + aC + bA - bB + bC)
        + (e["100"] - e["011"]) * math.cos(aA - aB - aC + bA - bB - bC)
    )
    return sin3 / 8.0 * (first - second)


def general_form(
    cfg: EntanglementConfig,
    s: StrategyTriple,
    m: PayoffMatrix,
    *,
    mu: float = 1.0,
    as_printed: bool = False,
) -> np.ndarray:
    """Closed-form (P^A, P^B, P^C), with optional coherence factor ``mu`` = 1 - p."""
    eta1, eta2, xi = cfg.eta1, cfg.eta2, cfg.xi * mu
    Cs = s.Cs
    terms = _pattern_terms(s, as_printed)
    out = np.empty(3)
    for i, k in enumerate(PLAYERS):
        row = m.row(k)
        total = 0.0
        for pattern, lab, partner, order, sign, phase in terms:
            x, y = row[label_index(lab)], row[label_index(partner)]
            ex, ey = (eta1, eta2) if order == 1 else (eta2, eta1)
            total += _pattern_weight(Cs, pattern) * (ex * x + ey * y + sign * xi * (x - y) * math.cos(2 * phase))
        out[i] = total + interference_term(cfg, s, m, k, mu)
    return out


def expected_payoffs_closed(
    cfg: EntanglementConfig,
    s: StrategyTriple,
    m: PayoffMatrix,
    *,
    as_printed: bool = False,
) -> np.ndarray:
    return general_form(cfg, s, m, as_printed=as_printed)


# --- coefficient quads and bilinear views ------------------------------------------


def _effective_label(pattern: str, variant: str) -> str:
    """Payoff label read for a C/S pattern in each reduced regime."""
    if variant == NONENTANGLED:
        return pattern
    if variant == MAXENTANGLED:
        return _SWAP.get(pattern, pattern)
    if variant == PARTIAL_DUAL:
        return pattern if pattern in ("000", "001", "100", "101") else complement(pattern)
    raise DomainError(f"unknown variant {variant!r}")


def opponents(viewer: str) -> tuple[str, str]:
    i = player_index(viewer)
    return tuple(p for j, p in enumerate(PLAYERS) if j != i)  # type: ignore[return-value]


@dataclass(frozen=True)
class CoefficientQuad:
    """Coefficients of P^k as seen by ``viewer`` with opponents x, y (in A, B, C order).

    P^k = C_x C_y D + S_x C_y E + C_x S_y F + S_x S_y G.
    """

    D: float
    E: float
    F: float
    G: float
    variant: str
    viewer: str
    k: str

    def evaluate(self, Cx: float, Cy: float) -> float:
        return Cx * Cy * (self.D - self.E - self.F + self.G) + Cx * (self.F - self.G) + Cy * (self.E - self.G) + self.G

    def as_tuple(self) -> tuple[float, float, float, float]:
        return (self.D, self.E, self.F, self.G)


def coefficient_quad(m: PayoffMatrix, k: str, viewer: str, own_C: float, variant: str) -> CoefficientQuad:
    v = player_index(viewer)
    own_S = 1.0 - own_C
    coeffs = []
    for x_bit, y_bit in (("0", "0"), ("1", "0"), ("0", "1"), ("1", "1")):
        value = 0.0
        for v_bit, weight in (("0", own_C), ("1", own_S)):
            bits = [x_bit, y_bit]
            bits.insert(v, v_bit)
            value += weight * m.entry(k, _effective_label("".join(bits), variant))
        coeffs.append(value)
    return CoefficientQuad(*coeffs, variant=variant, viewer=PLAYERS[v], k=PLAYERS[player_index(k)])


def nonentangled_coefficients(m: PayoffMatrix, k: str, viewer: str, own_C: float) -> CoefficientQuad:
    return coefficient_quad(m, k, viewer, own_C, NONENTANGLED)


def maxentangled_coefficients(m: PayoffMatrix, k: str, viewer: str, own_C: float) -> CoefficientQuad:
    return coefficient_quad(m, k, viewer, own_C, MAXENTANGLED)


def partial_dual_coefficients(m: PayoffMatrix, k: str, viewer: str, own_C: float) -> CoefficientQuad:
    return coefficient_quad(m, k, viewer, own_C, PARTIAL_DUAL)


def _view(m: PayoffMatrix, k: str, viewer: str, Cs: Sequence[float], variant: str) -> float:
    v = player_index(viewer)
    x, y = (Cs[j] for j in range(3) if j != v)
    return coefficient_quad(m, k, viewer, Cs[v], variant).evaluate(x, y)


def nonentangled_payoff_view(m: PayoffMatrix, k: str, viewer: str, Cs: Sequence[float]) -> float:
    """P^k at gamma = delta = 0, alpha = beta = 0, via ``viewer``'s bilinear form."""
    return _view(m, k, viewer, Cs, NONENTANGLED)


def maxentangled_payoff_view(m: PayoffMatrix, k: str, viewer: str, Cs: Sequence[float]) -> float:
    """P^k at gamma = delta = pi/2, alpha = beta = 0, via ``viewer``'s bilinear form."""
    return _view(m, k, viewer, Cs, MAXENTANGLED)


def partial_dual_payoff_view(m: PayoffMatrix, k: str, viewer: str, Cs: Sequence[float]) -> float:
    """P^k in either partial branch for a NOT-dual matrix (the interference term cancels)."""
    if not m.is_not_dual([k]):
        raise DomainError(f"payoff row {k} is not invariant under bitwise complement")
    return _view(m, k, viewer, Cs, PARTIAL_DUAL)


# --- matrix maps ---------------------------------------------------------------------


def symmetry_permute_matrix(m: PayoffMatrix) -> PayoffMatrix:
    """Swap profiles 100 <-> 011 and 010 <-> 101 for every player."""
    order = [label_index(_SWAP.get(lab, lab)) for lab in LABELS]
    return m.with_values(m.values[:, order])


_PAIR_PATTERNS = (
    # (label, partner), (pattern weighting label-first row, pattern weighting partner-first row)
    ("000", "111"),
    ("001", "110"),
    ("100", "011"),
    ("101", "010"),
)


def _pair_maps(cfg: EntanglementConfig, s: StrategyTriple) -> dict[tuple[str, str], np.ndarray]:
    """2x2 maps taking ($label, $partner) to the two pattern coefficients of each pair."""
    eta1, eta2, xi = cfg.eta1, cfg.eta2, cfg.xi
    maps: dict[tuple[str, str], list] = {}
    for pattern, lab, partner, order, sign, phase in _pattern_terms(s, as_printed=False):
        ex, ey = (eta1, eta2) if order == 1 else (eta2, eta1)
        c = sign * xi * math.cos(2 * phase)
        maps.setdefault((lab, partner), []).append([ex + c, ey - c])
    return {key: np.array(rows) for key, rows in maps.items()}


def phase_transform_matrix(m: PayoffMatrix, s: StrategyTriple, cfg: EntanglementConfig) -> PayoffMatrix:
    """Matrix m' whose zero-phase payoffs equal the payoffs of ``m`` under the phases of ``s``.

    Defined where the interference term vanishes for every strategy:
    gamma = delta = 0 or gamma = delta = pi/2.
    """
    if not (
        (abs(cfg.gamma) < 1e-12 and abs(cfg.delta) < 1e-12)
        or (abs(cfg.gamma - HALF_PI) < 1e-12 and abs(cfg.delta - HALF_PI) < 1e-12)
    ):
        raise DomainError("phase transform needs gamma = delta = 0 or gamma = delta = pi/2")
    zero = StrategyTriple.from_thetas(s.thetas)
    phased, plain = _pair_maps(cfg, s), _pair_maps(cfg, zero)
    out = m.values.copy()
    for lab, partner in _PAIR_PATTERNS:
        i, j = label_index(lab), label_index(partner)
        pair = m.values[:, [i, j]].T
        new = np.linalg.solve(plain[(lab, partner)], phased[(lab, partner)] @ pair)
        out[:, i], out[:, j] = new[0], new[1]
    return m.with_values(out)


# --- partially entangled regime ------------------------------------------------------


def branch_config(branch: str | tuple[float, float]) -> EntanglementConfig:
    delta, gamma = BRANCHES[branch] if isinstance(branch, str) else branch
    if (delta, gamma) not in (BRANCH_I, BRANCH_II):
        raise DomainError(f"partial branch must be (0, pi/2) or (pi/2, 0), got {(delta, gamma)}")
    return EntanglementConfig(gamma=gamma, delta=delta)


def branch_sign(branch: str | tuple[float, float]) -> int:
    cfg = branch_config(branch)
    return 1 if cfg.gamma > cfg.delta else -1


def partial_strategies(thetas: Sequence[float]) -> StrategyTriple:
    """Strategies with alpha = 0, beta_C = 0 and (beta_A, beta_B) = (-pi/2, pi/2)."""
    return StrategyTriple(*(Strategy(t, 0.0, b) for t, b in zip(thetas, PARTIAL_BETAS)))


def _angle_close(x: float, y: float) -> bool:
    return abs(math.remainder(x - y, 2 * math.pi)) < 1e-9


def check_partial_strategies(s: StrategyTriple) -> None:
    bA, bB, bC = s.betas
    if any(abs(a) > 1e-12 for a in s.alphas) or abs(bC) > 1e-12:
        raise DomainError("partial regime needs alpha_k = 0 and beta_C = 0")
    if not (_angle_close(bA - bB, math.pi) and _angle_close(bA + bB, 2 * math.pi)):
        raise DomainError("partial regime needs beta_A - beta_B = pi and beta_A + beta_B = 2 pi (mod 2 pi)")


def partial_payoff(
    s: StrategyTriple,
    m: PayoffMatrix,
    branch: str | tuple[float, float],
    *,
    mu: float = 1.0,
) -> np.ndarray:
    """Squared-amplitude form of the partial-branch payoffs.

    The upper sign belongs to branch (delta, gamma) = (0, pi/2). ``mu`` < 1 applies a
    single-qubit tap, which only damps the branch-(i) interference.
    """
    check_partial_strategies(s)
    sign = branch_sign(branch)
    cA, cB, cC = (st.c for st in s)
    sA, sB, sC = (st.s for st in s)
    amp = {
        "000": cA * cB * cC + sign * sA * sB * sC,
        "111": cA * cB * cC - sign * sA * sB * sC,
        "001": cA * cB * sC - sign * sA * sB * cC,
        "110": cA * cB * sC + sign * sA * sB * cC,
        "100": sA * cB * cC - sign * cA * sB * sC,
        "011": sA * cB * cC + sign * cA * sB * sC,
        "101": sA * cB * sC + sign * cA * sB * cC,
        "010": sA * cB * sC - sign * cA * sB * cC,
    }
    weights = np.array([0.5 * amp[lab] ** 2 for lab in LABELS])
    payoffs = m.values @ weights
    if mu != 1.0 and sign > 0:
        # A tap damps only the coherence-driven part: sign * c_A c_B c_C s_A s_B s_C * alt.
        interference = cA * cB * cC * sA * sB * sC * np.array([_alt_sum(m.row(k)) for k in PLAYERS])
        payoffs = payoffs - (1.0 - mu) * interference
    return payoffs


def partial_half_angle_payoff(thetaB: float, thetaC: float, m: PayoffMatrix, branch: str | tuple[float, float]) -> np.ndarray:
    """Half-angle form of the partial payoff, exact when Alice plays theta_A = pi/2."""
    sign = branch_sign(branch)
    minus = (thetaB - sign * thetaC) / 2  # "theta_B -+ theta_C" with the upper sign
    plus = (thetaB + sign * thetaC) / 2
    cm, cp = math.cos(minus) ** 2, math.cos(plus) ** 2
    sm, sp = math.sin(minus) ** 2, math.sin(plus) ** 2
    w = {"000": cm, "111": cp, "001": sm, "110": sp, "100": cp, "011": cm, "101": sp, "010": sm}
    return 0.25 * (m.values @ np.array([w[lab] for lab in LABELS]))


def nonentangled_product_form(m: PayoffMatrix, Cs: Sequence[float]) -> np.ndarray:
    """sum over profiles of the pattern weight times the entry (gamma = delta = 0, no phases)."""
    return m.values @ np.array([_pattern_weight(Cs, lab) for lab in LABELS])
