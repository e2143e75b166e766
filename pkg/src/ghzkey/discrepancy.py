"""Printed-formula variants and the machine-readable discrepancy ledger.

Each check evaluates a formula exactly as printed in the source derivation at a fixed
seeded parameter point and compares it with the density-matrix oracle (or with the
exact quantity the formula is meant to produce). Checks whose values differ become
ledger records, one JSON object per line.
"""

from __future__ import annotations

import json
import math
from pathlib import Path
from typing import Iterable

import numpy as np

from ghzkey import constants as tol
from ghzkey.generators import family_matrix, random_matrix
from ghzkey.payoffs import (
    NONENTANGLED,
    PARTIAL_DUAL,
    branch_config,
    coefficient_quad,
    general_form,
    interference_term,
    partial_half_angle_payoff,
    partial_strategies,
)
from ghzkey.recovery import replay_failure_probability
from ghzkey.state import (
    HALF_PI,
    PLAYERS,
    EntanglementConfig,
    PayoffMatrix,
    StrategyTriple,
    as_generator,
    expected_payoffs_oracle,
    label_index,
)
from ghzkey.adversary import EavesdropConfig, tapped_payoffs_oracle

FIELDS = ("regime", "term", "params", "printed", "oracle", "absdiff", "note")
DEFAULT_PATH = Path(__file__).resolve().parents[2] / "discrepancies.jsonl"


def _e(m: PayoffMatrix, k: str, lab: str) -> float:
    return m.entry(k, lab)


def _record(regime, term, params, printed, oracle, note=""):
    printed = None if printed is None or not math.isfinite(printed) else float(printed)
    absdiff = None if printed is None else abs(printed - oracle)
    return {
        "regime": regime,
        "term": term,
        "params": {k: (round(v, 15) if isinstance(v, float) else v) for k, v in params.items()},
        "printed": printed,
        "oracle": float(oracle),
        "absdiff": absdiff,
        "note": note,
    }


# --- printed variants -------------------------------------------------------------------


def printed_low_entanglement(m: PayoffMatrix, k: str, CA: float, sign: int = 1) -> float:
    """Printed payoff at gamma = delta = pi/2 with theta_B = theta_C = 0."""
    return CA * _e(m, k, "000") + sign * (1 - CA) * _e(m, k, "001")


def printed_primed_quads(m: PayoffMatrix, k: str, viewer: str, own_C: float) -> tuple:
    """(D', E', F', G') of the maximally entangled view as printed."""
    C, S = own_C, 1.0 - own_C
    table = {
        "A": (("000", "011"), ("101", "110"), ("001", "110"), ("100", "111")),
        "B": (("000", "101"), ("011", "111"), ("001", "011"), ("010", "111")),
        "C": (("000", "001"), ("011", "010"), ("101", "100"), ("110", "111")),
    }[viewer]
    return tuple(C * _e(m, k, a) + S * _e(m, k, b) for a, b in table)


def printed_maxentangled_view(m: PayoffMatrix, k: str, viewer: str, Cs) -> float:
    i = PLAYERS.index(viewer)
    x, y = [c for j, c in enumerate(Cs) if j != i]
    D, E, F, G = printed_primed_quads(m, k, viewer, Cs[i])
    return x * y * D + (1 - x) * (1 - y) * E + x * (1 - y) * F + (1 - x) * y * G


def printed_barred_view(m: PayoffMatrix, k: str, viewer: str, Cs) -> float:
    """NOT-dual partial-regime view, with the printed barred quads and combinations."""
    CA, CB, CC = Cs
    e = {lab: _e(m, k, lab) for lab in ("000", "001", "100", "101")}
    if viewer == "A":
        C, S = CA, 1 - CA
        E = C * e["101"] + S * e["001"]
        F = C * e["001"] + S * e["101"]
        G = C * e["100"] + S * e["000"]
        return CB * CC * (e["000"] + e["100"] - e["001"] - e["101"]) + CB * (F - G) + CC * (E - G) + G
    if viewer == "B":
        C, S = CB, 1 - CB
        E = C * e["100"] + S * e["001"]
        F = C * e["001"] + S * e["100"]
        G = C * e["101"] + S * e["000"]
        return CA * CC * (e["000"] + e["101"] - e["001"] - e["100"]) + CC * (E - G) + CC * (F - G) + G
    C, S = CC, 1 - CC
    E = C * e["101"] + S * e["100"]
    F = C * e["100"] + S * e["101"]
    G = C * e["001"] + S * e["100"]
    return CA * CB * (e["000"] + e["001"] - e["101"] - e["100"]) + CB * (F - G) + CA * (E - G) + G


def printed_phase_transform(m: PayoffMatrix, s: StrategyTriple, cfg: EntanglementConfig) -> PayoffMatrix:
    """Pairwise matrix transform as printed (single-angle cosines; fourth pair read as (101, 010))."""
    eta1, eta2, xi = cfg.eta1, cfg.eta2, cfg.xi
    aA, aB, aC = s.alphas
    bA, bB, bC = s.betas
    pairs = [
        (("000", "111"), aA + aB + aC, bA + bB + bC, 1),
        (("001", "110"), aA + aB - bC, bA + bB - aC, 1),
        (("100", "011"), -bA + aB + aC, aA - bB + bC, -1),
        (("101", "010"), bA - aB + bC, aA - bB + aC, -1),
    ]
    vals = m.values.copy()
    for (x, y), p1, p2, sg in pairs:
        ix, iy = label_index(x), label_index(y)
        M = np.array(
            [
                [eta1 + sg * xi * math.cos(p1), eta2 - sg * xi * math.cos(p1)],
                [eta2 - sg * xi * math.cos(p2), eta1 + sg * xi * math.cos(p2)],
            ]
        )
        vals[:, [ix, iy]] = m.values[:, [ix, iy]] @ M.T
    return m.with_values(vals)


def printed_partial_last(cfg: EntanglementConfig, s: StrategyTriple, m: PayoffMatrix, k: str, mu: float = 1.0, tapped_form: bool = False) -> float:
    """Last term of the partial regime with sin(delta - gamma), as printed.

    ``tapped_form`` uses the eavesdropper version: mu on branch (i), leading minus on (ii).
    """
    sin3 = math.prod(math.sin(t) for t in s.thetas)
    row = m.row(k)
    alt = sum(row[i] * (-1) ** bin(i).count("1") for i in range(8))
    base = sin3 / 8 * math.sin(cfg.delta - cfg.gamma) * alt
    if not tapped_form:
        return base
    return mu * base if cfg.delta == 0.0 else -base


# --- ledger --------------------------------------------------------------------------------


def _checks(seed: int) -> Iterable[dict]:
    rng = as_generator(seed)

    # General form: the cos 2(...) argument of the C_A S_B S_C pattern.
    m = random_matrix(rng)
    cfg = EntanglementConfig(float(rng.uniform(0, HALF_PI)), float(rng.uniform(0, HALF_PI)))
    s = StrategyTriple.from_thetas(rng.uniform(0, math.pi, 3), rng.uniform(-math.pi, math.pi, 3), rng.uniform(-math.pi, math.pi, 3))
    params = {"gamma": cfg.gamma, "delta": cfg.delta, "theta": list(s.thetas), "alpha": list(s.alphas), "beta": list(s.betas), "k": "A"}
    yield _record(
        "general",
        "C_A S_B S_C cos2(-alpha_A + beta_B - beta_C)",
        params,
        general_form(cfg, s, m, as_printed=True)[0],
        expected_payoffs_oracle(cfg, s, m)[0],
        "corrected argument is -alpha_A + beta_B + beta_C",
    )
    tap = EavesdropConfig(0.3)
    yield _record(
        "general+tap",
        "C_A S_B S_C cos2(-alpha_A + beta_B - beta_C) with xi -> xi mu",
        {**params, "p": tap.p},
        general_form(cfg, s, m, mu=tap.mu, as_printed=True)[0],
        tapped_payoffs_oracle(cfg, s, m, tap)[0],
        "same argument in the tapped non-/maximally entangled form",
    )

    # Low-entanglement fixed point.
    m = random_matrix(rng)
    s = StrategyTriple.from_thetas([float(rng.uniform(0.2, 2.9)), 0.0, 0.0])
    maxcfg = EntanglementConfig.maximal()
    for sign in (1, -1):
        yield _record(
            "maxentangled",
            f"theta_B = theta_C = 0: C_A $000 {'+' if sign > 0 else '-'} S_A $001",
            {"theta": list(s.thetas), "k": "A"},
            printed_low_entanglement(m, "A", s.alice.C, sign),
            expected_payoffs_oracle(maxcfg, s, m)[0],
            "oracle gives C_A $000 + S_A $011",
        )

    # Maximally entangled primed quads.
    m = random_matrix(rng)
    Cs = [float(c) for c in rng.uniform(0.1, 0.9, 3)]
    oracle = expected_payoffs_oracle(maxcfg, StrategyTriple.from_C(Cs), m)
    notes = {
        "A": "E' and G' exchanged; F' should be C_A $001 + S_A $010",
        "B": "E', F', G' should be C_B $100 + S_B $111, C_B $001 + S_B $010, C_B $101 + S_B $110",
        "C": "E', G' should be C_C $100 + S_C $111, C_C $101 + S_C $110",
    }
    for viewer in PLAYERS:
        yield _record(
            "maxentangled",
            f"primed quads D'E'F'G' for viewer {viewer}",
            {"C": Cs, "k": "A", "viewer": viewer},
            printed_maxentangled_view(m, "A", viewer, Cs),
            oracle[0],
            notes[viewer],
        )

    # Phase transform between the two phase-free regimes.
    for cfg_t in (EntanglementConfig(HALF_PI, HALF_PI),):
        m = random_matrix(rng)
        s = StrategyTriple.from_thetas(rng.uniform(0.2, 2.9, 3), rng.uniform(-1, 1, 3), rng.uniform(-1, 1, 3))
        zero = StrategyTriple.from_thetas(s.thetas)
        yield _record(
            "maxentangled",
            "pairwise phase transform of the payoff matrix",
            {"theta": list(s.thetas), "alpha": list(s.alphas), "beta": list(s.betas), "k": "A"},
            expected_payoffs_oracle(cfg_t, zero, printed_phase_transform(m, s, cfg_t))[0],
            expected_payoffs_oracle(cfg_t, s, m)[0],
            "needs cos 2(...) arguments; third and fourth pairs map to swapped targets; fourth pair printed as (101, 101)",
        )

    # Partial regime. A generic matrix keeps the alternating sum nonzero.
    m = random_matrix(rng)
    s = partial_strategies(rng.uniform(0.2, 2.9, 3))
    for br in ("i", "ii"):
        cfg_b = branch_config(br)
        k = "A"
        oracle_val = expected_payoffs_oracle(cfg_b, s, m)[0]
        correct_last = interference_term(cfg_b, s, m, k)
        yield _record(
            f"partial_{br}",
            "last term with sin(delta - gamma)",
            {"theta": list(s.thetas), "k": k, "branch": br},
            oracle_val - correct_last + printed_partial_last(cfg_b, s, m, k),
            oracle_val,
            "the last term carries sin(gamma - delta)",
        )
        tap = EavesdropConfig(0.3)
        tapped = tapped_payoffs_oracle(cfg_b, s, m, tap)[0]
        yield _record(
            f"partial_{br}+tap",
            "tapped last term",
            {"theta": list(s.thetas), "k": k, "branch": br, "p": tap.p},
            tapped - interference_term(cfg_b, s, m, k, tap.mu) + printed_partial_last(cfg_b, s, m, k, tap.mu, True),
            tapped,
            "branch (i) carries +mu (1/8) sin sin sin alt",
        )
    mg = random_matrix(rng)
    thetas = [math.pi / 4, float(rng.uniform(0.2, 2.9)), float(rng.uniform(0.2, 2.9))]
    for br in ("i", "ii"):
        yield _record(
            f"partial_{br}",
            "half-angle form at theta_A = pi/4",
            {"theta": thetas, "k": "A", "branch": br},
            partial_half_angle_payoff(thetas[1], thetas[2], mg, br)[0],
            expected_payoffs_oracle(branch_config(br), partial_strategies(thetas), mg)[0],
            "the half-angle form holds at theta_A = pi/2",
        )
    m = family_matrix("not_dual", rng)
    Cs = list(s.Cs)
    oracle = expected_payoffs_oracle(branch_config("i"), s, m)
    barred_notes = {
        "A": "",
        "B": "second C_C coefficient should be C_A",
        "C": "G bar should be C_C $001 + S_C $000; combination pairs C_B with (E - G) and C_A with (F - G)",
    }
    for viewer in PLAYERS:
        yield _record(
            "partial_dual",
            f"barred quads and combination for viewer {viewer}",
            {"C": Cs, "k": "A", "viewer": viewer},
            printed_barred_view(m, "A", viewer, Cs),
            oracle[0],
            barred_notes[viewer],
        )

    yield from _recovery_checks(rng)

    yield _record(
        "protocol",
        "replay ambiguity (1/8)^r",
        {"C": [0.5, 0.5, 0.5], "replays": 3},
        (1 / 8) ** 3,
        replay_failure_probability([0.5, 0.5, 0.5], 3),
        "rounds differing only in Alice's bit reveal nothing new; failure decays as (1/4)^r at the uniform point",
    )


def _recovery_checks(rng) -> Iterable[dict]:
    nonent = EntanglementConfig.nonentangled()

    # Case II, Alice discloses P^A and C_A: Bob's quotient.
    m = family_matrix("case_ii", rng)
    Cs = [float(c) for c in rng.uniform(0.1, 0.9, 3)]
    PA = expected_payoffs_oracle(nonent, StrategyTriple.from_C(Cs), m)[0]
    qB = coefficient_quad(m, "A", "B", Cs[1], NONENTANGLED)
    qC = coefficient_quad(m, "A", "C", Cs[2], NONENTANGLED)
    CA = Cs[0]
    yield _record(
        "nonentangled",
        "Case II Alice-disclosure quotient for Bob",
        {"C": Cs},
        (PA - qB.G - CA * (qC.F - qC.G)) / (CA * (qB.D - qB.F)),
        Cs[2],
        "numerator should use Bob's F - G",
    )

    # Case III, Charlie's payoff form.
    m = family_matrix("case_iii", rng)
    Cs = [float(c) for c in rng.uniform(0.1, 0.9, 3)]
    PA = expected_payoffs_oracle(nonent, StrategyTriple.from_C(Cs), m)[0]
    q = coefficient_quad(m, "A", "C", Cs[2], NONENTANGLED)
    yield _record(
        "nonentangled",
        "Case III payoff for Charlie: C_B C_C (D - F) + G",
        {"C": Cs, "k": "A"},
        Cs[1] * Cs[2] * (q.D - q.F) + q.G,
        PA,
        "product should be C_A C_B",
    )

    # Partial regime, Alice discloses P^A and C_A.
    m = family_matrix("not_dual", rng)
    s = partial_strategies(rng.uniform(0.3, 2.8, 3))
    Cs = list(s.Cs)
    PA = expected_payoffs_oracle(branch_config("i"), s, m)[0]
    qB = coefficient_quad(m, "A", "B", Cs[1], PARTIAL_DUAL)
    qC = coefficient_quad(m, "A", "C", Cs[2], PARTIAL_DUAL)
    e = {lab: m.entry("A", lab) for lab in ("000", "001", "100", "101")}
    CA = Cs[0]
    yield _record(
        "partial_dual",
        "Bob's quotient with NOT-duality",
        {"C": Cs},
        (PA - CA * (qB.F - qB.G) + qB.G) / (CA * (e["000"] + e["101"] - e["100"] - e["001"]) + qB.E - qB.G),
        Cs[2],
        "numerator should subtract G",
    )
    yield _record(
        "partial_dual",
        "Charlie's quotient with NOT-duality",
        {"C": Cs},
        (PA - CA * (qC.F - qC.G) + qC.G) / (CA * (e["000"] + e["001"] - e["100"] - e["101"]) + qB.E - qB.G),
        Cs[1],
        "numerator should subtract G; denominator should use Charlie's E - G",
    )

    # Payoff-only disclosure with the partial symmetries.
    for fam, case in (("partial_sym_i", "I"), ("partial_sym_ii", "II")):
        m = family_matrix(fam, rng)
        s = partial_strategies(rng.uniform(0.3, 2.8, 3))
        Cs = list(s.Cs)
        PA = expected_payoffs_oracle(branch_config("i"), s, m)[0]
        e = {lab: m.entry("A", lab) for lab in ("000", "001", "100", "110")}
        CB, CC = Cs[1], Cs[2]
        if case == "I":
            bob = (PA - e["110"] + CB * (e["100"] - e["001"])) / ((2 * CB - 1) * (e["100"] - e["001"]))
            charlie = (PA - e["110"] + CC * (e["100"] - e["001"])) / ((2 * CC - 1) * (e["100"] - e["001"]))
            note = "P^A depends on C_A and C_B only: Bob can solve C_A, Charlie nothing, C_C is not identifiable"
        else:
            den = (2 * CB - 1) * (e["100"] - e["000"])
            bob = None if abs(den) < tol.SINGULAR_TOL else (PA - e["000"] - CB * (e["100"] - e["000"])) / den
            charlie = (PA - e["000"] + CC * (e["100"] - e["001"])) / ((2 * CC - 1) * (e["100"] - e["001"]))
            note = "$100 = $000 makes the printed denominator zero; P^A depends on C_B and C_C only, so C_A is not identifiable"
        yield _record(f"partial_sym_{case}", f"payoff-only quotient for Bob (case {case})", {"C": Cs}, bob, CC, note)
        yield _record(f"partial_sym_{case}", f"payoff-only quotient for Charlie (case {case})", {"C": Cs}, charlie, CB, note)


def build_ledger(seed: int = 0, atol: float = tol.CLOSED_FORM_TOL) -> list[dict]:
    """All printed-formula checks that disagree with the oracle beyond ``atol``."""
    return [r for r in _checks(seed) if r["absdiff"] is None or r["absdiff"] > atol]


def dumps(records: list[dict]) -> str:
    return "".join(json.dumps(r, sort_keys=True) + "\n" for r in records)


def write_ledger(path: str | Path = DEFAULT_PATH, seed: int = 0) -> list[dict]:
    records = build_ledger(seed)
    Path(path).write_text(dumps(records))
    return records


def load_ledger(path: str | Path = DEFAULT_PATH) -> list[dict]:
    return [json.loads(line) for line in Path(path).read_text().splitlines() if line.strip()]


def ledger_terms(records: list[dict]) -> set[str]:
    return {r["term"] for r in records}
