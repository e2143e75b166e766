"""Strategy and payoff recovery from measurement statistics and public disclosures.

Alice infers her opponents' strategies from outcome statistics; Bob and Charlie
invert the reduced payoff forms using what Alice publishes. All inversions work
on the bilinear views of :mod:`ghzkey.payoffs`:

    P^k = C_x C_y (D - E - F + G) + C_x (F - G) + C_y (E - G) + G

where x is always Alice and y the viewer's other opponent.
"""

from __future__ import annotations

import enum
import itertools
import math
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np
from scipy import optimize, stats

from ghzkey import constants as tol
from ghzkey.payoffs import (
    MAXENTANGLED,
    NONENTANGLED,
    PARTIAL_DUAL,
    coefficient_quad,
    symmetry_permute_matrix,
)
from ghzkey.state import (
    LABELS,
    PLAYERS,
    DomainError,
    EntanglementConfig,
    PayoffMatrix,
    Strategy,
    StrategyTriple,
    as_generator,
    final_state,
    label_index,
    outcome_distribution,
    player_index,
)


class RecoveryError(Exception):
    """Base class for recovery failures."""


class SingularRecovery(RecoveryError):
    """A denominator vanishes: the disclosure does not determine the unknowns."""


class InconsistentDisclosure(RecoveryError):
    """Recovered strategy falls outside [0, 1] by more than rounding slack."""


class NoInformation(RecoveryError):
    """All payoff coefficients are constants; nothing private can be learned."""

    def __init__(self, message: str, payoffs: Sequence[float] | None = None):
        super().__init__(message)
        self.payoffs = None if payoffs is None else tuple(float(p) for p in payoffs)


class NotIdentifiable(RecoveryError):
    """The disclosed value does not depend on any strategy this party is missing."""


class UnsupportedDisclosure(RecoveryError):
    """The (regime, case, disclosure) combination has no solved inversion."""


class IdentificationError(RecoveryError):
    """Measured payoff ratios match zero or several profiles."""


class AmbiguityRemains(RecoveryError):
    """Replay data do not yet separate C_B from C_C."""


class ProtocolViolation(RecoveryError):
    """Rounds that should share strategies show different statistics."""


class SymmetryCase(enum.Enum):
    CASE_I = "CaseI"
    CASE_II = "CaseII"
    CASE_III = "CaseIII"
    PARTIAL_SYM_I = "PartialSymI"
    PARTIAL_SYM_II = "PartialSymII"
    PARTIAL_SYM_III = "PartialSymIII"
    NONE = "None"

    def __str__(self) -> str:
        return self.value


PAYOFFS_AB = "payoffs_ab"
PAYOFFS_OWN = "payoffs_own"
ALICE_ALL = "alice_all"
PAYOFF_A_ONLY = "payoff_a_only"
DISCLOSURE_KINDS = (PAYOFFS_AB, PAYOFFS_OWN, ALICE_ALL, PAYOFF_A_ONLY)


@dataclass(frozen=True)
class Disclosure:
    """Classical values Alice publishes after her measurement.

    ``payoffs`` maps player name to disclosed payoff; ``C_A`` is set for ALICE_ALL.
    """

    kind: str
    payoffs: dict = field(default_factory=dict)
    C_A: Optional[float] = None

    def __post_init__(self) -> None:
        if self.kind not in DISCLOSURE_KINDS:
            raise DomainError(f"unknown disclosure kind {self.kind!r}")
        values = list(self.payoffs.values()) + ([] if self.C_A is None else [self.C_A])
        if not all(math.isfinite(v) for v in values):
            raise DomainError("disclosed values must be finite")
        need = {PAYOFFS_AB: {"A", "B"}, ALICE_ALL: {"A"}, PAYOFF_A_ONLY: {"A"}, PAYOFFS_OWN: {"A"}}[self.kind]
        if not need <= set(self.payoffs):
            raise DomainError(f"{self.kind} disclosure needs payoffs for {sorted(need)}")
        if self.kind == ALICE_ALL and self.C_A is None:
            raise DomainError("alice_all disclosure needs C_A")

    @classmethod
    def build(cls, kind: str, payoffs: Sequence[float], C_A: float | None = None) -> "Disclosure":
        """Disclosure of ``kind`` taken from the full payoff triple."""
        keys = {PAYOFFS_AB: "AB", PAYOFFS_OWN: "ABC", ALICE_ALL: "A", PAYOFF_A_ONLY: "A"}[kind]
        return cls(kind, {k: float(payoffs[player_index(k)]) for k in keys}, None if kind != ALICE_ALL else C_A)

    def to_dict(self) -> dict:
        return {"kind": self.kind, "payoffs": dict(self.payoffs), "C_A": self.C_A}


@dataclass(frozen=True)
class RecoveredInfo:
    """What one party knows after recovery; ``None`` marks values it cannot determine."""

    party: str
    Cs: tuple
    payoffs: tuple

    @property
    def complete(self) -> bool:
        return all(v is not None for v in self.Cs + self.payoffs)

    def C(self, k: str) -> Optional[float]:
        return self.Cs[player_index(k)]

    def to_dict(self) -> dict:
        return {"party": self.party, "C": list(self.Cs), "P": list(self.payoffs)}


# --- matrix classification -----------------------------------------------------------


def _eq(m: PayoffMatrix, k: str, labels: Sequence[str], atol: float) -> bool:
    vals = [m.entry(k, lab) for lab in labels]
    return max(vals) - min(vals) <= atol


def _case_holds(m: PayoffMatrix, case: SymmetryCase, k: str, atol: float) -> bool:
    groups = {
        SymmetryCase.CASE_I: [("001", "101"), ("011", "111"), ("010", "110")],
        SymmetryCase.CASE_II: [("100", "101", "110", "111")],
        SymmetryCase.CASE_III: [("001", "010", "011", "100", "101", "110", "111")],
        SymmetryCase.PARTIAL_SYM_I: [("100", "101"), ("001", "000")],
        SymmetryCase.PARTIAL_SYM_II: [("001", "101"), ("100", "000")],
        SymmetryCase.PARTIAL_SYM_III: [("000", "001", "100", "101")],
    }[case]
    return all(_eq(m, k, g, atol) for g in groups)


def classify_symmetry_case(
    m: PayoffMatrix,
    regime: str = NONENTANGLED,
    players: Sequence[str] | None = None,
    atol: float = tol.CASE_EQUALITY_TOL,
) -> SymmetryCase:
    """Most specific solvable symmetry case satisfied by the rows of ``players``.

    ``players`` defaults to the matrix's constrained set. In the maximally entangled
    regime the non-entangled cases are checked on the permuted matrix.
    """
    players = tuple(players or sorted(m.constrained))
    if regime == MAXENTANGLED:
        m = symmetry_permute_matrix(m)
        regime = NONENTANGLED
    if regime == NONENTANGLED:
        order = (SymmetryCase.CASE_III, SymmetryCase.CASE_I, SymmetryCase.CASE_II)
    elif regime == PARTIAL_DUAL:
        if not m.is_not_dual(players, atol=atol):
            return SymmetryCase.NONE
        order = (SymmetryCase.PARTIAL_SYM_III, SymmetryCase.PARTIAL_SYM_I, SymmetryCase.PARTIAL_SYM_II)
    else:
        raise DomainError(f"no symmetry cases are defined for regime {regime!r}")
    for case in order:
        if all(_case_holds(m, case, k, atol) for k in players):
            return case
    return SymmetryCase.NONE


def case_players(m: PayoffMatrix, case: SymmetryCase, regime: str = NONENTANGLED, atol: float = tol.CASE_EQUALITY_TOL) -> frozenset:
    """Players whose payoff rows satisfy ``case``."""
    if regime == MAXENTANGLED:
        m = symmetry_permute_matrix(m)
    return frozenset(k for k in PLAYERS if case is not SymmetryCase.NONE and _case_holds(m, case, k, atol))


def is_trivial_case_iii(m: PayoffMatrix, regime: str = NONENTANGLED, atol: float = tol.CASE_EQUALITY_TOL) -> bool:
    """Case III where $000 also equals the common entry: every coefficient is a constant."""
    if classify_symmetry_case(m, regime, atol=atol) is not SymmetryCase.CASE_III:
        return False
    mm = symmetry_permute_matrix(m) if regime == MAXENTANGLED else m
    return all(_eq(mm, k, LABELS, atol) for k in m.constrained)


@dataclass(frozen=True)
class RatioCheck:
    ok: bool
    collisions: tuple = ()
    degenerate: tuple = ()


def _direction(v: np.ndarray) -> Optional[np.ndarray]:
    n = float(np.linalg.norm(v))
    return None if n == 0.0 else v / n


def validate_ratio_distinctness(m: PayoffMatrix, atol: float = tol.RATIO_TOL) -> RatioCheck:
    """Check that payoff triples ($A : $B : $C) differ projectively across all 8 profiles."""
    dirs = {lab: _direction(m.triple(lab)) for lab in LABELS}
    degenerate = tuple(lab for lab, d in dirs.items() if d is None)
    collisions = []
    for a, b in itertools.combinations(LABELS, 2):
        da, db = dirs[a], dirs[b]
        if da is None or db is None:
            if da is None and db is None:
                collisions.append((a, b))
            continue
        if np.allclose(da, db, rtol=0.0, atol=atol):
            collisions.append((a, b))
    return RatioCheck(not collisions and not degenerate, tuple(collisions), degenerate)


def alice_identify_outcome(measured: Sequence[float], m: PayoffMatrix, atol: float = tol.IDENTIFY_TOL) -> str:
    """Profile whose payoff ratio matches the measured triple (any positive scale)."""
    d = _direction(np.asarray(measured, dtype=float))
    if d is None:
        raise IdentificationError("measured payoff triple is zero")
    hits = [lab for lab in LABELS if (e := _direction(m.triple(lab))) is not None and np.allclose(d, e, rtol=0.0, atol=atol)]
    if len(hits) != 1:
        raise IdentificationError(f"measured ratio matches {len(hits)} profiles: {hits}")
    return hits[0]


def identify_payoff_class(measured: Sequence[float], m: PayoffMatrix, atol: float = tol.IDENTIFY_TOL) -> tuple[str, ...]:
    """Profiles matching the measured ratio, allowed to be several only if they pay identically.

    NOT-dual matrices give each profile and its complement the same payoff triple, so
    the measurement fixes the outcome only up to that pair; the payoffs are still known.
    """
    d = _direction(np.asarray(measured, dtype=float))
    if d is None:
        raise IdentificationError("measured payoff triple is zero")
    hits = [lab for lab in LABELS if (e := _direction(m.triple(lab))) is not None and np.allclose(d, e, rtol=0.0, atol=atol)]
    if not hits:
        raise IdentificationError("measured ratio matches no profile")
    ref = m.triple(hits[0])
    if any(not np.allclose(m.triple(lab), ref, rtol=0.0, atol=tol.CASE_EQUALITY_TOL) for lab in hits[1:]):
        raise IdentificationError(f"measured ratio matches profiles with different payoffs: {hits}")
    return tuple(hits)


# --- Alice's inference from outcome statistics -------------------------------------------


def _label_to_pattern(label: str, regime: str) -> str:
    if regime == NONENTANGLED:
        return label
    if regime == MAXENTANGLED:
        return symmetry_permute_label(label)
    raise DomainError(f"outcome statistics are product-form only in the non- and maximally entangled regimes, not {regime!r}")


def symmetry_permute_label(label: str) -> str:
    swap = {"100": "011", "011": "100", "010": "101", "101": "010"}
    return swap.get(label, label)


@dataclass(frozen=True)
class OpponentInference:
    """Alice's view of her opponents from one batch of outcome statistics.

    ``pattern_freqs`` are frequencies indexed by C/S pattern (bit 0 = C_k, 1 = S_k).
    """

    pattern_freqs: np.ndarray
    own_C: float
    shots: Optional[int]
    product: float
    product_stderr: float
    per_label: dict
    unobservable: tuple

    @property
    def exact(self) -> bool:
        return self.shots is None

    def opponent_products(self) -> np.ndarray:
        """q_bc = X_B X_C marginalized over Alice's bit, order (00, 01, 10, 11)."""
        f = self.pattern_freqs
        return np.array([f[j] + f[4 + j] for j in range(4)])


def alice_infer_opponent_product(
    freqs: Sequence[float],
    own_C: float,
    regime: str = NONENTANGLED,
    shots: int | None = None,
) -> OpponentInference:
    """Estimate C_B C_C (and per-profile opponent products) from outcome statistics.

    ``freqs`` are exact probabilities (``shots=None``) or counts/frequencies from
    ``shots`` measurements. Valid where outcomes follow the product law, i.e. the
    non- and maximally entangled regimes with zero phases.
    """
    f = np.asarray(freqs, dtype=float)
    if f.shape != (8,):
        raise DomainError("need 8 outcome frequencies")
    if shots is not None and f.sum() > 1.0 + 1e-9:
        f = f / shots
    pattern = np.zeros(8)
    for lab, val in zip(LABELS, f):
        pattern[label_index(_label_to_pattern(lab, regime))] += val
    own_S = 1.0 - own_C
    per_label, unobservable = {}, []
    for lab in LABELS:
        pat = _label_to_pattern(lab, regime)
        x_a = own_C if pat[0] == "0" else own_S
        if x_a <= tol.SINGULAR_TOL:
            unobservable.append(lab)
            continue
        per_label[lab] = pattern[label_index(pat)] / x_a
    product = float(pattern[0] + pattern[4])
    stderr = 0.0 if shots is None else math.sqrt(max(product * (1 - product), 0.0) / shots)
    return OpponentInference(pattern, own_C, shots, product, stderr, per_label, tuple(unobservable))


def disambiguate_by_replay(
    rounds: Sequence[OpponentInference],
    max_stderr: float = 0.01,
    consistency_alpha: float = 1e-6,
) -> tuple[float, float]:
    """Split C_B C_C into (C_B, C_C) by pooling rounds played with the same strategies.

    C_B = q_00 + q_01 and C_C = q_00 + q_10 on the pooled opponent products.
    Raises AmbiguityRemains while the pooled standard error exceeds ``max_stderr``.
    """
    if not rounds:
        raise AmbiguityRemains("no rounds to combine")
    exact = [r for r in rounds if r.exact]
    if exact and len(exact) != len(rounds):
        raise DomainError("cannot mix exact and sampled rounds")
    if exact:
        ref = rounds[0].pattern_freqs
        if any(not np.allclose(r.pattern_freqs, ref, rtol=0.0, atol=1e-9) for r in rounds[1:]):
            raise ProtocolViolation("exact rounds disagree: strategies changed between replays")
        q = rounds[0].opponent_products()
        return float(q[0] + q[1]), float(q[0] + q[2])
    counts = np.array([r.opponent_products() * r.shots for r in rounds])
    if len(rounds) > 1:
        table = np.round(counts).astype(int)
        table = table[:, table.sum(axis=0) > 0]
        if table.shape[1] > 1:
            pvalue = stats.chi2_contingency(table).pvalue
            if pvalue < consistency_alpha:
                raise ProtocolViolation(f"round statistics are inconsistent (p = {pvalue:.2e})")
    total = counts.sum()
    q = counts.sum(axis=0) / total
    CB, CC = q[0] + q[1], q[0] + q[2]
    se = max(math.sqrt(CB * (1 - CB) / total), math.sqrt(CC * (1 - CC) / total))
    if se > max_stderr:
        raise AmbiguityRemains(f"pooled standard error {se:.3g} exceeds {max_stderr}")
    return float(CB), float(CC)


@dataclass(frozen=True)
class RevealedOutcome:
    """One single-shot round: the collapsed pattern and the opponent product it reveals."""

    pattern: str
    opponent_product: float


def reveal_single_shot(pattern: str, CB: float, CC: float) -> RevealedOutcome:
    xb = CB if pattern[1] == "0" else 1.0 - CB
    xc = CC if pattern[2] == "0" else 1.0 - CC
    return RevealedOutcome(pattern, xb * xc)


def resolve_single_shots(outcomes: Sequence[RevealedOutcome], atol: float = 1e-9) -> tuple[float, float]:
    """(C_B, C_C) from single-shot rounds, or AmbiguityRemains.

    Each round reveals X_B X_C for its (b, c) pattern only; Alice's bit carries no
    information about her opponents. Two patterns differing in one bit fix both
    values; antipodal patterns fix only the unordered pair unless C_B = C_C.
    """
    q = {}
    for o in outcomes:
        q[o.pattern[1:]] = o.opponent_product
    if len(q) < 2:
        raise AmbiguityRemains("only one opponent pattern observed")
    # C_B from a pair sharing Charlie's bit, C_C from a pair sharing Bob's bit.
    CB = CC = None
    for c in "01":
        if "0" + c in q and "1" + c in q:
            xc = q["0" + c] + q["1" + c]
            CC = xc if c == "0" else 1.0 - xc
            CB = q["0" + c] / xc if xc > atol else None
    for b in "01":
        if b + "0" in q and b + "1" in q:
            xb = q[b + "0"] + q[b + "1"]
            CB = xb if b == "0" else 1.0 - xb
            if CC is None and xb > atol:
                CC = q[b + "0"] / xb
    if CB is not None and CC is not None:
        return float(CB), float(CC)
    # Antipodal pair only: the quadratic for (C_B, C_C) has a unique root iff it is double.
    if set(q) == {"00", "11"}:
        total = 1.0 - q["11"] + q["00"]  # C_B + C_C
        disc = total**2 - 4 * q["00"]
    else:
        # C_B - P = q01, C_C - P = q10, P = C_B C_C.
        a, b = q["01"], q["10"]
        disc = (a + b - 1.0) ** 2 - 4 * a * b
        total = None
    if abs(disc) > atol:
        raise AmbiguityRemains("antipodal patterns leave C_B and C_C interchangeable")
    if total is not None:
        return total / 2, total / 2
    P = (1.0 - a - b) / 2
    return a + P, b + P


def replay_failure_probability(Cs: Sequence[float], replays: int) -> float:
    """Exact probability that a round plus ``replays`` replays leave (C_B, C_C) unresolved.

    Enumerates every sequence of opponent patterns; independent of the Monte-Carlo path.
    """
    CB, CC = Cs[1], Cs[2]
    probs = {"00": CB * CC, "01": CB * (1 - CC), "10": (1 - CB) * CC, "11": (1 - CB) * (1 - CC)}
    fail = 0.0
    for seq in itertools.product(probs, repeat=replays + 1):
        p = math.prod(probs[x] for x in seq)
        if p == 0.0:
            continue
        try:
            resolve_single_shots([reveal_single_shot("0" + x, CB, CC) for x in seq])
        except AmbiguityRemains:
            fail += p
    return fail


# --- inversion helpers -----------------------------------------------------------------


def _check_denominator(value: float, what: str) -> float:
    if abs(value) < tol.SINGULAR_TOL:
        raise SingularRecovery(f"{what} denominator {value:.3g} vanishes")
    return value


def _clamp(value: float, name: str) -> float:
    if value < -tol.C_SLACK or value > 1.0 + tol.C_SLACK:
        raise InconsistentDisclosure(f"recovered {name} = {value:.9g} outside [0, 1]")
    return min(max(value, 0.0), 1.0)


def _party_opponent(party: str) -> str:
    if party not in ("B", "C"):
        raise DomainError("recovering party must be Bob ('B') or Charlie ('C')")
    return "C" if party == "B" else "B"


def _fill(m: PayoffMatrix, party: str, Cs: list, variant: str) -> RecoveredInfo:
    if any(c is None for c in Cs):
        payoffs: tuple = (None, None, None)
    else:
        payoffs = tuple(float(_view(m, k, Cs, variant)) for k in PLAYERS)
    return RecoveredInfo(party, tuple(None if c is None else float(c) for c in Cs), payoffs)


def _view(m: PayoffMatrix, k: str, Cs: Sequence[float], variant: str) -> float:
    return coefficient_quad(m, k, "A", Cs[0], variant).evaluate(Cs[1], Cs[2])


def _quads(m: PayoffMatrix, party: str, own_C: float, variant: str, ks: Sequence[str]):
    return [coefficient_quad(m, k, party, own_C, variant) for k in ks]


def _require_case(m: PayoffMatrix, case: SymmetryCase, regime: str, needed: Sequence[str]) -> None:
    holds = case_players(m, case, regime)
    missing = set(needed) - holds
    if missing:
        raise UnsupportedDisclosure(f"{case} conditions do not hold for players {sorted(missing)}")
    if holds == set(PLAYERS):
        raise UnsupportedDisclosure(
            f"{case} conditions hold for all three players; they may be imposed on two only "
            "or the payoff ratios cannot identify the outcome"
        )


def _check_disclosure_kind(d: Disclosure, kinds: Sequence[str]) -> None:
    if d.kind == PAYOFFS_OWN:
        raise UnsupportedDisclosure(
            "per-party payoff disclosure needs the case conditions on all three players, which is not allowed"
        )
    if d.kind not in kinds:
        raise UnsupportedDisclosure(f"{d.kind} disclosure is not solvable here; expected one of {kinds}")


def _recover_pair(d: Disclosure, m: PayoffMatrix, own_C: float, party: str, variant: str, case: SymmetryCase) -> RecoveredInfo:
    y = _party_opponent(party)
    qA, qB = _quads(m, party, own_C, variant, ("A", "B"))
    PA, PB = d.payoffs["A"], d.payoffs["B"]
    uA, uB = PA - qA.G, PB - qB.G
    if case is SymmetryCase.CASE_I:
        # P - G = C_y [C_A (D - E) + (E - G)]
        num = uB * (qA.E - qA.G) - uA * (qB.E - qB.G)
        den = uA * (qB.D - qB.E) - uB * (qA.D - qA.E)
        CA = _clamp(num / _check_denominator(den, "Case I C_A"), "C_A")
        lin = [CA * (q.D - q.E) + q.E - q.G for q in (qA, qB)]
        j = int(abs(lin[1]) > abs(lin[0]))
        Cy = _clamp((uA, uB)[j] / _check_denominator(lin[j], f"Case I C_{y}"), f"C_{y}")
    else:
        # P - G = C_A [C_y (D - F) + (F - G)]
        num = uB * (qA.F - qA.G) - uA * (qB.F - qB.G)
        den = uA * (qB.D - qB.F) - uB * (qA.D - qA.F)
        Cy = _clamp(num / _check_denominator(den, f"Case II C_{y}"), f"C_{y}")
        lin = [Cy * (q.D - q.F) + q.F - q.G for q in (qA, qB)]
        j = int(abs(lin[1]) > abs(lin[0]))
        CA = _clamp((uA, uB)[j] / _check_denominator(lin[j], "Case II C_A"), "C_A")
    Cs = [CA, None, None]
    Cs[player_index(party)] = own_C
    Cs[player_index(y)] = Cy
    return _fill(m, party, Cs, variant)


def _regime_variant(regime: str) -> str:
    if regime not in (NONENTANGLED, MAXENTANGLED):
        raise DomainError(f"payoff-pair recovery is defined in the non- and maximally entangled regimes, not {regime!r}")
    return regime


def recover_nonentangled_caseI(d: Disclosure, m: PayoffMatrix, own_C: float, party: str, regime: str = NONENTANGLED) -> RecoveredInfo:
    """Solve C_A from the (P^A, P^B) cross-ratio, then the other opponent (Case I)."""
    _check_disclosure_kind(d, (PAYOFFS_AB,))
    _require_case(m, SymmetryCase.CASE_I, regime, ("A", "B"))
    return _recover_pair(d, m, own_C, party, _regime_variant(regime), SymmetryCase.CASE_I)


def recover_nonentangled_caseII(d: Disclosure, m: PayoffMatrix, own_C: float, party: str, regime: str = NONENTANGLED) -> RecoveredInfo:
    """Solve the other opponent from the (P^A, P^B) cross-ratio, then C_A (Case II)."""
    _check_disclosure_kind(d, (PAYOFFS_AB,))
    _require_case(m, SymmetryCase.CASE_II, regime, ("A", "B"))
    return _recover_pair(d, m, own_C, party, _regime_variant(regime), SymmetryCase.CASE_II)


def _solve_linear_opponent(PA: float, CA: float, q) -> float:
    """Solve P^A = C_A C_y (D-E-F+G) + C_A (F-G) + C_y (E-G) + G for C_y."""
    den = CA * (q.D - q.E - q.F + q.G) + q.E - q.G
    return (PA - CA * (q.F - q.G) - q.G) / _check_denominator(den, "opponent")


def recover_from_alice_disclosure(
    d: Disclosure,
    m: PayoffMatrix,
    own_C: float,
    party: str,
    case: SymmetryCase | None = None,
    regime: str = NONENTANGLED,
) -> RecoveredInfo:
    """Recover the other opponent when Alice publishes P^A and C_A."""
    _check_disclosure_kind(d, (ALICE_ALL,))
    variant = _regime_variant(regime)
    case = case or classify_symmetry_case(m, regime)
    if case not in (SymmetryCase.CASE_I, SymmetryCase.CASE_II, SymmetryCase.CASE_III):
        raise UnsupportedDisclosure(f"Alice-disclosure recovery is solved for Cases I-III, not {case}")
    _require_case(m, case, regime, ("A",))
    if case is SymmetryCase.CASE_III and is_trivial_case_iii(m, regime):
        raise NoInformation("all coefficients are constants", _constant_payoffs(m, regime))
    y = _party_opponent(party)
    CA = _clamp(d.C_A, "C_A")
    (qA,) = _quads(m, party, own_C, variant, ("A",))
    if case is SymmetryCase.CASE_III:
        # E = F = G: P^A - G = C_A C_y (D - F)
        if abs(CA) < tol.SINGULAR_TOL:
            raise SingularRecovery("C_A = 0 leaves the opponent undetermined")
        Cy = (d.payoffs["A"] - qA.G) / _check_denominator(CA * (qA.D - qA.F), "Case III")
    else:
        Cy = _solve_linear_opponent(d.payoffs["A"], CA, qA)
    Cs = [CA, None, None]
    Cs[player_index(party)] = own_C
    Cs[player_index(y)] = _clamp(Cy, f"C_{y}")
    return _fill(m, party, Cs, variant)


def _constant_payoffs(m: PayoffMatrix, regime: str) -> list:
    mm = symmetry_permute_matrix(m) if regime == MAXENTANGLED else m
    return [float(mm.entry(k, "000")) if k in m.constrained else float("nan") for k in PLAYERS]


def recover_partial(d: Disclosure, m: PayoffMatrix, own_C: float, party: str) -> RecoveredInfo:
    """Partial-branch recovery from P^A and C_A for a NOT-dual matrix."""
    _check_disclosure_kind(d, (ALICE_ALL,))
    if not m.is_not_dual(["A"]):
        raise UnsupportedDisclosure("partial recovery needs Alice's payoff row to be NOT-dual")
    y = _party_opponent(party)
    CA = _clamp(d.C_A, "C_A")
    (qA,) = _quads(m, party, own_C, PARTIAL_DUAL, ("A",))
    Cy = _clamp(_solve_linear_opponent(d.payoffs["A"], CA, qA), f"C_{y}")
    Cs = [CA, None, None]
    Cs[player_index(party)] = own_C
    Cs[player_index(y)] = Cy
    return _fill(m, party, Cs, PARTIAL_DUAL)


def recover_partial_symmetric(
    d: Disclosure,
    m: PayoffMatrix,
    own_C: float,
    party: str,
    case: SymmetryCase | None = None,
) -> RecoveredInfo:
    """Recovery when only P^A is published (partial branch, symmetric NOT-dual matrix).

    With these symmetries P^A = w + (u - w)(C_x C_y + S_x S_y) depends on one pair of
    players only: (A, B) in case I, (B, C) in case II. A party solves for the member of
    that pair it does not control; strategies outside the pair stay ``None``.
    """
    _check_disclosure_kind(d, (PAYOFF_A_ONLY,))
    case = case or classify_symmetry_case(m, PARTIAL_DUAL)
    if case is SymmetryCase.PARTIAL_SYM_III:
        raise NoInformation("P^k equals the common entry for every strategy", [m.entry(k, "000") for k in PLAYERS])
    if case not in (SymmetryCase.PARTIAL_SYM_I, SymmetryCase.PARTIAL_SYM_II):
        raise UnsupportedDisclosure(f"payoff-only disclosure is solved for PartialSymI/II, not {case}")
    if not m.is_not_dual(["A"]) or not _case_holds(m, case, "A", tol.CASE_EQUALITY_TOL):
        raise UnsupportedDisclosure(f"{case} conditions do not hold for Alice's payoff row")
    _party_opponent(party)
    pair = ("A", "B") if case is SymmetryCase.PARTIAL_SYM_I else ("B", "C")
    if party not in pair:
        raise NotIdentifiable(f"P^A depends only on C_{pair[0]} and C_{pair[1]}; {party} knows neither")
    other = pair[1] if party == pair[0] else pair[0]
    u = m.entry("A", "000")
    w = m.entry("A", "100" if case is SymmetryCase.PARTIAL_SYM_I else "001")
    den = _check_denominator((2 * own_C - 1) * (u - w), "(2C - 1)(u - w)")
    Cother = _clamp((d.payoffs["A"] - u + own_C * (u - w)) / den, f"C_{other}")
    Cs = [None, None, None]
    Cs[player_index(party)] = own_C
    Cs[player_index(other)] = Cother
    return _fill(m, party, Cs, PARTIAL_DUAL)


# --- knowledge barrier -----------------------------------------------------------------------


def consistent_completions(
    d: Disclosure,
    m: PayoffMatrix,
    case: SymmetryCase,
    regime: str = NONENTANGLED,
    grid: Sequence[float] = tuple(np.linspace(0.005, 0.995, 199)),
) -> list[tuple[float, float, float]]:
    """Strategy triples an outsider cannot rule out from the disclosure alone.

    The outsider guesses Bob's or Charlie's C over ``grid`` and runs that party's
    recovery; every guess that yields an in-range, self-consistent completion is kept.
    Both sweeps are needed because the consistent curve can be nearly flat in either
    coordinate.
    """
    solver = {SymmetryCase.CASE_I: recover_nonentangled_caseI, SymmetryCase.CASE_II: recover_nonentangled_caseII}[case]
    found = []
    for party in ("B", "C"):
        for guess in grid:
            try:
                info = solver(d, m, float(guess), party, regime)
            except RecoveryError:
                continue
            pa, pb = info.payoffs[0], info.payoffs[1]
            if abs(pa - d.payoffs["A"]) < tol.RECOVERY_TOL and abs(pb - d.payoffs["B"]) < tol.RECOVERY_TOL:
                found.append(tuple(float(c) for c in info.Cs))
    return found


def simulate_replay_failures(Cs: Sequence[float], replays: int, trials: int, seed=None) -> float:
    """Monte-Carlo failure rate of single-shot replay disambiguation.

    Each trial samples ``replays + 1`` collapses from the non-entangled outcome law and
    counts a failure when the resolver gives up or returns wrong values.
    """
    rng = as_generator(seed)
    CA, CB, CC = Cs
    dist = np.array([_pattern_weight_for(Cs, lab) for lab in LABELS])
    labels = rng.choice(8, size=(trials, replays + 1), p=dist)
    fails = 0
    for row in labels:
        try:
            got = resolve_single_shots([reveal_single_shot(LABELS[i], CB, CC) for i in row])
        except AmbiguityRemains:
            fails += 1
            continue
        if abs(got[0] - CB) > tol.RECOVERY_TOL or abs(got[1] - CC) > tol.RECOVERY_TOL:
            fails += 1
    return fails / trials


def _pattern_weight_for(Cs: Sequence[float], label: str) -> float:
    return math.prod(c if bit == "0" else 1.0 - c for c, bit in zip(Cs, label))


def alice_fit_opponents(
    freqs: Sequence[float],
    cfg: EntanglementConfig,
    own: Strategy,
    opponent_phases: Sequence[tuple[float, float]] = ((0.0, 0.0), (0.0, 0.0)),
    grid: int = 7,
) -> tuple[float, float]:
    """(C_B, C_C) fitted to an outcome distribution in any regime.

    Least squares over (theta_B, theta_C) in [0, pi] from a grid of starts; raises
    AmbiguityRemains when two distinct fits explain the data equally well.
    """
    target = np.asarray(freqs, dtype=float)
    target = target / target.sum()
    (aB, bB), (aC, bC) = opponent_phases

    def model(th):
        s = StrategyTriple(own, Strategy(th[0], aB, bB), Strategy(th[1], aC, bC))
        return outcome_distribution(final_state(cfg, s), cfg.delta)

    fits = []
    for tB, tC in itertools.product(np.linspace(0.1, math.pi - 0.1, grid), repeat=2):
        res = optimize.least_squares(lambda th: model(th) - target, [tB, tC], bounds=([0, 0], [math.pi, math.pi]))
        fits.append((float(np.sum(res.fun**2)), tuple(math.cos(t / 2) ** 2 for t in res.x)))
    fits.sort()
    best_cost, best = fits[0]
    slack = max(10 * best_cost, 1e-14)
    for cost, cand in fits[1:]:
        if cost <= slack and max(abs(a - b) for a, b in zip(cand, best)) > 1e-4:
            raise AmbiguityRemains(f"distinct opponent strategies {best} and {cand} fit equally well")
    return best


# --- dispatch ----------------------------------------------------------------------------


def check_disclosure_supported(m: PayoffMatrix, regime: str, kind: str) -> SymmetryCase:
    """Raise unless ``regime`` and ``m`` admit a solved inversion for ``kind``."""
    if kind == PAYOFFS_OWN:
        _check_disclosure_kind(Disclosure(kind, {"A": 0.0}), ())
    if regime in (NONENTANGLED, MAXENTANGLED):
        case = classify_symmetry_case(m, regime)
        if kind == PAYOFFS_AB:
            if case not in (SymmetryCase.CASE_I, SymmetryCase.CASE_II):
                raise UnsupportedDisclosure(f"payoff-pair disclosure needs Case I or II, matrix is {case}")
        elif kind == ALICE_ALL:
            if case is SymmetryCase.NONE:
                raise UnsupportedDisclosure("Alice disclosure needs Case I, II or III")
            if is_trivial_case_iii(m, regime):
                raise NoInformation("all coefficients are constants", _constant_payoffs(m, regime))
        else:
            raise UnsupportedDisclosure(f"{kind} disclosure is only solved in the partial regime")
        _require_case(m, case, regime, ("A",) if kind == ALICE_ALL else ("A", "B"))
        return case
    if regime == PARTIAL_DUAL:
        if not m.is_not_dual(PLAYERS):
            raise UnsupportedDisclosure("partial-regime recovery needs every payoff row to be NOT-dual")
        case = classify_symmetry_case(m, PARTIAL_DUAL)
        if kind == ALICE_ALL:
            return case
        if kind == PAYOFF_A_ONLY:
            if case is SymmetryCase.PARTIAL_SYM_III:
                raise NoInformation("P^k equals the common entry for every strategy", [m.entry(k, "000") for k in PLAYERS])
            if case not in (SymmetryCase.PARTIAL_SYM_I, SymmetryCase.PARTIAL_SYM_II):
                raise UnsupportedDisclosure(f"payoff-only disclosure needs PartialSymI or II, matrix is {case}")
            return case
        raise UnsupportedDisclosure(f"{kind} disclosure is not solved in the partial regime")
    raise DomainError(f"unknown recovery regime {regime!r}")


def recover(d: Disclosure, m: PayoffMatrix, own_C: float, party: str, regime: str) -> RecoveredInfo:
    """Run the inversion that matches (regime, matrix case, disclosure kind)."""
    case = check_disclosure_supported(m, regime, d.kind)
    if regime == PARTIAL_DUAL:
        if d.kind == ALICE_ALL:
            return recover_partial(d, m, own_C, party)
        return recover_partial_symmetric(d, m, own_C, party, case)
    if d.kind == ALICE_ALL:
        return recover_from_alice_disclosure(d, m, own_C, party, case, regime)
    solver = recover_nonentangled_caseI if case is SymmetryCase.CASE_I else recover_nonentangled_caseII
    return solver(d, m, own_C, party, regime)
