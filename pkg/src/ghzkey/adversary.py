"""Phase-damping eavesdropper and payoff-based tap detection.

An eavesdropper who measures a qubit in the computational basis with probability p
acts as a phase-damping channel on it. On the GHZ-type input this multiplies the
|000><111| coherence by mu = 1 - p per tapped qubit, which shrinks xi and the
alternating-sum interference and nothing else.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from ghzkey import constants as tol
from ghzkey.payoffs import BRANCHES, check_partial_strategies, general_form, partial_payoff
from ghzkey.state import (
    DomainError,
    EntanglementConfig,
    PayoffMatrix,
    StrategyTriple,
    _check_range,
    check_density_matrix,
    evolve_density,
    expected_payoffs_oracle,
    initial_state,
    player_index,
)

FORWARD = "forward"
RETURN = "return"
LEGS = (FORWARD, RETURN)

CLEAN = "clean"
TAPPED = "tapped"
UNDETECTABLE = "undetectable"


@dataclass(frozen=True)
class EavesdropConfig:
    """Tap probability ``p`` applied to each (player, leg) in ``targets``.

    The default taps Bob's qubit on its way from Alice.
    """

    p: float
    targets: tuple = (("B", FORWARD),)

    def __post_init__(self) -> None:
        object.__setattr__(self, "p", _check_range("p", self.p, 0.0, 1.0))
        norm = []
        for tgt in self.targets:
            k, leg = (tgt, FORWARD) if isinstance(tgt, str) else tuple(tgt)
            if leg not in LEGS:
                raise DomainError(f"leg must be one of {LEGS}, got {leg!r}")
            player_index(k)
            norm.append((k, leg))
        object.__setattr__(self, "targets", tuple(norm))

    @property
    def mu(self) -> float:
        return 1.0 - self.p

    @property
    def single_forward(self) -> bool:
        """True when the closed form applies: one qubit tapped before the unitaries."""
        return len(self.targets) == 1 and self.targets[0][1] == FORWARD

    def qubits(self, leg: str) -> list[int]:
        return [player_index(k) for k, lg in self.targets if lg == leg]


def _kraus(p: float) -> list[np.ndarray]:
    return [
        math.sqrt(1.0 - p) * np.eye(2),
        math.sqrt(p) * np.diag([1.0, 0.0]),
        math.sqrt(p) * np.diag([0.0, 1.0]),
    ]


def _embed(op: np.ndarray, qubit: int) -> np.ndarray:
    mats = [np.eye(2)] * 3
    mats[qubit] = op
    return np.kron(np.kron(mats[0], mats[1]), mats[2])


def phase_damp(rho: np.ndarray, p: float, qubits: Sequence[int | str]) -> np.ndarray:
    """Apply the phase-damping channel with strength ``p`` to each listed qubit."""
    p = _check_range("p", p, 0.0, 1.0)
    out = np.asarray(rho, dtype=complex)
    for q in qubits:
        idx = player_index(q)
        ks = [_embed(k, idx) for k in _kraus(p)]
        out = sum(k @ out @ k.conj().T for k in ks)
    return out


def kraus_completeness(p: float) -> float:
    """max |sum K^dag K - I| for the single-qubit channel."""
    total = sum(k.conj().T @ k for k in _kraus(p))
    return float(np.max(np.abs(total - np.eye(2))))


def tapped_final_density(cfg: EntanglementConfig, s: StrategyTriple, e: EavesdropConfig) -> np.ndarray:
    psi = initial_state(cfg)
    rho = np.outer(psi, psi.conj())
    rho = phase_damp(rho, e.p, e.qubits(FORWARD))
    rho = evolve_density(rho, *s.unitaries())
    rho = phase_damp(rho, e.p, e.qubits(RETURN))
    check_density_matrix(rho)
    return rho


def tapped_payoffs_oracle(cfg: EntanglementConfig, s: StrategyTriple, m: PayoffMatrix, e: EavesdropConfig) -> np.ndarray:
    """Expected payoffs under any tap configuration, from the density matrix."""
    return expected_payoffs_oracle(cfg, s, m, rho=tapped_final_density(cfg, s, e))


def tapped_expected_payoffs(cfg: EntanglementConfig, s: StrategyTriple, m: PayoffMatrix, e: EavesdropConfig) -> np.ndarray:
    """Closed-form payoffs for a single forward-leg tap (xi -> mu xi, alt -> mu alt)."""
    if not e.single_forward:
        raise DomainError("closed form covers one forward-leg tap; use tapped_payoffs_oracle")
    return general_form(cfg, s, m, mu=e.mu)


def tapped_partial_payoff(s: StrategyTriple, m: PayoffMatrix, branch, e: EavesdropConfig) -> np.ndarray:
    if not e.single_forward:
        raise DomainError("closed form covers one forward-leg tap; use tapped_payoffs_oracle")
    return partial_payoff(s, m, branch, mu=e.mu)


def tapped_payoffs(cfg: EntanglementConfig, s: StrategyTriple, m: PayoffMatrix, e: EavesdropConfig) -> np.ndarray:
    """Closed form when it applies, density-matrix oracle otherwise."""
    if e.single_forward:
        return tapped_expected_payoffs(cfg, s, m, e)
    return tapped_payoffs_oracle(cfg, s, m, e)


@dataclass(frozen=True)
class Verdict:
    kind: str
    p_hat: Optional[float] = None
    cause: str = ""
    deviation: tuple = ()

    def __str__(self) -> str:
        if self.kind == TAPPED:
            return f"Tapped(p={self.p_hat:.4f})"
        if self.kind == UNDETECTABLE:
            return f"Undetectable({self.cause})"
        return "Clean"


def phases_certified(cfg: EntanglementConfig, s: StrategyTriple) -> bool:
    """True when the phases are fixed by the protocol rather than free to hide a tap.

    That is zero phases, or the prescribed phases of a partial branch.
    """
    if s.phases_zero:
        return True
    if (cfg.delta, cfg.gamma) not in BRANCHES.values():
        return False
    try:
        check_partial_strategies(s)
    except DomainError:
        return False
    return True


def tap_sensitivity(cfg: EntanglementConfig, s: StrategyTriple, m: PayoffMatrix, qubits: Sequence[str] = ("B",)) -> np.ndarray:
    """d(payoff)/dp at p = 0: the clean payoff minus the fully tapped one."""
    clean = tapped_payoffs(cfg, s, m, EavesdropConfig(0.0, tuple((k, FORWARD) for k in qubits)))
    full = tapped_payoffs(cfg, s, m, EavesdropConfig(1.0, tuple((k, FORWARD) for k in qubits)))
    return clean - full


def detect_eavesdropper(
    observed: Sequence[float],
    cfg: EntanglementConfig,
    s: StrategyTriple,
    m: PayoffMatrix,
    sensitivity: float = 1e-9,
) -> Verdict:
    """Compare observed payoffs with the clean prediction for the audited strategies.

    Payoffs are affine in p for a single forward tap, P(p) = P(0) - p * slope, so a
    deviation larger than ``sensitivity`` is inverted by least squares over players.
    Configurations whose payoffs do not depend on p are reported as undetectable.
    """
    if not phases_certified(cfg, s):
        return Verdict(UNDETECTABLE, cause="free phases: detection is defined for alpha = beta = 0 or the partial-branch phases")
    obs = np.asarray(observed, dtype=float)
    clean = general_form(cfg, s, m)
    slope = tap_sensitivity(cfg, s, m)
    dev = clean - obs
    if float(np.max(np.abs(slope))) < tol.P_INDEPENDENCE_TOL:
        return Verdict(UNDETECTABLE, cause="payoffs do not depend on p in this configuration", deviation=tuple(dev))
    if float(np.max(np.abs(dev))) <= sensitivity:
        return Verdict(CLEAN, deviation=tuple(dev))
    p_hat = float(slope @ dev / (slope @ slope))
    return Verdict(TAPPED, p_hat=min(max(p_hat, 0.0), 1.0), deviation=tuple(dev))


def sampled_payoff_stderr(probs: np.ndarray, m: PayoffMatrix, shots: int) -> np.ndarray:
    """Standard error of the sample-mean payoff of each player."""
    mean = m.values @ probs
    second = (m.values**2) @ probs
    return np.sqrt(np.maximum(second - mean**2, 0.0) / shots)


@dataclass
class DetectionReport:
    regime: str
    p_true: float
    verdict: Verdict
    shots: Optional[int] = None
    observed: list = field(default_factory=list)

    @property
    def abs_error(self) -> Optional[float]:
        if self.verdict.kind == TAPPED:
            return abs(self.verdict.p_hat - self.p_true)
        if self.verdict.kind == CLEAN:
            return self.p_true
        return None

    def to_dict(self) -> dict:
        return {
            "regime": self.regime,
            "p_true": self.p_true,
            "verdict": self.verdict.kind,
            "p_hat": self.verdict.p_hat,
            "cause": self.verdict.cause,
            "shots": self.shots,
            "observed": list(self.observed),
        }
