"""Exact three-qubit engine for the game.

Basis ordering: label ``abc`` maps to integer ``4a + 2b + c``. Alice owns the
first qubit, Bob the second, Charlie the third.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Iterator, Mapping, Sequence, Union

import numpy as np

from ghzkey import constants as tol

PLAYERS = ("A", "B", "C")
LABELS = tuple(f"{i:03b}" for i in range(8))
HALF_PI = math.pi / 2

# Eq-6 style partner sign: +i sin for these labels, -i sin for the rest.
_PLUS_LABELS = frozenset({"000", "111", "001", "110"})

SeedLike = Union[int, np.random.Generator, np.random.SeedSequence, None]


class DomainError(ValueError):
    """An input lies outside the domain the model is defined on."""


def label_index(label: str) -> int:
    if label not in LABELS:
        raise DomainError(f"not a basis label: {label!r}")
    return int(label, 2)


def complement(label: str) -> str:
    return "".join("1" if ch == "0" else "0" for ch in label)


def player_index(k: str | int) -> int:
    if isinstance(k, int):
        if 0 <= k < 3:
            return k
    elif k in PLAYERS:
        return PLAYERS.index(k)
    raise DomainError(f"unknown player {k!r}")


def _check_range(name: str, value: float, lo: float, hi: float) -> float:
    value = float(value)
    if not math.isfinite(value) or value < lo - 1e-12 or value > hi + 1e-12:
        raise DomainError(f"{name}={value} outside [{lo}, {hi}]")
    return min(max(value, lo), hi)


def as_generator(seed: SeedLike) -> np.random.Generator:
    if isinstance(seed, np.random.Generator):
        return seed
    return np.random.default_rng(seed)


@dataclass(frozen=True)
class EntanglementConfig:
    """Initial-state angle ``gamma`` and measurement-basis angle ``delta``."""

    gamma: float
    delta: float

    def __post_init__(self) -> None:
        object.__setattr__(self, "gamma", _check_range("gamma", self.gamma, 0.0, HALF_PI))
        object.__setattr__(self, "delta", _check_range("delta", self.delta, 0.0, HALF_PI))

    @classmethod
    def nonentangled(cls) -> "EntanglementConfig":
        return cls(0.0, 0.0)

    @classmethod
    def maximal(cls) -> "EntanglementConfig":
        return cls(HALF_PI, HALF_PI)

    @property
    def eta1(self) -> float:
        cg, sg = math.cos(self.gamma / 2) ** 2, math.sin(self.gamma / 2) ** 2
        cd, sd = math.cos(self.delta / 2) ** 2, math.sin(self.delta / 2) ** 2
        return cg * cd + sg * sd

    @property
    def eta2(self) -> float:
        cg, sg = math.cos(self.gamma / 2) ** 2, math.sin(self.gamma / 2) ** 2
        cd, sd = math.cos(self.delta / 2) ** 2, math.sin(self.delta / 2) ** 2
        return sg * cd + cg * sd

    @property
    def xi(self) -> float:
        return 0.5 * math.sin(self.delta) * math.sin(self.gamma)


@dataclass(frozen=True)
class Strategy:
    """One player's unitary parameters."""

    theta: float
    alpha: float = 0.0
    beta: float = 0.0

    def __post_init__(self) -> None:
        object.__setattr__(self, "theta", _check_range("theta", self.theta, 0.0, math.pi))
        object.__setattr__(self, "alpha", _check_range("alpha", self.alpha, -math.pi, math.pi))
        object.__setattr__(self, "beta", _check_range("beta", self.beta, -math.pi, math.pi))

    @classmethod
    def from_C(cls, C: float, alpha: float = 0.0, beta: float = 0.0) -> "Strategy":
        C = _check_range("C", C, 0.0, 1.0)
        return cls(2.0 * math.acos(math.sqrt(C)), alpha, beta)

    @property
    def C(self) -> float:
        return math.cos(self.theta / 2) ** 2

    @property
    def S(self) -> float:
        return math.sin(self.theta / 2) ** 2

    @property
    def c(self) -> float:
        return math.cos(self.theta / 2)

    @property
    def s(self) -> float:
        return math.sin(self.theta / 2)

    def unitary(self) -> np.ndarray:
        return strategy_unitary(self.theta, self.alpha, self.beta)


@dataclass(frozen=True)
class StrategyTriple:
    alice: Strategy
    bob: Strategy
    charlie: Strategy

    @classmethod
    def from_thetas(
        cls,
        thetas: Sequence[float],
        alphas: Sequence[float] = (0.0, 0.0, 0.0),
        betas: Sequence[float] = (0.0, 0.0, 0.0),
    ) -> "StrategyTriple":
        return cls(*(Strategy(t, a, b) for t, a, b in zip(thetas, alphas, betas)))

    @classmethod
    def from_C(
        cls,
        Cs: Sequence[float],
        alphas: Sequence[float] = (0.0, 0.0, 0.0),
        betas: Sequence[float] = (0.0, 0.0, 0.0),
    ) -> "StrategyTriple":
        return cls(*(Strategy.from_C(c, a, b) for c, a, b in zip(Cs, alphas, betas)))

    def __getitem__(self, k: str | int) -> Strategy:
        return (self.alice, self.bob, self.charlie)[player_index(k)]

    def __iter__(self) -> Iterator[Strategy]:
        return iter((self.alice, self.bob, self.charlie))

    @property
    def thetas(self) -> tuple[float, float, float]:
        return tuple(s.theta for s in self)  # type: ignore[return-value]

    @property
    def alphas(self) -> tuple[float, float, float]:
        return tuple(s.alpha for s in self)  # type: ignore[return-value]

    @property
    def betas(self) -> tuple[float, float, float]:
        return tuple(s.beta for s in self)  # type: ignore[return-value]

    @property
    def Cs(self) -> tuple[float, float, float]:
        return tuple(s.C for s in self)  # type: ignore[return-value]

    @property
    def phases_zero(self) -> bool:
        return all(s.alpha == 0.0 and s.beta == 0.0 for s in self)

    def unitaries(self) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        return tuple(s.unitary() for s in self)  # type: ignore[return-value]


@dataclass(frozen=True, eq=False)
class PayoffMatrix:
    """Classical payoff table: ``values[k, 4a+2b+c]`` is player k's payoff at profile abc."""

    values: np.ndarray = field(repr=False)
    constrained: frozenset = frozenset({"A", "B"})

    def __post_init__(self) -> None:
        arr = np.array(self.values, dtype=float)
        if arr.shape != (3, 8):
            raise DomainError(f"payoff matrix must have shape (3, 8), got {arr.shape}")
        if not np.all(np.isfinite(arr)):
            raise DomainError("payoff entries must be finite")
        arr.setflags(write=False)
        object.__setattr__(self, "values", arr)
        cons = frozenset(self.constrained)
        if not cons <= set(PLAYERS):
            raise DomainError(f"constrained players must be a subset of {PLAYERS}")
        object.__setattr__(self, "constrained", cons)

    @classmethod
    def from_dict(cls, table: Mapping[str, Mapping[str, float]], constrained=("A", "B")) -> "PayoffMatrix":
        arr = np.array([[float(table[k][lab]) for lab in LABELS] for k in PLAYERS])
        return cls(arr, frozenset(constrained))

    @classmethod
    def constant(cls, value: float = 1.0) -> "PayoffMatrix":
        return cls(np.full((3, 8), float(value)))

    def to_dict(self) -> dict[str, dict[str, float]]:
        return {k: {lab: float(self.values[i, j]) for j, lab in enumerate(LABELS)} for i, k in enumerate(PLAYERS)}

    def entry(self, k: str | int, label: str) -> float:
        return float(self.values[player_index(k), label_index(label)])

    def row(self, k: str | int) -> np.ndarray:
        return self.values[player_index(k)]

    def triple(self, label: str) -> np.ndarray:
        return self.values[:, label_index(label)]

    def with_values(self, values: np.ndarray) -> "PayoffMatrix":
        return PayoffMatrix(values, self.constrained)

    def __add__(self, other: "PayoffMatrix") -> "PayoffMatrix":
        return self.with_values(self.values + other.values)

    def __mul__(self, scale: float) -> "PayoffMatrix":
        return self.with_values(self.values * float(scale))

    __rmul__ = __mul__

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, PayoffMatrix):
            return NotImplemented
        return np.array_equal(self.values, other.values)

    def __hash__(self) -> int:
        return hash(self.values.tobytes())

    def is_not_dual(self, players=None, atol: float = tol.CASE_EQUALITY_TOL) -> bool:
        """True when entries are invariant under bitwise complement of the profile."""
        idx = [player_index(k) for k in (players or PLAYERS)]
        flipped = self.values[:, ::-1]
        return bool(np.allclose(self.values[idx], flipped[idx], rtol=0.0, atol=atol))


# --- state preparation and evolution -------------------------------------------------


def initial_state(cfg: EntanglementConfig) -> np.ndarray:
    """cos(gamma/2)|000> + i sin(gamma/2)|111>."""
    psi = np.zeros(8, dtype=complex)
    psi[0] = math.cos(cfg.gamma / 2)
    psi[7] = 1j * math.sin(cfg.gamma / 2)
    return psi


def strategy_unitary(theta: float, alpha: float = 0.0, beta: float = 0.0) -> np.ndarray:
    """cos(theta/2) R + sin(theta/2) Q as a 2x2 matrix in the {|0>, |1>} basis.

    R|0> = e^{i alpha}|0>, R|1> = e^{-i alpha}|1>,
    Q|0> = e^{i(pi/2 - beta)}|1>, Q|1> = e^{i(pi/2 + beta)}|0>.
    """
    s = Strategy(theta, alpha, beta)
    R = np.diag([np.exp(1j * s.alpha), np.exp(-1j * s.alpha)])
    Q = np.array(
        [
            [0.0, np.exp(1j * (HALF_PI + s.beta))],
            [np.exp(1j * (HALF_PI - s.beta)), 0.0],
        ]
    )
    return s.c * R + s.s * Q


def check_unitary(u: np.ndarray, atol: float = tol.UNITARY_TOL) -> None:
    u = np.asarray(u)
    if u.shape != (2, 2) or not np.allclose(u @ u.conj().T, np.eye(2), rtol=0.0, atol=atol):
        raise DomainError("local operator is not a 2x2 unitary")


def check_pure_state(psi: np.ndarray, atol: float = tol.NORM_TOL) -> None:
    psi = np.asarray(psi)
    if psi.shape != (8,) or abs(np.vdot(psi, psi).real - 1.0) > atol:
        raise DomainError("state must be a normalized 8-vector")


def check_density_matrix(rho: np.ndarray) -> None:
    rho = np.asarray(rho)
    if rho.shape != (8, 8):
        raise DomainError(f"density matrix must be 8x8, got {rho.shape}")
    if not np.allclose(rho, rho.conj().T, rtol=0.0, atol=tol.HERMITIAN_TOL):
        raise DomainError("density matrix is not Hermitian")
    if abs(np.trace(rho).real - 1.0) > tol.TRACE_TOL:
        raise DomainError("density matrix trace differs from 1")
    if np.linalg.eigvalsh(rho).min() < -tol.PSD_TOL:
        raise DomainError("density matrix has a negative eigenvalue")


def local_operator(uA: np.ndarray, uB: np.ndarray, uC: np.ndarray) -> np.ndarray:
    return np.kron(np.kron(uA, uB), uC)


def evolve(psi: np.ndarray, uA: np.ndarray, uB: np.ndarray, uC: np.ndarray) -> np.ndarray:
    """Density matrix (uA x uB x uC)|psi><psi|(uA x uB x uC)^dagger."""
    check_pure_state(psi)
    for u in (uA, uB, uC):
        check_unitary(u)
    phi = local_operator(uA, uB, uC) @ psi
    return np.outer(phi, phi.conj())


def evolve_density(rho: np.ndarray, uA: np.ndarray, uB: np.ndarray, uC: np.ndarray) -> np.ndarray:
    U = local_operator(uA, uB, uC)
    return U @ rho @ U.conj().T


def final_state(cfg: EntanglementConfig, s: StrategyTriple) -> np.ndarray:
    return evolve(initial_state(cfg), *s.unitaries())


# --- measurement -------------------------------------------------------------------


def measurement_basis(delta: float) -> np.ndarray:
    """Rows are the eight basis vectors psi_abc, in label order.

    psi_abc = cos(delta/2)|abc> +- i sin(delta/2)|complement(abc)>.
    """
    delta = _check_range("delta", delta, 0.0, HALF_PI)
    basis = np.zeros((8, 8), dtype=complex)
    for i, lab in enumerate(LABELS):
        sign = 1.0 if lab in _PLUS_LABELS else -1.0
        basis[i, i] = math.cos(delta / 2)
        basis[i, 7 - i] = sign * 1j * math.sin(delta / 2)
    return basis


def projectors(delta: float) -> np.ndarray:
    basis = measurement_basis(delta)
    return np.einsum("li,lj->lij", basis, basis.conj())


def payoff_operator(m: PayoffMatrix, k: str | int, delta: float) -> np.ndarray:
    """Hermitian observable sum_abc $^(k)_abc |psi_abc><psi_abc|."""
    return np.einsum("l,lij->ij", m.row(k), projectors(delta))


def outcome_distribution(rho: np.ndarray, delta: float) -> np.ndarray:
    """Born probabilities p_abc = <psi_abc| rho |psi_abc>, indexed in label order."""
    basis = measurement_basis(delta)
    probs = np.einsum("li,ij,lj->l", basis.conj(), rho, basis).real
    return np.clip(probs, 0.0, 1.0)


def expected_payoffs_oracle(
    cfg: EntanglementConfig,
    s: StrategyTriple | None,
    m: PayoffMatrix,
    rho: np.ndarray | None = None,
) -> np.ndarray:
    """Tr($^(k) rho_f) for k = A, B, C by full matrix arithmetic.

    Pass ``rho`` to evaluate on an already-prepared (e.g. tapped) state.
    """
    if rho is None:
        rho = final_state(cfg, s)
    return np.array([np.trace(payoff_operator(m, k, cfg.delta) @ rho).real for k in PLAYERS])


def measured_payoff(probs: np.ndarray, m: PayoffMatrix, label: str) -> np.ndarray:
    """Probability-weighted payoff triple p_abc * ($A, $B, $C)_abc for outcome ``label``."""
    return probs[label_index(label)] * m.triple(label)


# --- sampling ----------------------------------------------------------------------


def _check_distribution(dist: Sequence[float]) -> np.ndarray:
    p = np.asarray(dist, dtype=float)
    if p.shape != (8,) or np.any(p < -tol.PROB_SUM_TOL) or abs(p.sum() - 1.0) > tol.PROB_SUM_TOL:
        raise DomainError("outcome distribution must be 8 non-negative numbers summing to 1")
    p = np.clip(p, 0.0, None)
    return p / p.sum()


def sample_outcome(dist: Sequence[float], seed: SeedLike) -> str:
    """Draw one label from ``dist``; the same integer seed always gives the same label."""
    p = _check_distribution(dist)
    return LABELS[int(as_generator(seed).choice(8, p=p))]


def sample_counts(dist: Sequence[float], shots: int, seed: SeedLike) -> np.ndarray:
    """Outcome counts over ``shots`` independent measurements."""
    if shots <= 0:
        raise DomainError("shots must be positive")
    p = _check_distribution(dist)
    return as_generator(seed).multinomial(int(shots), p)
