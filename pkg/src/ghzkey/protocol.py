"""Round and session orchestration for the three-party key distribution.

A round runs the seven protocol steps on the simulated qubits: preparation,
distribution, local moves, return, Alice's measurement and inference, public
disclosure, and recovery by Bob and Charlie. Rounds are consumed in pairs: the
second round of a pair replays the first with the same strategies, which lets Alice
split C_B C_C into its factors, and the pair yields four key symbols.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Mapping, Optional, Sequence

import numpy as np

from ghzkey import constants as tol
from ghzkey.adversary import (
    CLEAN,
    TAPPED,
    UNDETECTABLE,
    EavesdropConfig,
    Verdict,
    detect_eavesdropper,
    sampled_payoff_stderr,
    tapped_final_density,
)
from ghzkey.payoffs import (
    MAXENTANGLED,
    NONENTANGLED,
    PARTIAL_BETAS,
    PARTIAL_DUAL,
    branch_config,
    coefficient_quad,
)
from ghzkey.recovery import (
    PAYOFFS_AB,
    Disclosure,
    OpponentInference,
    RecoveredInfo,
    RecoveryError,
    SingularRecovery,
    alice_fit_opponents,
    identify_payoff_class,
    alice_infer_opponent_product,
    check_disclosure_supported,
    disambiguate_by_replay,
    recover,
)
from ghzkey.state import (
    LABELS,
    PLAYERS,
    DomainError,
    EntanglementConfig,
    PayoffMatrix,
    StrategyTriple,
    final_state,
    outcome_distribution,
    measured_payoff,
)

EXACT = "exact"
SAMPLED = "sampled"
MODES = (EXACT, SAMPLED)

REGIMES = {
    "nonentangled": EntanglementConfig.nonentangled(),
    "maxentangled": EntanglementConfig.maximal(),
    "partial_i": branch_config("i"),
    "partial_ii": branch_config("ii"),
}
SAFE_GRID = tuple(round(0.1 * i, 1) for i in range(1, 10))


def recovery_regime(regime: str) -> str:
    if regime not in REGIMES:
        raise DomainError(f"unknown regime {regime!r}; choose from {sorted(REGIMES)}")
    return {"nonentangled": NONENTANGLED, "maxentangled": MAXENTANGLED}.get(regime, PARTIAL_DUAL)


@dataclass(frozen=True)
class Codebook:
    """Maps recovered strategies and payoffs to key symbols.

    Strategies: floor(C * 2^bits), with C = 1 sent to the top symbol.
    Payoffs: half-up rounding of (P - lo) to ``decimals`` digits on [lo, hi].
    Inputs are first rounded to ``snap`` digits: parties recover the same values only
    up to float noise, and grid points such as C = 1/2 sit exactly on a floor boundary.
    """

    bits: int = 3
    decimals: int = 1
    payoff_range: tuple = (0.0, 100.0)
    snap: int = 9

    def __post_init__(self) -> None:
        if self.bits < 1 or self.decimals < 0 or self.snap <= self.decimals:
            raise DomainError("need bits >= 1, decimals >= 0 and snap > decimals")
        lo, hi = self.payoff_range
        if not hi > lo:
            raise DomainError("payoff range must be increasing")

    @property
    def strategy_alphabet(self) -> int:
        return 2**self.bits

    @property
    def payoff_alphabet(self) -> int:
        lo, hi = self.payoff_range
        return self.payoff_symbol(hi) + 1

    def strategy_symbol(self, C: float) -> int:
        if not -tol.C_SLACK <= C <= 1.0 + tol.C_SLACK:
            raise DomainError(f"C = {C} outside [0, 1]")
        C = round(max(C, 0.0), self.snap)
        return min(int(math.floor(C * self.strategy_alphabet)), self.strategy_alphabet - 1)

    def payoff_symbol(self, P: float) -> int:
        lo, hi = self.payoff_range
        if not lo <= P <= hi:
            raise DomainError(f"payoff {P} outside declared range {self.payoff_range}")
        return int(math.floor(round(P - lo, self.snap) * 10**self.decimals + 0.5))

    def to_dict(self) -> dict:
        return {"bits": self.bits, "decimals": self.decimals, "payoff_range": list(self.payoff_range), "snap": self.snap}


@dataclass
class SessionConfig:
    regime: str
    matrix: PayoffMatrix
    disclosure: str = PAYOFFS_AB
    mode: str = EXACT
    shots: int = 100_000
    eavesdrop: Optional[EavesdropConfig] = None
    codebook: Codebook = field(default_factory=Codebook)
    max_retries: int = 3
    grid: tuple = SAFE_GRID
    sensitivity_se: float = 4.0
    exact_sensitivity: float = 1e-9

    def __post_init__(self) -> None:
        recovery_regime(self.regime)
        if self.mode not in MODES:
            raise DomainError(f"mode must be one of {MODES}")
        if self.mode == SAMPLED and self.shots < 1:
            raise DomainError("sampled mode needs shots >= 1")

    @property
    def entanglement(self) -> EntanglementConfig:
        return REGIMES[self.regime]

    def validate(self):
        """Symmetry case admitted by (regime, matrix, disclosure); raises otherwise."""
        return check_disclosure_supported(self.matrix, recovery_regime(self.regime), self.disclosure)

    def to_dict(self) -> dict:
        return {
            "regime": self.regime,
            "matrix": self.matrix.to_dict(),
            "constrained": sorted(self.matrix.constrained),
            "disclosure": self.disclosure,
            "mode": self.mode,
            "shots": self.shots if self.mode == SAMPLED else None,
            "eavesdrop": None
            if self.eavesdrop is None
            else {"p": self.eavesdrop.p, "targets": [list(t) for t in self.eavesdrop.targets]},
            "codebook": self.codebook.to_dict(),
            "max_retries": self.max_retries,
            "grid": list(self.grid),
        }


def strategies_for(regime: str, Cs: Sequence[float]) -> StrategyTriple:
    """Strategy triple with the given C values and the regime's fixed phases."""
    if recovery_regime(regime) == PARTIAL_DUAL:
        return StrategyTriple.from_C(Cs, betas=PARTIAL_BETAS)
    return StrategyTriple.from_C(Cs)


@dataclass(frozen=True)
class RoundRecord:
    index: int
    regime: str
    strategies: tuple
    mode: str
    shots: Optional[int]
    frequencies: tuple
    collapsed: str
    identified: Optional[str]
    inference: Optional[OpponentInference]
    disclosure: Optional[Disclosure]
    recovered: dict
    eavesdrop: Optional[EavesdropConfig]
    verdict: Optional[Verdict]
    failure: Optional[str] = None

    @property
    def ok(self) -> bool:
        return self.failure is None

    def to_dict(self) -> dict:
        return {
            "index": self.index,
            "regime": self.regime,
            "C": list(self.strategies),
            "mode": self.mode,
            "shots": self.shots,
            "frequencies": list(self.frequencies),
            "collapsed": self.collapsed,
            "identified": self.identified,
            "disclosure": None if self.disclosure is None else self.disclosure.to_dict(),
            "recovered": {k: v.to_dict() for k, v in self.recovered.items()},
            "verdict": None if self.verdict is None else str(self.verdict),
            "p_hat": None if self.verdict is None else self.verdict.p_hat,
            "failure": self.failure,
        }


def _fail_cause(exc: Exception) -> str:
    return f"{type(exc).__name__}: {exc}"


def run_round(
    config: SessionConfig,
    Cs: Sequence[float],
    rng: np.random.Generator,
    index: int = 0,
    inject: Optional[type] = None,
) -> RoundRecord:
    """Play one round with strategies ``Cs`` and record what every party learns.

    ``inject`` raises the given recovery error during step 7, for testing retry paths.
    """
    cfg = config.entanglement
    m = config.matrix
    s = strategies_for(config.regime, Cs)
    # Steps 1-4: prepare, distribute, apply moves, return. Eve acts on the wire.
    if config.eavesdrop is not None:
        rho = tapped_final_density(cfg, s, config.eavesdrop)
    else:
        rho = final_state(cfg, s)
    probs = outcome_distribution(rho, cfg.delta)
    probs = probs / probs.sum()
    if config.mode == SAMPLED:
        counts = rng.multinomial(config.shots, probs)
        freqs = counts / config.shots
        shots: Optional[int] = config.shots
    else:
        freqs, shots = probs, None
    # Step 5: one collapse, identified from its payoff ratio; then opponent inference.
    collapsed = LABELS[int(rng.choice(8, p=probs))]
    common = dict(
        index=index,
        regime=config.regime,
        strategies=tuple(float(c) for c in s.Cs),
        mode=config.mode,
        shots=shots,
        frequencies=tuple(float(f) for f in freqs),
        collapsed=collapsed,
        eavesdrop=config.eavesdrop,
    )
    try:
        identified = "/".join(identify_payoff_class(measured_payoff(probs, m, collapsed), m))
    except RecoveryError as exc:
        return RoundRecord(identified=None, inference=None, disclosure=None, recovered={}, verdict=None, failure=_fail_cause(exc), **common)
    inference = None
    if recovery_regime(config.regime) != PARTIAL_DUAL:
        inference = alice_infer_opponent_product(freqs, s.alice.C, recovery_regime(config.regime), shots)
    # Step 6: disclosure of payoffs (expected, or long-run averages when sampled).
    observed = m.values @ freqs
    disclosure = Disclosure.build(config.disclosure, observed, s.alice.C)
    # Post-round audit for a wiretapper.
    if shots is None:
        sensitivity = config.exact_sensitivity
    else:
        sensitivity = config.sensitivity_se * float(np.max(sampled_payoff_stderr(probs, m, shots)))
    verdict = detect_eavesdropper(observed, cfg, s, m, sensitivity)
    # Step 7: Bob and Charlie invert the disclosure.
    recovered: dict = {}
    failure = None
    try:
        if inject is not None:
            raise inject("injected failure")
        for party in ("B", "C"):
            recovered[party] = recover(disclosure, m, s[party].C, party, recovery_regime(config.regime))
    except RecoveryError as exc:
        failure = _fail_cause(exc)
    return RoundRecord(
        identified=identified,
        inference=inference,
        disclosure=disclosure,
        recovered=recovered,
        verdict=verdict,
        failure=failure,
        **common,
    )


def alice_view(config: SessionConfig, pair: Sequence[RoundRecord]) -> RecoveredInfo:
    """Alice's knowledge after a round and its replay."""
    CA = pair[0].strategies[0]
    if recovery_regime(config.regime) == PARTIAL_DUAL:
        s = strategies_for(config.regime, pair[0].strategies)
        pooled = np.mean([r.frequencies for r in pair], axis=0)
        CB, CC = alice_fit_opponents(pooled, config.entanglement, s.alice, ((0.0, PARTIAL_BETAS[1]), (0.0, PARTIAL_BETAS[2])))
    else:
        CB, CC = disambiguate_by_replay([r.inference for r in pair])
    Cs = [CA, float(np.clip(CB, 0.0, 1.0)), float(np.clip(CC, 0.0, 1.0))]
    variant = recovery_regime(config.regime)
    payoffs = tuple(float(coefficient_quad(config.matrix, k, "A", Cs[0], variant).evaluate(Cs[1], Cs[2])) for k in PLAYERS)
    return RecoveredInfo("A", tuple(Cs), payoffs)


def encode_round_pair(codebook: Codebook, first: RecoveredInfo, second: RecoveredInfo) -> tuple[int, int, int, int]:
    """(m_B, m_C, n_B, n_C): strategy symbols from the first round, payoff symbols from the replay."""
    if not (first.complete and second.complete):
        raise RecoveryError(f"party {first.party} lacks values needed for the key")
    return (
        codebook.strategy_symbol(first.C("B")),
        codebook.strategy_symbol(first.C("C")),
        codebook.payoff_symbol(second.payoffs[1]),
        codebook.payoff_symbol(second.payoffs[2]),
    )


@dataclass
class Key:
    party: str
    symbols: list
    rounds: int
    codebook: Codebook

    def __len__(self) -> int:
        return len(self.symbols)

    def hex(self) -> str:
        """Symbols as fixed-width hex: strategy symbols then payoff symbols per group."""
        ws = max(1, math.ceil(math.log(self.codebook.strategy_alphabet, 16)))
        wp = max(1, math.ceil(math.log(self.codebook.payoff_alphabet, 16)))
        parts = [f"{sym:0{ws if i % 4 < 2 else wp}x}" for i, sym in enumerate(self.symbols)]
        return "".join(parts)


def verify_key_agreement(keys: Sequence[Sequence[int] | Key]) -> tuple[bool, Optional[int]]:
    """True when all keys match; otherwise False and the first differing position."""
    if len(keys) < 2:
        raise DomainError("need at least two keys to compare")
    seqs = [list(k.symbols) if isinstance(k, Key) else list(k) for k in keys]
    n = max(len(s) for s in seqs)
    for i in range(n):
        vals = {s[i] if i < len(s) else None for s in seqs}
        if len(vals) > 1:
            return False, i
    return True, None


def _party_rngs(seed: int) -> dict:
    return {k: np.random.default_rng([seed, i]) for i, k in enumerate(PLAYERS)}


def run_session(
    config: SessionConfig,
    r: int,
    seed: int = 0,
    faults: Mapping[int, type] | None = None,
) -> dict:
    """Run ``r`` round pairs and return the session report.

    Each party draws its C privately from ``config.grid``. A failed pair is redrawn up
    to ``max_retries`` times; ``faults`` maps a pair index to an error injected on its
    first attempt. A Tapped verdict stops the session before any key is released.
    """
    config.validate()
    faults = dict(faults or {})
    party_rng = _party_rngs(seed)
    nature = np.random.default_rng([seed, len(PLAYERS)])
    symbols = {k: [] for k in PLAYERS}
    records: list[RoundRecord] = []
    retries = 0
    verdicts: list[str] = []
    p_hats: list[float] = []
    compromised = False
    abort_cause: Optional[str] = None
    pair_index = 0
    attempt = 0
    while pair_index < r:
        Cs = [float(party_rng[k].choice(config.grid)) for k in PLAYERS]
        inject = faults.pop(pair_index, None)
        pair = [
            run_round(config, Cs, nature, 2 * pair_index, inject),
            run_round(config, Cs, nature, 2 * pair_index + 1),
        ]
        records.extend(pair)
        for rec in pair:
            if rec.verdict is not None:
                verdicts.append(rec.verdict.kind)
                if rec.verdict.kind == TAPPED:
                    compromised = True
                    p_hats.append(rec.verdict.p_hat)
        if compromised:
            abort_cause = "eavesdropper detected"
            break
        failure = next((rec.failure for rec in pair if rec.failure), None)
        group = {}
        if failure is None:
            try:
                infos = {"A": [alice_view(config, pair)] * 2}
                for k in ("B", "C"):
                    infos[k] = [pair[0].recovered[k], pair[1].recovered[k]]
                group = {k: encode_round_pair(config.codebook, *infos[k]) for k in PLAYERS}
            except (RecoveryError, DomainError) as exc:
                failure = _fail_cause(exc)
        if failure is not None:
            attempt += 1
            retries += 1
            if attempt > config.max_retries:
                abort_cause = failure
                break
            continue
        for k in PLAYERS:
            symbols[k].extend(group[k])
        pair_index += 1
        attempt = 0
    keys = {k: Key(k, symbols[k], r, config.codebook) for k in PLAYERS}
    released = abort_cause is None and not compromised
    agree, position = verify_key_agreement(list(keys.values())) if released else (False, None)
    return {
        "config": config.to_dict(),
        "seed": seed,
        "round_pairs": r,
        "rounds": [rec.to_dict() for rec in records],
        "keys": {k: keys[k].hex() for k in PLAYERS} if released else None,
        "key_symbols": {k: keys[k].symbols for k in PLAYERS} if released else None,
        "key_length": len(keys["A"]) if released else 0,
        "agreement": agree,
        "first_mismatch": position,
        "retries": retries,
        "aborted": abort_cause,
        "singular": abort_cause is not None and abort_cause.startswith(SingularRecovery.__name__),
        "compromised": compromised,
        "detection": {
            "verdicts": {v: verdicts.count(v) for v in (CLEAN, TAPPED, UNDETECTABLE)},
            "p_hat_mean": float(np.mean(p_hats)) if p_hats else None,
        },
    }
