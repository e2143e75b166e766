"""Oracle round trips for every solved (regime, case, disclosure) combination.

Each family draws a matrix and strategies in [0.1, 0.9], computes payoffs with the
density-matrix oracle, discloses them, and lets Bob and Charlie recover. Draws whose
recovery is singular are redrawn and counted.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from ghzkey.generators import family_matrix
from ghzkey.payoffs import MAXENTANGLED, NONENTANGLED, PARTIAL_BETAS, branch_config, symmetry_permute_matrix
from ghzkey.recovery import (
    ALICE_ALL,
    PAYOFF_A_ONLY,
    PAYOFFS_AB,
    Disclosure,
    RecoveryError,
    SingularRecovery,
    recover_from_alice_disclosure,
    recover_nonentangled_caseI,
    recover_nonentangled_caseII,
    recover_partial,
    recover_partial_symmetric,
)
from ghzkey.state import EntanglementConfig, StrategyTriple, expected_payoffs_oracle

TOL = 1e-6
C_PARTIAL = math.cos(math.pi / 8) ** 2  # Alice's theta = pi/4


@dataclass
class TripResult:
    family: str
    trials: int = 0
    passed: int = 0
    singular: int = 0
    worst: float = 0.0
    failures: list = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return self.trials > 0 and self.passed == self.trials


def _regime_setup(regime: str, family: str, seed: int):
    m = family_matrix(family, seed)
    if regime == MAXENTANGLED:
        return symmetry_permute_matrix(m), EntanglementConfig.maximal()
    return m, EntanglementConfig.nonentangled()


def _instance(name: str, rng: np.random.Generator):
    """(matrix, ground-truth Cs, payoffs, disclosure, solver) for one draw."""
    seed = int(rng.integers(2**31))
    Cs = list(rng.uniform(0.1, 0.9, 3))
    if name in ("case_i", "case_ii"):
        regime = NONENTANGLED if rng.random() < 0.5 else MAXENTANGLED
        m, cfg = _regime_setup(regime, name, seed)
        solver = recover_nonentangled_caseI if name == "case_i" else recover_nonentangled_caseII
        P = expected_payoffs_oracle(cfg, StrategyTriple.from_C(Cs), m)
        return m, Cs, P, Disclosure.build(PAYOFFS_AB, P), lambda d, own, k: solver(d, m, own, k, regime)
    if name in ("alice", "case_iii"):
        family = name if name == "case_iii" else ("case_i", "case_ii")[int(rng.integers(2))]
        regime = NONENTANGLED if rng.random() < 0.5 else MAXENTANGLED
        m, cfg = _regime_setup(regime, family, seed)
        P = expected_payoffs_oracle(cfg, StrategyTriple.from_C(Cs), m)
        d = Disclosure.build(ALICE_ALL, P, Cs[0])
        return m, Cs, P, d, lambda d, own, k: recover_from_alice_disclosure(d, m, own, k, regime=regime)
    if name == "partial":
        Cs[0] = C_PARTIAL
        m = family_matrix("not_dual", seed)
        cfg = branch_config(("i", "ii")[int(rng.integers(2))])
        P = expected_payoffs_oracle(cfg, StrategyTriple.from_C(Cs, betas=PARTIAL_BETAS), m)
        d = Disclosure.build(ALICE_ALL, P, Cs[0])
        return m, Cs, P, d, lambda d, own, k: recover_partial(d, m, own, k)
    if name == "partial_sym":
        m = family_matrix(("partial_sym_i", "partial_sym_ii")[int(rng.integers(2))], seed)
        cfg = branch_config(("i", "ii")[int(rng.integers(2))])
        P = expected_payoffs_oracle(cfg, StrategyTriple.from_C(Cs, betas=PARTIAL_BETAS), m)
        d = Disclosure.build(PAYOFF_A_ONLY, P)
        return m, Cs, P, d, lambda d, own, k: recover_partial_symmetric(d, m, own, k)
    raise ValueError(name)


FAMILIES = ("case_i", "case_ii", "alice", "case_iii", "partial", "partial_sym")


def run_round_trips(name: str, n: int = 200, seed: int = 0, max_draws: int = 10_000) -> TripResult:
    """Require every party to hold all three strategies within TOL, and Bob and Charlie to agree."""
    rng = np.random.default_rng([seed, FAMILIES.index(name)])
    res = TripResult(name)
    draws = 0
    while res.trials < n and draws < max_draws:
        draws += 1
        m, Cs, P, d, solve = _instance(name, rng)
        infos, error = {}, None
        for k in ("B", "C"):
            try:
                infos[k] = solve(d, Cs["ABC".index(k)], k)
            except SingularRecovery:
                error = "singular"
                break
            except RecoveryError as exc:
                infos[k] = None
                error = f"{k}: {type(exc).__name__}"
        if error == "singular":
            res.singular += 1
            continue
        res.trials += 1
        ok = error is None
        for k, info in infos.items():
            if info is None or not info.complete:
                ok = False
                error = error or f"{k}: incomplete {info.Cs if info else None}"
                continue
            err = max(abs(a - b) for a, b in zip(info.Cs, Cs))
            res.worst = max(res.worst, err)
            ok &= err <= TOL
        if ok:
            b, c = infos["B"], infos["C"]
            agree = max(abs(x - y) for x, y in zip(b.Cs + b.payoffs, c.Cs + c.payoffs))
            ok &= agree <= TOL
        if ok:
            res.passed += 1
        elif len(res.failures) < 5:
            res.failures.append(error or "tolerance")
    return res
