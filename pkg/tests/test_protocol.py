import json

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from ghzkey.adversary import TAPPED, UNDETECTABLE, EavesdropConfig
from ghzkey.generators import family_matrix
from ghzkey.payoffs import NONENTANGLED, _alt_sum, coefficient_quad, symmetry_permute_matrix
from ghzkey.recovery import (
    PAYOFF_A_ONLY,
    Disclosure,
    RecoveredInfo,
    SingularRecovery,
    SymmetryCase,
    UnsupportedDisclosure,
    consistent_completions,
)
from ghzkey.state import DomainError, EntanglementConfig, StrategyTriple, expected_payoffs_oracle
from ghzkey.protocol import (
    EXACT,
    SAMPLED,
    Codebook,
    Key,
    SessionConfig,
    encode_round_pair,
    run_round,
    run_session,
    verify_key_agreement,
)


def info(Cs, P):
    return RecoveredInfo("B", tuple(Cs), tuple(P))


def case_i_config(**kw):
    return SessionConfig("nonentangled", family_matrix("case_i", 1), **kw)


def max_config(**kw):
    return SessionConfig("maxentangled", symmetry_permute_matrix(family_matrix("case_i", 1)), **kw)


# --- codebook ------------------------------------------------------------------------


def test_codebook_example():
    cb = Codebook(bits=1, decimals=0)
    assert encode_round_pair(cb, info([0.5, 0.9, 0.2], [1, 1, 1]), info([0.5, 0.9, 0.2], [4.0, 3.2, 1.7])) == (1, 0, 3, 2)


def test_strategy_symbol_top_boundary():
    cb = Codebook(bits=3)
    assert cb.strategy_symbol(1.0) == 7 and cb.strategy_symbol(0.0) == 0 and cb.strategy_symbol(0.5) == 4


def test_codebook_absorbs_float_noise():
    cb = Codebook()
    assert cb.strategy_symbol(0.5 - 1e-12) == cb.strategy_symbol(0.5) == 4
    assert cb.payoff_symbol(4.05 - 1e-12) == cb.payoff_symbol(4.05 + 1e-12)


def test_codebook_rejects_out_of_range():
    with pytest.raises(DomainError):
        Codebook().payoff_symbol(-1.0)
    with pytest.raises(DomainError):
        Codebook().strategy_symbol(1.5)


@given(st.integers(0, 999), st.floats(-0.499, 0.499), st.integers(0, 2))
def test_payoff_symbol_margin(n, frac, d):
    cb = Codebook(decimals=d, payoff_range=(0.0, 1000.0))
    P = n / 10**d + frac / 10**d
    if 0.0 <= P <= 1000.0:
        assert cb.payoff_symbol(P) == n


def test_encoding_is_deterministic():
    a = info([0.3, 0.45, 0.61], [2.0, 3.33, 4.44])
    assert encode_round_pair(Codebook(), a, a) == encode_round_pair(Codebook(), a, a)


def test_incomplete_info_cannot_encode():
    partial = RecoveredInfo("C", (0.3, None, 0.6), (None, None, None))
    with pytest.raises(Exception):
        encode_round_pair(Codebook(), partial, partial)


# --- key agreement ---------------------------------------------------------------------


def test_identical_keys_agree():
    assert verify_key_agreement([[1, 2, 3], [1, 2, 3], [1, 2, 3]]) == (True, None)


def test_mismatch_position():
    a = list(range(10))
    b = a.copy()
    b[5] = 99
    assert verify_key_agreement([a, b]) == (False, 5)


def test_agreement_needs_two_keys():
    with pytest.raises(DomainError):
        verify_key_agreement([[1]])


def test_key_hex_width():
    k = Key("A", [7, 0, 123, 4], 1, Codebook(bits=3, decimals=1))
    assert k.hex() == "70" + "07b" + "004"


# --- single rounds ---------------------------------------------------------------------


def test_exact_round_recovers_truth():
    rng = np.random.default_rng(0)
    rec = run_round(case_i_config(), [0.3, 0.7, 0.4], rng)
    assert rec.ok
    for k in ("B", "C"):
        assert rec.recovered[k].Cs == pytest.approx((0.3, 0.7, 0.4), abs=1e-6)


def test_sampled_round_calibration():
    rng = np.random.default_rng(1)
    cfg = case_i_config(mode=SAMPLED, shots=100_000)
    good = total = 0
    for _ in range(100):
        Cs = list(rng.choice(cfg.grid, 3))
        rec = run_round(cfg, Cs, rng)
        total += 1
        good += rec.ok and all(np.max(np.abs(np.array(rec.recovered[k].Cs) - Cs)) <= 0.02 for k in ("B", "C"))
    assert good >= 0.95 * total


def test_tapped_round_verdicts():
    rng = np.random.default_rng(2)
    rec = run_round(max_config(eavesdrop=EavesdropConfig(0.5)), [0.5, 0.3, 0.6], rng)
    assert rec.verdict.kind == TAPPED and rec.verdict.p_hat == pytest.approx(0.5, abs=1e-6)
    rec = run_round(case_i_config(eavesdrop=EavesdropConfig(0.5)), [0.5, 0.3, 0.6], rng)
    assert rec.verdict.kind == UNDETECTABLE


def test_injected_failure_recorded():
    rec = run_round(case_i_config(), [0.3, 0.7, 0.4], np.random.default_rng(0), inject=SingularRecovery)
    assert not rec.ok and rec.failure.startswith("SingularRecovery")


def test_partial_round_tap_invisible_for_not_dual_matrix():
    # The tap acts through the alternating payoff sum, which NOT-duality zeroes.
    m = family_matrix("not_dual", 3)
    assert all(abs(_alt_sum(m.row(k))) < 1e-12 for k in "ABC")
    cfg = SessionConfig("partial_i", m, "alice_all", eavesdrop=EavesdropConfig(0.5))
    rec = run_round(cfg, [0.5, 0.3, 0.6], np.random.default_rng(0))
    assert rec.verdict.kind == UNDETECTABLE


# --- sessions --------------------------------------------------------------------------


def test_exact_session_keys():
    rep = run_session(case_i_config(), 4, seed=11)
    assert rep["agreement"] and rep["key_length"] == 16
    syms = rep["key_symbols"]
    assert syms["A"] == syms["B"] == syms["C"]


@pytest.mark.parametrize("r", [1, 2, 5])
def test_key_length_law(r):
    assert run_session(case_i_config(), r, seed=r)["key_length"] == 4 * r


def test_injected_fault_retried():
    rep = run_session(case_i_config(), 4, seed=3, faults={1: SingularRecovery})
    assert rep["key_length"] == 16 and rep["retries"] == 1 and rep["agreement"]


def test_persistent_fault_aborts():
    cfg = case_i_config(max_retries=0)
    rep = run_session(cfg, 2, seed=3, faults={0: SingularRecovery})
    assert rep["aborted"].startswith("SingularRecovery") and rep["keys"] is None and rep["singular"]


def test_tapped_session_compromised():
    rep = run_session(max_config(eavesdrop=EavesdropConfig(0.4)), 4, seed=5)
    assert rep["compromised"] and rep["keys"] is None and rep["key_length"] == 0


def test_nonentangled_tap_undetectable():
    rep = run_session(case_i_config(eavesdrop=EavesdropConfig(0.5)), 2, seed=5)
    assert not rep["compromised"]
    assert rep["detection"]["verdicts"]["undetectable"] == len(rep["rounds"])


def test_session_deterministic():
    a = json.dumps(run_session(case_i_config(mode=SAMPLED, shots=2000), 3, seed=9), sort_keys=True)
    b = json.dumps(run_session(case_i_config(mode=SAMPLED, shots=2000), 3, seed=9), sort_keys=True)
    assert a == b


def test_low_shot_session_reports_diagnostics():
    rep = run_session(case_i_config(mode=SAMPLED, shots=200, max_retries=10), 4, seed=2)
    assert all("frequencies" in r and "failure" in r for r in rep["rounds"])
    assert isinstance(rep["agreement"], bool)


def test_maxentangled_and_partial_sessions():
    for cfg in (max_config(), SessionConfig("partial_ii", family_matrix("not_dual", 2), "alice_all")):
        rep = run_session(cfg, 1, seed=4)
        assert rep["agreement"] and rep["key_length"] == 4


def test_unsupported_config_rejected():
    with pytest.raises(UnsupportedDisclosure):
        case_i_config(disclosure=PAYOFF_A_ONLY).validate()
    with pytest.raises(DomainError):
        SessionConfig("sideways", family_matrix("case_i", 1))
    with pytest.raises(DomainError):
        case_i_config(mode="quantum")


def test_report_is_json_serializable():
    json.dumps(run_session(max_config(), 1, seed=0))
    assert run_session(max_config(), 1, seed=0)["config"]["mode"] == EXACT


# --- knowledge asymmetry ---------------------------------------------------------------


@pytest.mark.parametrize("family,case", [("case_i", SymmetryCase.CASE_I), ("case_ii", SymmetryCase.CASE_II)])
def test_outsider_cannot_pin_key_symbols(family, case):
    # Key symbols an outsider must guess: m_B, m_C and n_C (P^C is never disclosed).
    cb = Codebook()
    rng = np.random.default_rng(8)
    for seed in range(40):
        m = family_matrix(family, seed)
        Cs = list(rng.choice(SessionConfig("nonentangled", m).grid, 3))
        P = expected_payoffs_oracle(EntanglementConfig.nonentangled(), StrategyTriple.from_C(Cs), m)
        found = consistent_completions(Disclosure.build("payoffs_ab", P), m, case)
        symbols = {
            (cb.strategy_symbol(t[1]), cb.strategy_symbol(t[2]), cb.payoff_symbol(coefficient_quad(m, "C", "A", t[0], NONENTANGLED).evaluate(t[1], t[2])))
            for t in found
        }
        assert len(symbols) >= 2, (seed, Cs)
