import numpy as np
import pytest

from ghzkey import constants as tol
from ghzkey.discrepancy import (
    DEFAULT_PATH,
    FIELDS,
    build_ledger,
    dumps,
    ledger_terms,
    load_ledger,
    printed_low_entanglement,
    printed_maxentangled_view,
    printed_phase_transform,
    write_ledger,
)
from ghzkey.generators import random_matrix
from ghzkey.payoffs import general_form, maxentangled_payoff_view, phase_transform_matrix
from ghzkey.state import PLAYERS, EntanglementConfig, StrategyTriple, expected_payoffs_oracle

from conftest import random_config, random_triple


@pytest.fixture(scope="module")
def ledger():
    return build_ledger(0)


def test_shipped_ledger_reproduces(ledger):
    assert DEFAULT_PATH.read_text() == dumps(ledger)


def test_records_have_schema(ledger):
    assert ledger
    for r in ledger:
        assert tuple(sorted(r)) == tuple(sorted(FIELDS))
        assert r["absdiff"] is None or r["absdiff"] > tol.CLOSED_FORM_TOL
        if r["printed"] is not None:
            assert r["absdiff"] == pytest.approx(abs(r["printed"] - r["oracle"]))


def test_records_are_unique(ledger):
    assert len({(r["regime"], r["term"]) for r in ledger}) == len(ledger)


def test_terms_do_not_depend_on_seed(ledger):
    # Printed errors are structural, so any generic parameter point exposes them.
    assert ledger_terms(build_ledger(7)) == ledger_terms(ledger)


def test_write_and_load_roundtrip(tmp_path, ledger):
    path = tmp_path / "ledger.jsonl"
    write_ledger(path)
    assert load_ledger(path) == ledger


def test_printed_general_form_matches_at_zero_phases(rng):
    for _ in range(20):
        cfg, m = random_config(rng), random_matrix(rng)
        s = random_triple(rng, with_phases=False)
        assert np.allclose(general_form(cfg, s, m, as_printed=True), expected_payoffs_oracle(cfg, s, m), atol=1e-9)


def test_printed_general_form_differs_with_phases(rng):
    worst = 0.0
    for _ in range(20):
        cfg, s, m = random_config(rng), random_triple(rng), random_matrix(rng)
        worst = max(worst, float(np.max(np.abs(general_form(cfg, s, m, as_printed=True) - expected_payoffs_oracle(cfg, s, m)))))
    assert worst > 1e-6


def test_printed_low_entanglement_sign():
    m = random_matrix(3)
    s = StrategyTriple.from_thetas([0.7, 0.0, 0.0])
    oracle = expected_payoffs_oracle(EntanglementConfig.maximal(), s, m)
    CA = s.alice.C
    assert all(abs(printed_low_entanglement(m, k, CA) - oracle[i]) > 1e-3 for i, k in enumerate(PLAYERS))


def test_printed_primed_view_differs(rng):
    m = random_matrix(rng)
    Cs = rng.uniform(0.1, 0.9, 3)
    gaps = [abs(printed_maxentangled_view(m, "A", v, Cs) - maxentangled_payoff_view(m, "A", v, Cs)) for v in PLAYERS]
    assert max(gaps) > 1e-3


def test_printed_phase_transform_differs(rng):
    cfg = EntanglementConfig.maximal()
    m, s = random_matrix(rng), random_triple(rng)
    assert not np.allclose(printed_phase_transform(m, s, cfg).values, phase_transform_matrix(m, s, cfg).values)
