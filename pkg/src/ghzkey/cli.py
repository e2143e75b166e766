"""Command-line front end: validate, payoffs, session, eve-scan, ledger.

Scenarios are YAML documents. Angles accept literals such as ``pi/4`` or ``-3*pi/2``.
Any field can be overridden through ``GHZKEY_<FIELD>`` environment variables, with
``__`` separating nested keys (``GHZKEY_SESSION__ROUNDS=8``).
"""

from __future__ import annotations

import argparse
import csv
import io
import itertools
import json
import math
import os
import re
import sys
from pathlib import Path
from typing import Any, Optional

import numpy as np
import yaml

from ghzkey import __version__
from ghzkey import constants as tol
from ghzkey.adversary import EavesdropConfig, detect_eavesdropper, tapped_payoffs
from ghzkey.discrepancy import DEFAULT_PATH, dumps, build_ledger
from ghzkey.generators import FAMILIES, family_matrix
from ghzkey.payoffs import PARTIAL_BETAS, general_form, symmetry_permute_matrix
from ghzkey.protocol import REGIMES, SAFE_GRID, Codebook, SessionConfig, recovery_regime, run_session, strategies_for
from ghzkey.recovery import (
    Disclosure,
    NoInformation,
    RecoveryError,
    SingularRecovery,
    UnsupportedDisclosure,
    classify_symmetry_case,
    recover,
    validate_ratio_distinctness,
)
from ghzkey.state import PLAYERS, DomainError, EntanglementConfig, PayoffMatrix, StrategyTriple, expected_payoffs_oracle

EXIT_OK = 0
EXIT_INVALID = 1
EXIT_MISMATCH = 2
EXIT_EAVESDROPPER = 3
EXIT_SINGULAR = 4

ENV_PREFIX = "GHZKEY_"
GENERAL = "general"

_ANGLE = re.compile(r"^\s*([+-]?\s*(?:\d+(?:\.\d*)?|\.\d+)?)\s*\*?\s*pi\s*(?:/\s*(\d+(?:\.\d*)?))?\s*$")


class ConfigError(ValueError):
    pass


def parse_angle(value: Any) -> float:
    """Number or ``k*pi/n`` literal to radians."""
    if isinstance(value, (int, float)):
        return float(value)
    text = str(value).strip()
    mt = _ANGLE.match(text)
    if mt:
        coef = mt.group(1).replace(" ", "")
        k = -1.0 if coef == "-" else 1.0 if coef in ("", "+") else float(coef)
        return k * math.pi / (float(mt.group(2)) if mt.group(2) else 1.0)
    try:
        return float(text)
    except ValueError:
        raise ConfigError(f"cannot parse angle {value!r}") from None


def _set_path(cfg: dict, keys: list[str], value: Any) -> None:
    node = cfg
    for k in keys[:-1]:
        node = node.setdefault(k, {})
        if not isinstance(node, dict):
            raise ConfigError(f"cannot override inside non-mapping field {k!r}")
    node[keys[-1]] = value


def apply_env_overrides(cfg: dict, environ: Optional[dict] = None) -> dict:
    env = os.environ if environ is None else environ
    for name, raw in sorted(env.items()):
        if name.startswith(ENV_PREFIX):
            keys = [k.lower() for k in name[len(ENV_PREFIX) :].split("__") if k]
            if keys:
                _set_path(cfg, keys, yaml.safe_load(raw))
    return cfg


def load_config(path: Optional[str], environ: Optional[dict] = None) -> dict:
    cfg: dict = {}
    if path:
        try:
            loaded = yaml.safe_load(Path(path).read_text())
        except yaml.YAMLError as exc:
            mark = getattr(exc, "problem_mark", None)
            where = f" at line {mark.line + 1}, column {mark.column + 1}" if mark else ""
            raise ConfigError(f"{path}: YAML parse error{where}: {getattr(exc, 'problem', exc)}") from None
        if loaded is not None and not isinstance(loaded, dict):
            raise ConfigError(f"{path}: top level must be a mapping")
        cfg = loaded or {}
    return apply_env_overrides(cfg, environ)


def build_matrix(spec: Any, seed: int, regime: str = "nonentangled") -> PayoffMatrix:
    """Payoff matrix from a config block.

    Generated families describe the case in the regime's own reduced form, so for the
    maximally entangled regime the generated matrix is relabelled by the symmetry map.
    """
    if spec is None:
        raise ConfigError("matrix: missing (give generator, values or file)")
    if not isinstance(spec, dict):
        raise ConfigError("matrix: must be a mapping")
    constrained = tuple(spec.get("constrained", ("A", "B")))
    if "file" in spec:
        data = yaml.safe_load(Path(spec["file"]).read_text())
        spec = {**data, "constrained": data.get("constrained", constrained)}
        constrained = tuple(spec["constrained"])
    if "generator" in spec:
        fam = str(spec["generator"]).lower()
        if fam not in FAMILIES:
            raise ConfigError(f"matrix.generator: unknown {fam!r}; choose from {list(FAMILIES)}")
        m = family_matrix(fam, spec.get("seed", seed), trivial=bool(spec.get("trivial", False)))
        return symmetry_permute_matrix(m) if regime == "maxentangled" else m
    if "constant" in spec:
        return PayoffMatrix.constant(float(spec["constant"]))
    if "values" in spec:
        vals = spec["values"]
        try:
            table = {k: {str(lab).zfill(3): float(v) for lab, v in vals[k].items()} for k in PLAYERS}
            return PayoffMatrix.from_dict(table, constrained=constrained)
        except (KeyError, AttributeError, TypeError, ValueError) as exc:
            raise ConfigError(f"matrix.values: need players A, B, C each mapping the 8 labels to numbers ({exc})") from None
    raise ConfigError("matrix: give one of generator, values, constant or file")


def entanglement_from(cfg: dict) -> EntanglementConfig:
    regime = cfg.get("regime", "nonentangled")
    if regime == GENERAL:
        ent = cfg.get("entanglement") or {}
        return EntanglementConfig(parse_angle(ent.get("gamma", 0)), parse_angle(ent.get("delta", 0)))
    if regime not in REGIMES:
        raise ConfigError(f"regime: unknown {regime!r}; choose from {sorted(REGIMES) + [GENERAL]}")
    return REGIMES[regime]


def strategies_from(cfg: dict, seed: int) -> list[StrategyTriple]:
    regime = cfg.get("regime", "nonentangled")
    spec = cfg.get("strategies") or {"source": "random", "count": 10}
    source = spec.get("source", "fixed")
    partial = regime in REGIMES and recovery_regime(regime) == "partial_dual"
    if source == "fixed":
        thetas = [parse_angle(t) for t in spec.get("theta", [0, 0, 0])]
        alphas = [parse_angle(a) for a in spec.get("alpha", [0, 0, 0])]
        betas = list(PARTIAL_BETAS) if partial else [parse_angle(b) for b in spec.get("beta", [0, 0, 0])]
        return [StrategyTriple.from_thetas(thetas, alphas, betas)]
    if source == "grid":
        grid = [float(c) for c in spec.get("C", SAFE_GRID)]
        return [strategies_for(regime, Cs) if regime in REGIMES else StrategyTriple.from_C(Cs) for Cs in itertools.product(grid, repeat=3)]
    if source == "random":
        rng = np.random.default_rng(spec.get("seed", seed))
        out = []
        for _ in range(int(spec.get("count", 10))):
            thetas = rng.uniform(0, math.pi, 3)
            if partial:
                out.append(StrategyTriple.from_thetas(thetas, betas=PARTIAL_BETAS))
            elif regime == GENERAL:
                out.append(StrategyTriple.from_thetas(thetas, rng.uniform(-math.pi, math.pi, 3), rng.uniform(-math.pi, math.pi, 3)))
            else:
                out.append(StrategyTriple.from_thetas(thetas))
        return out
    raise ConfigError(f"strategies.source: unknown {source!r}; choose fixed, grid or random")


def eavesdrop_from(spec: Any) -> Optional[EavesdropConfig]:
    if not spec:
        return None
    targets = tuple(tuple(t) if isinstance(t, (list, tuple)) else (t, "forward") for t in spec.get("targets", [["B", "forward"]]))
    return EavesdropConfig(float(spec.get("p", 0.0)), targets)


def session_config_from(cfg: dict, args) -> SessionConfig:
    regime = cfg.get("regime", "nonentangled")
    if regime not in REGIMES:
        raise ConfigError(f"regime: sessions support {sorted(REGIMES)}, got {regime!r}")
    sess = cfg.get("session") or {}
    codebook = Codebook(
        bits=int(sess.get("bits", 3)),
        decimals=int(sess.get("decimals", 1)),
        payoff_range=tuple(float(x) for x in sess.get("payoff_range", (0.0, 100.0))),
    )
    return SessionConfig(
        regime=regime,
        matrix=build_matrix(cfg.get("matrix"), args.seed, cfg.get("regime", "nonentangled")),
        disclosure=cfg.get("disclosure", "payoffs_ab"),
        mode=args.mode or cfg.get("mode", "exact"),
        shots=int(args.shots or cfg.get("shots", 100_000)),
        eavesdrop=eavesdrop_from(cfg.get("eavesdrop")),
        codebook=codebook,
        max_retries=int(sess.get("max_retries", 3)),
        grid=tuple(float(c) for c in sess.get("grid", SAFE_GRID)),
    )


def _echo(cfg: dict, seed: int) -> dict:
    return {"version": __version__, "seed": seed, "config": cfg}


def _out_path(args, name: str) -> Optional[Path]:
    if not args.out:
        return None
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    return out / name


def _write_csv(path: Optional[Path], header: list[str], rows: list[list], echo: dict) -> str:
    buf = io.StringIO()
    buf.write(f"# {json.dumps(echo, sort_keys=True)}\n")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    w.writerows(rows)
    text = buf.getvalue()
    if path is not None:
        path.write_text(text)
    return text


def _fmt(x: float) -> str:
    return repr(float(x))


# --- commands --------------------------------------------------------------------------------


def singularity_audit(config: SessionConfig) -> tuple[int, int]:
    """(singular, total) recovery attempts over the configured strategy grid."""
    cfg = config.entanglement
    singular = total = 0
    for Cs in itertools.product(config.grid, repeat=3):
        s = strategies_for(config.regime, Cs)
        P = expected_payoffs_oracle(cfg, s, config.matrix)
        d = Disclosure.build(config.disclosure, P, s.alice.C)
        for party in ("B", "C"):
            total += 1
            try:
                recover(d, config.matrix, s[party].C, party, recovery_regime(config.regime))
            except SingularRecovery:
                singular += 1
            except RecoveryError:
                pass
    return singular, total


def cmd_validate(cfg: dict, args) -> int:
    regime = cfg.get("regime", "nonentangled")
    m = build_matrix(cfg.get("matrix"), args.seed, cfg.get("regime", "nonentangled"))
    rec_regime = recovery_regime(regime) if regime in REGIMES else "nonentangled"
    case = classify_symmetry_case(m, rec_regime)
    ratio = validate_ratio_distinctness(m)
    print(f"{case}, ratio-distinct: {'yes' if ratio.ok else 'no'}")
    if ratio.collisions:
        print("colliding pairs: " + " ".join(f"{a}-{b}" for a, b in ratio.collisions))
    if ratio.degenerate:
        print("degenerate profiles: " + " ".join(ratio.degenerate))
    if regime not in REGIMES:
        print(f"regime {regime}: no key-recovery inversion is defined")
        return EXIT_INVALID
    try:
        config = session_config_from(cfg, args)
        config.validate()
    except NoInformation as exc:
        print(f"invalid: {exc}")
        return EXIT_INVALID
    except (UnsupportedDisclosure, DomainError) as exc:
        print(f"invalid: {exc}")
        return EXIT_INVALID
    singular, total = singularity_audit(config)
    print(f"singular recoveries on strategy grid: {singular}/{total}")
    return EXIT_SINGULAR if total and singular == total else EXIT_OK


def cmd_payoffs(cfg: dict, args) -> int:
    m = build_matrix(cfg.get("matrix"), args.seed, cfg.get("regime", "nonentangled"))
    ent = entanglement_from(cfg)
    header = ["row", "theta_A", "theta_B", "theta_C", "alpha_A", "alpha_B", "alpha_C", "beta_A", "beta_B", "beta_C"]
    header += [f"closed_{k}" for k in PLAYERS] + [f"oracle_{k}" for k in PLAYERS]
    header += ["max_delta", "printed_delta", "ledgered"]
    rows = []
    worst = 0.0
    for i, s in enumerate(strategies_from(cfg, args.seed)):
        closed = general_form(ent, s, m)
        oracle = expected_payoffs_oracle(ent, s, m)
        printed = general_form(ent, s, m, as_printed=True)
        delta = float(np.max(np.abs(closed - oracle)))
        pdelta = float(np.max(np.abs(printed - oracle)))
        notes = []
        if pdelta > tol.CLOSED_FORM_TOL:
            notes.append("C_A S_B S_C cos2(-alpha_A + beta_B - beta_C)")
        if ent == EntanglementConfig.maximal() and s.thetas[1] == 0.0 and s.thetas[2] == 0.0:
            notes.append("theta_B = theta_C = 0: C_A $000 +- S_A $001")
        worst = max(worst, delta)
        rows.append([i, *map(_fmt, s.thetas), *map(_fmt, s.alphas), *map(_fmt, s.betas), *map(_fmt, closed), *map(_fmt, oracle), _fmt(delta), _fmt(pdelta), "; ".join(notes)])
    text = _write_csv(_out_path(args, "payoffs.csv"), header, rows, _echo(cfg, args.seed))
    if not args.out:
        sys.stdout.write(text)
    print(f"max |closed - oracle| = {worst:.3e}", file=sys.stderr)
    return EXIT_OK if worst <= tol.CLOSED_FORM_TOL else EXIT_INVALID


def cmd_session(cfg: dict, args) -> int:
    config = session_config_from(cfg, args)
    try:
        config.validate()
    except NoInformation as exc:
        print(f"invalid: {exc}", file=sys.stderr)
        return EXIT_INVALID
    except UnsupportedDisclosure as exc:
        print(f"invalid: {exc}", file=sys.stderr)
        return EXIT_INVALID
    rounds = int((cfg.get("session") or {}).get("rounds", 4))
    report = run_session(config, rounds, seed=args.seed)
    report = {"echo": _echo(cfg, args.seed), **report}
    text = json.dumps(report, indent=2, sort_keys=True) + "\n"
    path = _out_path(args, "session.json")
    if path is not None:
        path.write_text(text)
    keys = report["keys"]
    print(f"key length: {report['key_length']}, agreement: {report['agreement']}, retries: {report['retries']}")
    print(f"detection: {report['detection']['verdicts']}")
    if report["compromised"]:
        print(f"eavesdropper detected, p_hat = {report['detection']['p_hat_mean']:.4f}; key withheld")
        return EXIT_EAVESDROPPER
    if report["aborted"]:
        print(f"session aborted: {report['aborted']}")
        return EXIT_SINGULAR if report["singular"] else EXIT_MISMATCH
    if keys:
        for k in PLAYERS:
            print(f"key[{k}] = {keys[k]}")
    if not report["agreement"]:
        print(f"keys differ at symbol {report['first_mismatch']}")
        return EXIT_MISMATCH
    return EXIT_OK


def parse_grid(text: str) -> list[float]:
    """``start:stop:step`` inclusive of stop (within rounding)."""
    try:
        start, stop, step = (float(x) for x in text.split(":"))
    except ValueError:
        raise ConfigError(f"--p-grid must be start:stop:step, got {text!r}") from None
    if step <= 0 or stop < start:
        raise ConfigError("--p-grid needs step > 0 and stop >= start")
    n = int(math.floor((stop - start) / step + 1e-9)) + 1
    return [round(start + i * step, 12) for i in range(n)]


def cmd_eve_scan(cfg: dict, args) -> int:
    m = build_matrix(cfg.get("matrix"), args.seed, cfg.get("regime", "nonentangled"))
    ent = entanglement_from(cfg)
    s = strategies_from(cfg, args.seed)[0]
    grid = parse_grid(args.p_grid or str((cfg.get("eve_scan") or {}).get("p_grid", "0:1:0.01")))
    base_targets = eavesdrop_from(cfg.get("eavesdrop") or {"p": 0.0})
    targets = base_targets.targets if base_targets else (("B", "forward"),)
    clean = tapped_payoffs(ent, s, m, EavesdropConfig(0.0, targets))
    header = ["p", "dP_A", "dP_B", "dP_C", "max_delta", "verdict", "p_hat"]
    rows = []
    for p in grid:
        P = tapped_payoffs(ent, s, m, EavesdropConfig(p, targets))
        d = P - clean
        verdict = detect_eavesdropper(P, ent, s, m) if len(targets) == 1 and targets[0][1] == "forward" else None
        rows.append(
            [
                _fmt(p),
                *map(_fmt, d),
                _fmt(float(np.max(np.abs(d)))),
                "" if verdict is None else verdict.kind,
                "" if verdict is None or verdict.p_hat is None else _fmt(verdict.p_hat),
            ]
        )
    text = _write_csv(_out_path(args, "eve_scan.csv"), header, rows, _echo(cfg, args.seed))
    if not args.out:
        sys.stdout.write(text)
    return EXIT_OK


def cmd_ledger(cfg: dict, args) -> int:
    text = dumps(build_ledger(args.seed))
    if args.check:
        shipped = Path(args.check).read_text()
        if shipped != text:
            print(f"{args.check} differs from the regenerated ledger")
            return EXIT_INVALID
        print(f"{args.check} reproduces ({len(text.splitlines())} records)")
        return EXIT_OK
    path = _out_path(args, "discrepancies.jsonl")
    if path is None:
        sys.stdout.write(text)
    else:
        path.write_text(text)
    return EXIT_OK


COMMANDS = {
    "validate": cmd_validate,
    "payoffs": cmd_payoffs,
    "session": cmd_session,
    "eve-scan": cmd_eve_scan,
    "ledger": cmd_ledger,
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="ghzkey", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        p = sub.add_parser(name)
        p.add_argument("--config", help="YAML scenario file")
        p.add_argument("--seed", type=int, default=0)
        p.add_argument("--mode", choices=("exact", "sampled"))
        p.add_argument("--shots", type=int)
        p.add_argument("--out", help="output directory")
        if name == "eve-scan":
            p.add_argument("--p-grid", help="start:stop:step")
        if name == "ledger":
            p.add_argument("--check", nargs="?", const=str(DEFAULT_PATH), help="compare with a shipped ledger file")
    return parser


def main(argv: Optional[list[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = load_config(args.config)
        return COMMANDS[args.command](cfg, args)
    except (ConfigError, DomainError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVALID


if __name__ == "__main__":
    sys.exit(main())
