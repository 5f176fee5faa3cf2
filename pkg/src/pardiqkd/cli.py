"""Command-line entry point: keyrate | simulate | optimize | verify | entropy-table.

Every subcommand reads an optional flat JSON config (--config), then applies command-line
flags on top; unknown keys are rejected. Exit codes: 0 ok, 1 verification failure,
2 invalid input, 3 infeasible.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import sys
from decimal import Decimal, InvalidOperation
from pathlib import Path

import numpy as np

from . import entropy as en
from . import keyrate as kr
from . import parrep
from . import protocol as proto
from .entropy import BoundConstants, BoundError
from .games import GameError, chsh3_anchored, game_from_text
from .params import ParamError, ProtocolParams
from .quantum import QuantumError, honest_strategy, winning_probability

EXIT_OK, EXIT_VERIFY, EXIT_INPUT, EXIT_INFEASIBLE = 0, 1, 2, 3
VERIFY_TOL = 1e-6


class ConfigError(ValueError):
    pass


def _parse_int(v) -> int:
    if isinstance(v, bool):
        raise ConfigError("expected an integer")
    if isinstance(v, int):
        return v
    try:
        d = Decimal(str(v))
    except InvalidOperation as e:
        raise ConfigError(f"not an integer: {v!r}") from e
    if d != d.to_integral_value():
        raise ConfigError(f"not an integer: {v!r}")
    return int(d)


def _parse_float(v) -> float:
    if isinstance(v, bool):
        raise ConfigError("expected a number")
    try:
        return float(v)
    except (TypeError, ValueError) as e:
        raise ConfigError(f"not a number: {v!r}") from e


def _parse_opt_float(v):
    return None if v is None or v == "none" else _parse_float(v)


def _parse_floats(v) -> tuple:
    if isinstance(v, str):
        v = [s for s in v.split(",") if s.strip()]
    if not isinstance(v, (list, tuple)):
        raise ConfigError(f"expected a list of numbers, got {v!r}")
    return tuple(_parse_float(x) for x in v)


def _parse_str(v) -> str:
    if not isinstance(v, str):
        raise ConfigError(f"expected a string, got {v!r}")
    return v


def _parse_opt_str(v):
    return None if v is None else _parse_str(v)


def _parse_bool(v) -> bool:
    if isinstance(v, bool):
        return v
    if str(v).lower() in ("1", "true", "yes"):
        return True
    if str(v).lower() in ("0", "false", "no"):
        return False
    raise ConfigError(f"expected a boolean, got {v!r}")


_PROTOCOL = {
    "n": (_parse_int, 10_000), "delta": (_parse_float, 0.1), "alpha": (_parse_float, 0.05),
    "nu": (_parse_float, 0.05), "gamma": (_parse_float, 0.5), "omega_th": (_parse_opt_float, None),
    "delta1": (_parse_float, 0.01), "q_noise": (_parse_float, 0.0),
}
_CONSTANTS = {"c_eps": (_parse_float, 1.0), "c_mu_term": (_parse_float, 1.0),
              "c_additive": (_parse_float, 1.0)}
_BOUND = {"p_not_f": (_parse_float, 1.0), "eps_pa": (_parse_float, kr.DEFAULT_EPS_PA),
          "eps_prime": (_parse_opt_float, None)}

_SS = kr.SearchSpace()
SCHEMAS = {
    # the finite-size bound needs astronomically small delta, hence these defaults
    "keyrate": {**_PROTOCOL, "n": (_parse_int, 10**303), "delta": (_parse_float, 1e-300),
                **_CONSTANTS, **_BOUND},
    "simulate": {**_PROTOCOL, "trials": (_parse_int, 10), "postprocess": (_parse_bool, True),
                 "transcripts": (_parse_opt_str, None),
                 **_CONSTANTS, "eps_pa": (_parse_float, kr.DEFAULT_EPS_PA)},
    "optimize": {"target_security": (_parse_float, 1.0), "n": (_parse_int, 10**303),
                 "deltas": (_parse_floats, _SS.deltas), "alphas": (_parse_floats, _SS.alphas),
                 "nus": (_parse_floats, _SS.nus), "gammas": (_parse_floats, _SS.gammas),
                 "omega_fracs": (_parse_floats, _SS.omega_fracs),
                 "delta1s": (_parse_floats, _SS.delta1s), "sweeps": (_parse_int, _SS.sweeps),
                 **_CONSTANTS, **_BOUND},
    "verify": {"n": (_parse_int, 2), "strategies": (_parse_int, 6), "nu": (_parse_float, 0.1),
               "alpha": (_parse_float, 0.1), "perturb_povm": (_parse_float, 0.0),
               "game_file": (_parse_opt_str, None)},
    "entropy-table": {"alpha": (_parse_float, 0.05), "nu": (_parse_float, 0.05),
                      "gamma": (_parse_float, 0.5), "omega_th": (_parse_opt_float, None),
                      "points": (_parse_int, 50)},
}
COMMON = {"seed": (_parse_int, 0), "format": (_parse_str, "json")}


def resolve_config(command: str, file_values: dict, flag_values: dict) -> dict:
    """defaults < config file < flags, with every key type-checked and unknown keys rejected."""
    schema = {**SCHEMAS[command], **COMMON}
    unknown = sorted(set(file_values) - set(schema))
    if unknown:
        raise ConfigError(f"unknown config keys: {', '.join(unknown)}")
    cfg = {k: default for k, (_, default) in schema.items()}
    for src in (file_values, flag_values):
        for k, v in src.items():
            cfg[k] = schema[k][0](v)
    if cfg["format"] not in ("json", "csv"):
        raise ConfigError("format must be json or csv")
    return cfg


def _protocol_params(cfg: dict) -> ProtocolParams:
    return ProtocolParams(**{k: cfg[k] for k in _PROTOCOL}, rng_seed=cfg["seed"])


def _constants(cfg: dict) -> BoundConstants:
    return BoundConstants(cfg["c_eps"], cfg["c_mu_term"], cfg["c_additive"])


def _dumps(obj) -> str:
    return json.dumps(obj, indent=2, sort_keys=True, ensure_ascii=False, default=_json_default) + "\n"


def _json_default(o):
    if isinstance(o, np.generic):
        return o.item()
    if isinstance(o, (tuple, np.ndarray)):
        return list(o)
    raise TypeError(f"cannot serialise {type(o).__name__}")


# --------------------------------------------------------------------------- commands


def cmd_keyrate(cfg: dict) -> tuple[int, str]:
    rep = kr.finite_size_key_length(_protocol_params(cfg), _constants(cfg), p_not_f=cfg["p_not_f"],
                                    eps_prime=cfg["eps_prime"], eps_pa=cfg["eps_pa"])
    if cfg["format"] == "csv":
        return EXIT_OK, kr.reports_to_csv([rep])
    return EXIT_OK, _dumps(rep.to_dict())


def cmd_simulate(cfg: dict) -> tuple[int, str]:
    params = _protocol_params(cfg)
    if cfg["trials"] < 1:
        raise ConfigError("trials must be positive")
    trs = proto.run_trials(params, cfg["trials"], postprocess=cfg["postprocess"],
                           constants=_constants(cfg), eps_pa=cfg["eps_pa"])
    game = trs[0].game
    marg = proto.question_marginals(trs)
    accepted = [tr for tr in trs if not tr.aborted]
    win_p = winning_probability(game, honest_strategy(params.nu, params.alpha, params.q_noise))
    summary = {
        "params": params.to_dict(),
        "trials": len(trs),
        "t": trs[0].t,
        "abort_rate": 1 - len(accepted) / len(trs),
        "win_fraction_on_s": proto.win_fraction_on_s(trs),
        "win_probability": win_p,
        "abort_hoeffding_bound": proto.abort_hoeffding_bound(win_p, params),
        "question_marginals": {f"{qa},{qb}": float(marg[i, j])
                               for i, qa in enumerate(game.questions_a)
                               for j, qb in enumerate(game.questions_b)},
        "question_dist": {f"{qa},{qb}": float(game.question_dist[i, j])
                          for i, qa in enumerate(game.questions_a)
                          for j, qb in enumerate(game.questions_b)},
        "mean_relative_error": (float(np.mean([proto.relative_error_on_j(tr) for tr in accepted]))
                                if accepted else None),
        "ir_validated": sum(bool(tr.ir_validated) for tr in accepted),
        "final_key_bits": [int(tr.final_key.size) for tr in trs],
    }
    if cfg["transcripts"]:
        Path(cfg["transcripts"]).write_text("".join(tr.to_json() + "\n" for tr in trs),
                                            encoding="utf-8")
    return EXIT_OK, _dumps(summary)


def cmd_optimize(cfg: dict) -> tuple[int, str]:
    space = kr.SearchSpace(cfg["deltas"], cfg["alphas"], cfg["nus"], cfg["gammas"],
                           cfg["omega_fracs"], cfg["delta1s"], cfg["sweeps"])
    res = kr.optimize(cfg["target_security"], cfg["n"], space, _constants(cfg),
                      keep_all=cfg["format"] == "csv", p_not_f=cfg["p_not_f"],
                      eps_prime=cfg["eps_prime"], eps_pa=cfg["eps_pa"])
    code = EXIT_OK if res.feasible else EXIT_INFEASIBLE
    if cfg["format"] == "csv":
        return code, kr.reports_to_csv(res.reports)
    return code, _dumps({"feasible": res.feasible, "evaluated": res.evaluated,
                         "best": res.best.to_dict() if res.best else None})


def cmd_verify(cfg: dict) -> tuple[int, str]:
    if not 1 <= cfg["n"] <= parrep.MAX_ROUNDS:
        raise ConfigError(f"n must lie in [1, {parrep.MAX_ROUNDS}]")
    if cfg["strategies"] < 1:
        raise ConfigError("strategies must be positive")
    if cfg["game_file"]:
        game = game_from_text(Path(cfg["game_file"]).read_text(encoding="utf-8"))
    else:
        game = chsh3_anchored(cfg["nu"], cfg["alpha"])
    rep = parrep.verify_suite(game, cfg["n"], cfg["strategies"], cfg["seed"],
                              perturb=cfg["perturb_povm"])
    checked = ("povm_completeness", "norm_identity", "conditioned_state", "hat_completeness",
               "markov_cmi")
    rep["failed"] = [k for k in checked if rep[k] > VERIFY_TOL]
    rep["tolerance"] = VERIFY_TOL
    return (EXIT_VERIFY if rep["failed"] else EXIT_OK), _dumps(rep)


def entropy_table(alpha: float, nu: float, gamma: float, omega_th: float | None,
                  points: int) -> list[dict]:
    if points < 2:
        raise ConfigError("the grid needs at least two points")
    lo, hi = en.omega_window(alpha, nu)
    w_th = (lo + hi) / 2 if omega_th is None else omega_th
    tan = en.affine_min_tradeoff(alpha, nu, gamma, w_th)
    rows = []
    for w in map(float, np.linspace(lo, hi, points)):
        g = en.g_alpha_nu(w, alpha, nu)
        rows.append({"omega": float(w), "g": g, "F": en.capital_f(g),
                     "bound": en.single_round_bound(w, alpha, nu),
                     "tangent": float(tan(gamma * w))})
    return rows


def cmd_entropy_table(cfg: dict) -> tuple[int, str]:
    rows = entropy_table(cfg["alpha"], cfg["nu"], cfg["gamma"], cfg["omega_th"], cfg["points"])
    if cfg["format"] == "json":
        return EXIT_OK, _dumps(rows)
    buf = io.StringIO()
    w = csv.DictWriter(buf, fieldnames=["omega", "g", "F", "bound", "tangent"], lineterminator="\n")
    w.writeheader()
    for r in rows:
        w.writerow({k: repr(v) for k, v in r.items()})
    return EXIT_OK, buf.getvalue()


COMMANDS = {"keyrate": cmd_keyrate, "simulate": cmd_simulate, "optimize": cmd_optimize,
            "verify": cmd_verify, "entropy-table": cmd_entropy_table}


# --------------------------------------------------------------------------- argparse


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="pardiqkd", description=__doc__.splitlines()[0])
    sub = ap.add_subparsers(dest="command", required=True)
    for name, schema in SCHEMAS.items():
        sp = sub.add_parser(name)
        sp.add_argument("--config", type=Path)
        sp.add_argument("--out", type=Path)
        sp.add_argument("--seed")
        sp.add_argument("--format", choices=("json", "csv"))
        if name in ("keyrate", "optimize", "simulate"):
            sp.add_argument("--constants", help="c_eps,c_mu_term,c_additive")
        for key in schema:
            flag = "--" + key.replace("_", "-")
            if flag not in ("--seed", "--format"):
                sp.add_argument(flag, dest=key)
    return ap


def main(argv=None) -> int:
    ap = build_parser()
    try:
        args = ap.parse_args(argv)
    except SystemExit as e:
        return EXIT_INPUT if e.code else EXIT_OK
    try:
        file_values = {}
        if args.config is not None:
            file_values = json.loads(args.config.read_text(encoding="utf-8"))
            if not isinstance(file_values, dict):
                raise ConfigError("config must be a flat JSON object")
        flags = {k: v for k, v in vars(args).items()
                 if k not in ("command", "config", "out", "constants") and v is not None}
        if getattr(args, "constants", None):
            parts = args.constants.split(",")
            if len(parts) != 3:
                raise ConfigError("--constants takes three comma-separated numbers")
            flags.update(zip(("c_eps", "c_mu_term", "c_additive"), parts))
        cfg = resolve_config(args.command, file_values, flags)
        code, text = COMMANDS[args.command](cfg)
    except kr.InfeasibleError as e:
        print(f"infeasible: {e}", file=sys.stderr)
        return EXIT_INFEASIBLE
    except (ConfigError, ParamError, BoundError, GameError, QuantumError, parrep.ParrepError,
            json.JSONDecodeError, OSError) as e:
        print(f"invalid input: {e}", file=sys.stderr)
        return EXIT_INPUT
    if args.out is not None:
        args.out.write_text(text, encoding="utf-8")
    else:
        sys.stdout.write(text)
    return code


if __name__ == "__main__":
    sys.exit(main())
