"""Command line interface: ``covdim {test,seq,simulate,power,kron}``.

Settings come from built-in defaults, then an optional UTF-8 JSON file given
with ``--config``, then command-line flags, each layer overriding the last.
Reports go to ``<out>.json`` (plus ``<out>.csv`` for tabular results) or, when
no output path is set, to stdout as JSON.

Exit codes: 0 success, 2 configuration error, 3 data error, 4 numerical error.
"""

from __future__ import annotations

import argparse
import enum
import json
import math
import re
import sys
from dataclasses import asdict, dataclass, fields
from pathlib import Path

from .dimtest import dim_test, sequential_dim
from .exceptions import (
    ConfigError,
    CovdimError,
    DegenerateVarianceError,
    NumericalError,
)

__all__ = ["Command", "RunConfig", "parse_config", "run", "main"]

EXIT_OK, EXIT_CONFIG, EXIT_DATA, EXIT_NUMERIC = 0, 2, 3, 4


class Command(str, enum.Enum):
    TEST = "test"
    SEQ = "seq"
    SIMULATE = "simulate"
    POWER = "power"
    KRON = "kron"


@dataclass(frozen=True)
class RunConfig:
    """Fully resolved settings for one run.

    ``p``, ``q``, ``reps``, ``w_grid``, ``noise``, ``n_bounds`` and ``scenario``
    drive ``simulate`` and ``power``; ``ranks`` and ``splits`` drive ``kron``.
    ``d0`` defaults to the scenario's null dimension for the simulation commands.
    """

    command: Command
    data_path: str | None = None
    d0: int | None = None
    alpha: float = 0.05
    seed: int = 0
    p: int = 400
    q: int = 100
    reps: int = 800
    w_grid: tuple[float, ...] = tuple(round(0.1 * k, 10) for k in range(11))
    noise: str = "normal"
    n_bounds: tuple[int, int] = (200, 600)
    ranks: tuple[int, ...] = (1, 3)
    splits: int = 1000
    center: bool | None = None
    out_path: str | None = None
    scenario: str = "b"
    d_max: int | None = None
    workers: int = 1

    def to_dict(self) -> dict:
        out = asdict(self)
        out["command"] = self.command.value
        out["w_grid"] = list(self.w_grid)
        out["n_bounds"] = list(self.n_bounds)
        out["ranks"] = list(self.ranks)
        return out


CONFIG_KEYS = tuple(f.name for f in fields(RunConfig))
DATA_COMMANDS = (Command.TEST, Command.SEQ, Command.KRON)
SCENARIO_D0 = {"a": 2, "b": 3}


class _Parser(argparse.ArgumentParser):
    """ArgumentParser that raises ConfigError instead of exiting."""

    def error(self, message):
        m = re.search(r"argument (?:--)?([\w-]+)", message)
        if m:
            key = m.group(1).replace("-", "_")
            key = {"data": "data_path", "out": "out_path"}.get(key, key)
        else:
            m = re.search(r"unrecognized arguments: (\S+)", message)
            key = m.group(1).lstrip("-").replace("-", "_") if m else "argv"
        raise ConfigError(key, message)


def _float_list(text: str) -> list[float]:
    return [float(t) for t in text.split(",") if t.strip()]


def _int_list(text: str) -> list[int]:
    return [int(t) for t in text.split(",") if t.strip()]


def _build_parser() -> argparse.ArgumentParser:
    common = _Parser(add_help=False, argument_default=argparse.SUPPRESS)
    common.add_argument("--config", help="JSON file with RunConfig fields")
    common.add_argument("--seed", type=int)
    common.add_argument("--alpha", type=float)
    common.add_argument("--out", dest="out_path", help="output path stem for <out>.json / <out>.csv")

    data = _Parser(add_help=False, argument_default=argparse.SUPPRESS)
    data.add_argument("--data", dest="data_path", help="directory of group_<id>.csv or an obs,row,col,value file")
    data.add_argument("--center", action=argparse.BooleanOptionalAction)

    sim = _Parser(add_help=False, argument_default=argparse.SUPPRESS)
    sim.add_argument("--scenario", choices=sorted(SCENARIO_D0))
    sim.add_argument("--d0", type=int)
    sim.add_argument("--p", type=int)
    sim.add_argument("--q", type=int)
    sim.add_argument("--w-grid", dest="w_grid", type=_float_list, help="comma separated, e.g. 0,0.5,1")
    sim.add_argument("--noise", choices=["normal", "gamma"])
    sim.add_argument("--n-bounds", dest="n_bounds", type=_int_list, help="lo,hi (inclusive)")

    parser = _Parser(prog="covdim", description=__doc__.splitlines()[0], argument_default=argparse.SUPPRESS)
    parser.add_argument("--config", help="JSON file with RunConfig fields")
    sub = parser.add_subparsers(dest="command", parser_class=_Parser)
    p_test = sub.add_parser("test", parents=[common, data], help="test dim = d0 against dim > d0")
    p_test.add_argument("--d0", type=int)
    p_seq = sub.add_parser("seq", parents=[common, data], help="sequential dimension estimate")
    p_seq.add_argument("--d-max", dest="d_max", type=int)
    p_simulate = sub.add_parser("simulate", parents=[common, sim], help="Monte-Carlo size and power")
    p_simulate.add_argument("--reps", type=int)
    p_simulate.add_argument("--workers", type=int)
    sub.add_parser("power", parents=[common, sim], help="theoretical power curve")
    p_kron = sub.add_parser("kron", parents=[common, data], help="Kronecker-sum train/test RSS experiment")
    p_kron.add_argument("--ranks", type=_int_list, help="comma separated, e.g. 1,3")
    p_kron.add_argument("--splits", type=int)
    return parser


def _read_config_file(path: str) -> dict:
    try:
        text = Path(path).read_text(encoding="utf-8")
    except (OSError, UnicodeDecodeError) as exc:
        raise ConfigError("config", f"cannot read {path}: {exc}") from None
    try:
        raw = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError("config", f"{path} is not valid JSON: {exc}") from None
    if not isinstance(raw, dict):
        raise ConfigError("config", f"{path} must hold a JSON object")
    for key in raw:
        if key not in CONFIG_KEYS:
            raise ConfigError(key, "unknown configuration key")
    return raw


def _is_int(v) -> bool:
    return isinstance(v, int) and not isinstance(v, bool)


def _is_real(v) -> bool:
    return (_is_int(v) or isinstance(v, float)) and math.isfinite(v)


def _require(ok: bool, key: str, message: str) -> None:
    if not ok:
        raise ConfigError(key, message)


def _validate(values: dict) -> RunConfig:
    v = dict(values)
    try:
        command = Command(v.get("command"))
    except ValueError:
        raise ConfigError("command", f"expected one of {[c.value for c in Command]}") from None
    v["command"] = command

    for key in ("p", "q", "reps", "splits", "workers", "seed"):
        if key in v:
            _require(_is_int(v[key]), key, "must be an integer")
    for key in ("d0", "d_max"):
        if v.get(key) is not None:
            _require(_is_int(v[key]) and v[key] >= 1, key, "must be an integer >= 1")
    if "alpha" in v:
        _require(_is_real(v["alpha"]) and 0.0 < v["alpha"] < 1.0, "alpha", "must lie in (0, 1)")
    if "seed" in v:
        _require(0 <= v["seed"] < 2**64, "seed", "must lie in [0, 2^64)")
    for key, lo in (("p", 2), ("q", 4), ("reps", 1), ("splits", 1), ("workers", 1)):
        if key in v:
            _require(v[key] >= lo, key, f"must be >= {lo}")
    if "noise" in v:
        _require(v["noise"] in ("normal", "gamma"), "noise", "must be 'normal' or 'gamma'")
    if "scenario" in v:
        _require(v["scenario"] in SCENARIO_D0, "scenario", "must be 'a' or 'b'")
    if "center" in v and v["center"] is not None:
        _require(isinstance(v["center"], bool), "center", "must be true or false")
    for key in ("data_path", "out_path"):
        if v.get(key) is not None:
            _require(isinstance(v[key], str) and v[key] != "", key, "must be a nonempty path")
    if "w_grid" in v:
        g = v["w_grid"]
        _require(isinstance(g, (list, tuple)) and len(g) > 0, "w_grid", "must be a nonempty list")
        _require(all(_is_real(w) and 0.0 <= w <= 1.0 for w in g), "w_grid", "values must lie in [0, 1]")
        v["w_grid"] = tuple(float(w) for w in g)
    if "n_bounds" in v:
        b = v["n_bounds"]
        _require(
            isinstance(b, (list, tuple)) and len(b) == 2 and all(_is_int(x) for x in b),
            "n_bounds",
            "must be two integers lo,hi",
        )
        _require(5 <= b[0] <= b[1], "n_bounds", "need 5 <= lo <= hi")
        v["n_bounds"] = (int(b[0]), int(b[1]))
    if "ranks" in v:
        r = v["ranks"]
        _require(isinstance(r, (list, tuple)) and len(r) > 0, "ranks", "must be a nonempty list")
        _require(all(_is_int(x) and x >= 1 for x in r), "ranks", "must be positive integers")
        v["ranks"] = tuple(int(x) for x in r)

    if command in DATA_COMMANDS:
        _require(v.get("data_path") is not None, "data_path", f"required for '{command.value}'")
    if command is Command.TEST:
        _require(v.get("d0") is not None, "d0", "required for 'test'")
    if command in (Command.SIMULATE, Command.POWER):
        scenario = v.get("scenario", RunConfig.scenario)
        if v.get("d0") is None:
            v["d0"] = SCENARIO_D0[scenario]
        if scenario == "b":
            _require(v.get("p", RunConfig.p) >= 7, "p", "scenario 'b' needs p >= 7")
    if v.get("center") is None:
        v["center"] = command is Command.KRON
    return RunConfig(**v)


def parse_config(argv: list[str]) -> RunConfig:
    """Resolve defaults < ``--config`` file < flags into a validated RunConfig."""
    args = {k: v for k, v in vars(_build_parser().parse_args(list(argv))).items() if v is not None}
    merged: dict = {}
    config_path = args.pop("config", None)
    if config_path is not None:
        merged.update(_read_config_file(config_path))
    merged.update(args)
    if merged.get("command") is None:
        raise ConfigError("command", "no command given")
    return _validate(merged)


def _load_groups(cfg: RunConfig):
    from .dataio import groups_from_observations, load_groups, load_matrix_observations

    path = Path(cfg.data_path)
    if path.is_dir():
        return load_groups(path, center=cfg.center)
    return groups_from_observations(load_matrix_observations(path), center=cfg.center)


def run(cfg: RunConfig):
    """Execute ``cfg`` and return the report object."""
    from .simulate import family, run_mc

    if cfg.command is Command.TEST:
        return dim_test(_load_groups(cfg), cfg.d0, cfg.alpha)
    if cfg.command is Command.SEQ:
        return sequential_dim(_load_groups(cfg), cfg.alpha, cfg.d_max)
    if cfg.command is Command.SIMULATE:
        fam = family(cfg.scenario, cfg.p, cfg.q, cfg.n_bounds, cfg.noise)
        return run_mc(fam, cfg.w_grid, cfg.reps, cfg.alpha, cfg.d0, cfg.seed, cfg.workers)
    if cfg.command is Command.POWER:
        from .power import power_curve

        fam = family(cfg.scenario, cfg.p, cfg.q, cfg.n_bounds, cfg.noise)
        return power_curve(fam, cfg.w_grid, cfg.alpha, cfg.seed)
    from .dataio import load_matrix_observations
    from .kron import rss_experiment

    observations = load_matrix_observations(cfg.data_path)
    return rss_experiment(observations, cfg.ranks, cfg.splits, cfg.seed, center=cfg.center)


def exit_code(exc: BaseException) -> int:
    if isinstance(exc, ConfigError):
        return EXIT_CONFIG
    if isinstance(exc, (DegenerateVarianceError, NumericalError)):
        return EXIT_NUMERIC
    return EXIT_DATA


def main(argv: list[str] | None = None) -> int:
    from .dataio import build_payload, dumps_payload, emit_report

    argv = sys.argv[1:] if argv is None else argv
    try:
        cfg = parse_config(argv)
        report = run(cfg)
        if cfg.out_path is None:
            sys.stdout.write(dumps_payload(build_payload(report, cfg.to_dict())))
        else:
            emit_report(report, cfg.out_path, cfg.to_dict())
    except SystemExit as exc:  # --help
        return int(exc.code or 0)
    except (CovdimError, OSError) as exc:
        print(f"covdim: error: {exc}", file=sys.stderr)
        return exit_code(exc)
    return EXIT_OK


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
