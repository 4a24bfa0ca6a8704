"""Batch front-end: TOML run configurations in, deterministic CSV out.

Config schema (all sections optional unless the command needs them):

    [run]       scenario, n_list, evaluator, n, n_max, output_dir, seed
    [params]    mu_lo, mu_hi, sigma_lo, sigma_hi
    [weights]   generator, q, alpha, table
    [sequence]  generator, drift_scale, table
    [phi]       name, parameters
    [grid]      L, nx, cfl, T

Unknown sections or keys are hard errors.  Numbers in CSV artifacts are
serialized with 17 significant digits so doubles round-trip losslessly.

Exit codes: 0 success, 2 config error, 3 numeric failure, 4 capacity error.
"""

from __future__ import annotations

import argparse
import os
import sys
import time
from dataclasses import dataclass, replace
from pathlib import Path

try:
    import tomllib  # Python >= 3.11
except ModuleNotFoundError:  # pragma: no cover
    import tomli as tomllib

from . import __version__
from .cltlab import (
    EvaluatorKind,
    PartialRunError,
    Scenario,
    get_scenario,
    run_convergence,
    scenario_catalog,
)
from .engine import (
    WeightSpec,
    expect_weighted_sum_grid,
    expect_weighted_sum_tree,
)
from .cltlab import weight_ratio
from .errors import CapacityError, ConfigError, GcltError, InvalidSpecError, NumericsError
from .gcore import GParams
from .gpde import GridSpec, solve_gheat
from .model import SequenceSpec, TestFunction, phi_by_name

OUTPUT_DIR_ENV = "GCLTLAB_OUT"

COMMANDS = ("pde", "expect", "clt", "check-weights", "scenario", "list-scenarios")

_SCHEMA = {
    "run": {"scenario", "n_list", "evaluator", "n", "n_max", "output_dir", "seed"},
    "params": {"mu_lo", "mu_hi", "sigma_lo", "sigma_hi"},
    "weights": {"generator", "q", "alpha", "table"},
    "sequence": {"generator", "drift_scale", "table"},
    "phi": {"name", "parameters"},
    "grid": {"L", "nx", "cfl", "T"},
}


@dataclass(frozen=True)
class RunConfig:
    command: str
    scenario_name: str | None = None
    params: GParams | None = None
    weights: WeightSpec | None = None
    sequence: SequenceSpec | None = None
    phi: TestFunction | None = None
    grid: GridSpec | None = None
    n_list: tuple[int, ...] | None = None
    evaluator: str | None = None
    n: int | None = None
    n_max: int | None = None
    output_dir: str | None = None
    seed: int = 0

    def __post_init__(self):
        if self.command not in COMMANDS:
            raise ConfigError(f"unknown command {self.command!r}")
        if self.n_list is not None:
            object.__setattr__(self, "n_list", tuple(int(n) for n in self.n_list))


def _reject_unknown(doc: dict) -> None:
    for section, body in doc.items():
        if section not in _SCHEMA:
            raise ConfigError(f"unknown config section [{section}]")
        if not isinstance(body, dict):
            raise ConfigError(f"section [{section}] must be a table")
        for key in body:
            if key not in _SCHEMA[section]:
                raise ConfigError(f"unknown key {key!r} in section [{section}]")


def parse_config(text: str, command: str) -> RunConfig:
    """Parse and fully validate a config document for the given command."""
    try:
        doc = tomllib.loads(text)
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError(f"config parse error: {exc}") from exc
    _reject_unknown(doc)

    run = doc.get("run", {})
    params = None
    if "params" in doc:
        p = doc["params"]
        try:
            params = GParams(
                float(p.get("mu_lo", 0.0)),
                float(p.get("mu_hi", 0.0)),
                float(p.get("sigma_lo", 1.0)),
                float(p.get("sigma_hi", 1.0)),
            )
        except InvalidSpecError as exc:
            raise ConfigError(f"[params] invalid: {exc}") from exc

    weights = None
    if "weights" in doc:
        w = doc["weights"]
        try:
            weights = WeightSpec(
                generator=w.get("generator", "ones"),
                q=float(w.get("q", 1.0)),
                alpha=float(w.get("alpha", 0.5)),
                table=tuple(w.get("table", ())),
            )
        except (InvalidSpecError, ValueError) as exc:
            raise ConfigError(f"[weights] invalid: {exc}") from exc

    sequence = None
    if "sequence" in doc:
        if params is None:
            raise ConfigError("[sequence] requires a [params] section for its base")
        s = doc["sequence"]
        try:
            table = tuple(GParams(*row) for row in s.get("table", ()))
            sequence = SequenceSpec(
                generator=s.get("generator", "constant"),
                base=params,
                drift_scale=float(s.get("drift_scale", 0.0)),
                table=table,
            )
        except (InvalidSpecError, TypeError, ValueError) as exc:
            raise ConfigError(f"[sequence] invalid: {exc}") from exc

    phi = None
    if "phi" in doc:
        f = doc["phi"]
        if "name" not in f:
            raise ConfigError("[phi] needs a name")
        try:
            phi = phi_by_name(f["name"], f.get("parameters", ()))
        except (InvalidSpecError, TypeError) as exc:
            raise ConfigError(f"[phi] invalid: {exc}") from exc

    grid = None
    if "grid" in doc:
        g = doc["grid"]
        try:
            grid = GridSpec(
                L=float(g.get("L", 8.0)),
                nx=int(g.get("nx", 800)),
                cfl=float(g.get("cfl", 0.9)),
                T=float(g.get("T", 1.0)),
            )
        except InvalidSpecError as exc:
            raise ConfigError(f"[grid] invalid: {exc}") from exc

    evaluator = run.get("evaluator")
    if evaluator is not None and evaluator not in ("tree", "grid"):
        raise ConfigError(f"evaluator must be 'tree' or 'grid', got {evaluator!r}")

    scenario_name = run.get("scenario")
    if scenario_name is not None:
        names = {scn.name for scn in scenario_catalog()}
        if scenario_name not in names:
            raise ConfigError(f"unknown scenario {scenario_name!r}")

    n_list = run.get("n_list")
    if n_list is not None:
        if not n_list or list(n_list) != sorted(n_list):
            raise ConfigError("n_list must be nonempty and ascending")
        n_list = tuple(int(n) for n in n_list)

    return RunConfig(
        command=command,
        scenario_name=scenario_name,
        params=params,
        weights=weights,
        sequence=sequence,
        phi=phi,
        grid=grid,
        n_list=n_list,
        evaluator=evaluator,
        n=int(run["n"]) if "n" in run else None,
        n_max=int(run["n_max"]) if "n_max" in run else None,
        output_dir=run.get("output_dir"),
        seed=int(run.get("seed", 0)),
    )


def _toml_scalar(v) -> str:
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, (int,)):
        return str(v)
    if isinstance(v, float):
        return format(v, ".17g") if v != int(v) or abs(v) > 1e15 else f"{v:.1f}"
    if isinstance(v, str):
        return '"' + v.replace("\\", "\\\\").replace('"', '\\"') + '"'
    if isinstance(v, (list, tuple)):
        return "[" + ", ".join(_toml_scalar(x) for x in v) + "]"
    raise ConfigError(f"cannot serialize {v!r}")


def serialize_config(cfg: RunConfig) -> str:
    """Emit cfg as a TOML document that parse_config inverts exactly."""
    sections: dict[str, dict] = {}
    run: dict = {"seed": cfg.seed}
    if cfg.scenario_name is not None:
        run["scenario"] = cfg.scenario_name
    if cfg.n_list is not None:
        run["n_list"] = list(cfg.n_list)
    if cfg.evaluator is not None:
        run["evaluator"] = cfg.evaluator
    if cfg.n is not None:
        run["n"] = cfg.n
    if cfg.n_max is not None:
        run["n_max"] = cfg.n_max
    if cfg.output_dir is not None:
        run["output_dir"] = cfg.output_dir
    sections["run"] = run
    if cfg.params is not None:
        p = cfg.params
        sections["params"] = {
            "mu_lo": p.mu_lo,
            "mu_hi": p.mu_hi,
            "sigma_lo": p.sigma_lo,
            "sigma_hi": p.sigma_hi,
        }
    if cfg.weights is not None:
        w = cfg.weights
        body = {"generator": w.generator.value, "q": w.q, "alpha": w.alpha}
        if w.table:
            body["table"] = list(w.table)
        sections["weights"] = body
    if cfg.sequence is not None:
        s = cfg.sequence
        body = {"generator": s.generator.value, "drift_scale": s.drift_scale}
        if s.table:
            body["table"] = [
                [p.mu_lo, p.mu_hi, p.sigma_lo, p.sigma_hi] for p in s.table
            ]
        sections["sequence"] = body
    if cfg.phi is not None:
        sections["phi"] = {"name": cfg.phi.name, "parameters": list(cfg.phi.parameters)}
    if cfg.grid is not None:
        g = cfg.grid
        sections["grid"] = {"L": g.L, "nx": g.nx, "cfl": g.cfl, "T": g.T}

    lines = []
    for name, body in sections.items():
        lines.append(f"[{name}]")
        for key, value in body.items():
            lines.append(f"{key} = {_toml_scalar(value)}")
        lines.append("")
    return "\n".join(lines)


def config_from_scenario(scn: Scenario, command: str = "scenario") -> RunConfig:
    """RunConfig mirroring a catalog scenario (its finite-set override, if
    any, stays addressable through the scenario name)."""
    return RunConfig(
        command=command,
        scenario_name=scn.name,
        params=scn.seq.base,
        weights=scn.weights,
        sequence=scn.seq,
        phi=scn.fn,
        grid=scn.grid,
        n_list=scn.n_list,
        evaluator=scn.evaluator.value,
    )


def _resolve_scenario(cfg: RunConfig) -> Scenario:
    """Scenario from the config: catalog entry with overrides, or fully inline."""
    if cfg.scenario_name is not None:
        scn = get_scenario(cfg.scenario_name)
        updates = {}
        if cfg.n_list is not None:
            updates["n_list"] = cfg.n_list
        if cfg.evaluator is not None:
            updates["evaluator"] = EvaluatorKind(cfg.evaluator)
        if cfg.grid is not None:
            updates["grid"] = cfg.grid
        if cfg.phi is not None:
            updates["fn"] = cfg.phi
        if cfg.weights is not None:
            updates["weights"] = cfg.weights
        if cfg.sequence is not None:
            updates["seq"] = cfg.sequence
            updates["variables"] = None
        return replace(scn, **updates) if updates else scn
    missing = [
        name
        for name, val in (
            ("[params]", cfg.params),
            ("[weights]", cfg.weights),
            ("[phi]", cfg.phi),
            ("n_list", cfg.n_list),
        )
        if val is None
    ]
    if missing:
        raise ConfigError(
            "inline scenario needs " + ", ".join(missing) + " (or a scenario name)"
        )
    seq = cfg.sequence or SequenceSpec("constant", cfg.params)
    return Scenario(
        name="inline",
        seq=seq,
        weights=cfg.weights,
        fn=cfg.phi,
        n_list=cfg.n_list,
        evaluator=EvaluatorKind(cfg.evaluator or "grid"),
        grid=cfg.grid or GridSpec(),
    )


def _fmt(x) -> str:
    if isinstance(x, int):
        return str(x)
    return format(float(x), ".17g")


def _write_csv(path: Path, header: str, rows) -> None:
    with open(path, "w", newline="") as fh:
        fh.write(header + "\n")
        for row in rows:
            fh.write(",".join(_fmt(v) for v in row) + "\n")


def _convergence_csv_rows(rows):
    return [
        (r.n, r.value_n, r.limit, r.abs_error, r.weight_ratio, r.sigma_dev, r.mu_dev)
        for r in rows
    ]

CONVERGENCE_HEADER = "n,value_n,limit,abs_error,weight_ratio,sigma_dev,mu_dev"


def execute(cfg: RunConfig, out_dir: str | Path | None = None) -> int:
    """Run the configured command, writing artifacts into the output dir."""
    if cfg.command == "list-scenarios":
        for scn in scenario_catalog():
            print(scn.name)
        return 0

    target = Path(
        out_dir
        or cfg.output_dir
        or os.environ.get(OUTPUT_DIR_ENV)
        or "gcltlab-out"
    )
    started = time.time()

    try:
        artifacts = _run_command(cfg, target)
    except PartialRunError as exc:
        target.mkdir(parents=True, exist_ok=True)
        _write_csv(
            target / "convergence.csv.partial",
            CONVERGENCE_HEADER,
            _convergence_csv_rows(exc.rows),
        )
        print(f"error: {exc}", file=sys.stderr)
        return 4 if isinstance(exc.cause, CapacityError) else 3
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except CapacityError as exc:
        print(f"capacity error: {exc}", file=sys.stderr)
        return 4
    except (NumericsError, InvalidSpecError) as exc:
        print(f"numeric failure: {exc}", file=sys.stderr)
        return 3

    meta = [
        f"gcltlab_version = {__version__}",
        f"command = {cfg.command}",
        f"wall_time_s = {time.time() - started:.3f}",
        f"artifacts = {', '.join(artifacts)}",
        "",
        "# resolved configuration",
        serialize_config(cfg),
    ]
    (target / "run.meta").write_text("\n".join(meta))
    return 0


def _run_command(cfg: RunConfig, target: Path) -> list[str]:
    if cfg.command in ("clt", "scenario"):
        scn = _resolve_scenario(cfg)
        rows = run_convergence(scn)
        target.mkdir(parents=True, exist_ok=True)
        _write_csv(
            target / "convergence.csv",
            CONVERGENCE_HEADER,
            _convergence_csv_rows(rows),
        )
        return ["convergence.csv"]

    if cfg.command == "check-weights":
        if cfg.weights is None:
            raise ConfigError("check-weights needs a [weights] section")
        n_max = cfg.n_max or 30
        rows = [(n, weight_ratio(cfg.weights, n)) for n in range(1, n_max + 1)]
        target.mkdir(parents=True, exist_ok=True)
        _write_csv(target / "weights.csv", "n,ratio", rows)
        return ["weights.csv"]

    if cfg.command == "pde":
        if cfg.params is None or cfg.phi is None:
            raise ConfigError("pde needs [params] and [phi] sections")
        grid = cfg.grid or GridSpec()
        vg = solve_gheat(cfg.params, cfg.phi, grid)
        t_final = float(vg.times[-1])
        rows = [(t_final, float(x), float(u)) for x, u in zip(vg.x, vg.final_slice())]
        target.mkdir(parents=True, exist_ok=True)
        _write_csv(target / "pde_slice.csv", "t,x,u", rows)
        return ["pde_slice.csv"]

    if cfg.command == "expect":
        if cfg.params is None or cfg.phi is None or cfg.weights is None or cfg.n is None:
            raise ConfigError("expect needs [params], [weights], [phi] and run.n")
        seq = cfg.sequence or SequenceSpec("constant", cfg.params)
        if (cfg.evaluator or "tree") == "tree":
            result = expect_weighted_sum_tree(seq, cfg.weights, cfg.phi, cfg.n)
        else:
            result = expect_weighted_sum_grid(
                seq, cfg.weights, cfg.phi, cfg.n, cfg.grid or GridSpec()
            )
        target.mkdir(parents=True, exist_ok=True)
        _write_csv(target / "expect.csv", "n,value", [(result.n, result.value)])
        return ["expect.csv"]

    raise ConfigError(f"unknown command {cfg.command!r}")


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="gcltlab",
        description="Sublinear-expectation CLT laboratory (batch runner).",
    )
    parser.add_argument("command", choices=COMMANDS)
    parser.add_argument("--config", type=Path, help="TOML run configuration")
    parser.add_argument("--out", type=Path, help="output directory")
    parser.add_argument("--seed", type=int, help="randomization seed override")
    args = parser.parse_args(argv)

    if args.command == "list-scenarios" and args.config is None:
        return execute(RunConfig(command="list-scenarios"))

    if args.config is None:
        print("config error: --config is required for this command", file=sys.stderr)
        return 2
    try:
        text = args.config.read_text()
    except OSError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    try:
        cfg = parse_config(text, args.command)
        if args.seed is not None:
            cfg = replace(cfg, seed=args.seed)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    return execute(cfg, out_dir=args.out)


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
