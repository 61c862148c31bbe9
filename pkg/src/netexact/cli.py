"""Command-line interface: ``netexact {test,simulate,focal,oracle}``.

Settings are resolved in order: command-line flags, then keys of the JSON file
given by ``--config``, then built-in defaults. Every report embeds the
resolved settings. Failures print a JSON error document and exit with the
status of the error class (2 config, 3 data, 4 degenerate, 5 support too large).
"""

from __future__ import annotations

import argparse
import csv
import json
import math
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .design import DEFAULT_SUPPORT_CAP, parse_design
from .engine import exact_test, resolve_seed, run_test
from .exceptions import ConfigError, DataError, NetExactError
from .focal import resolve_selector, select_focal
from .hypotheses import parse_hypothesis
from .netgraph import NetworkPair, from_edge_list, read_edge_list
from .simlab import provenance_json, rows_to_csv, run_grid
from .stats import OutcomeData, parse_statistic

DEFAULTS = {
    "edges": None,
    "edges2": None,
    "nodes": None,
    "hypothesis": "no-spillovers",
    "design": "complete",
    "statistic": "score",
    "selector": "greedy",
    "draws": 1000,
    "seed": 0,
    "alpha": 0.05,
    "threads": 1,
    "focal_file": None,
    "degenerate": None,
    "add_one": False,
    "cap": DEFAULT_SUPPORT_CAP,
    "out": None,
}
ORACLE_DRAWS = 50000


# ---------------------------------------------------------------------------
# inputs


class NodeTable:
    """Rows of ``id,treatment,outcome[,cluster]``; ``NA`` marks a missing outcome."""

    def __init__(self, ids, treatment, outcome, cluster=None):
        self.ids = list(ids)
        self.treatment = np.asarray(treatment, dtype=np.int8)
        self.outcome = np.asarray(outcome, dtype=np.float64)
        self.cluster = None if cluster is None else np.asarray(cluster)
        self.index = {label: i for i, label in enumerate(self.ids)}

    @property
    def n(self) -> int:
        return len(self.ids)

    @classmethod
    def read(cls, path) -> "NodeTable":
        with open(path, newline="", encoding="utf-8") as fh:
            reader = csv.DictReader(fh)
            fields = [f.strip() for f in (reader.fieldnames or [])]
            reader.fieldnames = fields
            for col in ("id", "treatment", "outcome"):
                if col not in fields:
                    raise DataError(f"{path}: node table lacks column {col!r}")
            has_cluster = "cluster" in fields
            ids, w, y, c = [], [], [], []
            for lineno, row in enumerate(reader, start=2):
                label = (row["id"] or "").strip()
                if not label:
                    raise DataError(f"{path}: line {lineno}: empty id")
                t = (row["treatment"] or "").strip()
                if t not in ("0", "1"):
                    raise DataError(f"{path}: line {lineno}: treatment must be 0 or 1, got {t!r}")
                raw = (row["outcome"] or "").strip()
                if raw.upper() == "NA" or raw == "":
                    val = math.nan
                else:
                    try:
                        val = float(raw)
                    except ValueError:
                        raise DataError(f"{path}: line {lineno}: bad outcome {raw!r}") from None
                    if not math.isfinite(val):
                        raise DataError(f"{path}: line {lineno}: outcome must be finite")
                ids.append(label)
                w.append(int(t))
                y.append(val)
                if has_cluster:
                    c.append((row["cluster"] or "").strip())
        if len(set(ids)) != len(ids):
            raise DataError(f"{path}: duplicate unit ids")
        return cls(ids, w, y, c if has_cluster else None)


def _read_edges(path, table: NodeTable | None):
    if path is None:
        raise ConfigError("--edges is required")
    if table is None:
        return read_edge_list(path)
    with open(path, encoding="utf-8") as fh:
        return from_edge_list(fh, id_map=table.index, n=table.n)


def _load_nets(cfg, table):
    g1 = _read_edges(cfg["edges"], table)
    if not cfg.get("edges2"):
        return g1
    g2 = _read_edges(cfg["edges2"], table)
    if g2.n != g1.n:  # integer ids without a node table: pad to a common unit set
        n = max(g1.n, g2.n)
        g1, g2 = (read_edge_list(cfg[k], n=n) for k in ("edges", "edges2"))
    return NetworkPair(g1, g2)


def _read_focal_file(path, table: NodeTable | None) -> np.ndarray:
    out = []
    with open(path, encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, start=1):
            tok = raw.strip()
            if not tok or tok.startswith("#"):
                continue
            if table is not None:
                if tok not in table.index:
                    raise DataError(f"{path}: line {lineno}: unknown unit id {tok!r}")
                out.append(table.index[tok])
            else:
                try:
                    out.append(int(tok))
                except ValueError:
                    raise DataError(f"{path}: line {lineno}: bad unit id {tok!r}") from None
    return np.asarray(sorted(set(out)), dtype=np.int64)


def _labels(units, table: NodeTable | None) -> list[str]:
    return [table.ids[i] if table is not None else str(int(i)) for i in units]


# ---------------------------------------------------------------------------
# configuration


def resolve_config(args: argparse.Namespace, keys, defaults=None) -> dict:
    """Flags override config-file keys, which override defaults."""
    defaults = dict(DEFAULTS, **(defaults or {}))
    file_cfg = {}
    if getattr(args, "config", None):
        try:
            file_cfg = json.loads(Path(args.config).read_text(encoding="utf-8"))
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError(f"cannot read config {args.config}: {exc}") from None
        if not isinstance(file_cfg, dict):
            raise ConfigError("config file must hold a JSON object")
        file_cfg = {k.replace("-", "_"): v for k, v in file_cfg.items()}
    cfg = {}
    for k in keys:
        flag = getattr(args, k, None)
        if flag is not None:
            cfg[k] = flag
        elif k in file_cfg:
            cfg[k] = file_cfg[k]
        else:
            cfg[k] = defaults.get(k)
    return cfg


def _stat_string(cfg) -> str:
    stat = cfg["statistic"]
    if cfg.get("degenerate"):
        stat = f"{parse_statistic(stat).kind}:degenerate={cfg['degenerate']}"
    return stat


def _emit(text: str, out) -> None:
    if out:
        Path(out).write_text(text, encoding="utf-8")
    else:
        sys.stdout.write(text)


def _setup(cfg):
    table = NodeTable.read(cfg["nodes"]) if cfg.get("nodes") else None
    if table is None:
        raise ConfigError("--nodes is required")
    nets = _load_nets(cfg, table)
    h = parse_hypothesis(cfg["hypothesis"])
    stat = parse_statistic(_stat_string(cfg))
    seed = resolve_seed(cfg["seed"])
    cfg["seed"] = seed
    if cfg.get("focal_file"):
        focal = _read_focal_file(cfg["focal_file"], table)
    else:
        selector = resolve_selector(cfg["selector"], h)
        cfg["selector"] = selector
        focal = select_focal(selector, nets, seed=seed, eligible=~np.isnan(table.outcome))
    OutcomeData(table.outcome).require(focal)
    design = parse_design(cfg["design"], nets.n, table.cluster)
    return table, nets, h, stat, design, focal


# ---------------------------------------------------------------------------
# subcommands

TEST_KEYS = ("edges", "edges2", "nodes", "hypothesis", "design", "statistic", "selector", "draws", "seed", "alpha",
             "threads", "focal_file", "degenerate", "add_one", "out")


def cmd_test(args) -> int:
    cfg = resolve_config(args, TEST_KEYS)
    table, nets, h, stat, design, focal = _setup(cfg)
    res = run_test(nets, OutcomeData(table.outcome), table.treatment, design, h, focal, stat, int(cfg["draws"]),
                   cfg["seed"], add_one=bool(cfg["add_one"]), threads=int(cfg["threads"]))
    report = {
        "result": res.to_dict(),
        "reject": bool(res.p_abs <= float(cfg["alpha"])),
        "n_focal": int(focal.size),
        "config": cfg,
        "version": __version__,
    }
    if stat.kind == "bond":
        report["note"] = "bond statistic: valid only for the sharp no-effects null"
    _emit(json.dumps(report, sort_keys=True, indent=2) + "\n", cfg["out"])
    print(res.summary(), file=sys.stderr)
    return 0


ORACLE_KEYS = TEST_KEYS + ("cap",)


def cmd_oracle(args) -> int:
    cfg = resolve_config(args, ORACLE_KEYS, {"draws": ORACLE_DRAWS})
    table, nets, h, stat, design, focal = _setup(cfg)
    y = OutcomeData(table.outcome)
    exact = exact_test(nets, y, table.treatment, design, h, focal, stat, cap=int(cfg["cap"]))
    report = {"exact": exact.to_dict(), "support_size": exact.b_draws, "n_focal": int(focal.size), "config": cfg,
              "version": __version__}
    if exact.b_draws > 1:
        mc = run_test(nets, y, table.treatment, design, h, focal, stat, int(cfg["draws"]), cfg["seed"],
                      threads=int(cfg["threads"]))
        report["monte_carlo"] = mc.to_dict()
        report["abs_difference"] = abs(exact.p_abs - mc.p_abs)
    else:
        report["monte_carlo"] = None
    _emit(json.dumps(report, sort_keys=True, indent=2) + "\n", cfg["out"])
    return 0


FOCAL_KEYS = ("edges", "edges2", "nodes", "hypothesis", "selector", "seed", "out")


def cmd_focal(args) -> int:
    cfg = resolve_config(args, FOCAL_KEYS)
    table = NodeTable.read(cfg["nodes"]) if cfg.get("nodes") else None
    nets = _load_nets(cfg, table)
    h = parse_hypothesis(cfg["hypothesis"])
    seed = resolve_seed(cfg["seed"])
    selector = resolve_selector(cfg["selector"], h)
    eligible = None if table is None else ~np.isnan(table.outcome)
    focal = select_focal(selector, nets, seed=seed, eligible=eligible)
    header = f"# selector={selector} seed={seed} n_focal={focal.size}\n"
    _emit(header + "".join(f"{label}\n" for label in _labels(focal, table)), cfg["out"])
    return 0


SIM_KEYS = ("preset", "reps", "draws", "seed", "alpha", "threads", "out")


def cmd_simulate(args) -> int:
    grid = {}
    if args.config:
        try:
            grid = json.loads(Path(args.config).read_text(encoding="utf-8"))
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError(f"cannot read config {args.config}: {exc}") from None
    if args.preset:
        grid["preset"] = args.preset
    for flag, key in (("reps", "reps"), ("draws", "b_draws"), ("seed", "seed"), ("alpha", "alpha")):
        v = getattr(args, flag)
        if v is not None:
            grid[key] = v
    if not grid.get("preset") and not grid.get("setup"):
        raise ConfigError("simulate needs --preset or a --config with a 'setup' key")
    rows = run_grid(grid, n_jobs=int(args.threads or 1))
    text = rows_to_csv(rows)
    _emit(text, args.out)
    if args.out:
        Path(str(args.out) + ".provenance.json").write_text(provenance_json(grid) + "\n", encoding="utf-8")
    return 0


# ---------------------------------------------------------------------------
# parser


def _common(p, sim=False):
    p.add_argument("--config", help="JSON file with defaults for any flag")
    p.add_argument("--seed", type=int)
    p.add_argument("--out", help="output path (default: stdout)")
    p.add_argument("--threads", type=int)
    p.add_argument("--alpha", type=float)
    p.add_argument("--draws", type=int)
    if sim:
        return
    p.add_argument("--edges", help="edge list, one 'id id' pair per line")
    p.add_argument("--edges2", help="second (denser) edge list for the sparsification null")
    p.add_argument("--nodes", help="CSV node table id,treatment,outcome[,cluster]")
    p.add_argument("--hypothesis")
    p.add_argument("--design")
    p.add_argument("--statistic")
    p.add_argument("--selector")
    p.add_argument("--focal-file", dest="focal_file")
    p.add_argument("--degenerate", choices=("skip", "zero", "error"))
    p.add_argument("--add-one", dest="add_one", action="store_const", const=True)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="netexact", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"netexact {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)
    p = sub.add_parser("test", help="randomization test on observed data")
    _common(p)
    p.set_defaults(func=cmd_test)
    p = sub.add_parser("oracle", help="exact p-value by enumeration next to the Monte Carlo one")
    _common(p)
    p.add_argument("--cap", type=int, help=f"largest support to enumerate (default {DEFAULT_SUPPORT_CAP})")
    p.set_defaults(func=cmd_oracle)
    p = sub.add_parser("focal", help="write the selected focal units, one id per line")
    _common(p)
    p.set_defaults(func=cmd_focal)
    p = sub.add_parser("simulate", help="Monte Carlo size/power table as CSV")
    _common(p, sim=True)
    p.add_argument("--preset", help="setup-one, setup-two or appendix-a")
    p.add_argument("--reps", type=int)
    p.set_defaults(func=cmd_simulate)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except NetExactError as exc:
        doc = {"error": {"code": exc.code, "message": str(exc)}}
        sys.stdout.write(json.dumps(doc, sort_keys=True) + "\n")
        return exc.exit_status
    except OSError as exc:
        doc = {"error": {"code": "IO_ERROR", "message": str(exc)}}
        sys.stdout.write(json.dumps(doc, sort_keys=True) + "\n")
        return DataError.exit_status


if __name__ == "__main__":
    sys.exit(main())
