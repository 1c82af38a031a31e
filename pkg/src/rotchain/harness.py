"""Command-line harness: configs, seeded trial loops, CSV/JSONL outputs.

Subcommands::

    rotchain verify-state --state '[[0.7071,0],[0,0],[0,0],[0.7071,0]]'
    rotchain measure --observable '{"kind": "twisted", "theta": 1.1, "phi": 0.3}'
    rotchain consumption --n 1 2 3 4 --binary-depth 3 7
    rotchain vaidman-compare --trials 20000

Every trial draws from its own generator seeded by ``(seed, trial)``, so
results do not depend on how trials are scheduled.
"""
from __future__ import annotations

import argparse
import csv
import hashlib
import io
import json
import math
import sys
import time
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from .chain import DEFAULT_CAP
from .program import RotationProgram
from .protocols import (MeasurementScheme, ObservableSpec, run_scheme, truncated_vaidman,
                        vaidman_success_probability)
from .statevector import StateVector, state_from_json
from .synthesis import (CartanParams, binarize, cartan_program, multi_qubit_verification_program,
                        program_concat_spec)
from .tree import (ConcatSpec, closed_form_c, exact_binary_expectation, initial_channels,
                   monte_carlo_consumption)

COMMANDS = ("verify-state", "measure", "consumption", "vaidman-compare")
CONSUMPTION_HEADER = ("n", "D", "closed_form", "mc_mean", "ci99", "c_init")
OUTCOME_HEADER = ("label", "count", "born_expected")
VAIDMAN_HEADER = ("scheme", "depth", "success_prob", "mc_success", "ebits")
EXIT_OK, EXIT_CONFIG, EXIT_EXHAUSTED = 0, 2, 3

TRANSCRIPT_SCHEMA = {
    "$schema": "https://json-schema.org/draft/2020-12/schema",
    "type": "object",
    "required": ["trial", "party", "node", "step", "channel_id", "outcome", "action"],
    "properties": {
        "trial": {"type": "integer", "minimum": 0},
        "party": {"enum": ["A", "B"]},
        "node": {"type": "string"},
        "step": {"type": "integer", "minimum": 0},
        "channel_id": {"type": ["string", "null"]},
        "outcome": {"anyOf": [{"type": "null"}, {"type": "string"},
                              {"type": "array", "items": {"enum": [0, 1]}}]},
        "action": {"enum": ["send", "receive", "continue", "terminate", "exhausted",
                            "measure", "early", "local"]},
        "qubits": {"type": "array", "items": {"type": "integer"}},
        "clifford_fix": {"type": "boolean"},
    },
    "additionalProperties": False,
}


class ConfigError(ValueError):
    """Invalid configuration; the message starts with the offending field path."""


def _fmt(x) -> str:
    if isinstance(x, str):
        return x
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    x = round(float(x), 6)
    if x.is_integer():
        return str(int(x))
    return f"{x:.6f}"


# -- configuration -------------------------------------------------------------------

@dataclass
class ExperimentConfig:
    command: str
    trials: int = 1000
    seed: int = 0
    mode: str = "continuous"
    binary_depth: tuple = ()
    cap: int = DEFAULT_CAP
    teleport: str = "sampled"
    out_dir: str | None = None
    observable: dict | None = None
    program: dict | None = None
    state: object = None
    input_state: object = None
    bipartition: tuple | None = None
    n: tuple = (1, 2, 3, 4, 5, 6, 7, 8)
    width: int = 1
    vaidman_depths: tuple = (1, 2, 3, 4)
    max_transcripts: int = 100

    def validate(self) -> "ExperimentConfig":
        def bad(path, msg):
            raise ConfigError(f"{path}: {msg}")

        if self.command not in COMMANDS:
            bad("command", f"must be one of {', '.join(COMMANDS)}")
        if not isinstance(self.trials, int) or self.trials < 1:
            bad("trials", "must be an integer >= 1")
        if not isinstance(self.seed, int) or self.seed < 0:
            bad("seed", "must be a non-negative integer")
        if self.mode not in ("continuous", "binary"):
            bad("mode", "must be 'continuous' or 'binary'")
        self.binary_depth = tuple(int(d) for d in self.binary_depth)
        if self.mode == "binary":
            if not self.binary_depth:
                bad("binary_depth", "required when mode is binary")
            if any(d < 1 for d in self.binary_depth):
                bad("binary_depth", "every depth must be >= 1")
            if self.command != "consumption" and len(self.binary_depth) != 1:
                bad("binary_depth", "give exactly one depth for this command")
        elif self.binary_depth:
            bad("binary_depth", "only meaningful with mode 'binary'")
        if self.cap < 2:
            bad("cap", "must be >= 2")
        if self.teleport not in ("exact", "sampled"):
            bad("teleport", "must be 'exact' or 'sampled'")
        self.n = tuple(int(k) for k in self.n)
        if not self.n or any(k < 1 for k in self.n):
            bad("n", "chain counts must be >= 1")
        if self.width < 1:
            bad("width", "must be >= 1")
        self.vaidman_depths = tuple(int(k) for k in self.vaidman_depths)
        if any(not 1 <= k <= 4 for k in self.vaidman_depths):
            bad("vaidman_depths", "each depth must lie in 1..4")
        if self.command == "verify-state" and self.state is None:
            bad("state", "verify-state needs a target state")
        if self.command == "measure" and self.observable is None and self.program is None:
            bad("observable", "measure needs an observable or a program")
        if self.observable is not None:
            try:
                ObservableSpec.from_json(self.observable)
            except (ValueError, TypeError) as exc:
                bad("observable", str(exc))
        if self.bipartition is not None:
            self.bipartition = tuple(int(v) for v in self.bipartition)
            if len(self.bipartition) != 2 or min(self.bipartition) < 1:
                bad("bipartition", "must be two positive qubit counts")
        if self.max_transcripts < 0:
            bad("max_transcripts", "must be >= 0")
        return self

    def to_json(self) -> str:
        d = asdict(self)
        for k, v in d.items():
            if isinstance(v, tuple):
                d[k] = list(v)
        return json.dumps(d, sort_keys=True)

    @classmethod
    def from_json(cls, text: str | dict) -> "ExperimentConfig":
        d = json.loads(text) if isinstance(text, str) else dict(text)
        unknown = set(d) - set(cls.__dataclass_fields__)
        if unknown:
            raise ConfigError(f"{sorted(unknown)[0]}: unknown field")
        if "command" not in d:
            raise ConfigError("command: missing")
        for k in ("binary_depth", "n", "vaidman_depths", "bipartition"):
            if d.get(k) is not None:
                d[k] = tuple(d[k]) if isinstance(d[k], (list, tuple)) else (d[k],)
        return cls(**d).validate()

    @property
    def digest(self) -> str:
        return hashlib.sha256(self.to_json().encode()).hexdigest()[:16]

    @property
    def depth(self) -> int | None:
        return self.binary_depth[0] if self.mode == "binary" else None


def _load_json_arg(text):
    if text is None:
        return None
    p = Path(text)
    if not text.lstrip().startswith(("{", "[")) and p.exists():
        text = p.read_text()
    try:
        return json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"json: {exc}") from None


def parse_config(source) -> ExperimentConfig:
    """From a JSON path or text, a dict, or parsed CLI arguments."""
    if isinstance(source, ExperimentConfig):
        return source.validate()
    if isinstance(source, dict):
        return ExperimentConfig.from_json(source)
    if isinstance(source, (str, Path)):
        return ExperimentConfig.from_json(_load_json_arg(str(source)))
    args = source
    d = {}
    if getattr(args, "config", None):
        d.update(_load_json_arg(args.config))
    d["command"] = args.command
    for key in ("trials", "seed", "cap", "teleport", "out_dir", "width", "max_transcripts"):
        if getattr(args, key, None) is not None:
            d[key] = getattr(args, key)
    if getattr(args, "binary_depth", None):
        d["binary_depth"] = args.binary_depth
        d.setdefault("mode", "binary")
    if getattr(args, "mode", None):
        d["mode"] = args.mode
    for key in ("observable", "program", "state", "input_state"):
        if getattr(args, key, None) is not None:
            d[key] = _load_json_arg(getattr(args, key))
    if getattr(args, "bipartition", None):
        d["bipartition"] = args.bipartition
    if getattr(args, "n", None):
        d["n"] = args.n
    if getattr(args, "depths", None):
        d["vaidman_depths"] = args.depths
    return ExperimentConfig.from_json(d)


# -- running -------------------------------------------------------------------------

@dataclass
class RunSummary:
    config_hash: str
    header: tuple
    rows: list
    histogram: dict = field(default_factory=dict)
    consumption: dict = field(default_factory=dict)
    failures: int = 0
    trials: int = 0
    wall_time: float = 0.0

    def csv_text(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(self.header)
        for row in self.rows:
            w.writerow([_fmt(x) for x in row])
        return buf.getvalue()

    def to_dict(self) -> dict:
        return {"config_hash": self.config_hash, "histogram": {str(k): v for k, v in
                                                                self.histogram.items()},
                "consumption": self.consumption, "failures": self.failures,
                "trials": self.trials, "wall_time": self.wall_time}


def trial_rng(seed: int, trial: int) -> np.random.Generator:
    return np.random.default_rng([seed, trial])


def _ledger_check(run) -> None:
    """The ebits reported for a trial are the channels both transcripts touched."""
    used = {r["channel_id"] for t in run.transcripts for r in t if r.get("channel_id")}
    channels = run.registry.consumed()
    consumed = {ch.id for ch in channels}
    if used != consumed or run.ebits != sum(ch.width for ch in channels):
        raise RuntimeError("consumption does not match the teleportation ledger")


def _state(data, path: str) -> StateVector:
    try:
        return state_from_json(data)
    except (ValueError, TypeError, KeyError) as exc:
        raise ConfigError(f"{path}: {exc}") from None


def _scheme_for(cfg: ExperimentConfig) -> tuple[MeasurementScheme, StateVector]:
    if cfg.command == "verify-state":
        target = _state(cfg.state, "state")
        n = target.width
        if n < 2:
            raise ConfigError("state: needs at least two qubits")
        bip = cfg.bipartition or (n // 2, n - n // 2)
        if sum(bip) != n:
            raise ConfigError("bipartition: does not add up to the state width")
        obs = ObservableSpec("state_verify", {"target": target.amps, "bipartition": bip})
        scheme = MeasurementScheme(multi_qubit_verification_program(target, bip), obs)
        inp = target if cfg.input_state is None else _state(cfg.input_state, "input_state")
    else:
        if cfg.observable is not None:
            scheme = ObservableSpec.from_json(cfg.observable).build()
        else:
            try:
                scheme = MeasurementScheme(RotationProgram.from_json(cfg.program))
            except (ValueError, TypeError, KeyError) as exc:
                raise ConfigError(f"program: {exc}") from None
        inp = StateVector.zero(scheme.n) if cfg.state is None else _state(cfg.state, "state")
    if inp.width != scheme.n:
        raise ConfigError(f"state: has {inp.width} qubits, the scheme needs {scheme.n}")
    if cfg.depth is not None:
        scheme = MeasurementScheme(binarize(scheme.program, cfg.depth), scheme.observable)
    return scheme, inp


def _run_scheme_trials(cfg: ExperimentConfig):
    scheme, inp = _scheme_for(cfg)
    hist: dict = {}
    ebits = []
    failures = 0
    lines = []
    for t in range(cfg.trials):
        run = run_scheme(scheme, inp, trial_rng(cfg.seed, t), mode=cfg.teleport, cap=cfg.cap)
        _ledger_check(run)
        if t < cfg.max_transcripts:
            for tr in run.transcripts:
                lines += [json.dumps({"trial": t, **r}, sort_keys=True) for r in tr]
        if run.exhausted:
            failures += 1
            continue
        hist[run.label] = hist.get(run.label, 0) + 1
        ebits.append(run.ebits)
    born = scheme.program.born_probabilities(inp.amps)
    names = {0: "yes", 1: "no"} if cfg.command == "verify-state" else {}
    labels = sorted(set(born) | set(hist), key=str)
    done = cfg.trials - failures
    rows = [(names.get(lab, str(lab)), hist.get(lab, 0), born.get(lab, 0.0) * done)
            for lab in labels]
    eb = np.asarray(ebits, dtype=float)
    cons = {}
    if eb.size:
        var = float(eb.var(ddof=1)) if eb.size > 1 else 0.0
        cons = {"mean_ebits": float(eb.mean()), "ci99": 2.5758 * math.sqrt(var / eb.size),
                "min": float(eb.min()), "max": float(eb.max())}
    hist = {names.get(k, k): v for k, v in hist.items()}
    return OUTCOME_HEADER, rows, hist, cons, failures, lines


def _consumption_rows(cfg: ExperimentConfig):
    depths = cfg.binary_depth if cfg.mode == "binary" else (None,)
    rows = []
    i = 0
    for depth in depths:
        for n in cfg.n:
            spec = ConcatSpec.uniform(n, cfg.width, depth)
            if depth is None:
                exact = closed_form_c(n)
                c_init = "inf"
            else:
                exact = exact_binary_expectation(n, depth)
                c_init = initial_channels(n, depth)
            st = monte_carlo_consumption(spec, cfg.trials, np.random.default_rng([cfg.seed, i]))
            rows.append((n, "inf" if depth is None else depth, exact, st.mean_channels,
                         st.ci99, c_init))
            i += 1
    return CONSUMPTION_HEADER, rows


def _vaidman_rows(cfg: ExperimentConfig):
    if cfg.observable is not None:
        obs = ObservableSpec.from_json(cfg.observable)
        if obs.kind != "cartan":
            raise ConfigError("observable: vaidman-compare takes a cartan observable")
        params = obs.cartan_params()
    else:
        params = CartanParams.random(np.random.default_rng([cfg.seed, 1 << 20]))
    prog = cartan_program(params)
    if cfg.depth is not None:
        prog = binarize(prog, cfg.depth)
    chain = monte_carlo_consumption(program_concat_spec(prog), cfg.trials,
                                    np.random.default_rng([cfg.seed, 1 << 21]))
    rows = [("rotation-chain", "inf" if cfg.depth is None else cfg.depth, 1.0, 1.0,
             chain.mean_ebits)]
    u = params.unitary()
    for depth in cfg.vaidman_depths:
        wins = 0
        ebits = 0
        for t in range(cfg.trials):
            res = truncated_vaidman(u, 2, depth, trial_rng(cfg.seed, t))
            wins += res.success
            ebits = res.ebits
        rows.append(("vaidman", depth, vaidman_success_probability(2, depth),
                     wins / cfg.trials, ebits))
    return VAIDMAN_HEADER, rows


def run_experiment(cfg: ExperimentConfig) -> tuple[RunSummary, list]:
    """Run ``cfg``; returns the summary and transcript JSONL lines."""
    cfg.validate()
    t0 = time.perf_counter()
    hist, cons, failures, lines = {}, {}, 0, []
    if cfg.command in ("verify-state", "measure"):
        header, rows, hist, cons, failures, lines = _run_scheme_trials(cfg)
    elif cfg.command == "consumption":
        header, rows = _consumption_rows(cfg)
    else:
        header, rows = _vaidman_rows(cfg)
    summary = RunSummary(cfg.digest, header, rows, hist, cons, failures, cfg.trials,
                         time.perf_counter() - t0)
    return summary, lines


def emit_outputs(summary: RunSummary, transcripts: list, out_dir) -> dict:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    paths = {"csv": out / "summary.csv", "json": out / "summary.json"}
    paths["csv"].write_text(summary.csv_text())
    paths["json"].write_text(json.dumps(summary.to_dict(), indent=2, sort_keys=True) + "\n")
    if transcripts:
        paths["jsonl"] = out / "transcripts.jsonl"
        paths["jsonl"].write_text("".join(line + "\n" for line in transcripts))
    return paths


# -- CLI -----------------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="rotchain", description=__doc__.split("\n\n")[0])
    sub = ap.add_subparsers(dest="command", required=True)
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="JSON config file; flags override it")
    common.add_argument("--trials", type=int)
    common.add_argument("--seed", type=int)
    common.add_argument("--mode", choices=("continuous", "binary"))
    common.add_argument("--binary-depth", type=int, nargs="+", dest="binary_depth")
    common.add_argument("--cap", type=int, help="safety cap on channels per chain")
    common.add_argument("--out-dir", dest="out_dir")
    common.add_argument("--program", help="rotation program JSON (text or path)")
    common.add_argument("--state", help="state JSON (text or path)")
    p = sub.add_parser("verify-state", parents=[common], help="verify a target state")
    p.add_argument("--input-state", dest="input_state", help="input if not the target")
    p.add_argument("--bipartition", type=int, nargs=2, metavar=("V", "W"))
    p.add_argument("--teleport", choices=("exact", "sampled"))
    p.add_argument("--max-transcripts", type=int, dest="max_transcripts")
    p = sub.add_parser("measure", parents=[common], help="measure an observable")
    p.add_argument("--observable", help="observable JSON (text or path)")
    p.add_argument("--teleport", choices=("exact", "sampled"))
    p.add_argument("--max-transcripts", type=int, dest="max_transcripts")
    p = sub.add_parser("consumption", parents=[common], help="expected vs sampled consumption")
    p.add_argument("--n", type=int, nargs="+", help="numbers of concatenated chains")
    p.add_argument("--width", type=int)
    p = sub.add_parser("vaidman-compare", parents=[common],
                       help="truncated Vaidman tree vs rotation chains on a two-qubit unitary")
    p.add_argument("--observable", help="cartan observable JSON")
    p.add_argument("--depths", type=int, nargs="+", help="truncation depths (1..4)")
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = parse_config(args)
        summary, lines = run_experiment(cfg)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    sys.stdout.write(summary.csv_text())
    if cfg.out_dir:
        emit_outputs(summary, lines, cfg.out_dir)
        (Path(cfg.out_dir) / "config.json").write_text(cfg.to_json() + "\n")
    if summary.failures * 2 > summary.trials:
        print(f"{summary.failures} of {summary.trials} trials hit the safety cap",
              file=sys.stderr)
        return EXIT_EXHAUSTED
    return EXIT_OK
