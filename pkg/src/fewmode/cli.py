"""Command-line sweeps over the experiment models, emitting CSV.

    fewmode mz --closed --sweep 0:6.2832:64 -o fringe.csv
    fewmode rto --sweep 0:6.2832:64 --shots 100000 --seed 7 -o correlation.csv
    fewmode bell --canonical
    fewmode table-one

Settings may also come from a flat ``key = value`` file passed with
``--config``; flags given on the command line win over file values.
"""
from __future__ import annotations

import argparse
import math
import os
import re
import sys
from dataclasses import dataclass, fields
from pathlib import Path
from typing import Callable, TextIO

import numpy as np

from . import analysis
from .experiments import (
    CAT_ALIASES,
    MZConfig,
    MeasurementRecord,
    RTOConfig,
    SlitConfig,
    correlation_table,
    default_detector,
    double_slit_intensity,
    double_slit_sample,
    fifty_fifty,
    mz_run,
    mz_sample,
    rto_joint,
    rto_sample,
    von_neumann_measure,
)
from .quantum_core import make_rng, sample_indices

OUTPUT_DIR_ENV = "FEWMODE_OUTPUT_DIR"
EXPERIMENTS = ("mz", "rto", "double-slit", "cat", "bell", "table-one")
PHASE_LIMIT = 4.0 * math.pi
SEED_MAX = 2**64 - 1

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_INVARIANT = 3
EXIT_IO = 4

COLUMNS = {
    "mz": ("phase_diff", "p_d1", "p_d2"),
    "rto": ("phase_diff", "p_corr", "p_anti", "E", "pA1", "pB1"),
    "bell": ("a", "a_prime", "b", "b_prime", "S", "lhv_max", "violation"),
    "double-slit": ("x", "intensity"),
    "cat": ("system", "detector", "p_joint", "p_detector_given_system"),
}


class ConfigError(ValueError):
    """Invalid configuration; ``field`` names the offending setting."""

    def __init__(self, field: str, message: str):
        super().__init__(f"{field}: {message}")
        self.field = field
        self.message = message


class InvariantError(RuntimeError):
    pass


@dataclass(frozen=True)
class RunConfig:
    experiment: str
    sweep: tuple[float, float, int] | None = None
    shots: int = 0
    seed: int = 0
    output: str | None = None
    record: str | None = None
    # mz
    configuration: str = "closed"
    front_fraction: float = 0.0
    phi1: float = 0.0
    phi2: float = 0.0
    # rto
    phi_a: float = 0.0
    phi_b: float = 0.0
    # bell
    canonical: bool = False
    a: float | None = None
    a_prime: float | None = None
    b: float | None = None
    b_prime: float | None = None
    # double-slit
    slits: str = "both"
    wavelength: float = 500e-9
    separation: float = 100e-6
    width: float = 20e-6
    distance: float = 1.0
    half_width: float = 30e-3
    bins: int = 600
    impacts: str | None = None

    def sweep_points(self) -> list[float]:
        """``steps`` evenly spaced points from start, excluding stop."""
        if self.sweep is None:
            return []
        start, stop, steps = self.sweep
        return [start + k * (stop - start) / steps for k in range(steps)]


# -- parsing --------------------------------------------------------------


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        m = re.match(r"argument (?:-\w/)?--?([\w-]+)", message)
        if m:
            field = m.group(1).replace("-", "_")
        elif "invalid choice" in message or "experiment" in message:
            field = "experiment"
        else:
            field = "arguments"
        raise ConfigError(field, message)


def _number(text: str) -> float:
    try:
        v = float(text)
    except (TypeError, ValueError):
        raise argparse.ArgumentTypeError(f"malformed number {text!r}") from None
    if not math.isfinite(v):
        raise argparse.ArgumentTypeError(f"non-finite number {text!r}")
    return v


def _phase(text: str) -> float:
    v = _number(text)
    if abs(v) > PHASE_LIMIT:
        raise argparse.ArgumentTypeError(f"phase {v} outside [-4π, 4π]")
    return v


def _integer(text: str) -> int:
    try:
        return int(text, 0)
    except (TypeError, ValueError):
        raise argparse.ArgumentTypeError(f"malformed integer {text!r}") from None


def _sweep(text: str) -> tuple[float, float, int]:
    parts = text.split(":")
    if len(parts) != 3:
        raise argparse.ArgumentTypeError(f"sweep must be start:stop:steps, got {text!r}")
    start, stop = _phase(parts[0]), _phase(parts[1])
    steps = _integer(parts[2])
    if steps < 1:
        raise argparse.ArgumentTypeError("sweep steps must be at least 1")
    if stop < start:
        raise argparse.ArgumentTypeError("sweep stop must not be below start")
    return start, stop, steps


def _bool(text: str) -> bool:
    t = str(text).strip().lower()
    if t in ("1", "true", "yes", "on"):
        return True
    if t in ("0", "false", "no", "off"):
        return False
    raise argparse.ArgumentTypeError(f"malformed boolean {text!r}")


class _Delayed(argparse.Action):
    def __call__(self, parser, namespace, values, option_string=None):
        namespace.configuration = "delayed"
        namespace.front_fraction = values


def build_parser() -> tuple[argparse.ArgumentParser, dict[str, argparse.ArgumentParser]]:
    common = _Parser(add_help=False)
    common.add_argument("--config", help="flat key = value settings file")
    common.add_argument("--sweep", type=_sweep, help="start:stop:steps in radians (stop excluded)")
    common.add_argument("--shots", type=_integer, default=0, help="Monte Carlo trials per point; 0 = analytic")
    common.add_argument("--seed", type=_integer, default=0, help="64-bit unsigned seed")
    common.add_argument("-o", "--output", help="CSV path (relative paths resolve against $%s)" % OUTPUT_DIR_ENV)
    common.add_argument("--record", help="measurement record path for sampled runs")

    parser = _Parser(prog="fewmode", description="Few-mode interferometry and entanglement experiments.")
    sub = parser.add_subparsers(dest="experiment", metavar="experiment")
    subs: dict[str, argparse.ArgumentParser] = {}

    p = subs["mz"] = sub.add_parser("mz", parents=[common], help="Mach-Zehnder interferometer")
    g = p.add_mutually_exclusive_group()
    g.add_argument("--open", dest="configuration", action="store_const", const="open")
    g.add_argument("--closed", dest="configuration", action="store_const", const="closed")
    g.add_argument("--delayed", dest="front_fraction", type=_number, action=_Delayed, metavar="R",
                   help="BS2 inserted while a front fraction R of the photon has passed")
    p.add_argument("--phi1", type=_phase, default=0.0)
    p.add_argument("--phi2", type=_phase, default=0.0)
    p.set_defaults(configuration="closed", front_fraction=0.0)

    p = subs["rto"] = sub.add_parser("rto", parents=[common], help="RTO bi-photon correlations")
    p.add_argument("--phi-a", type=_phase, default=0.0)
    p.add_argument("--phi-b", type=_phase, default=0.0)

    p = subs["bell"] = sub.add_parser("bell", parents=[common], help="CHSH test on the RTO correlator")
    p.add_argument("--canonical", action="store_true", help="a=0, a'=π/2, b=π/4, b'=3π/4")
    for name in ("a", "a-prime", "b", "b-prime"):
        p.add_argument(f"--{name}", type=_phase, default=None)

    p = subs["double-slit"] = sub.add_parser("double-slit", parents=[common], help="double-slit screen profile")
    p.add_argument("--slits", choices=("both", "slit1", "slit2"), default="both")
    p.add_argument("--wavelength", type=_number, default=500e-9)
    p.add_argument("--separation", type=_number, default=100e-6)
    p.add_argument("--width", type=_number, default=20e-6)
    p.add_argument("--distance", type=_number, default=1.0)
    p.add_argument("--half-width", type=_number, default=30e-3)
    p.add_argument("--bins", type=_integer, default=600)
    p.add_argument("--impacts", help="CSV path for sampled impact coordinates")

    subs["cat"] = sub.add_parser("cat", parents=[common], help="measurement as a table of correlations")
    subs["table-one"] = sub.add_parser("table-one", parents=[common], help="simple vs entangled superposition")
    return parser, subs


def read_config_file(path: str | Path) -> dict[str, str]:
    values: dict[str, str] = {}
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError("config", f"cannot read {path}: {exc.strerror}") from None
    for n, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError("config", f"line {n}: expected 'key = value'")
        key, value = (s.strip() for s in line.split("=", 1))
        if not key:
            raise ConfigError("config", f"line {n}: empty key")
        values[key.replace("-", "_")] = value
    return values


def _file_defaults(sub: argparse.ArgumentParser, values: dict[str, str]) -> dict[str, object]:
    actions = {a.dest: a for a in sub._actions if a.dest not in ("help", "config")}
    out: dict[str, object] = {}
    for key, raw in values.items():
        try:
            if key in ("open", "closed") and "configuration" in actions:
                if _bool(raw):
                    out["configuration"] = key
                continue
            if key == "delayed" and "configuration" in actions:
                out["configuration"] = "delayed"
                out["front_fraction"] = _number(raw)
                continue
            action = actions.get(key)
            if action is None:
                raise ConfigError(key, "unknown setting for this experiment")
            if isinstance(action, argparse._StoreTrueAction):
                out[key] = _bool(raw)
            elif action.const is not None and action.dest == "configuration":
                if raw not in ("open", "closed", "delayed"):
                    raise argparse.ArgumentTypeError(f"unknown configuration {raw!r}")
                out[key] = raw
            else:
                out[key] = action.type(raw) if action.type else raw
                if action.choices and out[key] not in action.choices:
                    raise argparse.ArgumentTypeError(f"{raw!r} not one of {sorted(action.choices)}")
        except argparse.ArgumentTypeError as exc:
            raise ConfigError(key, str(exc)) from None
    return out


def _peek_config(argv: list[str]) -> str | None:
    for i, tok in enumerate(argv):
        if tok == "--config" and i + 1 < len(argv):
            return argv[i + 1]
        if tok.startswith("--config="):
            return tok.split("=", 1)[1]
    return None


def parse_and_validate(argv: list[str] | None = None) -> RunConfig:
    """Parse flags (and an optional config file) into a validated :class:`RunConfig`."""
    argv = list(sys.argv[1:] if argv is None else argv)
    if argv[:1] in (["-h"], ["--help"]):
        build_parser()[0].parse_args(argv)
    file_values: dict[str, str] = {}
    cfg_path = _peek_config(argv)
    if cfg_path is not None:
        file_values = read_config_file(cfg_path)
    file_experiment = file_values.pop("experiment", None)
    if not argv or argv[0].startswith("-"):
        if file_experiment is None:
            raise ConfigError("experiment", f"choose one of {', '.join(EXPERIMENTS)}")
        argv = [file_experiment] + argv
    if argv[0] not in EXPERIMENTS:
        raise ConfigError("experiment", f"unknown experiment {argv[0]!r}")

    parser, subs = build_parser()
    if file_values:
        subs[argv[0]].set_defaults(**_file_defaults(subs[argv[0]], file_values))
    ns = vars(parser.parse_args(argv))
    ns.pop("config", None)
    known = {f.name for f in fields(RunConfig)}
    cfg = RunConfig(**{k: v for k, v in ns.items() if k in known})
    _validate(cfg)
    return cfg


def _validate(cfg: RunConfig) -> None:
    if cfg.shots < 0:
        raise ConfigError("shots", "must be non-negative")
    if not 0 <= cfg.seed <= SEED_MAX:
        raise ConfigError("seed", "must be a 64-bit unsigned integer")
    if cfg.experiment == "mz" and not 0.0 <= cfg.front_fraction <= 1.0:
        raise ConfigError("front_fraction", "delayed fraction must lie in [0, 1]")
    if cfg.experiment == "bell":
        given = [x is not None for x in (cfg.a, cfg.a_prime, cfg.b, cfg.b_prime)]
        if any(given) and cfg.canonical:
            raise ConfigError("canonical", "--canonical excludes explicit analyzer settings")
        if any(given) and not all(given):
            raise ConfigError("a", "give all four of --a, --a-prime, --b, --b-prime")
        if any(given) and cfg.sweep is not None:
            raise ConfigError("sweep", "a bell sweep builds its own settings")
    if cfg.experiment == "double-slit":
        try:
            _slit_config(cfg)
        except ValueError as exc:
            name = str(exc).split(" ", 1)[0]
            field = name if name in {f.name for f in fields(RunConfig)} else "geometry"
            raise ConfigError(field, str(exc)) from None
        if cfg.shots == 0 and cfg.impacts:
            raise ConfigError("impacts", "impacts need --shots > 0")
    if cfg.experiment in ("table-one",) and cfg.shots:
        raise ConfigError("shots", "table-one is analytic only")


def _slit_config(cfg: RunConfig) -> SlitConfig:
    return SlitConfig(
        wavelength=cfg.wavelength, separation=cfg.separation, width=cfg.width,
        distance=cfg.distance, slits=cfg.slits, half_width=cfg.half_width, bins=cfg.bins,
    )


# -- formatting -----------------------------------------------------------


def fmt(v: float) -> str:
    """Fixed 12-decimal rendering; negative zero prints unsigned."""
    s = f"{v:.12f}"
    return s[1:] if s.startswith("-") and float(s) == 0.0 else s


def fmt_sci(v: float) -> str:
    """12 significant digits in exponent form, for lengths and bin masses."""
    s = f"{v:.11e}"
    return s[1:] if s.startswith("-") and float(s) == 0.0 else s


def fmt_bool(v: bool) -> str:
    return "true" if v else "false"


def _check_sum(total: float, what: str) -> None:
    if abs(total - 1.0) > 1e-9:
        raise InvariantError(f"{what} sums to {total!r}, not 1")


def point_seed(seed: int, index: int) -> int:
    return seed ^ index


# -- experiment runners ---------------------------------------------------


@dataclass
class RunResult:
    columns: tuple[str, ...]
    rows: list[tuple[str, ...]]
    record: MeasurementRecord | None = None
    impacts: np.ndarray | None = None
    text: str | None = None


def _phase_diffs(cfg: RunConfig, base: float) -> list[float]:
    return cfg.sweep_points() if cfg.sweep is not None else [base]


def run_mz(cfg: RunConfig) -> RunResult:
    rows, record = [], MeasurementRecord() if cfg.shots else None
    for k, delta in enumerate(_phase_diffs(cfg, cfg.phi1 - cfg.phi2)):
        mc = MZConfig(cfg.phi2 + delta, cfg.phi2, cfg.configuration, cfg.front_fraction)
        if cfg.shots:
            s = point_seed(cfg.seed, k)
            _, stats = mz_sample(mc, cfg.shots, make_rng(s), seed=s, record=record)
        else:
            stats = mz_run(mc)
        _check_sum(stats.p_d1 + stats.p_d2, f"mz row {k}")
        rows.append((fmt(delta), fmt(stats.p_d1), fmt(stats.p_d2)))
    return RunResult(COLUMNS["mz"], rows, record)


def run_rto(cfg: RunConfig) -> RunResult:
    rows, record = [], MeasurementRecord() if cfg.shots else None
    for k, delta in enumerate(_phase_diffs(cfg, cfg.phi_b - cfg.phi_a)):
        rc = RTOConfig(cfg.phi_a, cfg.phi_a + delta)
        if cfg.shots:
            s = point_seed(cfg.seed, k)
            _, stats = rto_sample(rc, cfg.shots, make_rng(s), seed=s, record=record)
        else:
            stats = rto_joint(rc)
        _check_sum(stats.p_corr + stats.p_anti, f"rto row {k}")
        rows.append((
            fmt(delta), fmt(stats.p_corr), fmt(stats.p_anti),
            fmt(analysis.degree_of_correlation(stats)),
            fmt(stats.marginal_a["A1"]), fmt(stats.marginal_b["B1"]),
        ))
    return RunResult(COLUMNS["rto"], rows, record)


def _bell_settings(cfg: RunConfig) -> list[analysis.CHSHSettings]:
    if cfg.sweep is not None:
        return [analysis.settings_for_difference(d) for d in cfg.sweep_points()]
    if cfg.a is not None:
        return [analysis.CHSHSettings(cfg.a, cfg.a_prime, cfg.b, cfg.b_prime)]
    return [analysis.CANONICAL_SETTINGS]


def run_bell(cfg: RunConfig) -> RunResult:
    rows, record = [], MeasurementRecord() if cfg.shots else None
    for k, settings in enumerate(_bell_settings(cfg)):
        if cfg.shots:
            s = point_seed(cfg.seed, k)
            rng = make_rng(s)

            def correlator(pa, pb, rng=rng, s=s):
                _, stats = rto_sample(RTOConfig(pa, pb), cfg.shots, rng, seed=s, record=record)
                return analysis.degree_of_correlation(stats)

            stats = analysis.chsh(settings, correlator)
        else:
            stats = analysis.chsh(settings)
        if stats.S > analysis.TSIRELSON + 1e-9 and not cfg.shots:
            raise InvariantError(f"S = {stats.S} exceeds 2√2")
        lhv = analysis.lhv_max(settings)
        rows.append(tuple(fmt(x) for x in settings.as_tuple()) + (fmt(stats.S), str(lhv), fmt_bool(stats.S > lhv)))
    return RunResult(COLUMNS["bell"], rows, record)


def run_double_slit(cfg: RunConfig) -> RunResult:
    sc = _slit_config(cfg)
    prof = double_slit_intensity(sc)
    _check_sum(float(prof.mass.sum()), "double-slit profile")
    rows = [(fmt_sci(x), fmt_sci(m)) for x, m in zip(prof.centers, prof.mass)]
    record = impacts = None
    if cfg.shots:
        impacts, record = double_slit_sample(sc, cfg.shots, make_rng(cfg.seed), seed=cfg.seed)
    return RunResult(COLUMNS["double-slit"], rows, record, impacts)


def run_cat(cfg: RunConfig) -> RunResult:
    det = default_detector()
    joint = von_neumann_measure(fifty_fifty(), det)
    record = None
    if cfg.shots:
        record = MeasurementRecord()
        idx = sample_indices(joint, make_rng(cfg.seed), cfg.shots)
        record.extend(joint.basis.labels, idx, cfg.seed)
        counts = np.bincount(idx, minlength=joint.basis.dimension)
        freq = counts / cfg.shots
        left, right = joint.basis.split
        probs = freq.reshape(left.dimension, right.dimension)
        cells = []
        for i, a in enumerate(left.labels):
            pa = probs[i].sum()
            for j, b in enumerate(right.labels):
                cells.append((a, b, probs[i, j], probs[i, j] / pa if pa > 0 else None))
    else:
        ct = correlation_table(joint, aliases=CAT_ALIASES)
        cells = list(ct.rows(include_empty=True))
    _check_sum(sum(c[2] for c in cells), "cat joint table")
    rows = [
        (CAT_ALIASES.get(a, a), CAT_ALIASES.get(b, b), fmt(p), "" if c is None else fmt(c))
        for a, b, p, c in cells
    ]
    return RunResult(COLUMNS["cat"], rows, record)


PHASE_NAMES = ((0.0, "0"), (math.pi / 4, "π/4"), (math.pi / 2, "π/2"), (3 * math.pi / 4, "3π/4"), (math.pi, "π"))
TABLE_FOOTNOTE = (
    "* At π/4 and 3π/4 the computed values are cos²(Δ/2) = ½(1 ± cos Δ) = 85.36%/14.64%; "
    "the published table prints 71%/29% there, which is cos(π/4) ≈ 0.71 written as a percentage."
)


def pct(p: float) -> str:
    s = f"{100.0 * p:.2f}".rstrip("0").rstrip(".")
    return "0" if s in ("-0", "") else s


@dataclass(frozen=True)
class TableOneRow:
    phase: float
    name: str
    p1: float
    p2: float
    pA1: float
    pB1: float
    p_corr: float
    p_anti: float

    @property
    def discrepant(self) -> bool:
        return abs(self.p1 - 0.5) > 1e-9 and min(self.p1, self.p2) > 1e-9


def table_one_rows() -> list[TableOneRow]:
    rows = []
    for ph, name in PHASE_NAMES:
        simple = mz_run(MZConfig(ph, 0.0, "closed"))
        ent = rto_joint(RTOConfig(0.0, ph))
        rows.append(TableOneRow(ph, name, simple.p_d1, simple.p_d2, ent.marginal_a["A1"],
                                ent.marginal_b["B1"], ent.p_corr, ent.p_anti))
    return rows


def table_one() -> str:
    """Render the simple-vs-entangled comparison at five phase differences."""
    out = ["phase | simple superposition | each photon | correlation"]
    flagged = False
    for r in table_one_rows():
        if abs(r.pA1 - 0.5) < 1e-12 and abs(r.pB1 - 0.5) < 1e-12:
            each = "50-50 1 or 2"
        else:
            each = f"{pct(r.pA1)}% 1, {pct(1 - r.pA1)}% 2"
        mark = " *" if r.discrepant else ""
        flagged |= r.discrepant
        out.append(
            f"{r.name} | {pct(r.p1)}% 1, {pct(r.p2)}% 2 | {each} | "
            f"{pct(r.p_corr)}% corr, {pct(r.p_anti)}% anti{mark}"
        )
    if flagged:
        out.append(TABLE_FOOTNOTE)
    return "\n".join(out) + "\n"


RUNNERS: dict[str, Callable[[RunConfig], RunResult]] = {
    "mz": run_mz,
    "rto": run_rto,
    "bell": run_bell,
    "double-slit": run_double_slit,
    "cat": run_cat,
}


def execute(cfg: RunConfig) -> RunResult:
    if cfg.experiment == "table-one":
        return RunResult((), [], text=table_one())
    return RUNNERS[cfg.experiment](cfg)


def render_csv(result: RunResult) -> str:
    lines = [",".join(result.columns)]
    lines.extend(",".join(row) for row in result.rows)
    return "\n".join(lines) + "\n"


def resolve_output(cfg: RunConfig, env: dict[str, str] | None = None) -> Path | None:
    env = os.environ if env is None else env
    base = env.get(OUTPUT_DIR_ENV)
    if cfg.output is None:
        if base is None:
            return None
        suffix = ".txt" if cfg.experiment == "table-one" else ".csv"
        return Path(base) / f"{cfg.experiment}{suffix}"
    out = Path(cfg.output)
    if base is not None and not out.is_absolute():
        out = Path(base) / out
    return out


def _sidecar(output: Path | None, explicit: str | None, suffix: str, base: str | None) -> Path | None:
    if explicit is not None:
        p = Path(explicit)
        return Path(base) / p if base is not None and not p.is_absolute() else p
    if output is None:
        return None
    return output.with_name(output.stem + suffix)


def run(cfg: RunConfig, stdout: TextIO | None = None, env: dict[str, str] | None = None) -> int:
    """Execute ``cfg`` and write its outputs; returns the process exit code."""
    stdout = sys.stdout if stdout is None else stdout
    env = os.environ if env is None else env
    try:
        result = execute(cfg)
    except InvariantError as exc:
        print(f"invariant violated: {exc}", file=sys.stderr)
        return EXIT_INVARIANT
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG

    body = result.text if result.text is not None else render_csv(result)
    output = resolve_output(cfg, env)
    base = env.get(OUTPUT_DIR_ENV)
    try:
        if output is None:
            stdout.write(body)
        else:
            output.parent.mkdir(parents=True, exist_ok=True)
            output.write_text(body, encoding="utf-8")
        if result.record is not None:
            path = _sidecar(output, cfg.record, ".records.csv", base)
            if path is not None:
                result.record.write(path)
        if result.impacts is not None:
            path = _sidecar(output, cfg.impacts, ".impacts.csv", base)
            if path is not None:
                path.write_text("x\n" + "".join(fmt_sci(x) + "\n" for x in result.impacts), encoding="utf-8")
    except OSError as exc:
        print(f"error: cannot write output: {exc}", file=sys.stderr)
        return EXIT_IO
    return EXIT_OK


def main(argv: list[str] | None = None) -> int:
    try:
        cfg = parse_and_validate(argv)
    except ConfigError as exc:
        print(f"error: {exc.field}: {exc.message}", file=sys.stderr)
        return EXIT_CONFIG
    return run(cfg)


if __name__ == "__main__":
    sys.exit(main())
