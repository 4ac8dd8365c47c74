"""Command-line entry points: train, eval, export, flops.

Run configs are INI files::

    [run]
    problem = helmholtz3d
    out = runs/helmholtz
    seed = 0

    [model]
    rank = 32
    depth = 4
    width = 64
    variant = plain

    [train]
    iterations = 50000
    lr = 1e-3
    counts = 32            ; one value, or one per axis: 32,32,32
    resample_interval = 100
    log_interval = 100
    checkpoint_interval = 0

    [eval]
    resolution = 64
    interval = 1000

Every section but ``[run]`` is optional; unknown sections or keys are
rejected.  Exit codes: 0 ok, 1 runtime abort, 2 usage or config error.
"""

from __future__ import annotations

import argparse
import configparser
import contextlib
import csv
import json
import logging
import os
import struct
import sys
from pathlib import Path
from typing import Literal, Optional

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, ValidationError, field_validator
from threadpoolctl import threadpool_limits

from . import flops as F
from .errors import ConfigError, NoReferenceError
from .nets import MlpConfig
from .pdes import PROBLEM_IDS, get_problem
from .pdes.base import uniform_grid
from .separable import SeparableModel
from .trainer import AdamState, ModelConfig, TrainConfig, evaluate, predict_observable, train

log = logging.getLogger("spinn")

EXIT_OK, EXIT_ABORT, EXIT_USAGE = 0, 1, 2

CKPT_MAGIC = b"SPNN"
CKPT_VERSION = 1
GRID_MAGIC = b"SPGR"
GRID_VERSION = 1
VARIANT_CODES = {"plain": 0, "modified": 1}


class UsageError(Exception):
    pass


# -- config ------------------------------------------------------------------------


class _Section(BaseModel):
    model_config = ConfigDict(extra="forbid")


class RunSection(_Section):
    problem: str
    out: str
    seed: int = Field(0, ge=0, lt=2**63)

    @field_validator("problem")
    @classmethod
    def _known(cls, v):
        if v not in PROBLEM_IDS:
            raise ValueError(f"unknown problem {v!r}; valid ids: {', '.join(PROBLEM_IDS)}")
        return v


class ModelSection(_Section):
    rank: int = Field(32, ge=1)
    depth: int = Field(4, ge=1)
    width: int = Field(64, ge=1)
    variant: Literal["plain", "modified"] = "plain"


class TrainSection(_Section):
    iterations: int = Field(50_000, ge=1)
    lr: float = Field(1e-3, gt=0)
    beta1: float = Field(0.9, ge=0, lt=1)
    beta2: float = Field(0.999, ge=0, lt=1)
    eps: float = Field(1e-8, gt=0)
    counts: Optional[tuple[int, ...]] = None
    boundary_counts: Optional[tuple[int, ...]] = None
    resample_interval: int = Field(100, ge=1)
    log_interval: int = Field(100, ge=1)
    checkpoint_interval: int = Field(0, ge=0)

    @field_validator("counts", "boundary_counts", mode="before")
    @classmethod
    def _split(cls, v):
        if isinstance(v, str):
            return tuple(int(x) for x in v.replace(" ", "").split(",") if x)
        return v


class EvalSection(_Section):
    resolution: Optional[int] = Field(None, ge=2)
    interval: int = Field(1000, ge=0)


class RunConfig(_Section):
    run: RunSection
    model: ModelSection = ModelSection()
    train: TrainSection = TrainSection()
    eval: EvalSection = EvalSection()

    def model_config_(self) -> ModelConfig:
        m = self.model
        return ModelConfig(rank=m.rank, depth=m.depth, width=m.width, variant=m.variant)

    def train_config(self) -> TrainConfig:
        t, e = self.train, self.eval
        counts = t.counts[0] if t.counts and len(t.counts) == 1 else t.counts
        bcounts = t.boundary_counts[0] if t.boundary_counts and len(t.boundary_counts) == 1 else t.boundary_counts
        return TrainConfig(
            iterations=t.iterations,
            lr=t.lr,
            beta1=t.beta1,
            beta2=t.beta2,
            eps=t.eps,
            resample_interval=t.resample_interval,
            counts=counts,
            boundary_counts=bcounts,
            seed=self.run.seed,
            log_interval=t.log_interval,
            eval_interval=e.interval,
            eval_resolution=e.resolution,
            checkpoint_interval=t.checkpoint_interval,
        )


def load_config(path, overrides=None) -> RunConfig:
    """Parse and validate an INI run config; raises ConfigError with field paths."""
    parser = configparser.ConfigParser(inline_comment_prefixes=(";", "#"))
    try:
        with open(path, encoding="utf-8") as fh:
            parser.read_file(fh)
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from None
    except configparser.Error as exc:
        raise ConfigError(f"{path}: {exc}") from None
    raw = {name: dict(parser[name]) for name in parser.sections()}
    for key, value in (overrides or {}).items():
        section, field = key.split(".")
        raw.setdefault(section, {})[field] = value
    try:
        return RunConfig.model_validate(raw)
    except ValidationError as exc:
        lines = []
        for err in exc.errors():
            loc = ".".join(str(p) for p in err["loc"])
            lines.append(f"  [{loc}] {err['msg']}")
        raise ConfigError(f"{path}: invalid config\n" + "\n".join(lines)) from None


# -- checkpoints ---------------------------------------------------------------------


def save_checkpoint(path, model: SeparableModel, problem_id: str, step=0, state: Optional[AdamState] = None):
    """Little-endian binary checkpoint; see ``load_checkpoint`` for the layout."""
    pid = problem_id.encode("utf-8")
    parts = [CKPT_MAGIC, struct.pack("<IIII", CKPT_VERSION, model.d, model.rank, model.out_dim)]
    for c in model.configs:
        parts.append(struct.pack("<IIIBQ", c.depth, c.width, c.out_dim, VARIANT_CODES[c.variant], c.seed))
    parts.append(struct.pack("<I", len(pid)) + pid)
    parts.append(struct.pack("<qQ", int(step), model.store.size))
    parts.append(model.params.astype("<f8").tobytes())
    if state is None:
        parts.append(struct.pack("<B", 0))
    else:
        parts.append(struct.pack("<BQ", 1, state.t))
        parts.append(state.m.astype("<f8").tobytes() + state.v.astype("<f8").tobytes())
    data = b"".join(parts)
    tmp = Path(str(path) + ".tmp")
    tmp.write_bytes(data)
    os.replace(tmp, path)


def load_checkpoint(path):
    """Returns ``(model, problem_id, step, adam_state_or_None)``.

    Layout: ``SPNN`` | u32 version, d, rank, m | per net (u32 depth, width,
    out_dim, u8 variant, u64 seed) | u32 len + utf-8 problem id | i64 step,
    u64 n | n f64 params | u8 has_opt [u64 t, n f64 m, n f64 v].
    """
    buf = Path(path).read_bytes()
    if buf[:4] != CKPT_MAGIC:
        raise ValueError(f"{path}: not a checkpoint (bad magic)")
    off = 4
    version, d, rank, m = struct.unpack_from("<IIII", buf, off)
    off += 16
    if version != CKPT_VERSION:
        raise ValueError(f"{path}: unsupported checkpoint version {version}")
    codes = {v: k for k, v in VARIANT_CODES.items()}
    configs = []
    for _ in range(d):
        depth, width, out_dim, var, seed = struct.unpack_from("<IIIBQ", buf, off)
        off += struct.calcsize("<IIIBQ")
        configs.append(MlpConfig(depth=depth, width=width, out_dim=out_dim, variant=codes[var], seed=seed))
    (n_pid,) = struct.unpack_from("<I", buf, off)
    off += 4
    pid = buf[off : off + n_pid].decode("utf-8")
    off += n_pid
    step, n = struct.unpack_from("<qQ", buf, off)
    off += 16
    model = SeparableModel(configs, rank, m)
    if model.store.size != n:
        raise ValueError(f"{path}: parameter count {n} does not match the stored architecture")
    model.set_params(np.frombuffer(buf, dtype="<f8", count=n, offset=off))
    off += 8 * n
    (has_opt,) = struct.unpack_from("<B", buf, off)
    off += 1
    state = None
    if has_opt:
        (t,) = struct.unpack_from("<Q", buf, off)
        off += 8
        mv = np.frombuffer(buf, dtype="<f8", count=2 * n, offset=off).astype(np.float64)
        state = AdamState(mv[:n].copy(), mv[n:].copy(), int(t))
    return model, pid, int(step), state


# -- grid files ------------------------------------------------------------------------


def grid_header_size(ndim):
    return 4 + 8 + 4 * ndim + 16 * ndim


def write_grid(path, values, bounds):
    """``SPGR`` | u32 version, ndim | u32 shape[ndim] | f64 (lo, hi)[ndim] | f64 data (C order)."""
    values = np.ascontiguousarray(values, dtype="<f8")
    head = GRID_MAGIC + struct.pack("<II", GRID_VERSION, values.ndim)
    head += struct.pack(f"<{values.ndim}I", *values.shape)
    head += struct.pack(f"<{2 * values.ndim}d", *[b for lohi in bounds for b in lohi])
    Path(path).write_bytes(head + values.tobytes())


def read_grid(path):
    buf = Path(path).read_bytes()
    if buf[:4] != GRID_MAGIC:
        raise ValueError(f"{path}: not a grid file")
    version, ndim = struct.unpack_from("<II", buf, 4)
    shape = struct.unpack_from(f"<{ndim}I", buf, 12)
    flat = struct.unpack_from(f"<{2 * ndim}d", buf, 12 + 4 * ndim)
    bounds = tuple(zip(flat[::2], flat[1::2]))
    data = np.frombuffer(buf, dtype="<f8", offset=grid_header_size(ndim)).reshape(shape)
    return data.astype(np.float64), bounds


def write_pgm(path, image):
    """8-bit binary PGM; values min-max normalized (a constant image maps to 0)."""
    image = np.asarray(image, dtype=np.float64)
    lo, hi = float(image.min()), float(image.max())
    scaled = np.zeros(image.shape) if hi == lo else (image - lo) / (hi - lo) * 255.0
    pix = np.clip(np.rint(scaled), 0, 255).astype(np.uint8)
    h, w = pix.shape
    Path(path).write_bytes(f"P5\n{w} {h}\n255\n".encode("ascii") + pix.tobytes())


def read_pgm(path):
    buf = Path(path).read_bytes()
    parts = buf.split(b"\n", 3)
    if parts[0] != b"P5":
        raise ValueError(f"{path}: not a binary PGM")
    w, h = (int(v) for v in parts[1].split())
    return np.frombuffer(parts[3], dtype=np.uint8).reshape(h, w), int(parts[2])


# -- helpers ---------------------------------------------------------------------------


@contextlib.contextmanager
def run_lock(out_dir: Path):
    """One run per output directory."""
    lock = out_dir / ".lock"
    try:
        fd = os.open(lock, os.O_CREAT | os.O_EXCL | os.O_WRONLY)
    except FileExistsError:
        raise UsageError(f"{out_dir} is in use by another run (remove {lock} if stale)") from None
    try:
        os.write(fd, str(os.getpid()).encode())
        os.close(fd)
        yield
    finally:
        lock.unlink(missing_ok=True)


def thread_count():
    raw = os.environ.get("SPINN_THREADS", "1")
    try:
        n = int(raw)
    except ValueError:
        raise UsageError(f"SPINN_THREADS must be a positive integer, got {raw!r}") from None
    if n < 1:
        raise UsageError("SPINN_THREADS must be a positive integer")
    return n


def _json_default(o):
    if isinstance(o, np.generic):
        return o.item()
    raise TypeError(type(o))


def _dumps(rec):
    return json.dumps(rec, sort_keys=True, default=_json_default)


def _resolve_problem(pid):
    if pid is None:
        raise UsageError(f"no problem id given; valid ids: {', '.join(PROBLEM_IDS)}")
    try:
        return get_problem(pid)
    except KeyError:
        raise UsageError(f"unknown problem {pid!r}; valid ids: {', '.join(PROBLEM_IDS)}") from None


def parse_slice(spec, problem, resolution):
    """``"t=0,x3=0.5"`` -> per-axis coordinate arrays with two free axes."""
    pins = {}
    for item in filter(None, (s.strip() for s in (spec or "").split(","))):
        name, _, val = item.partition("=")
        if name not in problem.domain.names or not val:
            raise UsageError(f"bad slice item {item!r}; axes are {', '.join(problem.domain.names)}")
        try:
            pins[name] = float(val)
        except ValueError:
            raise UsageError(f"bad slice value {item!r}") from None
    free = [n for n in problem.domain.names if n not in pins]
    if len(free) != 2:
        raise UsageError(f"slice must pin all but two axes; free axes would be {free}")
    axes = []
    for name, (lo, hi) in zip(problem.domain.names, problem.domain.bounds):
        if name in pins:
            if not lo <= pins[name] <= hi:
                raise UsageError(f"{name}={pins[name]} outside [{lo}, {hi}]")
            axes.append(np.array([pins[name]]))
        else:
            axes.append(np.linspace(lo, hi, resolution))
    return axes, free


# -- commands ------------------------------------------------------------------------


def cmd_train(args) -> int:
    overrides = {}
    if args.seed is not None:
        overrides["run.seed"] = str(args.seed)
    if args.out is not None:
        overrides["run.out"] = args.out
    if args.problem is not None:
        overrides["run.problem"] = args.problem
    if args.iterations is not None:
        overrides["train.iterations"] = str(args.iterations)
    try:
        cfg = load_config(args.config, overrides)
    except ConfigError as exc:
        msg = str(exc)
        if "run.problem" in msg or "[run]" in msg:
            msg += f"\nvalid problem ids: {', '.join(PROBLEM_IDS)}"
        raise UsageError(msg) from None
    problem = _resolve_problem(cfg.run.problem)
    out = Path(cfg.run.out)
    out.mkdir(parents=True, exist_ok=True)
    with run_lock(out), threadpool_limits(thread_count()):
        with open(out / "metrics.jsonl", "w") as mf, open(out / "timing.jsonl", "w") as tf:

            def sink(rec):
                mf.write(_dumps(rec) + "\n")
                mf.flush()
                if not args.quiet and "step" in rec:
                    extra = f" rel_l2={rec['rel_l2']:.4g}" if "rel_l2" in rec else ""
                    print(f"step {rec['step']:>7} loss={rec['loss']:.6g}{extra}", file=sys.stderr)

            def timing(rec):
                tf.write(_dumps(rec) + "\n")

            def hook(model, state, step):
                save_checkpoint(out / "last.ckpt", model, problem.id, step, state)

            result = train(problem, cfg.model_config_(), cfg.train_config(), sink, timing, hook)
        save_checkpoint(out / "model.ckpt", result.model, problem.id, result.best_step, result.optimizer)
        (out / "config.json").write_text(_dumps(cfg.model_dump(mode="json")) + "\n")
        if problem.reference is not None:
            res = cfg.eval.resolution or problem.eval_resolution
            grid = predict_observable(result.model, problem, uniform_grid(problem.domain, res))
            write_grid(out / "prediction.spgr", grid, problem.domain.bounds)
    summary = {k: v for k, v in result.final.items() if k != "final"}
    print(_dumps(summary))
    return EXIT_ABORT if result.aborted else EXIT_OK


def _load(args):
    try:
        model, pid, step, _ = load_checkpoint(args.checkpoint)
    except (OSError, ValueError, struct.error) as exc:
        raise UsageError(f"cannot load checkpoint: {exc}") from None
    problem = _resolve_problem(args.problem or pid)
    if problem.d != model.d or problem.out_dim != model.out_dim:
        raise UsageError(f"checkpoint does not fit problem {problem.id}")
    return model, problem, step


def cmd_eval(args) -> int:
    model, problem, step = _load(args)
    res = args.resolution or problem.eval_resolution
    with threadpool_limits(thread_count()):
        try:
            metrics, pred, _ = evaluate(model, problem, res)
        except NoReferenceError as exc:
            print(f"{exc}; writing prediction only", file=sys.stderr)
            metrics, pred = {}, predict_observable(model, problem, uniform_grid(problem.domain, res))
        except ValueError as exc:
            raise UsageError(str(exc)) from None
    if args.out:
        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
        write_grid(out / "prediction.spgr", pred, problem.domain.bounds)
    rec = {"problem": problem.id, "step": step, "resolution": res, **metrics}
    print(_dumps(rec))
    return EXIT_OK


def cmd_export(args) -> int:
    model, problem, _ = _load(args)
    axes, free = parse_slice(args.slice, problem, args.resolution)
    from .separable import FactorizedBatch

    with threadpool_limits(thread_count()):
        field = predict_observable(model, problem, FactorizedBatch(tuple(axes)))
    if field.ndim > problem.d:
        if not 0 <= args.component < field.shape[-1]:
            raise UsageError(f"component must lie in [0, {field.shape[-1]})")
        field = field[..., args.component]
    i, j = (problem.domain.index(n) for n in free)
    image = field.reshape(len(axes[i]), len(axes[j]))
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    stem = args.name
    with open(out / f"{stem}.csv", "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(list(problem.domain.names) + ["value"])
        for a in range(image.shape[0]):
            for b in range(image.shape[1]):
                coords = [float(ax[0]) for ax in axes]
                coords[i], coords[j] = float(axes[i][a]), float(axes[j][b])
                w.writerow([repr(c) for c in coords] + [repr(float(image[a, b]))])
    write_pgm(out / f"{stem}.pgm", image)
    print(_dumps({"csv": str(out / f"{stem}.csv"), "pgm": str(out / f"{stem}.pgm"), "rows": free[0], "cols": free[1]}))
    return EXIT_OK


def cmd_flops(args) -> int:
    if args.paper_table:
        sep, mono = F.reference_specs(args.N or 64)
        tables = {"separable": F.count_ops(sep), "monolithic": F.count_ops(mono)}
        ratio = F.cost_ratio(sep, mono)
    else:
        if args.arch is None:
            raise UsageError("give --arch or --paper-table")
        n = args.N or 64
        try:
            spec = F.spec_from_args(args.arch, args.d, n, args.depth, args.width, args.rank, args.out_dim, args.rows)
        except ConfigError as exc:
            raise UsageError(str(exc)) from None
        tables = {args.arch: F.count_ops(spec, include_merge=not args.no_merge)}
        ratio = None
    if args.format == "csv":
        w = csv.writer(sys.stdout, lineterminator="\n")
        w.writerow(["arch", "row", "adds", "mults", "flops"])
        for row in F.table_rows(tables):
            w.writerow(row)
        if ratio is not None:
            w.writerow(["ratio", "total", "", "", repr(ratio)])
    else:
        print(_format_int_table(tables))
        for arch, t in tables.items():
            print(f"{arch} total: {F.total(t).flops / 1e6:,.3f} MFLOPs")
        if ratio is not None:
            print(f"cost ratio separable/monolithic: {ratio:.6g} (1/{1 / ratio:,.0f})")
    return EXIT_OK


def _format_int_table(tables):
    lines = [f"{'arch':<12}{'row':<12}{'adds':>16}{'mults':>16}{'flops':>16}"]
    for arch, row, a, m, f in F.table_rows(tables):
        lines.append(f"{arch:<12}{row:<12}{a:>16}{m:>16}{f:>16}")
    return "\n".join(lines)


# -- entry point ---------------------------------------------------------------------


def build_parser():
    p = argparse.ArgumentParser(prog="spinn", description="Separable physics-informed network solver.")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    t = sub.add_parser("train", help="train from an INI config")
    t.add_argument("config")
    t.add_argument("--seed", type=int)
    t.add_argument("--out")
    t.add_argument("--problem")
    t.add_argument("--iterations", type=int)
    t.add_argument("-q", "--quiet", action="store_true")
    t.set_defaults(fn=cmd_train)

    e = sub.add_parser("eval", help="error report for a checkpoint")
    e.add_argument("checkpoint")
    e.add_argument("--problem")
    e.add_argument("--resolution", type=int)
    e.add_argument("--out")
    e.set_defaults(fn=cmd_eval)

    x = sub.add_parser("export", help="2-d slice as CSV and PGM")
    x.add_argument("checkpoint")
    x.add_argument("--problem")
    x.add_argument("--slice", default="", help="pins, e.g. t=0 or x3=0.5,t=1")
    x.add_argument("--resolution", type=int, default=64)
    x.add_argument("--component", type=int, default=0)
    x.add_argument("--name", default="slice")
    x.add_argument("--out", required=True)
    x.set_defaults(fn=cmd_export)

    f = sub.add_parser("flops", help="analytic operation counts")
    f.add_argument("--paper-table", action="store_true", help="the reference 64^3 configurations")
    f.add_argument("--arch", choices=["separable", "monolithic"])
    f.add_argument("--N", type=int)
    f.add_argument("--d", type=int, default=3)
    f.add_argument("--depth", type=int, default=4)
    f.add_argument("--width", type=int, default=64)
    f.add_argument("--rank", type=int, default=32)
    f.add_argument("--out-dim", type=int, default=1)
    f.add_argument("--rows", nargs="+", choices=list(F.ROWS))
    f.add_argument("--no-merge", action="store_true")
    f.add_argument("--format", choices=["text", "csv"], default="text")
    f.set_defaults(fn=cmd_flops)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        return args.fn(args)
    except UsageError as exc:
        print(f"spinn: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except ConfigError as exc:
        print(f"spinn: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (FloatingPointError, RuntimeError) as exc:
        print(f"spinn: aborted: {exc}", file=sys.stderr)
        return EXIT_ABORT


if __name__ == "__main__":
    sys.exit(main())
