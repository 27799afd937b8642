"""Command-line front end: ``spfreg denoise | benchmark | demo1d``.

Settings are resolved as command-line flags, then the optional TOML file
given by ``--config``, then built-in defaults. In the config file, top-level
keys apply to every subcommand and a table named after the subcommand
(``[benchmark]``, ...) overrides them. Keys are flag names with dashes or
underscores, e.g.::

    algo = "pdhg"
    max_iter = 300

    [benchmark]
    images = ["cameraman"]
    eta = [20]
    realizations = 5

    [benchmark.grids.cameraman]
    20 = [14, 15, 16, 17, 18]

Benchmark CSV columns (UTF-8, header row)::

    image, algorithm, eta, lambda, realization, seed, psnr, cpu_seconds,
    iterations, converged

Rows are appended. ``cpu_seconds`` is the wall time of the solve call only.
Every other column is a deterministic function of the flags.
"""

from __future__ import annotations

import argparse
import csv
import math
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, fields
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from .imaging import (
    ImageGray,
    NoiseSpec,
    add_gaussian_noise,
    load_test_image,
    psnr,
    read_pgm,
    write_pgm,
)
from .linop import DiffOp1D
from .penalty import env_gradient
from .solvers import ALGORITHMS, ProblemSpec, SolverParams, default_params, solve

__all__ = ["main", "BenchmarkRow", "LAMBDA_GRIDS", "CSV_COLUMNS"]

# lambda grids per image and noise level used by the benchmark tables
_GRID_A = {15: [9, 10, 11, 12, 13], 20: [14, 15, 16, 17, 18], 25: [18, 19, 20, 21, 22]}
_GRID_B = {15: [9, 10, 11, 12, 13], 20: [14, 15, 16, 17, 18], 25: [19, 20, 21, 22, 23]}
LAMBDA_GRIDS = {"cameraman": _GRID_A, "house": _GRID_B, "peppers": _GRID_B}

DEFAULTS = {
    "algo": "pdhg",
    "alpha_factor": 1.5,
    "max_iter": 300,
    "tol": 1e-4,
    "seed": 0,
    "noise_sigma": None,
    "realizations": 20,
    "eta": [15.0, 20.0, 25.0],
    "algos": list(ALGORITHMS),
    "images": ["cameraman", "house", "peppers"],
    "csv": "benchmark.csv",
    "jobs": 1,
    "length": 128,
    "segments": 6,
    "sigma": 0.1,
    "lambda_1d": 0.5,
    "snapshots": [1, 5, 20],
}


class CLIError(Exception):
    pass


# ---------------------------------------------------------------------------
# config handling
# ---------------------------------------------------------------------------


def _load_config(path: Optional[str], command: str) -> dict:
    if not path:
        return {}
    try:
        import tomllib
    except ModuleNotFoundError:  # Python < 3.11
        import tomli as tomllib
    try:
        with open(path, "rb") as fh:
            raw = tomllib.load(fh)
    except OSError as exc:
        raise CLIError(f"cannot read config {path}: {exc}") from None
    except tomllib.TOMLDecodeError as exc:
        raise CLIError(f"invalid config {path}: {exc}") from None
    sections = {"denoise", "benchmark", "demo1d"}
    cfg = {k: v for k, v in raw.items() if k not in sections}
    cfg.update(raw.get(command, {}))
    cfg = {k.replace("-", "_"): v for k, v in cfg.items()}
    if "lambda" in cfg:
        cfg["lambda_"] = cfg.pop("lambda")
    return cfg


class _Settings:
    """Flag value if given, else config value, else default."""

    def __init__(self, args: argparse.Namespace, config: dict):
        self._args, self._config = args, config

    def __getattr__(self, name):
        val = getattr(self._args, name, None)
        if val is not None:
            return val
        if name in self._config:
            return self._config[name]
        return DEFAULTS.get(name)


def _params(spec: ProblemSpec, algo: str, s: _Settings) -> SolverParams:
    base = default_params(spec, algo)
    over = {"max_iter": int(s.max_iter), "tol": float(s.tol)}
    for key in ("sigma_step", "tau", "rho"):
        val = getattr(s, key)
        if val is not None:
            over["sigma" if key == "sigma_step" else key] = float(val)
    return SolverParams(**{**base.__dict__, **over})


def _check_algo(algo: str):
    if algo not in ALGORITHMS:
        raise CLIError(f"unknown algorithm {algo!r}; choose from {', '.join(ALGORITHMS)}")


def _read_image(path: str) -> ImageGray:
    p = Path(path)
    if p.suffix.lower() == ".pgm":
        return read_pgm(p)
    if not p.exists():
        # bare names refer to the standard test images
        return load_test_image(path)
    from PIL import Image

    with Image.open(p) as im:
        return ImageGray(np.asarray(im.convert("L"), dtype=np.float64))


# ---------------------------------------------------------------------------
# denoise
# ---------------------------------------------------------------------------


def cmd_denoise(args) -> int:
    s = _Settings(args, _load_config(args.config, "denoise"))
    if s.input is None:
        raise CLIError("--input is required")
    if s.lambda_ is None:
        raise CLIError("--lambda is required")
    lam = float(s.lambda_)
    if not lam > 0:
        raise CLIError("--lambda must be positive")
    _check_algo(s.algo)
    img = _read_image(s.input)
    if not img.is_square:
        raise CLIError(f"image must be square, got shape {img.shape}")

    reference = None
    noisy = img
    if s.noise_sigma is not None:
        reference = img
        noisy = add_gaussian_noise(img, NoiseSpec(float(s.noise_sigma), int(s.seed)))
    elif s.reference is not None:
        reference = _read_image(s.reference)

    spec = ProblemSpec.for_image(noisy, lam, alpha_factor=float(s.alpha_factor))
    report = solve(spec, s.algo, _params(spec, s.algo, s))
    out = ImageGray.from_vector(report.x_final, img.shape)
    if s.output is not None:
        write_pgm(out, s.output)

    print(f"algorithm   {s.algo}")
    print(f"lambda      {lam:g}")
    print(f"alpha       {spec.alpha:.6g}")
    if reference is not None:
        print(f"psnr_noisy  {psnr(reference, noisy):.4f}")
        print(f"psnr        {psnr(reference, out):.4f}")
    print(f"iterations  {report.iterations}")
    print(f"converged   {str(report.converged).lower()}")
    print(f"seconds     {report.wall_seconds:.4f}")
    return 0


# ---------------------------------------------------------------------------
# benchmark
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class BenchmarkRow:
    """One solve of the benchmark sweep (one CSV line)."""

    image: str
    algorithm: str
    eta: float
    lam: float
    realization: int
    seed: int
    psnr: float
    cpu_seconds: float
    iterations: int
    converged: bool

    def __post_init__(self):
        if not math.isfinite(self.psnr):
            raise ValueError("psnr must be finite")
        if self.cpu_seconds < 0:
            raise ValueError("cpu_seconds must be nonnegative")
        if self.realization < 1:
            raise ValueError("realization index starts at 1")

    def to_csv(self) -> list:
        return [
            self.image, self.algorithm, f"{self.eta:g}", f"{self.lam:g}",
            str(self.realization), str(self.seed), repr(float(self.psnr)),
            f"{self.cpu_seconds:.6f}", str(self.iterations),
            "true" if self.converged else "false",
        ]

    @classmethod
    def from_csv(cls, rec: dict) -> "BenchmarkRow":
        return cls(
            image=rec["image"], algorithm=rec["algorithm"], eta=float(rec["eta"]),
            lam=float(rec["lambda"]), realization=int(rec["realization"]),
            seed=int(rec["seed"]), psnr=float(rec["psnr"]),
            cpu_seconds=float(rec["cpu_seconds"]), iterations=int(rec["iterations"]),
            converged=rec["converged"] == "true",
        )


CSV_COLUMNS = [f.name if f.name != "lam" else "lambda" for f in fields(BenchmarkRow)]


def _run_row(task) -> tuple:
    """Noise, solve and score one (image, eta, lambda, algo, realization)."""
    name, pixels, eta, lam, algo, real, seed, alpha_factor, max_iter, tol = task
    clean = ImageGray(pixels)
    noisy = add_gaussian_noise(clean, NoiseSpec(eta, seed))
    spec = ProblemSpec.for_image(noisy, lam, alpha_factor=alpha_factor)
    error = None
    try:
        params = default_params(spec, algo)
        params = SolverParams(**{**params.__dict__, "max_iter": max_iter, "tol": tol})
        rep = solve(spec, algo, params)
        out = ImageGray.from_vector(rep.x_final, clean.shape)
        row = BenchmarkRow(name, algo, eta, lam, real, seed, psnr(clean, out),
                           rep.wall_seconds, rep.iterations, rep.converged)
    except (ValueError, RuntimeError) as exc:
        # the row keeps the score of the unprocessed data
        error = f"{name} eta={eta:g} lambda={lam:g} {algo} #{real}: {exc}"
        row = BenchmarkRow(name, algo, eta, lam, real, seed, psnr(clean, noisy),
                           0.0, 0, False)
    return row, error


def _grid_for(name: str, eta: float, s: _Settings) -> list:
    if s.lambda_ is not None:
        return [float(v) for v in s.lambda_]
    grids = s.grids or {}
    table = grids.get(name) or LAMBDA_GRIDS.get(name) or LAMBDA_GRIDS["cameraman"]
    for key, vals in table.items():
        if float(key) == eta:
            return [float(v) for v in vals]
    raise CLIError(f"no lambda grid for image {name!r} at eta={eta:g}; pass --lambda")


def summarize(rows: Sequence[BenchmarkRow]) -> str:
    """Mean PSNR and mean CPU time per (image, eta, lambda, algorithm).

    One block per (image, eta), one line per lambda, one ``psnr (cpu)``
    cell per algorithm.
    """
    acc: dict = {}
    for r in rows:
        acc.setdefault((r.image, r.eta), {}).setdefault(r.lam, {}).setdefault(r.algorithm, []).append(r)
    lines = []
    for (image, eta), by_lam in acc.items():
        algos = [a for a in ALGORITHMS if any(a in v for v in by_lam.values())]
        lines.append(f"{image}  eta={eta:g}")
        lines.append("  lambda  " + "".join(f"{a:>18}" for a in algos))
        for lam, by_algo in by_lam.items():
            cells = []
            for a in algos:
                rs = by_algo.get(a, [])
                if not rs:
                    cells.append(f"{'-':>18}")
                    continue
                mp = sum(r.psnr for r in rs) / len(rs)
                mc = sum(r.cpu_seconds for r in rs) / len(rs)
                cells.append(f"{f'{mp:.2f} ({mc:.2f})':>18}")
            lines.append(f"  {lam:6g}  " + "".join(cells))
        lines.append("")
    return "\n".join(lines)


def cmd_benchmark(args) -> int:
    s = _Settings(args, _load_config(args.config, "benchmark"))
    algos = list(s.algos)
    for a in algos:
        _check_algo(a)
    realizations = int(s.realizations)
    if realizations < 1:
        raise CLIError("--realizations must be >= 1")
    etas = [float(e) for e in s.eta]

    tasks = []
    for ref in s.images:
        img = _read_image(ref)
        if not img.is_square:
            raise CLIError(f"image {ref} must be square, got shape {img.shape}")
        name = Path(ref).stem if Path(ref).suffix else ref
        for eta in etas:
            for lam in _grid_for(name, eta, s):
                for real in range(1, realizations + 1):
                    for algo in algos:
                        tasks.append((name, img.pixels, eta, lam, algo, real,
                                      int(s.seed) + real, float(s.alpha_factor),
                                      int(s.max_iter), float(s.tol)))

    jobs = int(s.jobs)
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as ex:
            results = list(ex.map(_run_row, tasks, chunksize=1))
    else:
        results = map(_run_row, tasks)

    path = Path(s.csv)
    new_file = not path.exists() or path.stat().st_size == 0
    rows = []
    # results arrive in task order, so the file does not depend on scheduling
    with path.open("a", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        if new_file:
            w.writerow(CSV_COLUMNS)
        for row, error in results:
            if error:
                print(f"warning: {error}", file=sys.stderr)
            w.writerow(row.to_csv())
            fh.flush()
            rows.append(row)
    print(summarize(rows))
    return 0


def read_benchmark_csv(path) -> list:
    with open(path, newline="", encoding="utf-8") as fh:
        return [BenchmarkRow.from_csv(rec) for rec in csv.DictReader(fh)]


# ---------------------------------------------------------------------------
# demo1d
# ---------------------------------------------------------------------------


def piecewise_constant(length: int, segments: int, rng: np.random.Generator) -> np.ndarray:
    """Random step signal: ``segments`` pieces, levels uniform in [-4, 4]."""
    if length < 1 or not 1 <= segments <= length:
        raise CLIError("need length >= 1 and 1 <= segments <= length")
    cuts = np.sort(rng.choice(np.arange(1, length), size=segments - 1, replace=False))
    levels = rng.uniform(-4.0, 4.0, size=segments)
    return np.repeat(levels, np.diff(np.concatenate(([0], cuts, [length]))))


def _snapshots_1d(spec: ProblemSpec, algo: str, params: SolverParams, ks: list) -> dict:
    """Iterate ``x^(k)`` and algorithm-specific columns for each k in ``ks``.

    A k past the last iteration takes the final iterate.
    """
    op, part, lam, alpha = spec.operator, spec.partition, spec.lam, spec.alpha
    seen: dict = {}

    def grab(k, state):
        seen[k] = {key: np.array(v) for key, v in state.items()}

    if algo == "dca":
        # the callback sees x^(k-1) before outer step k
        rep = solve(spec, algo, params, callback=lambda k, st: grab(k, {"x": st["x"]}))
        seen[rep.iterations] = {"x": rep.x_final}
    else:
        rep = solve(spec, algo, params, callback=grab)
    if not seen:
        seen[0] = {"x": np.array(spec.z)}
    last = max(seen)

    cols = {}
    for k in ks:
        st = seen[min(k, last)]
        x = st["x"]
        g = env_gradient(op.apply(x), part, alpha)
        cols[f"x_k{k}"] = x
        cols[f"env_grad_k{k}"] = g
        if algo == "pd":
            cols[f"boost_k{k}"] = x + op.apply_adjoint(g)
        elif algo == "dca":
            cols[f"boost_k{k}"] = spec.z + lam * op.apply_adjoint(g)
        elif algo == "pdhg":
            cols[f"prox_input_k{k}"] = st["prox_input"]
            cols[f"boost_k{k}"] = st["u"]
    return cols


def cmd_demo1d(args) -> int:
    s = _Settings(args, _load_config(args.config, "demo1d"))
    _check_algo(s.algo)
    length, segments = int(s.length), int(s.segments)
    sigma = float(s.sigma)
    if sigma < 0:
        raise CLIError("--sigma must be nonnegative")
    lam = float(s.lambda_ if s.lambda_ is not None else DEFAULTS["lambda_1d"])
    if not lam > 0:
        raise CLIError("--lambda must be positive")
    ks = sorted({int(k) for k in s.snapshots})
    if not ks or ks[0] < 1:
        raise CLIError("--snapshots must be positive integers")

    rng = np.random.Generator(np.random.PCG64(int(s.seed)))
    clean = piecewise_constant(length, segments, rng)
    noisy = clean + sigma * rng.standard_normal(length)
    spec = ProblemSpec(z=noisy, lam=lam, operator=DiffOp1D(length),
                       alpha_factor=float(s.alpha_factor))
    cols = {
        "index": np.arange(length),
        "clean": clean,
        "noisy": noisy,
        "Bx_clean": spec.operator.apply(clean),
        "Bx_noisy": spec.operator.apply(noisy),
    }
    cols.update(_snapshots_1d(spec, s.algo, _params(spec, s.algo, s), ks))

    names = list(cols)
    lines = ["\t".join(names)]
    for i in range(length):
        cells = [str(i)] + [repr(float(cols[n][i])) for n in names[1:]]
        lines.append("\t".join(cells))
    text = "\n".join(lines) + "\n"
    if s.output:
        Path(s.output).write_text(text, encoding="utf-8")
    else:
        sys.stdout.write(text)
    return 0


# ---------------------------------------------------------------------------
# argument parsing
# ---------------------------------------------------------------------------


def _common(p: argparse.ArgumentParser):
    p.add_argument("--config", help="TOML file with default settings")
    p.add_argument("--alpha-factor", type=float, help="alpha = factor * lambda * ||B||^2 (1.5)")
    p.add_argument("--max-iter", type=int, help="iteration cap (300)")
    p.add_argument("--tol", type=float, help="relative-change tolerance (1e-4)")
    p.add_argument("--seed", type=int, help="noise seed (benchmark: base seed)")


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="spfreg", description="Structured-penalty TV denoising.")
    sub = ap.add_subparsers(dest="command", required=True)

    d = sub.add_parser("denoise", help="denoise one image")
    d.add_argument("--input", help="input image (PGM, or any format Pillow reads)")
    d.add_argument("--output", help="output PGM")
    d.add_argument("--algo", help="rof | pd | dca | pdhg (pdhg)")
    d.add_argument("--lambda", dest="lambda_", type=float, help="regularization weight")
    d.add_argument("--noise-sigma", type=float,
                   help="treat the input as clean and add noise of this std first")
    d.add_argument("--reference", help="clean image for PSNR when no noise is added")
    d.add_argument("--sigma", dest="sigma_step", type=float, help="dual step size override")
    d.add_argument("--tau", type=float, help="primal step size override")
    d.add_argument("--rho", type=float, help="relaxation parameter override")
    _common(d)
    d.set_defaults(func=cmd_denoise)

    b = sub.add_parser("benchmark", help="PSNR / CPU-time sweep over images, eta, lambda")
    b.add_argument("--images", nargs="+", help="test image names or paths")
    b.add_argument("--eta", nargs="+", type=float, help="noise levels (15 20 25)")
    b.add_argument("--lambda", dest="lambda_", nargs="+", type=float,
                   help="lambda values for every image and eta (default: per-image grids)")
    b.add_argument("--algos", nargs="+", help="algorithms (all four)")
    b.add_argument("--algo", dest="algos", action="append", help=argparse.SUPPRESS)
    b.add_argument("--realizations", type=int, help="noise realizations per setting (20)")
    b.add_argument("--csv", help="CSV file rows are appended to (benchmark.csv)")
    b.add_argument("--jobs", type=int, help="worker processes (1)")
    _common(b)
    b.set_defaults(func=cmd_benchmark)

    m = sub.add_parser("demo1d", help="1-D piecewise-constant demonstration (TSV)")
    m.add_argument("--length", type=int, help="signal length (128)")
    m.add_argument("--segments", type=int, help="number of constant pieces (6)")
    m.add_argument("--sigma", type=float, help="noise standard deviation (0.1)")
    m.add_argument("--algo", help="rof | pd | dca | pdhg (pdhg)")
    m.add_argument("--lambda", dest="lambda_", type=float, help="regularization weight (0.5)")
    m.add_argument("--snapshots", nargs="+", type=int, help="iterations to record (1 5 20)")
    m.add_argument("--output", help="TSV path (stdout if omitted)")
    _common(m)
    m.set_defaults(func=cmd_demo1d)
    return ap


def main(argv: Optional[Sequence[str]] = None) -> int:
    ap = build_parser()
    args = ap.parse_args(argv)
    try:
        return args.func(args)
    except (CLIError, ValueError, OSError, RuntimeError) as exc:
        print(f"spfreg {args.command}: error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
