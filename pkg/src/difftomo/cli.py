"""Command line: phantoms, schemes, simulation, reconstruction and experiments.

Configuration is a flat ``key = value`` file; see :data:`CONFIG_KEYS` for the
keys, their types and defaults.  Seeds for the scheme, mask, noise and
initialization are derived from the single ``seed`` key.
"""
from __future__ import annotations

import argparse
import csv
import math
import sys
from dataclasses import dataclass, fields
from pathlib import Path

import numpy as np

from . import __version__
from .lattice import LatticeSpec, Object3D, read_volume, write_volume
from .measurement import (
    NoiseSpec,
    PhaseMask,
    poissonize_many,
    random_phase_mask,
    read_patterns,
    simulate_patterns,
    solve_s_for_nsr,
    write_patterns,
)
from .projector import project_many, write_projections
from .tilt import (
    TiltScheme,
    conical_tilt_scheme,
    dual_axis_scheme,
    random_tilt_scheme,
    read_scheme,
    tset_scheme,
    write_scheme,
)

SCHEMES = ("tset", "random", "triangle", "conical", "dual_axis", "file")
SOLVERS = ("ap", "vandermonde", "unwrap")


def _bool(text: str) -> bool:
    t = text.strip().lower()
    if t in ("1", "true", "yes", "on"):
        return True
    if t in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {text!r}")


def _floats(text: str) -> tuple:
    text = text.strip()
    if not text:
        return ()
    return tuple(float(v) for v in text.split(","))


def _optional_int(text: str):
    text = text.strip()
    return None if text in ("", "auto") else int(text)


def _optional_float(text: str):
    text = text.strip()
    return None if text in ("", "auto") else float(text)


def _fmt(value) -> str:
    if value is None:
        return "auto"
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        return repr(value)
    if isinstance(value, tuple):
        return ", ".join(repr(float(v)) for v in value)
    return str(value)


@dataclass
class ExperimentConfig:
    """Settings for one experiment; every field has a default."""

    n: int = 7
    p: int | None = None
    kappa: float = math.pi
    phantom: str = "shepp"
    scheme: str = "tset"
    scheme_file: str = ""
    scheme_count: int = 0
    scheme_q: int = 8
    scheme_alpha: float = 0.0
    anchors: bool = False
    epsilon: float | None = None
    seed: int = 0
    coded: bool = True
    oversampled: bool = False
    nsr: tuple = (0.25, 0.5, 1.0)
    s: tuple = ()
    solver: str = "ap"
    max_iters: int = 500
    cg_tol: float = 1e-10
    cg_maxiter: int = 200
    linear_solver: str = "auto"
    out: str = "out"

    def __post_init__(self):
        if self.scheme not in SCHEMES:
            raise ValueError(f"scheme must be one of {SCHEMES}, got {self.scheme!r}")
        if self.scheme == "file" and not self.scheme_file:
            raise ValueError("scheme = file requires scheme_file")
        if self.solver not in SOLVERS:
            raise ValueError(f"solver must be one of {SOLVERS}, got {self.solver!r}")
        if self.nsr and self.s:
            raise ValueError("give either nsr or s, not both")
        if any(v < 0 for v in self.nsr) or any(v <= 0 for v in self.s):
            raise ValueError("nsr entries must be >= 0 and s entries > 0")
        if self.linear_solver not in ("auto", "cg", "cholesky"):
            raise ValueError(f"unknown linear_solver {self.linear_solver!r}")
        self.lattice()

    def lattice(self) -> LatticeSpec:
        return LatticeSpec(self.n, self.p, self.kappa)

    def seeds(self) -> dict:
        """Independent child seeds for each random stage."""
        names = ("scheme", "mask", "noise", "init")
        kids = np.random.SeedSequence(self.seed).spawn(len(names))
        return {k: int(s.generate_state(1)[0]) for k, s in zip(names, kids)}


# key -> parser; the order is the canonical order of a written config
CONFIG_KEYS = {
    "n": int,
    "p": _optional_int,
    "kappa": float,
    "phantom": str,
    "scheme": str,
    "scheme_file": str,
    "scheme_count": int,
    "scheme_q": int,
    "scheme_alpha": float,
    "anchors": _bool,
    "epsilon": _optional_float,
    "seed": int,
    "coded": _bool,
    "oversampled": _bool,
    "nsr": _floats,
    "s": _floats,
    "solver": str,
    "max_iters": int,
    "cg_tol": float,
    "cg_maxiter": int,
    "linear_solver": str,
    "out": str,
}
assert list(CONFIG_KEYS) == [f.name for f in fields(ExperimentConfig)]


def parse_config(text: str, source: str = "<config>") -> ExperimentConfig:
    values = {}
    for num, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ValueError(f"{source}:{num}: expected 'key = value', got {raw!r}")
        key, _, val = (s.strip() for s in line.partition("="))
        if key not in CONFIG_KEYS:
            raise ValueError(f"{source}:{num}: unknown key {key!r}")
        if key in values:
            raise ValueError(f"{source}:{num}: duplicate key {key!r}")
        try:
            values[key] = CONFIG_KEYS[key](val)
        except ValueError as exc:
            raise ValueError(f"{source}:{num}: bad value for {key}: {exc}") from None
    if "s" in values and "nsr" not in values:
        values["nsr"] = ()
    return ExperimentConfig(**values)


def format_config(cfg: ExperimentConfig) -> str:
    return "".join(f"{k} = {_fmt(getattr(cfg, k))}\n" for k in CONFIG_KEYS)


def load_config(path) -> ExperimentConfig:
    return parse_config(Path(path).read_text(), str(path))


# ---------------------------------------------------------------- phantoms


def read_pgm(path) -> np.ndarray:
    """Binary 8-bit PGM (P5) scaled to ``[0, 1]``."""
    raw = Path(path).read_bytes()
    tokens, pos = [], 0
    while len(tokens) < 4:
        while pos < len(raw) and raw[pos:pos + 1].isspace():
            pos += 1
        if raw[pos:pos + 1] == b"#":
            while pos < len(raw) and raw[pos:pos + 1] not in (b"\n", b"\r"):
                pos += 1
            continue
        start = pos
        while pos < len(raw) and not raw[pos:pos + 1].isspace():
            pos += 1
        if start == pos:
            raise ValueError(f"{path}: truncated PGM header")
        tokens.append(raw[start:pos])
    if tokens[0] != b"P5":
        raise ValueError(f"{path}: only binary PGM (P5) is supported")
    width, height, maxval = (int(t) for t in tokens[1:])
    if not 0 < maxval < 256:
        raise ValueError(f"{path}: only 8-bit PGM is supported (maxval {maxval})")
    pos += 1
    data = np.frombuffer(raw, dtype=np.uint8, count=width * height, offset=pos)
    return data.reshape(height, width).astype(float) / maxval


def write_pgm(path, image: np.ndarray) -> None:
    img = np.clip(np.round(np.asarray(image, dtype=float) * 255), 0, 255).astype(np.uint8)
    with open(path, "wb") as fh:
        fh.write(b"P5\n%d %d\n255\n" % (img.shape[1], img.shape[0]))
        fh.write(img.tobytes())


# (intensity, semi-axis a, semi-axis b, center x, center y, angle in degrees)
_SHEPP = (
    (1.0, 0.69, 0.92, 0.0, 0.0, 0.0),
    (-0.8, 0.6624, 0.874, 0.0, -0.0184, 0.0),
    (-0.2, 0.11, 0.31, 0.22, 0.0, -18.0),
    (-0.2, 0.16, 0.41, -0.22, 0.0, 18.0),
    (0.1, 0.21, 0.25, 0.0, 0.35, 0.0),
    (0.1, 0.046, 0.046, 0.0, 0.1, 0.0),
    (0.1, 0.046, 0.046, 0.0, -0.1, 0.0),
    (0.1, 0.046, 0.023, -0.08, -0.605, 0.0),
    (0.1, 0.023, 0.023, 0.0, -0.606, 0.0),
    (0.1, 0.023, 0.046, 0.06, -0.605, 0.0),
)


def shepp_logan(size: int) -> np.ndarray:
    """Modified Shepp-Logan ellipse phantom on a ``size x size`` raster."""
    c = (np.arange(size) + 0.5) / size * 2 - 1
    x, y = np.meshgrid(c, -c)
    img = np.zeros((size, size))
    for val, a, b, x0, y0, deg in _SHEPP:
        th = math.radians(deg)
        xr = (x - x0) * math.cos(th) + (y - y0) * math.sin(th)
        yr = -(x - x0) * math.sin(th) + (y - y0) * math.cos(th)
        img[(xr / a) ** 2 + (yr / b) ** 2 <= 1] += val
    return np.clip(img, 0.0, 1.0)


def smooth_blob(size: int) -> np.ndarray:
    c = (np.arange(size) + 0.5) / size * 2 - 1
    x, y = np.meshgrid(c, c, indexing="ij")
    img = np.exp(-((x - 0.1) ** 2 + (y + 0.15) ** 2) / 0.18) + 0.5 * np.exp(-((x + 0.4) ** 2 + (y - 0.35) ** 2) / 0.05)
    return img / img.max()


def tile_grid(n: int) -> int:
    """Tiles per raster side: ``sqrt(n)`` for square ``n``, else rounded up."""
    return math.isqrt(n - 1) + 1 if n > 1 else 1


def build_phantom(source, n: int) -> Object3D:
    """Slice a raster into ``n`` tiles of ``n x n`` and stack them.

    ``source`` is ``"shepp"``, ``"blob"``, a PGM path or a 2D array.  The
    raster must be ``(n k) x (n k)`` with ``k = tile_grid(n)``; tile ``t``
    (row-major) becomes slice ``t`` along the third axis.
    """
    k = tile_grid(n)
    side = n * k
    if isinstance(source, np.ndarray):
        raster = np.asarray(source, dtype=float)
    elif source == "shepp":
        raster = shepp_logan(side)
    elif source == "blob":
        raster = smooth_blob(side)
    else:
        raster = read_pgm(source)
    if raster.shape != (side, side):
        raise ValueError(f"raster must be {side}x{side} for n={n} ({k}x{k} tiles of {n}x{n}), got {raster.shape[0]}x{raster.shape[1]}")
    vol = np.empty((n, n, n))
    for t in range(n):
        r, c = divmod(t, k)
        vol[:, :, t] = raster[r * n:(r + 1) * n, c * n:(c + 1) * n]
    return Object3D(LatticeSpec(n), vol)


# ----------------------------------------------------------------- stages


def make_scheme(cfg: ExperimentConfig) -> TiltScheme:
    n = cfg.n
    seed = cfg.seeds()["scheme"]
    if cfg.scheme == "tset":
        return tset_scheme(n, seed, cfg.epsilon)
    if cfg.scheme == "random":
        return random_tilt_scheme(n, cfg.scheme_count or 20 * n, seed, "unit_square", cfg.anchors, cfg.epsilon)
    if cfg.scheme == "triangle":
        count = cfg.scheme_count or int(math.ceil(15 / (cfg.epsilon or 0.5 / n) ** 2))
        return random_tilt_scheme(n, count, seed, "triangle", cfg.anchors, cfg.epsilon)
    if cfg.scheme == "conical":
        return conical_tilt_scheme(cfg.scheme_count or 10 * n, cfg.epsilon)
    if cfg.scheme == "dual_axis":
        return dual_axis_scheme(cfg.scheme_q, cfg.scheme_alpha, cfg.epsilon)
    return read_scheme(cfg.scheme_file)


def make_mask(cfg: ExperimentConfig) -> PhaseMask | None:
    return random_phase_mask(cfg.lattice(), cfg.seeds()["mask"]) if cfg.coded else None


def make_phantom(cfg: ExperimentConfig) -> Object3D:
    obj = build_phantom(cfg.phantom, cfg.n)
    return Object3D(cfg.lattice(), obj.values)


class StageError(RuntimeError):
    def __init__(self, stage: str, exc: BaseException):
        super().__init__(f"stage {stage} failed: {exc}")
        self.stage = stage


def _stage(name, fn, *args, **kwargs):
    try:
        return fn(*args, **kwargs)
    except StageError:
        raise
    except Exception as exc:  # surfaced with the stage name
        raise StageError(name, exc) from exc


def _noise_levels(cfg: ExperimentConfig, patterns):
    """``(nsr, s)`` pairs; ``s = None`` means noiseless."""
    if cfg.s:
        from .measurement import nsr as nsr_of

        return [(nsr_of(patterns, s), s) for s in cfg.s]
    if not cfg.nsr:
        return [(0.0, None)]
    return [(v, None if v == 0 else solve_s_for_nsr(patterns, v)) for v in cfg.nsr]


def _fmt_real(x) -> str:
    return f"{float(x):.17g}"


def run_experiment(cfg: ExperimentConfig, out: Path | None = None) -> list[dict]:
    """Phantom, scheme, mask, simulation, noise, reconstruction and scoring.

    Writes ``metrics.csv`` (``nsr, iterations, residual, correlation``),
    ``config.txt``, ``phantom.vol``, ``scheme.txt`` and one ``recon_<i>.vol``
    and ``report_<i>.csv`` per noise level into ``out``.
    """
    from .recon import ap_reconstruct, build_forward, correlation, stack_magnitudes, vandermonde_tomography, write_report_csv
    from .recon.unwrap import unwrap_tilt_series, wrap_projections

    out = Path(cfg.out if out is None else out)
    out.mkdir(parents=True, exist_ok=True)
    (out / "config.txt").write_text(format_config(cfg))
    spec = cfg.lattice()
    seeds = cfg.seeds()
    truth = _stage("phantom", make_phantom, cfg)
    write_volume(out / "phantom.vol", truth)
    scheme = _stage("scheme", make_scheme, cfg)
    write_scheme(out / "scheme.txt", scheme)
    rows = []
    if cfg.solver == "ap":
        mask = _stage("mask", make_mask, cfg)
        patterns = _stage("simulate", simulate_patterns, truth, scheme.directions, mask, cfg.oversampled)
        op = _stage("operator", build_forward, scheme, mask, spec, cfg.oversampled, True, cfg.cg_tol, cfg.cg_maxiter, cfg.linear_solver)
        for i, (level, s) in enumerate(_stage("noise", _noise_levels, cfg, patterns)):
            data = patterns if s is None else _stage("noise", poissonize_many, patterns, NoiseSpec(s, seeds["noise"]))
            report = _stage("reconstruct", ap_reconstruct, op, stack_magnitudes(data), seeds["init"], cfg.max_iters, truth)
            write_volume(out / f"recon_{i}.vol", report.final_object)
            write_report_csv(out / f"report_{i}.csv", report)
            rows.append({"nsr": level, "iterations": report.iterations, "residual": report.residual, "correlation": report.correlation})
    else:
        if any(v != 0 for v in cfg.nsr) or cfg.s:
            raise StageError("noise", ValueError(f"solver {cfg.solver} takes noiseless projections; set nsr = 0"))
        projs = _stage("simulate", project_many, truth, scheme.directions)
        write_projections(out / "projections.prj", projs)
        if cfg.solver == "vandermonde":
            rec = _stage("reconstruct", vandermonde_tomography, projs, spec)
            resid = float(np.linalg.norm(np.stack([q.values for q in project_many(rec, scheme.directions)]) - np.stack([q.values for q in projs])))
            iters = 1
        else:
            result = _stage("reconstruct", unwrap_tilt_series, wrap_projections(projs), scheme, spec)
            rec, resid, iters = result.object, result.residual, result.iterations
        write_volume(out / "recon_0.vol", rec)
        rows.append({"nsr": 0.0, "iterations": iters, "residual": resid, "correlation": correlation(rec, truth)})
    write_metrics(out / "metrics.csv", rows)
    return rows


def write_metrics(path, rows) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["nsr", "iterations", "residual", "correlation"])
        for r in rows:
            w.writerow([_fmt_real(r["nsr"]), int(r["iterations"]), _fmt_real(r["residual"]), _fmt_real(r["correlation"])])


# ------------------------------------------------------------------ verify


def verify_suite(seed: int = 0) -> list[tuple[str, bool, str]]:
    """Quick invariant checks; each entry is ``(name, passed, detail)``."""
    from .projector import Direction, Family
    from .recon import build_forward, vandermonde_tomography
    from .spectral import verify_slice_theorem
    from .tilt import diversity_check

    rng = np.random.default_rng(seed)
    out = []
    spec = LatticeSpec(5)

    def rand_obj(complex_=True):
        v = rng.standard_normal((5, 5, 5))
        if complex_:
            v = v + 1j * rng.standard_normal((5, 5, 5))
        return Object3D(spec, v)

    worst = max(verify_slice_theorem(rand_obj(), Direction(Family(i % 3), *rng.uniform(-1, 1, 2))) for i in range(10))
    out.append(("slice theorem", worst < 1e-9, f"max deviation {worst:.2e}"))

    scheme = tset_scheme(5, seed)
    op = build_forward(scheme, random_phase_mask(spec, seed), spec)
    f = rand_obj().values
    y = rng.standard_normal(op.data_shape) + 1j * rng.standard_normal(op.data_shape)
    lhs, rhs = np.vdot(op.forward(f), y), np.vdot(f, op.adjoint(y))
    rel = abs(lhs - rhs) / abs(lhs)
    out.append(("adjoint identity", rel < 1e-10, f"relative mismatch {rel:.2e}"))

    obj = rand_obj()
    dirs = [Direction.z(*rng.uniform(-1, 1, 2)) for _ in range(5)]
    rec = vandermonde_tomography(project_many(obj, dirs), spec)
    err = np.linalg.norm(rec.values - obj.values) / np.linalg.norm(obj.values)
    out.append(("tomography round trip", err < 1e-8, f"relative error {err:.2e}"))

    rep = diversity_check(random_tilt_scheme(5, 100, seed), spec)
    out.append(("diversity of random scheme", rep.satisfied, f"min node gap {rep.min_node_gap:.2e}"))
    return out


# -------------------------------------------------------------------- main


def _config_from_args(args) -> ExperimentConfig:
    cfg = load_config(args.config) if args.config else ExperimentConfig()
    updates = {}
    if args.seed is not None:
        updates["seed"] = args.seed
    if args.out is not None:
        updates["out"] = args.out
    if updates:
        cfg = ExperimentConfig(**{**{f.name: getattr(cfg, f.name) for f in fields(cfg)}, **updates})
    return cfg


def _cmd_phantom(cfg, args):
    out = Path(cfg.out)
    out.mkdir(parents=True, exist_ok=True)
    write_volume(out / "phantom.vol", _stage("phantom", make_phantom, cfg))


def _cmd_scheme(cfg, args):
    out = Path(cfg.out)
    out.mkdir(parents=True, exist_ok=True)
    write_scheme(out / "scheme.txt", _stage("scheme", make_scheme, cfg))


def _cmd_simulate(cfg, args):
    out = Path(cfg.out)
    out.mkdir(parents=True, exist_ok=True)
    truth = _stage("phantom", make_phantom, cfg)
    scheme = _stage("scheme", make_scheme, cfg)
    mask = _stage("mask", make_mask, cfg)
    write_volume(out / "phantom.vol", truth)
    write_scheme(out / "scheme.txt", scheme)
    patterns = _stage("simulate", simulate_patterns, truth, scheme.directions, mask, cfg.oversampled)
    write_patterns(out / "patterns.pat", patterns)
    for i, (level, s) in enumerate(_stage("noise", _noise_levels, cfg, patterns)):
        if s is not None:
            write_patterns(out / f"counts_{i}.pat", _stage("noise", poissonize_many, patterns, NoiseSpec(s, cfg.seeds()["noise"])))


def _cmd_reconstruct(cfg, args):
    from .recon import ap_reconstruct, build_forward, write_report_csv

    out = Path(cfg.out)
    out.mkdir(parents=True, exist_ok=True)
    spec = cfg.lattice()
    patterns = _stage("load", read_patterns, args.patterns, spec)
    scheme = TiltScheme(tuple(p.direction for p in patterns), cfg.epsilon or 0.5 / cfg.n)
    truth = read_volume(args.truth, cfg.kappa) if args.truth else None
    op = _stage("operator", build_forward, scheme, make_mask(cfg), spec, cfg.oversampled, True, cfg.cg_tol, cfg.cg_maxiter, cfg.linear_solver)
    report = _stage("reconstruct", ap_reconstruct, op, patterns, cfg.seeds()["init"], cfg.max_iters, truth)
    write_volume(out / "recon.vol", report.final_object)
    write_report_csv(out / "report.csv", report)


def _cmd_run(cfg, args):
    rows = run_experiment(cfg)
    for r in rows:
        print(f"nsr={r['nsr']:.3g} iterations={r['iterations']} correlation={r['correlation']:.6f}")


def _cmd_verify(cfg, args):
    results = verify_suite(cfg.seed)
    for name, ok, detail in results:
        print(f"{'PASS' if ok else 'FAIL'}  {name}: {detail}")
    if not all(ok for _, ok, _ in results):
        raise StageError("verify", RuntimeError("invariant check failed"))


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(prog="difftomo", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=__version__)
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="key = value configuration file")
    common.add_argument("--seed", type=int, help="override the config seed")
    common.add_argument("--out", help="output directory")
    sub = parser.add_subparsers(dest="command", required=True)
    sub.add_parser("phantom", parents=[common], help="write the slice-and-stack phantom")
    sub.add_parser("scheme", parents=[common], help="write the tilt scheme")
    sub.add_parser("simulate", parents=[common], help="simulate diffraction patterns and noisy counts")
    rec = sub.add_parser("reconstruct", parents=[common], help="run AP on a PAT1 stack")
    rec.add_argument("patterns", help="PAT1 file")
    rec.add_argument("--truth", help="VOL1 ground truth for correlation tracking")
    sub.add_parser("run", parents=[common], help="end-to-end experiment")
    sub.add_parser("verify", parents=[common], help="run the invariant checks")
    sub.add_parser("config", parents=[common], help="print the canonical configuration")
    args = parser.parse_args(argv)
    handlers = {
        "phantom": _cmd_phantom,
        "scheme": _cmd_scheme,
        "simulate": _cmd_simulate,
        "reconstruct": _cmd_reconstruct,
        "run": _cmd_run,
        "verify": _cmd_verify,
        "config": lambda cfg, a: print(format_config(cfg), end=""),
    }
    try:
        cfg = _config_from_args(args)
    except (OSError, ValueError) as exc:
        print(f"difftomo: stage config failed: {exc}", file=sys.stderr)
        return 2
    try:
        handlers[args.command](cfg, args)
    except StageError as exc:
        print(f"difftomo: {exc}", file=sys.stderr)
        return 1
    except OSError as exc:
        print(f"difftomo: stage io failed: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
