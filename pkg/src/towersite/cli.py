"""Command-line pipeline: read/synthesize terrain, vix, findmax, viewsheds, site."""

from __future__ import annotations

import argparse
import contextlib
import logging
import os
import resource
import sys
import time
import warnings
from dataclasses import asdict, dataclass, field
from typing import Optional, Sequence

import numpy as np

from . import _backend
from .candidates import find_candidates, partition
from .siting import CumulativeShed, SiteParams, SitingResult, site
from .terrain import generate_fractal, load_ascii_grid, load_binary
from .viewshed import compute_all_viewsheds, write_viewshed
from .vix import estimate_vix

log = logging.getLogger("towersite")

STAGES = ("read", "vix", "findmax", "viewshed", "site")


class StageError(RuntimeError):
    def __init__(self, stage, cause):
        super().__init__(f"[{stage}] {cause}")
        self.stage = stage
        self.cause = cause


@dataclass
class RunConfig:
    params: SiteParams
    input: Optional[str] = None
    nrows: Optional[int] = None
    ncols: Optional[int] = None
    fmt: str = "auto"
    synth: bool = False
    seed: int = 1
    roughness: float = 0.5
    zmin: int = 0
    zmax: int = 1000
    threads: int = 0
    out_dir: str = "towersite-out"
    snapshots: Optional[Sequence[int]] = None  # None: powers of two
    images: bool = True
    dump_vix: bool = False
    dump_candidates: bool = False
    dump_viewsheds: bool = False


@dataclass
class RunReport:
    timings: dict = field(default_factory=dict)
    total_time: float = 0.0
    peak_memory_mb: float = 0.0
    params: dict = field(default_factory=dict)
    nrows: int = 0
    ncols: int = 0
    backend: str = ""
    threads: int = 1
    blocks: tuple = (0, 0)
    candidates: int = 0
    result: Optional[SitingResult] = None

    def summary_lines(self) -> list[str]:
        r = self.result
        lines = [
            f"backend: {self.backend}",
            f"rows: {self.nrows}",
            f"cols: {self.ncols}",
            *(f"param.{k}: {v}" for k, v in self.params.items()),
            f"blocks: {self.blocks[0]}x{self.blocks[1]}",
            f"candidates: {self.candidates}",
        ]
        if r is not None:
            lines += [
                f"selected: {len(r.selected)}",
                f"covered: {r.covered}",
                f"final_coverage: {r.final_coverage:.6f}",
                f"stop_reason: {r.stop_reason}",
            ]
        return lines

    def volatile_lines(self) -> list[str]:
        """Lines that differ between otherwise identical runs."""
        out = [f"time.{s}: {self.timings.get(s, 0.0):.3f}" for s in STAGES]
        out.append(f"time.total: {self.total_time:.3f}")
        out.append(f"memory.peak_rss_mb: {self.peak_memory_mb:.1f}")
        out.append(f"threads: {self.threads}")
        return out

    def text(self) -> str:
        return "\n".join(self.summary_lines() + self.volatile_lines()) + "\n"


@contextlib.contextmanager
def _stage(report: RunReport, name: str):
    t0 = time.perf_counter()
    try:
        yield
    except StageError:
        raise
    except Exception as exc:
        raise StageError(name, exc) from exc
    finally:
        report.timings[name] = time.perf_counter() - t0
    log.info("%-9s %8.3f s", name, report.timings[name])


def render_cumshed(cum: CumulativeShed, path) -> None:
    """Binary PGM: covered posts white (255), the rest black, row 0 on top."""
    img = np.where(cum.to_mask(), 255, 0).astype(np.uint8)
    with open(path, "wb") as fh:
        fh.write(f"P5\n{cum.ncols} {cum.nrows}\n255\n".encode("ascii"))
        fh.write(img.tobytes())


def power_schedule(n: int) -> list[int]:
    """1, 2, 4, ... below ``n``, then ``n`` itself."""
    out, k = [], 1
    while k < n:
        out.append(k)
        k *= 2
    if n:
        out.append(n)
    return out


def render_snapshots(result: SitingResult, viewsheds, dims, schedule, out_dir) -> list[str]:
    """One PGM per schedule entry k: union of the first k selected viewsheds."""
    schedule = list(schedule)
    if any(b < a for a, b in zip(schedule, schedule[1:])):
        raise ValueError("snapshot schedule must be ascending")
    os.makedirs(out_dir, exist_ok=True)
    nrows, ncols = dims
    cum = CumulativeShed(nrows, ncols)
    done = 0
    paths = []
    for k in schedule:
        if k > len(result.selected):
            warnings.warn(f"snapshot {k} exceeds the {len(result.selected)} sited "
                          "transmitters; showing the final state", stacklevel=2)
        while done < min(k, len(result.selected)):
            cum.add_viewshed(viewsheds[result.selected[done].index])
            done += 1
        path = os.path.join(out_dir, f"cumshed_{k:06d}.pgm")
        render_cumshed(cum, path)
        paths.append(path)
    return paths


def _load(cfg: RunConfig):
    if cfg.synth:
        if not (cfg.nrows and cfg.ncols):
            raise ValueError("--synth needs --nrows and --ncols")
        return generate_fractal(cfg.nrows, cfg.ncols, cfg.roughness, cfg.seed, cfg.zmin, cfg.zmax)
    if not cfg.input:
        raise ValueError("give --input or --synth")
    fmt = cfg.fmt
    if fmt == "auto":
        fmt = "ascii" if cfg.input.endswith((".asc", ".txt")) else "binary"
    if fmt == "ascii":
        return load_ascii_grid(cfg.input)
    if not (cfg.nrows and cfg.ncols):
        raise ValueError("binary input needs --nrows and --ncols")
    return load_binary(cfg.input, cfg.nrows, cfg.ncols)


def run_pipeline(cfg: RunConfig) -> RunReport:
    """Run all stages, writing results into ``cfg.out_dir``; raises :class:`StageError`."""
    p = cfg.params
    threads = _backend.resolve_threads(cfg.threads)
    report = RunReport(params=asdict(p), backend=_backend.get().NAME, threads=threads)
    os.makedirs(cfg.out_dir, exist_ok=True)
    t0 = time.perf_counter()

    with _stage(report, "read"):
        grid = _load(cfg)
    report.nrows, report.ncols = grid.shape

    with _stage(report, "vix"):
        vix = estimate_vix(grid, p, seed=cfg.seed, threads=threads)
    with _stage(report, "findmax"):
        part = partition(grid.nrows, grid.ncols, p.roi)
        cands = find_candidates(vix, part, p.per_block, threads=threads)
    report.blocks = (part.blocks_y, part.blocks_x)
    report.candidates = len(cands)
    with _stage(report, "viewshed"):
        sheds = compute_all_viewsheds(grid, (cands.rows, cands.cols), p, threads=threads)
    with _stage(report, "site"):
        cum = CumulativeShed(grid.nrows, grid.ncols)
        result = site(sheds, grid.nrows, grid.ncols, p, cum=cum)
    report.result = result
    report.total_time = time.perf_counter() - t0

    out = cfg.out_dir
    result.write_csv(os.path.join(out, "sites.csv"))
    if cfg.dump_vix:
        vix.write(os.path.join(out, "vix.u8"))
    if cfg.dump_candidates:
        cands.write_csv(os.path.join(out, "candidates.csv"))
    if cfg.dump_viewsheds:
        with open(os.path.join(out, "viewsheds.bin"), "wb") as fh:
            for s in result.selected:
                write_viewshed(sheds[s.index], fh)
    if cfg.images:
        render_cumshed(cum, os.path.join(out, "cumshed.pgm"))
        schedule = cfg.snapshots if cfg.snapshots is not None else power_schedule(len(result.selected))
        if schedule:
            render_snapshots(result, sheds, grid.shape, schedule, os.path.join(out, "snapshots"))
    report.peak_memory_mb = resource.getrusage(resource.RUSAGE_SELF).ru_maxrss / 1024
    with open(os.path.join(out, "report.txt"), "w") as fh:
        fh.write(report.text())
    return report


def _schedule(text):
    if text in ("pow2", "auto"):
        return None
    if text == "none":
        return []
    try:
        return [int(x) for x in text.split(",") if x]
    except ValueError:
        raise argparse.ArgumentTypeError("expected pow2, none, or comma-separated counts") from None


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(
        prog="towersite", description="Site radio transmitters on a raster terrain.")
    src = ap.add_argument_group("terrain")
    src.add_argument("--input", help="terrain file (raw LE int16, or .asc/.txt text grid)")
    src.add_argument("--format", dest="fmt", choices=("auto", "binary", "ascii"), default="auto")
    src.add_argument("--nrows", type=int)
    src.add_argument("--ncols", type=int)
    src.add_argument("--synth", action="store_true", help="generate a fractal terrain instead")
    src.add_argument("--seed", type=int, default=1, help="terrain and sampling seed")
    src.add_argument("--roughness", type=float, default=0.5)
    src.add_argument("--zmin", type=int, default=0)
    src.add_argument("--zmax", type=int, default=1000)
    sp = ap.add_argument_group("siting")
    sp.add_argument("--roi", type=int, required=True)
    sp.add_argument("--tx-height", type=float, default=10.0)
    sp.add_argument("--rx-height", type=float, default=10.0)
    sp.add_argument("--coverage", type=float, default=0.95)
    sp.add_argument("--samples", type=int, default=10)
    sp.add_argument("--per-block", type=int, default=20)
    sp.add_argument("--max-selected", type=int)
    run = ap.add_argument_group("run")
    run.add_argument("--threads", type=int, default=0, help="worker cap, 0 = all cores")
    run.add_argument("--out-dir", default="towersite-out")
    run.add_argument("--snapshots", type=_schedule, default=None,
                     help="pow2 (default), none, or e.g. 1,2,4,100")
    run.add_argument("--no-images", action="store_true")
    run.add_argument("--dump-vix", action="store_true")
    run.add_argument("--dump-candidates", action="store_true")
    run.add_argument("--dump-viewsheds", action="store_true")
    run.add_argument("--backend", choices=_backend.available())
    run.add_argument("-v", "--verbose", action="store_true")
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(message)s")
    if args.backend:
        _backend.use(args.backend)
    try:
        params = SiteParams(roi=args.roi, tx_height=args.tx_height, rx_height=args.rx_height,
                            target_coverage=args.coverage, samples_per_point=args.samples,
                            per_block=args.per_block, max_selected=args.max_selected)
    except ValueError as exc:
        print(f"towersite: error [config] {exc}", file=sys.stderr)
        return 2
    cfg = RunConfig(
        params=params, input=args.input, nrows=args.nrows, ncols=args.ncols, fmt=args.fmt,
        synth=args.synth, seed=args.seed, roughness=args.roughness, zmin=args.zmin,
        zmax=args.zmax, threads=args.threads, out_dir=args.out_dir, snapshots=args.snapshots,
        images=not args.no_images, dump_vix=args.dump_vix,
        dump_candidates=args.dump_candidates, dump_viewsheds=args.dump_viewsheds)
    try:
        report = run_pipeline(cfg)
    except StageError as exc:
        print(f"towersite: error {exc}", file=sys.stderr)
        return 1
    print(report.text(), end="")
    return 0


if __name__ == "__main__":
    sys.exit(main())
