"""Command-line interface: simulate | analyze | detect with replayable runs.

Every run writes its outputs plus manifest.json into --out.  The
manifest records the resolved command, parameters and seed -- but not
the output directory or thread count, neither of which affects the
bytes produced -- so

    pointproc --manifest <out>/manifest.json --out <elsewhere>

reproduces the original outputs byte for byte.  On failure all files
written by the run are removed and the exit status is non-zero.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import __version__, io
from .core import (
    CountGrid,
    DegenerateDataError,
    EnvelopeError,
    GridSpec,
    InsufficientDataError,
    ParameterError,
    Region,
    RngStream,
    SpaceTimeEvents,
    SpatialPattern,
)
from .detect import aggregate_to_grid, gi_star, space_time_scan
from .spatial import (
    csr_envelope,
    dispersion_by_block,
    f_function,
    g_function,
    kde_surface,
    mean_min_distance,
    nni,
    quadrat_counts,
    ripleys_k,
    simulate_csr,
)
from .temporal import (
    ExponentialKernel,
    HawkesModel,
    IntensityFn,
    branching_factor,
    simulate_hawkes,
    simulate_hpp,
    simulate_nhpp,
)

_USER_ERRORS = (
    ParameterError,
    EnvelopeError,
    InsufficientDataError,
    DegenerateDataError,
)


# ---------------------------------------------------------------- parsing

def _region_arg(s: str) -> list[float]:
    parts = s.split(",")
    if len(parts) != 4:
        raise argparse.ArgumentTypeError("region must be xmin,xmax,ymin,ymax")
    try:
        return [float(p) for p in parts]
    except ValueError:
        raise argparse.ArgumentTypeError(f"region has a non-numeric bound: {s!r}")


def _floats_arg(s: str) -> list[float]:
    try:
        vals = [float(p) for p in s.split(",") if p.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers: {s!r}")
    if not vals:
        raise argparse.ArgumentTypeError("expected at least one number")
    return vals


def _ints_arg(s: str) -> list[int]:
    try:
        vals = [int(p) for p in s.split(",") if p.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers: {s!r}")
    if not vals:
        raise argparse.ArgumentTypeError("expected at least one integer")
    return vals


def _segments_arg(s: str) -> list[list[float]]:
    """start:end:rate triples, comma separated."""
    segs = []
    for part in s.split(","):
        bits = part.split(":")
        if len(bits) != 3:
            raise argparse.ArgumentTypeError(
                f"segment must be start:end:rate, got {part!r}"
            )
        try:
            segs.append([float(b) for b in bits])
        except ValueError:
            raise argparse.ArgumentTypeError(f"non-numeric segment field in {part!r}")
    if not segs:
        raise argparse.ArgumentTypeError("expected at least one segment")
    return segs


def _paths_arg(s: str) -> list[str]:
    vals = [p.strip() for p in s.split(",") if p.strip()]
    if not vals:
        raise argparse.ArgumentTypeError("expected at least one path")
    return vals


def _common_parent() -> argparse.ArgumentParser:
    # SUPPRESS keeps post-subcommand flags from clobbering top-level ones
    c = argparse.ArgumentParser(add_help=False)
    c.add_argument("--seed", type=int, default=argparse.SUPPRESS)
    c.add_argument("--out", default=argparse.SUPPRESS)
    c.add_argument("--threads", type=int, default=argparse.SUPPRESS)
    return c


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(
        prog="pointproc",
        description="Simulate point processes and analyze point patterns.",
    )
    p.add_argument("--seed", type=int, default=None, help="RNG seed (env POINTPROC_SEED)")
    p.add_argument("--out", default=None, help="output directory (default .)")
    p.add_argument("--threads", type=int, default=None, help="worker threads")
    p.add_argument("--manifest", default=None, help="replay a recorded run")
    p.add_argument("--version", action="version", version=f"pointproc {__version__}")
    common = [_common_parent()]
    sub = p.add_subparsers(dest="command")

    sim = sub.add_parser("simulate", help="generate synthetic data")
    simsub = sim.add_subparsers(dest="subcommand", required=True)

    hpp = simsub.add_parser("hpp", parents=common, help="homogeneous Poisson events")
    hpp.add_argument("--rate", type=float, required=True)
    hpp.add_argument("--horizon", type=float, required=True)

    nhpp = simsub.add_parser("nhpp", parents=common, help="non-homogeneous Poisson events")
    nhpp.add_argument(
        "--intensity", choices=("constant", "piecewise", "sinusoid"), required=True
    )
    nhpp.add_argument("--horizon", type=float, required=True)
    nhpp.add_argument("--rate", type=float, help="constant: the rate")
    nhpp.add_argument("--segments", type=_segments_arg, help="piecewise: start:end:rate,...")
    nhpp.add_argument("--base", type=float, help="sinusoid: baseline rate")
    nhpp.add_argument("--amplitude", type=float, help="sinusoid: swing")
    nhpp.add_argument("--period", type=float, help="sinusoid: period")

    hawkes = simsub.add_parser("hawkes", parents=common, help="self-exciting events")
    hawkes.add_argument("--mu", type=float, required=True)
    hawkes.add_argument("--alpha", type=float, required=True)
    hawkes.add_argument("--beta", type=float, required=True)
    hawkes.add_argument("--horizon", type=float, required=True)

    csr = simsub.add_parser("csr", parents=common, help="uniform random points")
    csr.add_argument("--rate", type=float, required=True)
    csr.add_argument("--region", type=_region_arg, required=True)

    ana = sub.add_parser("analyze", help="summaries of a point pattern")
    anasub = ana.add_subparsers(dest="subcommand", required=True)

    def pattern_parser(name, help_):
        q = anasub.add_parser(name, parents=common, help=help_)
        q.add_argument("--in", dest="input", required=True, help="x,y CSV or GeoJSON")
        q.add_argument("--region", type=_region_arg, required=True)
        return q

    kde = pattern_parser("kde", "disc-count density surface")
    kde.add_argument("--nx", type=int, required=True)
    kde.add_argument("--ny", type=int, required=True)
    kde.add_argument("--bandwidth", type=float, required=True)

    g = pattern_parser("g", "nearest-neighbour distance CDF")
    g.add_argument("--radii", type=_floats_arg, required=True)
    g.add_argument("--envelope", type=int, default=None, metavar="NSIM")

    f = pattern_parser("f", "empty-space distance CDF")
    f.add_argument("--radii", type=_floats_arg, required=True)
    f.add_argument("--probe-nx", type=int, required=True)
    f.add_argument("--probe-ny", type=int, required=True)
    f.add_argument("--envelope", type=int, default=None, metavar="NSIM")

    k = pattern_parser("k", "Ripley's K")
    k.add_argument("--radii", type=_floats_arg, required=True)
    k.add_argument("--correction", choices=("none", "border"), default="none")
    k.add_argument("--envelope", type=int, default=None, metavar="NSIM")

    pattern_parser("nni", "nearest-neighbour index")

    quad = pattern_parser("quadrat", "cell counts and chi-square CSR test")
    quad.add_argument("--nx", type=int, required=True)
    quad.add_argument("--ny", type=int, required=True)

    disp = pattern_parser("dispersion", "variance/mean by block size")
    disp.add_argument("--nx", type=int, required=True)
    disp.add_argument("--ny", type=int, required=True)
    disp.add_argument("--blocks", type=_ints_arg, required=True)

    det = sub.add_parser("detect", help="hotspot and cluster detection")
    detsub = det.add_subparsers(dest="subcommand", required=True)

    gis = detsub.add_parser("gistar", parents=common, help="Getis-Ord GI* z-scores")
    gis.add_argument("--in", dest="input", required=True)
    gis.add_argument("--region", type=_region_arg, required=True)
    gis.add_argument("--nx", type=int, required=True)
    gis.add_argument("--ny", type=int, required=True)
    gis.add_argument("--radius", type=float, required=True)

    scan = detsub.add_parser("scan", parents=common, help="space-time scan statistic")
    scan.add_argument("--in", dest="input", required=True, help="x,y,t CSV or GeoJSON")
    scan.add_argument("--region", type=_region_arg, required=True)
    scan.add_argument("--horizon", type=float, required=True)
    scan.add_argument("--nx", type=int, required=True)
    scan.add_argument("--ny", type=int, required=True)
    scan.add_argument("--slices", type=int, required=True)
    scan.add_argument("--radii", type=_floats_arg, required=True)
    scan.add_argument("--durations", type=_floats_arg, required=True)
    scan.add_argument("--nsim", type=int, default=999)
    scan.add_argument("--baseline", type=_paths_arg, default=None,
                      help="per-slice count grids, comma separated")
    scan.add_argument("--top", type=int, default=None, help="keep only the best N")
    return p


# ----------------------------------------------------------- run plumbing

_PARAM_KEYS = {
    ("simulate", "hpp"): ("rate", "horizon"),
    ("simulate", "nhpp"): (
        "intensity", "horizon", "rate", "segments", "base", "amplitude", "period",
    ),
    ("simulate", "hawkes"): ("mu", "alpha", "beta", "horizon"),
    ("simulate", "csr"): ("rate", "region"),
    ("analyze", "kde"): ("input", "region", "nx", "ny", "bandwidth"),
    ("analyze", "g"): ("input", "region", "radii", "envelope"),
    ("analyze", "f"): ("input", "region", "radii", "probe_nx", "probe_ny", "envelope"),
    ("analyze", "k"): ("input", "region", "radii", "correction", "envelope"),
    ("analyze", "nni"): ("input", "region"),
    ("analyze", "quadrat"): ("input", "region", "nx", "ny"),
    ("analyze", "dispersion"): ("input", "region", "nx", "ny", "blocks"),
    ("detect", "gistar"): ("input", "region", "nx", "ny", "radius"),
    ("detect", "scan"): (
        "input", "region", "horizon", "nx", "ny", "slices",
        "radii", "durations", "nsim", "baseline", "top",
    ),
}


@dataclass
class RunConfig:
    """A fully resolved invocation; serializes to/from the manifest."""

    command: str
    subcommand: str
    seed: int
    threads: int
    params: dict
    derived: dict = field(default_factory=dict)

    def manifest(self) -> dict:
        # threads deliberately absent: outputs are thread-invariant
        doc = {
            "tool": "pointproc",
            "version": __version__,
            "command": self.command,
            "subcommand": self.subcommand,
            "seed": self.seed,
            "params": self.params,
        }
        if self.derived:
            doc["derived"] = self.derived
        return doc


def _resolve_seed(value) -> int:
    if value is not None:
        return int(value)
    env = os.environ.get("POINTPROC_SEED")
    if env is not None:
        try:
            return int(env)
        except ValueError:
            raise ParameterError(f"POINTPROC_SEED is not an integer: {env!r}")
    return 0


def _config_from_args(args) -> RunConfig:
    key = (args.command, args.subcommand)
    params = {k: getattr(args, k) for k in _PARAM_KEYS[key]}
    return RunConfig(
        command=args.command,
        subcommand=args.subcommand,
        seed=_resolve_seed(args.seed),
        threads=max(1, args.threads or 1),
        params=params,
    )


def _config_from_manifest(path, threads_override) -> RunConfig:
    try:
        doc = json.loads(Path(path).read_text())
    except FileNotFoundError:
        raise ParameterError(f"manifest not found: {path}")
    except json.JSONDecodeError as e:
        raise ParameterError(f"{path}: invalid manifest JSON: {e}")
    for fld in ("command", "subcommand", "seed", "params"):
        if fld not in doc:
            raise ParameterError(f"{path}: manifest is missing {fld!r}")
    key = (doc["command"], doc["subcommand"])
    if key not in _PARAM_KEYS:
        raise ParameterError(f"{path}: unknown command {key[0]} {key[1]}")
    missing = [k for k in _PARAM_KEYS[key] if k not in doc["params"]]
    if missing:
        raise ParameterError(f"{path}: manifest params missing {missing}")
    params = {k: doc["params"][k] for k in _PARAM_KEYS[key]}
    threads = threads_override if threads_override else 1
    return RunConfig(
        command=doc["command"],
        subcommand=doc["subcommand"],
        seed=int(doc["seed"]),
        threads=max(1, int(threads)),
        params=params,
    )


class _Session:
    """Tracks files written by one run so failures can clean up."""

    def __init__(self, outdir: Path):
        self.outdir = outdir
        self.written: list[Path] = []

    def path(self, name: str) -> Path:
        p = self.outdir / name
        self.written.append(p)
        return p

    def rollback(self) -> None:
        for p in self.written:
            try:
                p.unlink()
            except FileNotFoundError:
                pass


# ------------------------------------------------------------- commands

def _build_intensity(p) -> IntensityFn:
    kind = p["intensity"]
    horizon = p["horizon"]
    if kind == "constant":
        if p.get("rate") is None:
            raise ParameterError("constant intensity needs --rate")
        return IntensityFn.constant(p["rate"], horizon)
    if kind == "piecewise":
        if not p.get("segments"):
            raise ParameterError("piecewise intensity needs --segments")
        segs = [tuple(map(float, s)) for s in p["segments"]]
        if segs[-1][1] < horizon:
            raise ParameterError(
                f"segments end at {segs[-1][1]} but horizon is {horizon}"
            )
        return IntensityFn.piecewise(segs)
    if kind == "sinusoid":
        for name in ("base", "amplitude", "period"):
            if p.get(name) is None:
                raise ParameterError(f"sinusoid intensity needs --{name}")
        return IntensityFn.sinusoid(p["base"], p["amplitude"], p["period"], horizon)
    raise ParameterError(f"unknown intensity kind {kind!r}")


def _cmd_simulate(cfg: RunConfig, session: _Session) -> None:
    p = cfg.params
    rng = RngStream(cfg.seed)
    if cfg.subcommand == "csr":
        pattern = simulate_csr(p["rate"], Region(*p["region"]), rng)
        io.write_points_csv(session.path("points.csv"), pattern)
        return
    if cfg.subcommand == "hpp":
        events = simulate_hpp(p["rate"], p["horizon"], rng)
    elif cfg.subcommand == "nhpp":
        events = simulate_nhpp(_build_intensity(p), p["horizon"], rng)
    else:
        model = HawkesModel(p["mu"], ExponentialKernel(p["alpha"], p["beta"]))
        b = branching_factor(model)
        cfg.derived = {"n_star": b.value, "regime": b.regime}
        events = simulate_hawkes(model, p["horizon"], rng)
    io.write_event_times(session.path("events.csv"), events)


def _load_pattern(p) -> SpatialPattern:
    region = Region(*p["region"])
    path = str(p["input"])
    if path.endswith((".geojson", ".json")):
        pts, _ = io.read_geojson_points(path)
    else:
        pts = io.read_points_csv(path)
    return SpatialPattern(pts, region)


def _cmd_analyze(cfg: RunConfig, session: _Session) -> None:
    p = cfg.params
    kind = cfg.subcommand
    pattern = _load_pattern(p)
    region = pattern.region

    if kind == "kde":
        spec = GridSpec(region, p["nx"], p["ny"])
        if p["bandwidth"] > 0.5 * min(region.width, region.height):
            print(
                "note: bandwidth exceeds half the region extent; "
                "most of each disc falls outside the region",
                file=sys.stderr,
            )
        surface = kde_surface(pattern, spec, p["bandwidth"])
        io.write_grid_csv(session.path("kde.csv"), spec, surface.values)
        return

    if kind in ("g", "f", "k"):
        radii = p["radii"]
        probe = (
            GridSpec(region, p["probe_nx"], p["probe_ny"]) if kind == "f" else None
        )
        correction = p.get("correction", "none")
        if p.get("envelope") is not None:
            env = csr_envelope(
                pattern,
                kind,
                radii,
                p["envelope"],
                RngStream(cfg.seed),
                correction=correction,
                probe_spec=probe,
                threads=cfg.threads,
            )
            io.write_curve_csv(
                session.path(f"{kind}.csv"), env.radii, env.observed, env.lower, env.upper
            )
        else:
            if kind == "g":
                curve = g_function(pattern, radii)
            elif kind == "f":
                curve = f_function(pattern, probe, radii)
            else:
                curve = ripleys_k(pattern, radii, correction=correction)
            io.write_curve_csv(session.path(f"{kind}.csv"), radii, curve)
        return

    if kind == "nni":
        index = nni(pattern)
        lines = [
            "statistic,value",
            f"nni,{format(index, '.17g')}",
            f"mean_min_distance,{format(mean_min_distance(pattern), '.17g')}",
            f"intensity,{format(pattern.intensity, '.17g')}",
        ]
        session.path("nni.csv").write_text("\n".join(lines) + "\n")
        return

    spec = GridSpec(region, p["nx"], p["ny"])
    if kind == "quadrat":
        res = quadrat_counts(pattern, spec)
        io.write_grid_csv(session.path("quadrat.csv"), spec, res.grid.counts)
        lines = [
            "statistic,value",
            f"chi_square,{format(res.statistic, '.17g')}",
            f"dof,{res.dof}",
            f"p_value,{format(res.p_value, '.17g')}",
        ]
        session.path("quadrat_test.csv").write_text("\n".join(lines) + "\n")
        return

    if kind == "dispersion":
        rows = dispersion_by_block(pattern, spec, p["blocks"])
        lines = ["block_size,index"] + [
            f"{b},{format(v, '.17g')}" for b, v in rows
        ]
        session.path("dispersion.csv").write_text("\n".join(lines) + "\n")
        return

    raise ParameterError(f"unknown analyze subcommand {kind!r}")


def _cmd_detect(cfg: RunConfig, session: _Session) -> None:
    p = cfg.params
    if cfg.subcommand == "gistar":
        pattern = _load_pattern(p)
        spec = GridSpec(pattern.region, p["nx"], p["ny"])
        zgrid = gi_star(aggregate_to_grid(pattern, spec), p["radius"])
        io.write_grid_csv(session.path("gistar.csv"), spec, zgrid.z, "z")
        return

    region = Region(*p["region"])
    path = str(p["input"])
    if path.endswith((".geojson", ".json")):
        pts, times = io.read_geojson_points(path)
        if times is None:
            raise ParameterError(f"{path}: scan needs a numeric 't' property per feature")
        data = np.column_stack([pts, times]) if len(pts) else np.empty((0, 3))
    else:
        data = io.read_space_time_csv(path)
    events = SpaceTimeEvents(data, region, p["horizon"])
    spec = GridSpec(region, p["nx"], p["ny"])
    baseline = None
    if p.get("baseline"):
        baseline = [
            CountGrid(spec, io.read_count_values(f, spec)) for f in p["baseline"]
        ]
    results = space_time_scan(
        events,
        spec,
        p["slices"],
        p["radii"],
        p["durations"],
        p["nsim"],
        RngStream(cfg.seed),
        baseline=baseline,
        threads=cfg.threads,
    )
    if p.get("top") is not None:
        if p["top"] < 1:
            raise ParameterError(f"--top must be positive, got {p['top']}")
        results = results[: p["top"]]
    io.write_scan_csv(session.path("scan.csv"), results)


_DISPATCH = {
    "simulate": _cmd_simulate,
    "analyze": _cmd_analyze,
    "detect": _cmd_detect,
}


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)

    if args.manifest is not None and args.command is not None:
        parser.error("--manifest replays a recorded run and takes no subcommand")
    if args.manifest is not None and args.seed is not None:
        parser.error("--seed cannot override a manifest (the seed is recorded in it)")
    if args.command is None and args.manifest is None:
        parser.print_usage(sys.stderr)
        return 2

    try:
        if args.manifest is not None:
            cfg = _config_from_manifest(args.manifest, args.threads)
        else:
            cfg = _config_from_args(args)
    except _USER_ERRORS as e:
        print(f"error: {e}", file=sys.stderr)
        return 2

    outdir = Path(args.out) if args.out is not None else Path(".")
    outdir.mkdir(parents=True, exist_ok=True)
    session = _Session(outdir)
    try:
        _DISPATCH[cfg.command](cfg, session)
        manifest_path = session.path("manifest.json")
        manifest_path.write_text(
            json.dumps(cfg.manifest(), indent=2, sort_keys=True) + "\n"
        )
    except _USER_ERRORS as e:
        session.rollback()
        print(f"error: {e}", file=sys.stderr)
        return 1
    except OSError as e:
        session.rollback()
        print(f"error: {e}", file=sys.stderr)
        return 1
    for p in session.written:
        print(f"wrote {p}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
