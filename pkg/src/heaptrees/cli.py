"""Command-line front end.

Exit codes: 0 success, 1 usage or input error, 2 a declared tolerance failed.
"""

from __future__ import annotations

import argparse
import json
import secrets
import sys
from importlib import resources
from pathlib import Path

from . import experiments as ex
from . import hammersley_process as hp
from . import heap_sort as hs
from . import root_process as rp
from .distributions import Atom, OffspringDistribution, RandomStream, marked_ppp_arrays
from .record import GraphicalRecord
from .render import record_to_svg

EXIT_OK, EXIT_USAGE, EXIT_FAIL = 0, 1, 2


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        print(f"{self.prog}: error: {message}", file=sys.stderr)
        sys.exit(EXIT_USAGE)


def _seed(args) -> int:
    if args.seed is None:
        args.seed = secrets.randbits(63)
        print(f"seed: {args.seed}", file=sys.stderr)
    return args.seed


def _dist(spec: str | None) -> OffspringDistribution:
    if spec is None:
        raise UsageError("--dist is required")
    try:
        return OffspringDistribution.parse(spec)
    except ValueError as exc:
        raise UsageError(str(exc)) from exc


def run_config(args) -> dict:
    """Serializable view of the arguments; ``jobs`` and ``out`` do not affect results and are left out."""
    return {k: v for k, v in sorted(vars(args).items()) if k not in ("func", "jobs", "out")}


def _emit(text: str, out: str | None) -> None:
    if out:
        Path(out).write_text(text, encoding="utf-8")
    else:
        sys.stdout.write(text)


def read_items(text: str, dist: OffspringDistribution | None, seed: int | None) -> list[tuple[float, int]]:
    """Parse ``label[,lives]`` lines; missing lives are drawn from ``dist``."""
    labels, lives = [], []
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        parts = [p.strip() for p in line.split(",")]
        try:
            if len(parts) == 1:
                labels.append(float(parts[0]))
                lives.append(None)
            elif len(parts) == 2:
                labels.append(float(parts[0]))
                v = float(parts[1])
                if v != int(v):
                    raise ValueError("lives must be an integer")
                lives.append(int(v))
            else:
                raise ValueError("expected label[,lives]")
        except ValueError as exc:
            raise UsageError(f"line {lineno}: {exc}: {raw!r}") from exc
    missing = [i for i, v in enumerate(lives) if v is None]
    if missing:
        if dist is None:
            raise UsageError("labels without lives need --dist")
        gen = RandomStream.for_replica(seed, "sort", 0).generator()
        drawn = dist.sample(gen, len(missing))
        for i, v in zip(missing, drawn):
            lives[i] = int(v)
    return list(zip(labels, lives))


def cmd_sort(args) -> int:
    if (args.input is None) == (args.n is None):
        raise UsageError("give exactly one of an input file or --n")
    dist = _dist(args.dist) if args.dist else None
    if args.n is not None:
        if args.n < 0 or dist is None:
            raise UsageError("--n needs a non-negative size and --dist")
        gen = RandomStream.for_replica(_seed(args), "sort-random", 0).generator()
        items = list(zip(gen.random(args.n).tolist(), dist.sample(gen, args.n).tolist()))
    else:
        try:
            text = sys.stdin.read() if args.input == "-" else Path(args.input).read_text(encoding="utf-8")
        except OSError as exc:
            raise UsageError(str(exc)) from exc
        seed = _seed(args) if dist is not None else args.seed
        items = read_items(text, dist, seed)
    try:
        state = hs.sort(items)
    except ValueError as exc:
        raise UsageError(str(exc)) from exc
    print(state.root_count)
    if args.out:
        data = {"config": run_config(args), "forest": state.to_dict(), "trees": state.shapes()}
        _emit(json.dumps(data, indent=1) + "\n", args.out)
    return EXIT_OK


def _simulated_record(args) -> GraphicalRecord:
    dist = _dist(args.dist)
    gen = RandomStream.for_replica(_seed(args), "simulate", 0).generator()
    if args.t is None or args.t <= 0:
        raise UsageError("--t must be positive")
    boundary = None
    if args.lam is not None and args.lam > 0:
        alpha = args.alpha if args.alpha is not None else (dist.alpha if dist.kind == "geom" else 1.0)
        boundary = hp.stationary_boundary(args.x_lo, args.x_hi, args.t, args.lam, alpha, dist, gen)
    return hp.simulate(args.x_lo, args.x_hi, args.t, dist, boundary, gen)


def cmd_simulate(args) -> int:
    rec = _simulated_record(args)
    fmt = args.format or "json"
    if fmt == "json":
        data = rec.to_dict()
        data["config"] = run_config(args)
        _emit(json.dumps(data, indent=1) + "\n", args.out)
    elif fmt == "svg":
        _emit(record_to_svg(rec), args.out)
    else:
        lines = ["label,birth,death,lives,parent,source"]
        for v in range(len(rec)):
            d = rec.deaths[v]
            lines.append(f"{rec.labels[v]!r},{rec.births[v]!r},{'' if d == float('inf') else repr(d)},"
                         f"{rec.lives[v]},{rec.parent[v]},{int(rec.is_source[v])}")
        _emit("\n".join(lines) + "\n", args.out)
    if args.out:
        print(f"particles at t: {len(rec.alive_positions(args.t))}, left exits: {len(rec.left_exits)}")
    return EXIT_OK


def cmd_roots(args) -> int:
    """Root heights of the box ``[-x, 0] x (0, t)``, optionally with stationary sinks and sources."""
    dist = _dist(args.dist)
    if args.t is None or args.t <= 0:
        raise UsageError("--t must be positive")
    gen = RandomStream.for_replica(_seed(args), "roots", 0).generator()
    width = args.x_hi - args.x_lo
    lab, tim, liv = marked_ppp_arrays(-width, 0.0, 0.0, args.t, dist, gen)
    atoms = [Atom(float(u), float(s), int(v)) for u, s, v in zip(lab, tim, liv)]
    sinks, sources = [], []
    if args.lam is not None and args.lam > 0:
        alpha = args.alpha if args.alpha is not None else (dist.alpha if dist.kind == "geom" else 1.0)
        b = hp.stationary_boundary(-width, 0.0, args.t, args.lam, alpha, dist, gen)
        sinks = [s for s in b.sinks if s < args.t]
        sources = b.sources
    checkpoints = [width * k / 4 for k in range(1, 4)]
    config, snaps = rp.evolve(sinks, sources, atoms, width, args.t, checkpoints)
    data = {"config": run_config(args), "roots": config.heights,
            "checkpoints": {repr(k): v.heights for k, v in snaps.items()}}
    if (args.format or "json") == "csv":
        _emit("height\n" + "".join(f"{h!r}\n" for h in config.heights), args.out)
    else:
        _emit(json.dumps(data, indent=1) + "\n", args.out)
    if args.out:
        print(len(config))
    return EXIT_OK


def _load_manifest(ref: str) -> dict:
    path = Path(ref)
    if path.exists():
        return ex.load_manifest(str(path))
    name = ref if ref.endswith(".json") else ref + ".json"
    res = resources.files("heaptrees").joinpath("manifests", name)
    if not res.is_file():
        raise UsageError(f"no manifest file or packaged manifest named {ref!r}")
    return ex.validate_manifest(json.loads(res.read_text(encoding="utf-8")))


def packaged_manifests() -> list[str]:
    root = resources.files("heaptrees").joinpath("manifests")
    return sorted(p.name[:-5] for p in root.iterdir() if p.name.endswith(".json"))


def cmd_experiment(args) -> int:
    if args.list:
        print("\n".join(packaged_manifests()))
        return EXIT_OK
    if not args.manifest:
        raise UsageError("--manifest is required")
    try:
        m = _load_manifest(args.manifest)
        if args.replicas is not None:
            m["replicas"] = args.replicas
        if args.seed is not None:
            m["seed"] = args.seed
        m = ex.validate_manifest(m)
        rep = ex.run_manifest(m, jobs=args.jobs)
    except ValueError as exc:
        raise UsageError(str(exc)) from exc
    rep.details["run_config"] = run_config(args)
    body = rep.summary_csv() if args.format == "csv" else rep.to_json()
    if args.out:
        out = Path(args.out)
        if out.suffix:
            out.write_text(body, encoding="utf-8")
        else:
            out.mkdir(parents=True, exist_ok=True)
            stem = Path(args.manifest).stem
            formats = m.get("outputs") or ["json", "csv"]
            unknown = set(formats) - {"json", "csv"}
            if unknown:
                raise UsageError(f"unknown outputs {sorted(unknown)}; use json and/or csv")
            if "json" in formats:
                (out / f"{stem}.json").write_text(rep.to_json(), encoding="utf-8")
            if "csv" in formats:
                (out / f"{stem}.csv").write_text(rep.summary_csv(), encoding="utf-8")
        for line in rep.lines():
            print(line)
    else:
        sys.stdout.write(body)
    status = "PASS" if rep.passed else "FAIL"
    print(f"{status} {rep.experiment} ({rep.wall_clock:.1f}s)", file=sys.stderr)
    return EXIT_OK if rep.passed else EXIT_FAIL


def cmd_render(args) -> int:
    try:
        text = Path(args.input).read_text(encoding="utf-8")
        data = json.loads(text)
        data.pop("config", None)
        rec = GraphicalRecord.from_dict(data)
    except (OSError, ValueError, AssertionError) as exc:
        raise UsageError(f"cannot read record: {exc}") from exc
    _emit(record_to_svg(rec, color_trees=not args.plain), args.out)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--seed", type=int, default=None, help="master seed (drawn and printed if omitted)")
    common.add_argument("--jobs", type=int, default=1, help="worker processes for replicas")
    common.add_argument("--out", default=None, help="output file (or directory for experiment)")
    common.add_argument("--format", choices=["json", "csv", "svg"], default=None)

    model = argparse.ArgumentParser(add_help=False)
    model.add_argument("--dist", default=None, help="dirac:K, geom:ALPHA or table:V1=P1,V2=P2,...")
    model.add_argument("--alpha", type=float, default=None, help="sink parameter (defaults to the geometric alpha)")
    model.add_argument("--lambda", dest="lam", type=float, default=None, help="source intensity")
    model.add_argument("--t", type=float, default=None, help="time horizon")
    model.add_argument("--x-lo", type=float, default=0.0)
    model.add_argument("--x-hi", type=float, default=1.0)

    p = _Parser(prog="heaptrees", description="Heap patience sorting and Hammersley tree processes")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    s = sub.add_parser("sort", parents=[common], help="sort a file of label[,lives] lines")
    s.add_argument("input", nargs="?", default=None, help="input file, or - for standard input")
    s.add_argument("--dist", default=None, help="law for lines without lives")
    s.add_argument("--n", type=int, default=None, help="sort n uniform labels instead of a file")
    s.set_defaults(func=cmd_sort)

    s = sub.add_parser("simulate", parents=[common, model], help="simulate the process on a box")
    s.set_defaults(func=cmd_simulate)

    s = sub.add_parser("roots", parents=[common, model], help="run the root process on a box")
    s.set_defaults(func=cmd_roots)

    s = sub.add_parser("experiment", parents=[common], help="run an experiment manifest")
    s.add_argument("--manifest", default=None, help="manifest path or packaged manifest name")
    s.add_argument("--replicas", type=int, default=None, help="override the manifest replica count")
    s.add_argument("--list", action="store_true", help="list packaged manifests")
    s.set_defaults(func=cmd_experiment)

    s = sub.add_parser("render", parents=[common], help="render a record JSON to SVG")
    s.add_argument("input", help="record JSON")
    s.add_argument("--plain", action="store_true", help="no tree colouring")
    s.set_defaults(func=cmd_render)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
