"""``ising-gof`` command line.

Exit codes: 0 success, 1 usage or invalid input, 2 null hypothesis rejected,
3 sampling failure, 4 file I/O error.

Seeds: an explicit ``--seed`` wins; otherwise ``ISING_GOF_SEED`` is used if
set; otherwise 0.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import os
import sys
import time
from pathlib import Path

import numpy as np

from . import __version__
from .inference import UnderSampledError, diagnose, run_test
from .io import GridFormatError, format_text_grid, read_grid, write_grid
from .lattice import Configuration, FiberId, LatticeShape, connected_components
from .sampler import BoltzmannModel, ChainSettings, find_fiber_member, generate_boltzmann, run_chain
from .statistics import StatDescriptor, SubtableScheme, default_descriptors, parse_motifs

EXIT_OK, EXIT_USAGE, EXIT_REJECTED, EXIT_SAMPLING, EXIT_IO = 0, 1, 2, 3, 4
SEED_ENV = "ISING_GOF_SEED"
MODELS = {"ising": "none", "second_nearest": "second_nearest", "diagonal": "diagonal", "overall": "overall_parity"}


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def resolve_seed(flag) -> int:
    if flag is not None:
        return int(flag)
    env = os.environ.get(SEED_ENV)
    if env not in (None, ""):
        try:
            return int(env)
        except ValueError:
            raise UsageError(f"{SEED_ENV}={env!r} is not an integer") from None
    return 0


def _pair(text: str) -> FiberId:
    try:
        a, b = (int(x) for x in text.split(","))
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected 'a,b', got {text!r}") from None
    return FiberId(a, b)


def _sha256(path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for block in iter(lambda: fh.read(1 << 20), b""):
            h.update(block)
    return h.hexdigest()


def _load(args) -> Configuration:
    grid = read_grid(args.input, args.format, args.threshold)
    return Configuration.from_grid(grid, args.boundary)


def _write_json(path: Path, obj):
    path.write_text(json.dumps(obj, indent=2, sort_keys=False) + "\n")


def _manifest(args, argv, settings: dict) -> dict:
    out = {"command": args.command, "argv": list(argv), "version": __version__, "settings": settings}
    if getattr(args, "input", None):
        out["input"] = {"path": str(args.input), "sha256": _sha256(args.input)}
    return out


def _descriptors(args) -> list[StatDescriptor]:
    scheme = SubtableScheme(args.K, args.N, args.seed) if args.K > 0 else None
    descs = default_descriptors(scheme)
    if args.motifs:
        motifs = parse_motifs(Path(args.motifs).read_text())
        defaults = {d.label: d for d in descs if d.kind == "motif_count"}
        extra = []
        for m in motifs:
            sided = defaults[m.name].sided if m.name in defaults else "two_sided"
            extra.append(StatDescriptor("motif_count", m, name=m.name, sided=sided))
        replaced = {m.name for m in motifs}
        descs = [d for d in descs if d.label not in replaced]
        descs = extra + descs
    return descs


# -- commands -------------------------------------------------------------------------


def cmd_stats(args, argv) -> int:
    config = _load(args)
    comps = connected_components(config)
    print(f"T1={config.t1} T2={config.t2}")
    census = " ".join(f"{size}x{count}" for size, count in comps.census().items()) or "none"
    print(f"components={len(comps.sizes)} singletons={comps.singletons} sizes={census}")
    return EXIT_OK


def cmd_test(args, argv) -> int:
    args.seed = resolve_seed(args.seed)
    config = _load(args)
    descs = _descriptors(args)
    settings = ChainSettings(args.mode, None, args.steps, args.burn_in, args.thinning, args.seed)
    start = time.perf_counter()
    report = run_test(config, descs, settings, args.chains, workers=args.workers)
    elapsed = time.perf_counter() - start
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    body = report.to_dict()
    body["version"] = __version__
    body["alpha"] = args.alpha
    rejected = [r.descriptor.label for r in report.results if r.pvalue < args.alpha]
    body["rejected"] = rejected
    _write_json(out / "report.json", body)
    names = [d.label for d in descs]
    with open(out / "samples.csv", "w") as fh:
        fh.write(",".join(["chain", "record"] + names) + "\n")
        for c, block in enumerate(report.chain_samples):
            for k, row in enumerate(block):
                fh.write(",".join([str(c), str(k)] + [repr(float(v)) for v in row]) + "\n")
    with open(out / "histogram.csv", "w") as fh:
        fh.write("statistic,value,count\n")
        pooled = report.pooled
        for j, name in enumerate(names):
            values, counts = np.unique(pooled[:, j], return_counts=True)
            for v, n in zip(values, counts):
                fh.write(f"{name},{float(v)!r},{int(n)}\n")
    settings_dict = dict(body["settings"], alpha=args.alpha, descriptors=[d.to_dict() for d in descs],
                         workers=args.workers)
    manifest = _manifest(args, argv, settings_dict)
    manifest["elapsed_seconds"] = round(elapsed, 3)
    _write_json(out / "manifest.json", manifest)
    for r in report.results:
        print(f"{r.descriptor.label:>18}  observed={r.observed:g}  p={r.pvalue:.4f} ({r.descriptor.sided})  "
              f"posterior mean={r.summary.mean:.3f} sd={r.summary.sd:.3f}  R-hat={r.diagnostics.psrf:.3f}")
    print(f"elapsed {elapsed:.2f} s; outputs in {out}")
    if rejected:
        print(f"rejected at alpha={args.alpha}: {', '.join(rejected)}")
        return EXIT_REJECTED
    return EXIT_OK


def cmd_generate(args, argv) -> int:
    args.seed = resolve_seed(args.seed)
    shape = LatticeShape.parse(args.size, "zero_clamped" if args.zero_clamped else "free")
    if args.fiber is not None:
        config = find_fiber_member(shape, args.fiber, seed=args.seed)
        settings = {"fiber": [args.fiber.a, args.fiber.b]}
    else:
        model = BoltzmannModel(args.alpha, args.beta, args.gamma, MODELS[args.model], boundary=args.periodic)
        config = generate_boltzmann(model, shape, args.sweeps, seed=args.seed)
        settings = {"model": args.model, "alpha": args.alpha, "beta": args.beta, "gamma": args.gamma,
                    "boundary": args.periodic, "sweeps": args.sweeps}
    settings.update(size=args.size, seed=args.seed)
    if args.out:
        write_grid(args.out, config.grid, args.out_format)
        _write_json(Path(str(args.out) + ".manifest.json"), _manifest(args, argv, settings))
        print(f"wrote {args.out}: T1={config.t1} T2={config.t2}")
    else:
        sys.stdout.write(format_text_grid(config.grid))
    return EXIT_OK


def cmd_sample(args, argv) -> int:
    args.seed = resolve_seed(args.seed)
    config = _load(args)
    target = args.target or FiberId(config.t1, config.t2)
    settings = ChainSettings(args.mode, target, args.steps, args.burn_in, args.thinning, args.seed,
                             "all_states" if args.all_states else "on_fiber_only")
    run = run_chain(config, settings, keep_states=args.out is not None)
    print(f"fiber=({target.a},{target.b}) mode={args.mode} records={run.n_samples} "
          f"acceptance={run.acceptance_rate:.4f} on_fiber={run.on_fiber_fraction:.4f}")
    if run.frozen:
        print("warning: chain frozen: 0 accepted moves", file=sys.stderr)
    if args.out:
        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
        with open(out / "states.csv", "w") as fh:
            fh.write("step,t2,ones\n")
            for step, t2, cells in zip(run.record_steps, run.t2, run.states):
                fh.write(f"{step},{t2},{' '.join(map(str, np.flatnonzero(cells)))}\n")
        write_grid(out / "final.txt", run.final_state.grid, "text")
        _write_json(out / "manifest.json", _manifest(args, argv, {
            "mode": args.mode, "target": [target.a, target.b], "steps": args.steps, "burn_in": args.burn_in,
            "thinning": args.thinning, "seed": args.seed, "record_policy": settings.record_policy}))
    return EXIT_OK


def cmd_enumerate(args, argv) -> int:
    from .oracle import degree1_move_count, fiber_component_count, fiber_sizes

    shape = LatticeShape.parse(args.size, "zero_clamped" if args.zero_clamped else "free")
    if args.degree1_count:
        print(degree1_move_count(shape))
        return EXIT_OK
    a_values = [args.a] if args.a is not None else range(shape.admissible.size + 1)
    exps = args.expansion
    print("a,b,size," + ",".join(f"components_e{e}" for e in exps))
    for a in a_values:
        for b, size in fiber_sizes(shape, a).items():
            comps = [fiber_component_count(shape, FiberId(a, b), e) for e in exps]
            print(f"{a},{b},{size}," + ",".join(map(str, comps)))
    return EXIT_OK


def cmd_diagnose(args, argv) -> int:
    import csv

    with open(args.samples, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if not header or header[:2] != ["chain", "record"]:
            raise GridFormatError("samples file must start with a 'chain,record,...' header", 1)
        rows = [r for r in reader if r]
    data = np.array([[float(x) for x in r] for r in rows]) if rows else np.zeros((0, len(header)))
    chains = np.unique(data[:, 0]).astype(int)
    out = {}
    for j, name in enumerate(header[2:], start=2):
        per_chain = [data[data[:, 0] == c, j] for c in chains]
        d = diagnose(per_chain, args.max_lag)
        out[name] = d.to_dict()
        lag1 = d.autocorrelation[1][1] if len(d.autocorrelation) > 1 else float("nan")
        print(f"{name:>18}  R-hat={d.psrf:.4f}  ESS={d.ess:.1f}  lag1={lag1:.3f}")
    if args.json:
        _write_json(Path(args.json), out)
    return EXIT_OK


def cmd_replay(args, argv) -> int:
    manifest = json.loads(Path(args.manifest).read_text())
    old = list(manifest["argv"])
    if manifest.get("input") and _sha256(manifest["input"]["path"]) != manifest["input"]["sha256"]:
        raise UsageError("input file changed since the manifest was written")
    seed = manifest.get("settings", {}).get("seed")
    if seed is not None and "--seed" not in old:
        # the seed may have come from the environment
        old += ["--seed", str(seed)]
    if args.out:
        if "--out" not in old:
            raise UsageError("the recorded command has no --out to redirect")
        old[old.index("--out") + 1] = args.out
    return main(old)


# -- parser ------------------------------------------------------------------------------


def _input_args(p):
    p.add_argument("input", help="grid file (text, CSV or PGM)")
    p.add_argument("--format", choices=("text", "csv", "pgm"), help="override the extension-based format")
    p.add_argument("--threshold", type=int, default=128, help="PGM pixels >= threshold are ones (default 128)")
    p.add_argument("--boundary", choices=("free", "zero_clamped"), default="free")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="ising-gof", description="Exact conditional goodness-of-fit tests for binary lattice data.")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("stats", help="sufficient statistics and component census of a grid")
    _input_args(p)

    p = sub.add_parser("test", help="run the swap-chain test and write report files")
    _input_args(p)
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--chains", type=int, default=3)
    p.add_argument("--steps", type=int, default=100_000)
    p.add_argument("--burn-in", type=int, default=10_000)
    p.add_argument("--thinning", type=int, default=10)
    p.add_argument("--mode", choices=("expanded", "strict"), default="expanded")
    p.add_argument("--seed", type=int)
    p.add_argument("--alpha", type=float, default=0.05, help="reject (exit 2) when any p-value is below this")
    p.add_argument("--K", type=int, default=100, help="subtable pairs; 0 disables the dT statistics")
    p.add_argument("--N", type=int, default=3, help="subtable side")
    p.add_argument("--motifs", help="motif file replacing or adding motif statistics")
    p.add_argument("--workers", type=int, help="threads for the chains (default: number of CPUs)")

    p = sub.add_parser("generate", help="simulate a grid from a Boltzmann model or a given fiber")
    p.add_argument("--size", default="10x10")
    p.add_argument("--model", choices=tuple(MODELS), default="ising")
    p.add_argument("--alpha", type=float, default=0.0)
    p.add_argument("--beta", type=float, default=0.0)
    p.add_argument("--gamma", type=float, default=0.0)
    p.add_argument("--periodic", action="store_const", const="periodic", default="free",
                   help="periodic interactions (axes of length >= 3)")
    p.add_argument("--sweeps", type=int, default=1000)
    p.add_argument("--fiber", type=_pair, help="instead of a model, find any grid with (T1, T2) = a,b")
    p.add_argument("--zero-clamped", action="store_true", help="keep the outer layer empty (with --fiber)")
    p.add_argument("--seed", type=int)
    p.add_argument("--out", help="output grid file (stdout text when omitted)")
    p.add_argument("--out-format", choices=("text", "csv", "pgm"))

    p = sub.add_parser("sample", help="run one swap chain and report its behaviour")
    _input_args(p)
    p.add_argument("--mode", choices=("expanded", "strict"), default="expanded")
    p.add_argument("--target", type=_pair, help="fiber a,b (default: the input's)")
    p.add_argument("--steps", type=int, default=100_000)
    p.add_argument("--burn-in", type=int, default=10_000)
    p.add_argument("--thinning", type=int, default=10)
    p.add_argument("--all-states", action="store_true", help="record off-fiber states too")
    p.add_argument("--seed", type=int)
    p.add_argument("--out", help="directory for states.csv, final.txt and manifest.json")

    p = sub.add_parser("enumerate", help="fiber sizes and swap-graph components of a small lattice")
    p.add_argument("size")
    p.add_argument("--zero-clamped", action="store_true")
    p.add_argument("--a", type=int, help="only this number of ones")
    p.add_argument("--expansion", type=int, nargs="+", default=[0, 2])
    p.add_argument("--degree1-count", action="store_true", help="print the number of degree-one moves")
    p.add_argument("--seed", type=int, help="accepted for uniformity; enumeration is deterministic")

    p = sub.add_parser("diagnose", help="R-hat, ESS and autocorrelation of a samples.csv")
    p.add_argument("samples")
    p.add_argument("--max-lag", type=int, default=20)
    p.add_argument("--json", help="also write the diagnostics as JSON")
    p.add_argument("--seed", type=int, help="accepted for uniformity; unused")

    p = sub.add_parser("replay", help="rerun the command recorded in a manifest")
    p.add_argument("manifest")
    p.add_argument("--out", help="redirect the outputs")
    return parser


COMMANDS = {"stats": cmd_stats, "test": cmd_test, "generate": cmd_generate, "sample": cmd_sample,
            "enumerate": cmd_enumerate, "diagnose": cmd_diagnose, "replay": cmd_replay}


def main(argv=None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    args = build_parser().parse_args(argv)
    try:
        return COMMANDS[args.command](args, argv)
    except UnderSampledError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_SAMPLING
    except (GridFormatError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_IO
    except RuntimeError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_SAMPLING
    except (UsageError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
