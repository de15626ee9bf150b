"""Command-line entry points.

    flightbench sim run <scenario> [--seed N] [--plot] [--out DIR]
    flightbench benchmark rtt [--rate HZ | --max-rate] [--duration S] [--transport T] [--inject-delay MS]
    flightbench mixer check <name|param-file> [--motors FILE]
    flightbench param {get,set,dump,load} ...
"""

from __future__ import annotations

import argparse
import hashlib
import logging
import sys
from pathlib import Path

import numpy as np

from . import allocation as alloc
from .params import ParamError, ParamStore

EXIT_OK = 0
EXIT_USAGE = 2
EXIT_INVARIANT = 3
EXIT_TRANSPORT = 4

log = logging.getLogger("flightbench")


# ---------------------------------------------------------------------------
# sim


def cmd_sim_run(args) -> int:
    from .sim import InvariantViolation, ScenarioError, Simulation, load_scenario

    try:
        overrides = {}
        if args.seed is not None:
            overrides["seed"] = args.seed
        if args.duration is not None:
            overrides["duration"] = args.duration
        cfg = load_scenario(args.scenario, **overrides)
    except (ScenarioError, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE

    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    prefix = out / cfg.name
    csv_path = prefix.with_suffix(".csv")
    sim = Simulation(cfg, csv_path)
    status = EXIT_OK
    try:
        result = sim.run()
    except InvariantViolation as exc:
        print(f"invariant violation: {exc}", file=sys.stderr)
        result = None
        status = EXIT_INVARIANT
    finally:
        events = prefix.with_name(cfg.name + "_events.log")
        events.write_text("".join(ev.line() + "\n" for ev in sim.firmware.events))
    if result is None:
        return status

    digest = hashlib.sha256(csv_path.read_bytes()).hexdigest()
    summary = f"scenario={cfg.name} seed={cfg.seed} {result.summary()} csv_sha256={digest}"
    prefix.with_name(cfg.name + "_summary.txt").write_text(summary + "\n")
    print(summary)
    print(f"trajectory: {csv_path}")
    if args.plot:
        from .plotting import plot_outputs, plot_tracking

        files = plot_tracking(sim.setpoints, prefix)
        files.append(plot_outputs(csv_path, prefix))
        for f in files:
            print(f"figure: {f}")
    return status


# ---------------------------------------------------------------------------
# benchmark


def cmd_benchmark_rtt(args) -> int:
    from .rtt import run_benchmark
    from .transport import TransportError

    rate = None if args.max_rate else args.rate
    try:
        res = run_benchmark(rate=rate, duration=args.duration, transport=args.transport,
                            inject_delay_ms=args.inject_delay)
    except (TransportError, TimeoutError) as exc:
        print(f"transport failure: {exc}", file=sys.stderr)
        return EXIT_TRANSPORT
    label = f"{args.transport}"
    print(res.stats.table(label))
    print(f"samples={res.stats.count} duration_s={res.duration:.3f} "
          f"bytes_per_s={res.bytes_sent / res.duration:.0f}")
    if args.csv:
        np.savetxt(args.csv, np.asarray(res.samples), header="rtt_ms", fmt="%.6f")
    if args.plot:
        from .plotting import plot_rtt_histogram

        prefix = Path(args.out) / f"rtt_{args.transport}"
        prefix.parent.mkdir(parents=True, exist_ok=True)
        for f in plot_rtt_histogram(res.samples, prefix, label):
            print(f"figure: {f}")
    return EXIT_OK


# ---------------------------------------------------------------------------
# mixer


def resolve_mixer(spec: str, motors_file: str | None = None) -> alloc.MixerConfig:
    if motors_file:
        from .sim.dynamics import MassProperties
        from .sim.forces import Vehicle
        from .sim.runner import general_mixer_config
        from .sim.scenario import load_motor_file

        motors = load_motor_file(motors_file)
        veh = Vehicle(MassProperties(1.0, ((1, 0, 0), (0, 1, 0), (0, 0, 1))), tuple(motors))
        return general_mixer_config(veh)
    if spec in alloc.PREDEFINED:
        return alloc.load_predefined(spec)
    path = Path(spec)
    if not path.exists():
        raise alloc.UnknownMixerError(spec)
    raw: dict[str, float] = {}
    for lineno, line in enumerate(path.read_text().splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        parts = line.split()
        if len(parts) != 2:
            raise alloc.MixerValidationError(f"{path}:{lineno}: expected 'name value'", [])
        name, text = parts
        try:
            raw[name] = int(text) if text.lstrip("+-").isdigit() else float(text)
        except ValueError:
            raise alloc.MixerValidationError(f"{path}:{lineno}: bad value {text!r}", [name]) from None
    return alloc.load_custom(raw, "PRI", name=path.stem)


def mixer_report(mixer: alloc.MixerConfig) -> tuple[str, bool]:
    """Human-readable report; second element flags rank deficiency."""
    M, P = mixer.forward, mixer.inverse
    r = alloc.rank(M)
    nonzero_rows = int(np.sum(np.any(M != 0, axis=1)))
    deficient = r < nonzero_rows or r == 0
    res = alloc.moore_penrose_residuals(M, P)
    with np.printoptions(precision=5, suppress=True, linewidth=140):
        lines = [
            f"mixer: {mixer.name} (stored as {mixer.stored_as.value})",
            "M (rows Fx Fy Fz Qx Qy Qz, columns = output channels):",
            str(np.asarray(M)),
            "M-dagger (rows = output channels):",
            str(np.asarray(P)),
            f"rank: {r}",
            "Moore-Penrose residuals (relative, inf-norm): " + ", ".join(f"{k} {v:.3e}" for k, v in res.items()),
            "channels: " + ", ".join(f"{i}:{ch.kind.name.lower()}@{ch.rate}Hz" for i, ch in enumerate(mixer.channels)),
        ]
    if deficient:
        lines.append(f"WARNING: rank deficient (rank {r}, {nonzero_rows} nonzero rows)")
    return "\n".join(lines), deficient


def cmd_mixer_check(args) -> int:
    try:
        mixer = resolve_mixer(args.mixer, args.motors)
    except alloc.MixerValidationError as exc:
        print(f"validation failed: {exc}", file=sys.stderr)
        for p in exc.params:
            print(f"  {p}", file=sys.stderr)
        return EXIT_USAGE
    except (alloc.UnknownMixerError, alloc.InvalidMatrixError, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    text, _ = mixer_report(mixer)
    print(text)
    return EXIT_OK


# ---------------------------------------------------------------------------
# params


def _load_store(path: Path) -> ParamStore:
    store = ParamStore()
    if path.exists():
        store.load(path.read_text().splitlines())
    return store


def _parse_value(store: ParamStore, name: str, text: str):
    from .params import SPECS, parse_text

    spec = SPECS.get(name)
    if spec is None:
        store.get(name)  # raises UnknownParamError
    return parse_text(spec, text)


def cmd_param(args) -> int:
    path = Path(args.file)
    try:
        store = _load_store(path)
        if args.param_cmd == "get":
            print(f"{args.name} {store.get(args.name)}")
        elif args.param_cmd == "set":
            store.set(args.name, _parse_value(store, args.name, args.value))
            path.write_text(store.dump())
            print(f"{args.name} {store.get(args.name)}")
        elif args.param_cmd == "dump":
            sys.stdout.write(store.dump())
        elif args.param_cmd == "load":
            store.load(Path(args.source).read_text().splitlines())
            path.write_text(store.dump())
            print(f"loaded {args.source} into {path}")
    except (ParamError, ValueError, OSError) as exc:
        msg = exc.args[0] if isinstance(exc, KeyError) and exc.args else exc
        print(f"error: {msg}", file=sys.stderr)
        return EXIT_USAGE
    return EXIT_OK


# ---------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="flightbench", description=__doc__.splitlines()[0] if __doc__ else None)
    ap.add_argument("-v", "--verbose", action="store_true")
    sub = ap.add_subparsers(dest="command", required=True)

    sim = sub.add_parser("sim", help="run simulation scenarios").add_subparsers(dest="sim_cmd", required=True)
    run = sim.add_parser("run", help="run a scenario file or bundled scenario name")
    run.add_argument("scenario")
    run.add_argument("--seed", type=int)
    run.add_argument("--duration", type=float)
    run.add_argument("--plot", action="store_true", help="also write .dat files and PNG figures")
    run.add_argument("--out", default="out", help="output directory (default: out)")
    run.set_defaults(func=cmd_sim_run)

    bench = sub.add_parser("benchmark", help="serial link benchmarks").add_subparsers(dest="bench_cmd", required=True)
    rtt = bench.add_parser("rtt", help="echo round-trip-time benchmark")
    g = rtt.add_mutually_exclusive_group()
    g.add_argument("--rate", type=float, default=400.0, help="command rate in Hz (default 400)")
    g.add_argument("--max-rate", action="store_true", help="send as fast as echoes return")
    rtt.add_argument("--duration", type=float, default=5.0)
    rtt.add_argument("--transport", choices=("inproc", "socket"), default="inproc")
    rtt.add_argument("--inject-delay", type=float, default=0.0, metavar="MS", help="one-way delay in ms")
    rtt.add_argument("--csv", help="write raw RTT samples here")
    rtt.add_argument("--plot", action="store_true")
    rtt.add_argument("--out", default="out")
    rtt.set_defaults(func=cmd_benchmark_rtt)

    mixer = sub.add_parser("mixer", help="mixer inspection").add_subparsers(dest="mixer_cmd", required=True)
    chk = mixer.add_parser("check", help="print M, M-dagger, rank and residuals")
    chk.add_argument("mixer", nargs="?", default="general", help="predefined name or parameter file")
    chk.add_argument("--motors", help="build the general-form mixer from this motor file")
    chk.set_defaults(func=cmd_mixer_check)

    param = sub.add_parser("param", help="parameter file operations")
    param.add_argument("--file", default="params.txt")
    psub = param.add_subparsers(dest="param_cmd", required=True)
    pg = psub.add_parser("get")
    pg.add_argument("name")
    ps = psub.add_parser("set")
    ps.add_argument("name")
    ps.add_argument("value")
    psub.add_parser("dump")
    pl = psub.add_parser("load")
    pl.add_argument("source")
    param.set_defaults(func=cmd_param)
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    if getattr(args, "mixer", None) == "general" and not getattr(args, "motors", None) and args.command == "mixer":
        print("error: 'general' needs --motors FILE", file=sys.stderr)
        return EXIT_USAGE
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
