"""Command-line front end.

    spikeapprox generate --config cfg.txt --out stream.csv [--seed N]
    spikeapprox sweep --stream stream.csv --sigmas 0.05,0.1 --extractors ADD,DWT --approx both --out results/
    spikeapprox approx-demo --stream stream.csv --out demo.csv
    spikeapprox plot --tables results/

Exit status: 0 success, 1 usage error, 2 data or validation error.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import os
import sys
import time
from pathlib import Path

import numpy as np

from . import __version__
from . import simgen
from .approx import DEFAULT_RULE, select_samples
from .features import ExtractorId
from .reporting import render_plots, sha256_of, write_tables
from .sorteval import dwt_reduction_note, run_experiment, upca_note

EXIT_OK, EXIT_USAGE, EXIT_DATA = 0, 1, 2
SEED_ENV = "SPIKE_SEED"


class UsageError(Exception):
    pass


class DataError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def parse_float_list(text: str) -> list[float]:
    try:
        values = [float(t) for t in text.split(",") if t.strip()]
    except ValueError:
        raise UsageError(f"bad sigma list {text!r}") from None
    if not values:
        raise UsageError("empty sigma list")
    if any(v < 0 for v in values):
        raise UsageError("sigma values must be >= 0")
    return values


def parse_extractors(text: str) -> list[ExtractorId]:
    names = [t for t in text.split(",") if t.strip()]
    if not names:
        raise UsageError("empty extractor list")
    try:
        return [ExtractorId.parse(n) for n in names]
    except ValueError as exc:
        raise UsageError(str(exc)) from None


def resolve_config(config_path: str | None, seed: int | None) -> simgen.StreamConfig:
    if config_path is None:
        cfg = simgen.StreamConfig()
    else:
        path = Path(config_path)
        if not path.is_file():
            raise DataError(f"config file not found: {path}")
        try:
            cfg = simgen.read_config(path)
        except simgen.ConfigError as exc:
            raise DataError(str(exc)) from None
    env = os.environ.get(SEED_ENV)
    if seed is None and env is not None:
        try:
            seed = int(env)
        except ValueError:
            raise DataError(f"{SEED_ENV} must be an integer, got {env!r}") from None
    if seed is not None:
        try:
            cfg = dataclasses.replace(cfg, seed=seed)
        except ValueError as exc:
            raise DataError(str(exc)) from None
    return cfg


def write_manifest(path: Path, command: str, cfg: simgen.StreamConfig, outputs: dict[str, Path],
                   started: float, extra: dict | None = None) -> None:
    manifest = {
        "command": command,
        "version": __version__,
        "numpy": np.__version__,
        "seed": cfg.seed,
        "config": cfg.echo(),
        "elapsed_s": round(time.perf_counter() - started, 3),
        "outputs": {name: {"path": str(p), "sha256": sha256_of(p)} for name, p in sorted(outputs.items())},
    }
    if extra:
        manifest.update(extra)
    path.write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n")


def load_stream(path_text: str) -> tuple[simgen.StreamConfig, list[simgen.LabeledSpike]]:
    path = Path(path_text)
    if not path.is_file():
        raise DataError(f"stream file not found: {path}")
    try:
        return simgen.read_stream(path)
    except (ValueError, simgen.ConfigError) as exc:
        raise DataError(f"{path}: {exc}") from None


def cmd_generate(args) -> int:
    started = time.perf_counter()
    cfg = resolve_config(args.config, args.seed)
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    simgen.write_stream(out, cfg, simgen.generate_stream(cfg))
    write_manifest(out.with_name(out.name + ".manifest.json"), "generate", cfg, {"stream": out}, started)
    print(f"wrote {out} ({sha256_of(out)[:16]})")
    return EXIT_OK


def cmd_sweep(args) -> int:
    started = time.perf_counter()
    sigmas = parse_float_list(args.sigmas)
    extractors = parse_extractors(args.extractors)
    cfg, stream = load_stream(args.stream)
    # The stream file pins the templates (via its seed); noise is redrawn per sigma.
    own = simgen.blocks_from_stream(stream)
    regen = simgen.generate_blocks(cfg)
    if len(own) != len(regen) or any(
            not np.array_equal(a.spikes, b.spikes) or not np.array_equal(a.labels, b.labels)
            for a, b in zip(own, regen)):
        raise DataError(f"{args.stream}: contents do not match the config in its header")
    rows = []
    for i, sigma in enumerate(sigmas):
        blocks = own if sigma == cfg.sigma_n else simgen.generate_blocks(dataclasses.replace(cfg, sigma_n=sigma))
        rows += run_experiment(blocks, extractors, args.approx, seed=cfg.seed, sigma=sigma, sigma_index=i,
                               approx_mode=args.approx_mode)
    out_dir = Path(args.out)
    outputs = write_tables(out_dir, rows)
    outputs.update(render_plots(out_dir))
    notes = out_dir / "cost_notes.txt"
    notes.write_text(upca_note() + "\n" + dwt_reduction_note() + "\n")
    outputs["cost_notes"] = notes
    write_manifest(out_dir / "manifest.json", "sweep", cfg, outputs, started,
                   {"sigmas": sigmas, "extractors": [e.value for e in extractors],
                    "approx": args.approx, "approx_mode": args.approx_mode})
    print(notes.read_text(), end="")
    print(f"wrote {len(outputs)} files to {out_dir}")
    return EXIT_OK


def interpolation_correlation(samples: np.ndarray, indices: np.ndarray) -> float:
    """Correlation between ``samples`` and the piecewise-linear curve through
    the retained points, evaluated at every original sample position."""
    recon = np.interp(np.arange(samples.size), indices, samples[indices])
    if np.std(recon) == 0 or np.std(samples) == 0:
        return 0.0
    return float(np.corrcoef(recon, samples)[0, 1])


def cmd_approx_demo(args) -> int:
    started = time.perf_counter()
    cfg, stream = load_stream(args.stream)
    lines = ["kind,channel,template_id,n_retained,correlation,indices,samples"]
    rows = [("template", cid, tid, w.samples)
            for cid, tid, w in simgen.iter_templates(cfg.resolved_channels(), cfg.align_index)]
    rows += [("spike", s.channel_id, s.template_id, s.waveform.samples) for s in stream]
    for kind, cid, tid, samples in rows:
        a = select_samples(samples, DEFAULT_RULE)
        corr = interpolation_correlation(samples, a.indices)
        idx = ";".join(str(int(i)) for i in a.indices)
        vals = ";".join(repr(float(v)) for v in samples)
        lines.append(f"{kind},{cid},{tid},{len(a)},{corr:.6f},{idx},{vals}")
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    out.write_text("\n".join(lines) + "\n")
    write_manifest(out.with_name(out.name + ".manifest.json"), "approx-demo", cfg, {"demo": out}, started)
    print(f"wrote {len(rows)} rows to {out}")
    return EXIT_OK


def cmd_plot(args) -> int:
    tables = Path(args.tables)
    for name in ("summary.csv", "cer_vs_comp.csv"):
        if not (tables / name).is_file():
            raise DataError(f"missing {tables / name}")
    for p in render_plots(tables).values():
        print(f"wrote {p}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="spikeapprox", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("generate", help="simulate a 9-channel labeled spike stream")
    p.add_argument("--config", help="flat key=value config file (defaults if omitted)")
    p.add_argument("--out", required=True)
    p.add_argument("--seed", type=int, help=f"overrides config and ${SEED_ENV}")
    p.set_defaults(func=cmd_generate)

    p = sub.add_parser("sweep", help="CER over noise levels and extractors, with cost tables")
    p.add_argument("--stream", required=True)
    p.add_argument("--sigmas", default="0.05,0.1,0.15,0.2")
    p.add_argument("--extractors", default=",".join(e.value for e in ExtractorId))
    p.add_argument("--approx", choices=("on", "off", "both"), default="both")
    p.add_argument("--approx-mode", choices=("channel", "spike"), default="channel")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("approx-demo", help="per-spike retained indices and reconstruction correlation")
    p.add_argument("--stream", required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_approx_demo)

    p = sub.add_parser("plot", help="re-render SVG plots from sweep tables")
    p.add_argument("--tables", required=True)
    p.set_defaults(func=cmd_plot)
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except UsageError as exc:
        print(f"spikeapprox: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (DataError, OSError) as exc:
        print(f"spikeapprox: error: {exc}", file=sys.stderr)
        return EXIT_DATA


if __name__ == "__main__":
    sys.exit(main())
