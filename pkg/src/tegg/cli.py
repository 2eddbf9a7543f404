"""Command-line front end: transform, batch, synth and inspect.

Config precedence is CLI flags > config file > built-in defaults. The config
file is either JSON or ``key = value`` lines whose keys mirror
TransformConfig (VAD settings as ``vad.margin_db`` etc.). Without --config,
the path in $TEGG_CONFIG is used when set.
"""

import argparse
import configparser
import json
import logging
import os
import sys
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, fields

from . import __version__
from .cross_filter import Diagnostics, TransformConfig, finalize, transform
from .errors import TeggError
from .fixtures import VOWEL_A, VOWEL_E, VOWEL_I, VOWEL_U, FormantTrack, synth_pair
from .signal_io import BIT_DEPTHS, read_recording, write_recording, write_wav
from .vad import VadConfig

log = logging.getLogger("tegg")

CONFIG_ENV = "TEGG_CONFIG"
VOWELS = {"a": VOWEL_A, "i": VOWEL_I, "e": VOWEL_E, "u": VOWEL_U}

EXIT_OK = 0
EXIT_FAILED = 1
EXIT_USAGE = 2


@dataclass(frozen=True)
class RunConfig:
    transform: TransformConfig
    speech_channel: str = "left"
    pad_ms: float | None = None
    normalize_dbfs: float | None = None
    diagnostics: bool = False
    bit_depth: str = "24"


# ---- config loading -------------------------------------------------------

def _coerce(text: str):
    try:
        return json.loads(text)
    except json.JSONDecodeError:
        return text.strip()


def parse_config_text(text: str) -> dict:
    """JSON object or ``key = value`` lines; ``#`` starts a comment."""
    stripped = text.strip()
    if stripped.startswith("{"):
        data = json.loads(stripped)
        if not isinstance(data, dict):
            raise ValueError("config JSON must be an object")
        return data
    parser = configparser.ConfigParser(inline_comment_prefixes=("#",), interpolation=None)
    parser.optionxform = str
    parser.read_string("[tegg]\n" + text)
    data, vad = {}, {}
    for key, value in parser.items("tegg"):
        if key.startswith("vad."):
            vad[key[4:]] = _coerce(value)
        else:
            data[key] = _coerce(value)
    if vad:
        data["vad"] = vad
    return data


def _check_types(cfg: TransformConfig):
    """Reject wrongly typed overrides before any audio is touched."""
    def number(name, value, integer=False, optional=False):
        if value is None and optional:
            return
        ok = isinstance(value, (int, float)) and not isinstance(value, bool)
        if integer:
            ok = ok and float(value).is_integer()
        if not ok:
            kind = "an integer" if integer else "a number"
            raise ValueError(f"config '{name}' must be {kind}, got {value!r}")

    number("frame_ms", cfg.frame_ms)
    number("overlap", cfg.overlap)
    number("lpc_rate", cfg.lpc_rate, integer=True)
    number("output_rate", cfg.output_rate, integer=True, optional=True)
    number("grid_size", cfg.grid_size, integer=True)
    number("n_taps", cfg.n_taps, integer=True)
    number("guard_rel", cfg.guard_rel)
    number("r_max", cfg.r_max)
    number("egg_f0", cfg.egg_f0, optional=True)
    if not isinstance(cfg.egg_highpass, bool):
        raise ValueError(f"config 'egg_highpass' must be true or false, got {cfg.egg_highpass!r}")
    for f in fields(VadConfig):
        number(f"vad.{f.name}", getattr(cfg.vad, f.name), integer=f.name == "hangover_frames")
    _ = cfg.frame_spec(cfg.lpc_rate).cola_gain  # validates overlap, hop and COLA


def load_config(path: str | None) -> TransformConfig:
    if path is None:
        path = os.environ.get(CONFIG_ENV) or None
    if path is None:
        return TransformConfig()
    with open(path, encoding="utf-8") as fh:
        data = parse_config_text(fh.read())
    return TransformConfig.from_dict(data)


def build_run_config(args) -> RunConfig:
    cfg = load_config(args.config)
    if args.speech_channel and args.egg_channel and args.speech_channel == args.egg_channel:
        raise ValueError("speech and EGG cannot share a channel")
    if args.speech_channel:
        channel = args.speech_channel
    elif args.egg_channel:
        channel = "right" if args.egg_channel == "left" else "left"
    else:
        channel = "left"

    highpass, egg_f0 = None, None
    if args.egg_highpass is not None:
        highpass = True
        if args.egg_highpass != "auto":
            try:
                egg_f0 = float(args.egg_highpass)
            except ValueError:
                raise ValueError(f"--egg-highpass expects an f0 in Hz, got {args.egg_highpass!r}")
    cfg = cfg.updated(frame_ms=args.frame_ms, overlap=args.overlap, lpc_rate=args.lpc_rate,
                      grid_size=args.grid_size, n_taps=args.taps,
                      egg_highpass=highpass, egg_f0=egg_f0)
    _check_types(cfg)
    return RunConfig(cfg, channel, args.pad_ms, args.normalize_dbfs,
                     args.diagnostics, args.bit_depth)


# ---- per-file work --------------------------------------------------------

def write_diagnostics(diag: Diagnostics, out_path: str, extra: dict | None = None):
    stem = os.path.splitext(out_path)[0]
    payload = diag.to_dict()
    if extra:
        payload.update(extra)
    files = {
        stem + ".diagnostics.json": json.dumps(payload, indent=2) + "\n",
        stem + ".tract.csv": diag.magnitude_csv(),
        stem + ".ratio.csv": diag.ratio_csv(),
    }
    for path, text in files.items():
        tmp = path + ".tmp"
        with open(tmp, "w", encoding="utf-8") as fh:
            fh.write(text)
        os.replace(tmp, path)


def _diag_extra(run: RunConfig, source: str) -> dict:
    return {"input": source, "config": run.transform.to_dict(),
            "speech_channel": run.speech_channel}


def process_file(src: str, dst: str | None, run: RunConfig) -> dict:
    """Transform one file. Never raises: failures come back as a result dict."""
    try:
        rec = read_recording(src, run.speech_channel)
        z, diag = transform(rec, run.transform)
        z = finalize(z, run.pad_ms, run.normalize_dbfs)
        if dst is not None:
            os.makedirs(os.path.dirname(os.path.abspath(dst)), exist_ok=True)
            write_wav(z, dst, run.bit_depth)
            if run.diagnostics:
                write_diagnostics(diag, dst, _diag_extra(run, src))
        return {"input": src, "output": dst, "ok": True,
                "realtime_factor": diag.realtime_factor, "diagnostics": diag.to_dict()}
    except (TeggError, OSError, ValueError) as exc:
        return {"input": src, "output": dst, "ok": False, "error": str(exc)}


def _report(result: dict):
    if result["ok"]:
        print(f"{result['input']}: ok, realtime factor {result['realtime_factor']:.1f}x")
    else:
        print(f"{result['input']}: error: {result['error']}", file=sys.stderr)


# ---- commands -------------------------------------------------------------

def cmd_transform(args) -> int:
    run = build_run_config(args)
    inputs = args.inputs
    if len(inputs) > 1 and args.output and not os.path.isdir(args.output):
        print("error: several inputs need -o to name an existing directory", file=sys.stderr)
        return EXIT_USAGE
    status = EXIT_OK
    for src in inputs:
        if args.output is None:
            dst = os.path.splitext(src)[0] + ".tegg.wav"
        elif os.path.isdir(args.output):
            dst = os.path.join(args.output, os.path.basename(src))
        else:
            dst = args.output
        result = process_file(src, dst, run)
        _report(result)
        if not result["ok"]:
            status = EXIT_FAILED
            if args.fail_fast:
                break
    return status


def find_wavs(root: str) -> list[str]:
    found = []
    for dirpath, dirnames, filenames in os.walk(root):
        dirnames.sort()
        found += [os.path.join(dirpath, f) for f in sorted(filenames) if f.lower().endswith(".wav")]
    return found


def cmd_batch(args) -> int:
    run = build_run_config(args)
    if not os.path.isdir(args.input_dir):
        print(f"error: not a directory: {args.input_dir}", file=sys.stderr)
        return EXIT_USAGE
    sources = find_wavs(args.input_dir)
    if not sources:
        print("0 files found, nothing to do")
        return EXIT_OK
    targets = [os.path.join(args.output_dir, os.path.relpath(s, args.input_dir)) for s in sources]

    t0 = time.perf_counter()
    results = []
    if args.jobs <= 1:
        for src, dst in zip(sources, targets):
            results.append(process_file(src, dst, run))
            _report(results[-1])
            if args.fail_fast and not results[-1]["ok"]:
                break
    else:
        with ProcessPoolExecutor(max_workers=args.jobs) as pool:
            futures = [pool.submit(process_file, s, d, run) for s, d in zip(sources, targets)]
            for fut in futures:  # input order, whatever the completion order
                results.append(fut.result())
                _report(results[-1])
                if args.fail_fast and not results[-1]["ok"]:
                    for other in futures:
                        other.cancel()
                    break
    wall = time.perf_counter() - t0

    n_ok = sum(r["ok"] for r in results)
    print(f"{n_ok}/{len(sources)} files written in {wall:.2f} s")
    return EXIT_OK if n_ok == len(sources) else EXIT_FAILED


def cmd_inspect(args) -> int:
    run = build_run_config(args)
    reports, status = [], EXIT_OK
    for src in args.inputs:
        result = process_file(src, None, run)
        if result["ok"]:
            reports.append({**result["diagnostics"], **_diag_extra(run, src)})
        else:
            print(f"{src}: error: {result['error']}", file=sys.stderr)
            status = EXIT_FAILED
            if args.fail_fast:
                break
    print(json.dumps(reports[0] if len(reports) == 1 else reports, indent=2))
    return status


def cmd_synth(args) -> int:
    if not args.f0 > 0:
        print(f"error: f0 must be positive, got {args.f0}", file=sys.stderr)
        return EXIT_USAGE
    if not args.duration > 0:
        print(f"error: duration must be positive, got {args.duration}", file=sys.stderr)
        return EXIT_USAGE
    try:
        first = VOWELS[args.vowel]
        dur_ms = args.duration * 1000
        if args.alternate:
            track = FormantTrack.alternating(first, VOWELS[args.alternate], args.segment_ms, dur_ms)
        else:
            track = FormantTrack.stationary(first, dur_ms)
        rec = synth_pair(args.f0, args.duration, args.sample_rate, track,
                         jitter=args.jitter, seed=args.seed)
        write_recording(rec, args.output, args.bit_depth)
    except (ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE if isinstance(exc, ValueError) else EXIT_FAILED
    print(f"wrote {args.output}: {rec.speech.duration:.3f} s, {rec.sample_rate} Hz, 2 channels")
    return EXIT_OK


# ---- parser ---------------------------------------------------------------

def _add_transform_options(p):
    p.add_argument("--config", help=f"JSON or key=value config file (default: ${CONFIG_ENV})")
    p.add_argument("--speech-channel", choices=("left", "right"))
    p.add_argument("--egg-channel", choices=("left", "right"))
    p.add_argument("--frame-ms", type=float)
    p.add_argument("--overlap", type=float)
    p.add_argument("--lpc-rate", type=int)
    p.add_argument("--grid-size", type=int)
    p.add_argument("--taps", type=int)
    p.add_argument("--egg-highpass", nargs="?", const="auto", metavar="F0",
                   help="high-pass the EGG 20 Hz below f0 (estimated unless given)")
    p.add_argument("--pad-ms", type=float, help="silence added at both ends of the output")
    p.add_argument("--normalize-dbfs", type=float, help="peak-normalize the output to this level")
    p.add_argument("--bit-depth", choices=BIT_DEPTHS, default="24")
    p.add_argument("--fail-fast", action="store_true")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="tegg", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("transform", help="transform two-channel speech/EGG files")
    p.add_argument("inputs", nargs="+")
    p.add_argument("-o", "--output", help="output file, or directory for several inputs")
    p.add_argument("--diagnostics", action="store_true", help="write JSON/CSV sidecars")
    _add_transform_options(p)
    p.set_defaults(func=cmd_transform)

    p = sub.add_parser("batch", help="transform every WAV under a directory")
    p.add_argument("input_dir")
    p.add_argument("output_dir")
    p.add_argument("--jobs", type=int, default=1)
    p.add_argument("--diagnostics", action="store_true")
    _add_transform_options(p)
    p.set_defaults(func=cmd_batch)

    p = sub.add_parser("inspect", help="print diagnostics as JSON without writing audio")
    p.add_argument("inputs", nargs="+")
    _add_transform_options(p)
    p.set_defaults(func=cmd_inspect, diagnostics=False)

    p = sub.add_parser("synth", help="write a synthetic speech/EGG fixture")
    p.add_argument("output")
    p.add_argument("--f0", type=float, default=120.0)
    p.add_argument("--duration", type=float, default=1.0)
    p.add_argument("--sample-rate", type=int, default=48000)
    p.add_argument("--vowel", choices=sorted(VOWELS), default="a")
    p.add_argument("--alternate", choices=sorted(VOWELS), help="alternate with this vowel")
    p.add_argument("--segment-ms", type=float, default=200.0)
    p.add_argument("--jitter", type=float, default=0.0)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--bit-depth", choices=BIT_DEPTHS, default="24")
    p.set_defaults(func=cmd_synth)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    if getattr(args, "jobs", 1) < 1:
        parser.error("--jobs must be at least 1")
    try:
        return args.func(args)
    except (ValueError, OSError, json.JSONDecodeError, configparser.Error) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
