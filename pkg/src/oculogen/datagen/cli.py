"""Command-line entry point: ``oculogen <command> [options]``.

Exit codes: 0 success, 1 usage or config error, 2 generation error.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path
from typing import List, Optional

from PIL import Image as PILImage

from ..errors import ConfigError, OculogenError
from .config import DatasetSpec, load_config
from .engine import find_pose, generate, load_manifest, render_one
from .knn import compare_to_shuffled
from .report import PREVIEW_SPP, preview, stats

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_GENERATION = 2


class _UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise _UsageError(message)


def build_parser() -> argparse.ArgumentParser:
    common = _Parser(add_help=False)
    common.add_argument("--config", metavar="PATH", help="dataset config (TOML, flat dotted keys)")
    common.add_argument("--out", metavar="DIR", help="output directory (overrides output.dir)")
    common.add_argument("--seed", type=int, metavar="N", help="master seed override")
    common.add_argument("--jobs", type=int, metavar="N", help="worker processes (default: $OCULOGEN_JOBS or 1)")
    common.add_argument("--spp", type=int, metavar="N", help="samples per pixel override")

    p = _Parser(prog="oculogen", description="Synthetic eye-image dataset generator")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)
    sub.add_parser("generate", parents=[common], help="render the full dataset")
    pv = sub.add_parser("preview", parents=[common], help="contact sheet of gaze variations")
    pv.add_argument("--grid", default="7x7", metavar="RxC", help="rows x columns (default 7x7)")
    pv.add_argument("--no-constraints", action="store_true", help="render poses outside the rotation limits too")
    st = sub.add_parser("stats", parents=[common], help="pose histograms of a generated dataset")
    st.add_argument("--manifest", metavar="PATH", help="manifest.json or dataset dir (default: --out)")
    kn = sub.add_parser("eval-knn", parents=[common], help="k-NN gaze regression check")
    kn.add_argument("--manifest", metavar="PATH", help="manifest.json or dataset dir (default: --out)")
    kn.add_argument("-k", type=int, default=3)
    kn.add_argument("--train-fraction", type=float, default=0.8)
    ro = sub.add_parser("render-one", parents=[common], help="render a single pose")
    ro.add_argument("--identity", type=int, default=0)
    ro.add_argument("--theta", type=float, default=0.0)
    ro.add_argument("--phi", type=float, default=0.0)
    ro.add_argument("--alpha", type=float, default=0.0)
    ro.add_argument("--beta", type=float, default=0.0)
    ro.add_argument("--replicate", type=int, default=0)
    return p


def _spec(args) -> DatasetSpec:
    spec = load_config(args.config) if args.config else DatasetSpec()
    kw = {}
    if args.seed is not None:
        kw["master_seed"] = args.seed
    if args.spp is not None:
        kw["spp"] = args.spp
    if args.out is not None:
        kw["output_dir"] = args.out
    return spec.replace(**kw) if kw else spec


def _manifest_path(args, spec: DatasetSpec) -> Path:
    return Path(getattr(args, "manifest", None) or spec.output_dir)


def _run(args) -> int:
    spec = _spec(args)
    out = Path(spec.output_dir)
    if args.command == "generate":
        def progress(r):
            print(f"[{r.status}] identity={r.job.identity} pose={r.job.pose.index}", file=sys.stderr)

        m = generate(spec, out, jobs=args.jobs, progress=progress)
        print(json.dumps(m["counts"], sort_keys=True))
        return EXIT_OK
    if args.command == "preview":
        try:
            rows, cols = (int(v) for v in args.grid.lower().split("x"))
        except ValueError:
            raise _UsageError(f"--grid must look like 7x7, got {args.grid!r}") from None
        if args.no_constraints:
            spec = spec.replace(alpha_max=180.0, beta_max=180.0)
        out.mkdir(parents=True, exist_ok=True)
        path = out / "preview.png"
        preview(spec, (rows, cols), path, spp=args.spp or PREVIEW_SPP, jobs=args.jobs)
        print(path)
        return EXIT_OK
    if args.command == "stats":
        src = _manifest_path(args, spec)
        m = load_manifest(src)
        rep = stats(m, Path(m["_root"]) / "stats")
        print(rep["gaze_text"])
        print(rep["head_text"])
        print(f"total {rep['total']}")
        return EXIT_OK
    if args.command == "eval-knn":
        m = load_manifest(_manifest_path(args, spec))
        real, shuffled, p = compare_to_shuffled(m, k=args.k, train_fraction=args.train_fraction)
        shuf = sum(s.mean_error for s in shuffled) / len(shuffled)
        print(f"knn_error_deg {real.mean_error:.3f}")
        print(f"baseline_error_deg {real.baseline_error:.3f}")
        print(f"shuffled_error_deg {shuf:.3f}")
        print(f"p_value {p:.3g}")
        return EXIT_OK
    # render-one
    pose = find_pose(spec, args.theta, args.phi, args.alpha, args.beta)
    res = render_one(spec, args.identity, pose, args.replicate)
    if res.status != "ok":
        print(f"render failed: {res.status} {res.reason}", file=sys.stderr)
        return EXIT_GENERATION
    out.mkdir(parents=True, exist_ok=True)
    stem = f"one_{args.identity}_{pose.index}_{args.replicate}"
    (out / f"{stem}.png").write_bytes(res.png)
    res.label["image"] = f"{stem}.png"
    (out / f"{stem}.json").write_text(json.dumps(res.label, indent=1, sort_keys=True) + "\n")
    print(out / f"{stem}.png")
    return EXIT_OK


def main(argv: Optional[List[str]] = None) -> int:
    try:
        args = build_parser().parse_args(argv)
    except _UsageError as e:
        print(f"oculogen: {e}", file=sys.stderr)
        return EXIT_USAGE
    except SystemExit as e:  # --help
        return EXIT_OK if not e.code else EXIT_USAGE
    try:
        return _run(args)
    except (_UsageError, ConfigError) as e:
        print(f"oculogen: {e}", file=sys.stderr)
        return EXIT_USAGE
    except (OculogenError, OSError, ValueError, KeyError) as e:
        print(f"oculogen: {type(e).__name__}: {e}", file=sys.stderr)
        return EXIT_GENERATION
