"""Command-line entry point: ``fragilefp <subcommand> ...``.

Exit codes: 0 on success, 2 for manifest or argument errors, 3 for numerical failures.
"""
from __future__ import annotations

import argparse
import json
import logging
import sys
from dataclasses import replace
from pathlib import Path

from .core import mask_for_cutoff
from .errors import DegenerateError, ManifestError, NumericalError, ParameterError, ShapeError
from .experiments import ExperimentManifest, run_experiment
from .fingerprint import estimate_fingerprint_ml, identify, load_fingerprint, save_fingerprint
from .imageio import list_images, read_image

EXIT_OK, EXIT_MANIFEST, EXIT_NUMERIC = 0, 2, 3

EXPERIMENT_COMMANDS = {
    "bound-curves": "bound_curves",
    "fingerprint-quality": "fingerprint_quality",
    "roc": "roc",
    "copy-attack": "copy_attack",
    "dct-recovery": "dct_recovery",
    "hsic": "hsic",
    "triangle": "triangle",
}

log = logging.getLogger("fragilefp")


def _load_manifest(args, experiment: str) -> ExperimentManifest:
    data = {}
    if args.manifest:
        try:
            data = json.loads(Path(args.manifest).read_text())
        except (OSError, json.JSONDecodeError) as exc:
            raise ManifestError(f"cannot read manifest {args.manifest}: {exc}") from None
        if not isinstance(data, dict):
            raise ManifestError("manifest must be a JSON object")
    if data.get("experiment", experiment) != experiment:
        raise ManifestError(f"manifest describes {data['experiment']!r}, not {experiment!r}")
    data["experiment"] = experiment
    m = ExperimentManifest.from_dict(data)
    overrides = {}
    if args.seed is not None:
        overrides["seeds"] = [args.seed]
    if args.out_dir is not None:
        overrides["out_dir"] = args.out_dir
    if args.threads is not None:
        overrides["threads"] = args.threads
    return replace(m, **overrides) if overrides else m


def _cmd_experiment(args, experiment: str) -> int:
    m = _load_manifest(args, experiment)
    table = run_experiment(m, corpus=args.real_corpus)
    for p in table.write(m.out_dir):
        print(p)
    return EXIT_OK


def _cmd_estimate(args) -> int:
    paths = list_images(args.images) if Path(args.images).is_dir() else [Path(args.images)]
    if not paths:
        raise ManifestError(f"no PGM/PNG images under {args.images}")
    images = [read_image(p) for p in paths]
    fp = estimate_fingerprint_ml(images, args.sigma0, clean=not args.no_clean)
    save_fingerprint(fp, args.output)
    print(json.dumps(dict(output=str(args.output), n_images=fp.n_images, shape=list(fp.shape),
                          cleaned=fp.cleaned, degenerate=fp.degenerate)))
    return EXIT_OK


def _cmd_identify(args) -> int:
    fp = load_fingerprint(args.fingerprint)
    query = read_image(args.image)
    mask = None if args.cutoff is None else mask_for_cutoff(None if args.cutoff == "full" else int(args.cutoff))
    rep = identify(query, fp, mask, args.measure, args.threshold, args.sigma0)
    print(json.dumps(dict(measure=rep.measure, value=rep.value, threshold=rep.threshold,
                          decision=rep.decision, cutoff=rep.cutoff_c)))
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="fragilefp", description=__doc__.splitlines()[0])
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)
    for name, exp in EXPERIMENT_COMMANDS.items():
        s = sub.add_parser(name, help=f"run the {exp} experiment")
        s.add_argument("--manifest", help="JSON manifest (defaults apply to omitted fields)")
        s.add_argument("--seed", type=int, help="replace the manifest's seed list by this single seed")
        s.add_argument("--out-dir", help="output directory for CSV files")
        s.add_argument("--threads", type=int, help="worker threads")
        s.add_argument("--real-corpus", help="directory of PGM/PNG images, one sub-directory per camera")
        s.set_defaults(func=lambda a, exp=exp: _cmd_experiment(a, exp))

    s = sub.add_parser("estimate", help="estimate a fingerprint from a directory of images")
    s.add_argument("images", help="image file or directory")
    s.add_argument("-o", "--output", required=True, help="fingerprint file to write")
    s.add_argument("--sigma0", type=float, default=5.0)
    s.add_argument("--no-clean", action="store_true", help="skip row/column zero-meaning")
    s.set_defaults(func=_cmd_estimate)

    s = sub.add_parser("identify", help="score an image against a stored fingerprint")
    s.add_argument("fingerprint")
    s.add_argument("image")
    s.add_argument("--cutoff", help="fragile cut-off c, or 'full' for the unmasked test")
    s.add_argument("--measure", choices=("pce", "ncc"), default="pce")
    s.add_argument("--threshold", type=float, default=0.0)
    s.add_argument("--sigma0", type=float, default=5.0)
    s.set_defaults(func=_cmd_identify)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_MANIFEST if exc.code else EXIT_OK
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        return args.func(args)
    except (ManifestError, ParameterError, ShapeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_MANIFEST
    except (NumericalError, DegenerateError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC


if __name__ == "__main__":
    sys.exit(main())
