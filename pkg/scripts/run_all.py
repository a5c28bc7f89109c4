"""Run every manifest in scripts/manifests/ and write CSVs under results/<name>/.

    python scripts/run_all.py [--only roc triangle] [--threads 4] [--out results]
"""
import argparse
import json
import sys
import time
from pathlib import Path

from fragilefp.cli import main as cli_main

HERE = Path(__file__).resolve().parent


def main(argv=None) -> int:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--only", nargs="*", help="manifest names (file stems) to run")
    ap.add_argument("--threads", type=int, default=1)
    ap.add_argument("--out", default="results")
    args = ap.parse_args(argv)
    manifests = sorted((HERE / "manifests").glob("*.json"))
    if args.only:
        manifests = [m for m in manifests if m.stem in args.only]
    status = 0
    for path in manifests:
        exp = json.loads(path.read_text())["experiment"]
        t0 = time.perf_counter()
        code = cli_main([exp.replace("_", "-"), "--manifest", str(path), "--threads", str(args.threads),
                         "--out-dir", str(Path(args.out) / path.stem)])
        print(f"{path.stem}: exit {code} in {time.perf_counter() - t0:.1f} s", file=sys.stderr)
        status = status or code
    return status


if __name__ == "__main__":
    sys.exit(main())
