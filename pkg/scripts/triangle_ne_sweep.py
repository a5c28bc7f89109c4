"""Triangle-test detection at the first fragile PCE crossing as a function of N_E.

Reproduces the sweep behind the simulator limitation noted in the README:
    python scripts/triangle_ne_sweep.py --ne 20 50 150 --seeds 0 1 2
"""
import argparse

from fragilefp.experiments import ExperimentManifest, run_experiment


def first_crossing(table):
    rows = sorted((dict(zip(table.columns, r)) for r in table.rows), key=lambda r: (r["seed"], r["alpha"]))
    out = {}
    for r in rows:
        if r["crossed"] and r["seed"] not in out:
            out[r["seed"]] = r
    return out


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--ne", type=int, nargs="+", default=[20, 50, 150])
    ap.add_argument("--seeds", type=int, nargs="+", default=[0, 1, 2])
    ap.add_argument("--size", type=int, default=256)
    ap.add_argument("--quality", type=int, default=90)
    args = ap.parse_args(argv)
    print("n_attack,seed,alpha,mean_pce,threshold,detection,false_alarm")
    for ne in args.ne:
        m = ExperimentManifest("triangle", seeds=args.seeds, scene=dict(height=args.size, width=args.size),
                               qualities=[args.quality], cutoffs=[1], n_attack=ne, n_benchmark=10, n_safe=30)
        for seed, r in sorted(first_crossing(run_experiment(m)).items()):
            print(f"{ne},{seed},{r['alpha']:.4g},{r['mean_pce']:.2f},{r['threshold']:.2f},"
                  f"{r['triangle_detection']:.3f},{r['triangle_false_alarm']:.4f}")


if __name__ == "__main__":
    main()
