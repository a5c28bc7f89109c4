import json

import numpy as np
import pytest

from fragilefp.errors import ManifestError
from fragilefp.experiments import EXPERIMENTS, ExperimentManifest, ResultTable, run_experiment
from fragilefp.imageio import write_pgm
from fragilefp.sensor import SceneSpec, capture, new_camera, render_scene

TINY = dict(scene=dict(height=64, width=64), qualities=[100, 80], cutoffs=["full", 1], n_fingerprint=4,
            n_attack=4, n_benchmark=3, n_safe=10, n_calibration=6, n_cameras=2, alphas=[0.0, 5.0],
            n_perm=20, max_samples=100, block=64)


def tiny(experiment, **kw):
    d = dict(TINY, experiment=experiment)
    if experiment in ("dct_recovery", "hsic"):
        d["cutoffs"] = [5]
    if experiment == "dct_recovery":
        d.update(scene=dict(height=16, width=16), n_benchmark=1, qualities=[95])
    d.update(kw)
    return ExperimentManifest.from_dict(d)


GRID = {
    "bound_curves": lambda m: len(m.qualities) * len(m.cutoffs),
    "fingerprint_quality": lambda m: len(m.qualities) * len(m.cutoffs),
    "roc": lambda m: len(m.cutoffs),
    "copy_attack": lambda m: len(m.qualities) * len(m.cutoffs) * len(m.alphas),
    "dct_recovery": lambda m: len(m.qualities) * len(m.cutoffs),
    "hsic": lambda m: len(m.qualities) * len(m.cutoffs) * len(m.scenarios),
    "triangle": lambda m: len(m.qualities) * len(m.cutoffs) * len(m.alphas),
}


@pytest.mark.parametrize("experiment", EXPERIMENTS)
def test_row_counts_and_determinism(experiment):
    m = tiny(experiment, seeds=[0, 1])
    a = run_experiment(m)
    assert len(a.rows) == len(m.seeds) * GRID[experiment](m)
    b = run_experiment(m)
    assert a.to_csv() == b.to_csv()


def test_threads_do_not_change_results():
    m = tiny("fingerprint_quality", seeds=[0, 1, 2])
    t1 = run_experiment(m)
    m.threads = 3
    assert run_experiment(m).to_csv() == t1.to_csv()


def test_provenance_header():
    t = run_experiment(tiny("fingerprint_quality"))
    lines = t.to_csv().splitlines()
    assert lines[0].startswith("# experiment: fingerprint_quality")
    assert any(l.startswith("# manifest_sha256: ") for l in lines)
    assert lines[5] == ",".join(t.columns)


def test_digest_ignores_output_location():
    a = tiny("roc")
    b = tiny("roc", out_dir="elsewhere", threads=4)
    assert a.digest() == b.digest()
    assert a.digest() != tiny("roc", seeds=[3]).digest()


@pytest.mark.parametrize("bad", [
    dict(qualities=[101]), dict(qualities=[0]), dict(qualities=[]), dict(cutoffs=[8]), dict(cutoffs=[-7]),
    dict(cutoffs=["high"]), dict(seeds=[-1]), dict(seeds=[]), dict(n_attack=0), dict(fpr=1.5),
    dict(scope="mid"), dict(scenarios=["x"]), dict(block=60), dict(schema_version=2), dict(bogus=1), dict(scene=dict(height=10)),
])
def test_manifest_validation(bad):
    with pytest.raises(ManifestError):
        ExperimentManifest.from_dict(dict(experiment="roc", **bad))


def test_manifest_json_roundtrip(tmp_path):
    m = tiny("copy_attack")
    (tmp_path / "m.json").write_text(json.dumps(m.to_dict()))
    back = ExperimentManifest.from_json(tmp_path / "m.json")
    assert back.to_dict() == m.to_dict()
    with pytest.raises(ManifestError):
        ExperimentManifest.from_dict(dict(experiment="nope"))


def test_table_helpers(tmp_path):
    t = ResultTable("x", ["a", "b"])
    t.add(1, 0.1)
    t.add(2, 0.2)
    assert t.column("b") == [0.1, 0.2]
    assert t.where(a=2) == [dict(a=2, b=0.2)]
    with pytest.raises(ValueError):
        t.add(1)
    (path,) = t.write(tmp_path)
    assert path.read_text().splitlines()[1] == "1,0.1"


def test_real_corpus(tmp_path):
    spec = SceneSpec("textured", height=64, width=64)
    for k in range(2):
        cam = new_camera(seed=k, height=64, width=64)
        d = tmp_path / f"cam{k}"
        d.mkdir()
        for s in range(12):
            write_pgm(d / f"{s:02d}.pgm", np.round(capture(cam, render_scene(spec, s), s)))
    m = tiny("fingerprint_quality", n_fingerprint=4, n_attack=4)
    t = run_experiment(m, corpus=tmp_path)
    assert len(t.rows) == GRID["fingerprint_quality"](m)
    with pytest.raises(ManifestError):
        run_experiment(tiny("fingerprint_quality", n_fingerprint=10, n_attack=10), corpus=tmp_path)
