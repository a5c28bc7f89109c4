import json

import numpy as np
import pytest

from fragilefp.cli import main
from fragilefp.imageio import write_pgm
from fragilefp.sensor import SceneSpec, capture, capture_many, new_camera

from test_experiments import TINY


def write_manifest(path, **kw):
    path.write_text(json.dumps(dict(TINY, **kw)))
    return str(path)


@pytest.mark.parametrize("cmd", ["fingerprint-quality", "roc", "copy-attack"])
def test_rerun_byte_identical(tmp_path, cmd, capsys):
    man = write_manifest(tmp_path / "m.json")
    outs = []
    for run in ("a", "b"):
        assert main([cmd, "--manifest", man, "--seed", "3", "--out-dir", str(tmp_path / run)]) == 0
        outs.append({p.name: p.read_bytes() for p in (tmp_path / run).iterdir()})
    assert outs[0] == outs[1] and outs[0]


def test_manifest_errors_exit_2(tmp_path, capsys):
    assert main(["roc", "--manifest", write_manifest(tmp_path / "m.json", qualities=[120])]) == 2
    assert main(["roc", "--manifest", str(tmp_path / "missing.json")]) == 2
    bad = tmp_path / "bad.json"
    bad.write_text("{not json")
    assert main(["roc", "--manifest", str(bad)]) == 2
    assert main(["hsic", "--manifest", write_manifest(tmp_path / "w.json", experiment="roc")]) == 2
    assert main(["no-such-command"]) == 2
    assert "error" in capsys.readouterr().err


def test_numerical_failure_exit_3(tmp_path, capsys):
    d = tmp_path / "dark"
    d.mkdir()
    write_pgm(d / "a.pgm", np.zeros((64, 64)))
    fp = tmp_path / "k.kfp"
    assert main(["estimate", str(d), "-o", str(fp)]) == 0
    # an all-zero fingerprint has no correlation to measure
    assert main(["identify", str(fp), str(d / "a.pgm")]) == 3


def test_estimate_and_identify(tmp_path, capsys):
    cam = new_camera(seed=1, height=64, width=64)
    d = tmp_path / "flat"
    d.mkdir()
    for i, img in enumerate(capture_many(cam, SceneSpec("flat_field", height=64, width=64), range(8))):
        write_pgm(d / f"{i}.pgm", np.round(img))
    fp = tmp_path / "k.kfp"
    assert main(["estimate", str(d), "-o", str(fp)]) == 0
    info = json.loads(capsys.readouterr().out)
    assert info["n_images"] == 8 and info["cleaned"]
    q = tmp_path / "q.pgm"
    write_pgm(q, np.round(capture(cam, np.full((64, 64), 120.0), 99)))
    assert main(["identify", str(fp), str(q), "--cutoff", "1", "--threshold", "30"]) == 0
    rep = json.loads(capsys.readouterr().out)
    assert rep["cutoff"] == 1 and rep["decision"]
