import csv
import json
import math
import re
import subprocess
import sys

import numpy as np
import pytest

from npcquake.cli import build_parser, run
from npcquake.correlate import interpolate_slip, load_slip

ERROR_LINE = re.compile(r"^error code=(\d) kind=\w+ msg=.+$")
MAP = "lon=lon,lat=lat,mag=mag,time=time,id=id"


def read(path):
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))


@pytest.fixture(scope="module")
def synth_dir(tmp_path_factory):
    d = tmp_path_factory.mktemp("synth")
    assert run(["synth", "--blobs", "5", "--n", "1000", "--seed", "7", "--out-dir", str(d)]) == 0
    return d


@pytest.fixture(scope="module")
def clustered(synth_dir):
    out = synth_dir / "cluster.csv"
    code = run(["cluster", "--catalog", str(synth_dir / "catalog.csv"), "--map", MAP,
                "--out", str(out), "--tree-out", str(synth_dir / "tree.csv"),
                "--mode-out", str(synth_dir / "mode.csv")])
    assert code == 0
    return out


def test_synth_then_cluster_finds_five(synth_dir, clustered):
    rows = read(clustered)
    assert len(rows) == 1000
    assert {r["label"] for r in rows} == {"1", "2", "3", "4", "5"}
    cfg = json.loads((synth_dir / "cluster.csv.config.json").read_text())
    assert cfg["alloc"] == "batch" and cfg["alpha_levels"] == 99 and cfg["command"] == "cluster"
    tree = read(synth_dir / "tree.csv")
    assert sum(1 for r in tree if r["parent"] == "-1") >= 1
    mode = read(synth_dir / "mode.csv")
    assert max(int(r["m"]) for r in mode) == 5


def test_synth_slip_patches_on_blobs_one_and_four(synth_dir):
    rows = read(synth_dir / "catalog.csv")
    truth = np.array([int(r["true_label"]) for r in rows])
    pts = np.array([[float(r["lon"]), float(r["lat"])] for r in rows])
    slip, outside = interpolate_slip(load_slip(synth_dir / "slip.csv"), pts)
    assert not outside.any()
    on_patch = np.isin(truth, [1, 4])
    top = slip >= np.quantile(slip, 1 - on_patch.mean())
    assert np.mean(top == on_patch) >= 0.99
    assert slip[truth == 1].mean() > slip[truth == 4].mean() > 0
    assert (slip[~on_patch] == 0).mean() > 0.99


def test_synth_same_seed_same_files(tmp_path, synth_dir):
    run(["synth", "--blobs", "5", "--n", "1000", "--seed", "7", "--out-dir", str(tmp_path)])
    for name in ("catalog.csv", "slip.csv", "trench.txt", "catalog.csv.config.json"):
        if name.endswith("json"):
            a = json.loads((tmp_path / name).read_text())
            b = json.loads((synth_dir / name).read_text())
            a.pop("out_dir"), b.pop("out_dir")
            assert a == b
        else:
            assert (tmp_path / name).read_bytes() == (synth_dir / name).read_bytes()


def test_one_blob_is_unimodal(tmp_path):
    run(["synth", "--blobs", "1", "--n", "300", "--seed", "3", "--out-dir", str(tmp_path)])
    run(["cluster", "--catalog", str(tmp_path / "catalog.csv"), "--out", str(tmp_path / "c.csv")])
    assert {r["label"] for r in read(tmp_path / "c.csv")} == {"1"}


def test_two_events_error(tmp_path, capsys):
    p = tmp_path / "two.csv"
    p.write_text("lon,lat,mag,time\n-72,-36,3,2010-03-01T00:00:00Z\n-71,-35,3,2010-03-02T00:00:00Z\n")
    assert run(["cluster", "--catalog", str(p)]) == 3
    err = capsys.readouterr().err.strip().splitlines()
    assert len(err) == 1 and ERROR_LINE.match(err[0])
    assert "need >= 3 events" in err[0]


def test_exit_codes(tmp_path, capsys, synth_dir, clustered):
    assert run(["cluster", "--catalog", str(synth_dir / "catalog.csv"), "--bogus"]) == 2
    assert run(["frobnicate"]) == 2
    assert run(["cluster", "--catalog", str(tmp_path / "missing.csv")]) == 3
    bad = tmp_path / "bad.csv"
    bad.write_text("lon,lat,mag,time\n-72,95,3,2010-03-01T00:00:00Z\n")
    capsys.readouterr()
    assert run(["density", "--catalog", str(bad)]) == 3
    assert ":2:" in capsys.readouterr().err
    one = tmp_path / "one.csv"
    one.write_text("lon,lat,label\n0,0,1\n1,0,1\n0,1,1\n")
    assert run(["dbs", "--partition", str(one)]) == 4
    err = capsys.readouterr().err
    assert ERROR_LINE.match(err.strip()) and "kind=DegenerateError" in err


def test_mutually_exclusive_flags(tmp_path, synth_dir):
    assert run(["anova", "--input", str(tmp_path / "x.csv"), "--value", "v",
                "--slip", str(synth_dir / "slip.csv")]) == 2
    assert run(["correlate", "--catalog", str(synth_dir / "catalog.csv"), "--slip",
                str(synth_dir / "slip.csv"), "--mode", "events", "--mask", "m.txt"]) == 2


def test_stdout_output_and_config_on_stderr(synth_dir, capsys):
    assert run(["density", "--catalog", str(synth_dir / "catalog.csv"), "--min-mag", "4"]) == 0
    cap = capsys.readouterr()
    lines = cap.out.splitlines()
    assert lines[0] == "lon,lat,f,log_f" and len(lines) > 1
    assert json.loads(cap.err)["min_mag"] == 4.0


def test_help_documents_every_flag(capsys):
    parser = build_parser()
    sub = next(a for a in parser._actions if a.__class__.__name__ == "_SubParsersAction")
    assert set(sub.choices) == {"synth", "density", "cluster", "dbs", "anova", "agree",
                                "temporal", "correlate"}
    for name, sp in sub.choices.items():
        text = sp.format_help()
        for act in sp._actions:
            for opt in act.option_strings:
                assert opt in text, (name, opt)
            if act.option_strings and act.dest != "help":
                assert act.help, (name, act.dest)
        assert run([name, "--help"]) == 0


def test_module_entry_point():
    out = subprocess.run([sys.executable, "-m", "npcquake", "--help"], capture_output=True, text=True)
    assert out.returncode == 0 and "cluster" in out.stdout


def test_anova_agree_dbs_correlate(tmp_path, synth_dir, clustered):
    assert run(["dbs", "--partition", str(clustered), "--out", str(tmp_path / "dbs.csv"),
                "--summary-out", str(tmp_path / "sil.csv")]) == 0
    vals = np.array([float(r["dbs"]) for r in read(tmp_path / "dbs.csv")])
    assert (np.abs(vals) <= 1).all() and np.abs(vals).max() == 1.0

    assert run(["anova", "--input", str(clustered), "--slip", str(synth_dir / "slip.csv"),
                "--out", str(tmp_path / "kw.csv"), "--matrix-out", str(tmp_path / "mat.csv")]) == 0
    kw = {r["quantity"]: r["value"] for r in read(tmp_path / "kw.csv")}
    assert kw["df"] == "4" and kw["threshold"] == repr(0.005)
    mat = read(tmp_path / "mat.csv")
    assert len(mat) == 5 and mat[0]["1"] == "-"

    # agreement of the clustering with the planted truth
    truth = tmp_path / "truth.csv"
    rows = read(synth_dir / "catalog.csv")
    truth.write_text("id,label\n" + "".join(f"{r['id']},{r['true_label']}\n" for r in rows))
    assert run(["agree", "--a", str(clustered), "--b", str(truth), "--out",
                str(tmp_path / "agree.csv")]) == 0
    ag = read(tmp_path / "agree.csv")[0]
    assert float(ag["HA"]) >= 0.95 and ag["K"] == "5"

    assert run(["correlate", "--catalog", str(synth_dir / "catalog.csv"), "--slip",
                str(synth_dir / "slip.csv"), "--trench", str(synth_dir / "trench.txt"),
                "--out", str(tmp_path / "sc.csv"), "--summary-out", str(tmp_path / "sum.csv")]) == 0
    summ = read(tmp_path / "sum.csv")
    assert len(summ) == 5 and all(float(r["dist_min"]) > 0 for r in summ)
    mask = tmp_path / "mask.txt"
    mask.write_text("-74,-38\n-71,-38\n-71,-34\n-74,-34\n")
    assert run(["correlate", "--catalog", str(synth_dir / "catalog.csv"), "--slip",
                str(synth_dir / "slip.csv"), "--mode", "grid", "--grid", "30,30", "--mask",
                str(mask), "--out", str(tmp_path / "g.csv"), "--summary-out",
                str(tmp_path / "gs.csv")]) == 0
    assert len(read(tmp_path / "g.csv")) > 0


def test_temporal_command(tmp_path, synth_dir):
    assert run(["temporal", "--catalog", str(synth_dir / "catalog.csv"), "--start-day", "10",
                "--days", "3", "--out", str(tmp_path / "t.csv")]) == 0
    rows = read(tmp_path / "t.csv")
    assert [r["day"] for r in rows] == ["10", "11", "12"]


def test_config_echo_is_strict_json(tmp_path):
    import argparse
    from npcquake.cli import _echo_config
    ns = argparse.Namespace(command="density", min_mag=math.inf, bbox=(1.0, 2.0, 3.0, 4.0))
    _echo_config(ns, tmp_path / "d.csv")
    cfg = json.loads((tmp_path / "d.csv.config.json").read_text(),
                     parse_constant=lambda c: pytest.fail(f"non-JSON constant {c}"))
    assert cfg["min_mag"] == "inf" and cfg["bbox"] == [1.0, 2.0, 3.0, 4.0]
