import csv
import filecmp
import re

import numpy as np
import pytest

from automatte import cli
from automatte import config as cf
from automatte.raster import load_gray, save_gray, save_rgb
from automatte.trimap import load_trimap
from conftest import disk_image
from fixtures import square_on_gradient


@pytest.fixture
def disk_png(tmp_path):
    p = tmp_path / "disk.png"
    save_rgb(disk_image(), p)
    return p


def _help(capsys, *argv):
    assert cli.cli_main([*argv, "--help"]) == 0
    return capsys.readouterr().out


@pytest.mark.parametrize("cmd", ["trimap", "matte", "auto", "eval", "corpus"])
def test_help_lists_each_flag_once(capsys, cmd):
    text = _help(capsys, cmd)
    listed = re.findall(r"^\s+(?:-\w(?: \S+)?, )?(--[a-z][a-z0-9-]*)", text, re.M)
    assert listed and len(listed) == len(set(listed))
    # every flag in the usage line is described exactly once
    usage = text.split("\n\n")[0]
    assert set(re.findall(r"(--[a-z][a-z0-9-]*)", usage)) <= set(listed)


def test_config_keys_and_flags_are_bijective(capsys):
    text = _help(capsys, "auto")
    flags = set(re.findall(r"^\s+(--[a-z][a-z0-9-]*) V", text, re.M))
    assert flags == {cf.flag_name(k) for k in cf.KEYS}
    assert len({cf.flag_name(k) for k in cf.KEYS}) == len(cf.KEYS)
    matte_flags = set(re.findall(r"^\s+(--[a-z][a-z0-9-]*) V", _help(capsys, "matte"), re.M))
    assert matte_flags == {cf.flag_name(k) for k in cli.MATTING_KEYS}


def test_eval_identical(tmp_path, capsys):
    m = tmp_path / "m.png"
    save_gray(np.random.default_rng(0).random((20, 20)), m)
    assert cli.cli_main(["eval", "--test", str(m), "--ref", str(m)]) == 0
    assert capsys.readouterr().out.strip() == "ssd=0 mean=0"


def test_eval_value(tmp_path, capsys):
    save_gray(np.ones((10, 10)), tmp_path / "a.png")
    save_gray(np.zeros((10, 10)), tmp_path / "b.png")
    assert cli.cli_main(["eval", "--test", str(tmp_path / "a.png"), "--ref", str(tmp_path / "b.png")]) == 0
    assert capsys.readouterr().out.strip() == "ssd=100 mean=1"


def test_bad_c_is_usage_error(disk_png, tmp_path, capsys):
    assert cli.cli_main(["trimap", str(disk_png), "-o", str(tmp_path / "t.png"), "--c", "1.5"]) == 2
    err = capsys.readouterr().err
    assert "usage:" in err and "0 < c < 1" in err
    assert not (tmp_path / "t.png").exists()


def test_unknown_flag_and_missing_input(tmp_path, capsys):
    assert cli.cli_main(["trimap", "x.png", "-o", "y.png", "--bogus"]) == 2
    assert cli.cli_main(["trimap", str(tmp_path / "none.png"), "-o", str(tmp_path / "y.png")]) == 2
    assert cli.cli_main([]) == 2


def test_config_file_and_override(disk_png, tmp_path, capsys):
    cfg = tmp_path / "c.cfg"
    cfg.write_text("t1_fraction = 1.2\n")
    assert cli.cli_main(["trimap", str(disk_png), "-o", str(tmp_path / "t.png"), "--config", str(cfg)]) == 2
    assert "t1_fraction" in capsys.readouterr().err
    assert cli.cli_main(["trimap", str(disk_png), "-o", str(tmp_path / "t.png"), "--config", str(tmp_path / "no.cfg")]) == 2
    # a flag overrides the invalid file value
    assert cli.cli_main(["trimap", str(disk_png), "-o", str(tmp_path / "t.png"), "--config", str(cfg), "--t1-fraction", "0.3"]) == 0


def test_trimap_then_matte(disk_png, tmp_path):
    t = tmp_path / "t.png"
    m = tmp_path / "m.png"
    assert cli.cli_main(["trimap", str(disk_png), "-o", str(t)]) == 0
    assert set(np.unique(load_gray(t)).tolist()) <= {0, 166, 255}
    assert cli.cli_main(["matte", str(disk_png), "--trimap", str(t), "-o", str(m), "--lambda", "50"]) == 0
    assert load_gray(m).shape == (128, 128)
    # the matte step refuses pipeline-only flags
    assert cli.cli_main(["matte", str(disk_png), "--trimap", str(t), "-o", str(m), "--k", "3"]) == 2


def test_refuses_to_overwrite_input(disk_png):
    assert cli.cli_main(["trimap", str(disk_png), "-o", str(disk_png)]) == 2


def test_matte_size_mismatch(disk_png, tmp_path):
    t = tmp_path / "t.png"
    save_gray(np.zeros((10, 10)), t)
    assert cli.cli_main(["matte", str(disk_png), "--trimap", str(t), "-o", str(tmp_path / "m.png")]) == 2


def test_auto_dump_deterministic(disk_png, tmp_path):
    a, b = tmp_path / "a", tmp_path / "b"
    for out in (a, b):
        assert cli.cli_main(["auto", str(disk_png), "-o", str(out), "--dump", "--seed", "7"]) == 0
    cmp = filecmp.dircmp(a, b)
    assert not cmp.left_only and not cmp.right_only
    names = sorted(p.name for p in a.iterdir())
    assert len(names) == 2 + 11 + 4
    _, mismatch, errors = filecmp.cmpfiles(a, b, names, shallow=False)
    assert not mismatch and not errors


def test_saliency_from(tmp_path):
    img = square_on_gradient()
    save_rgb(img, tmp_path / "sq.png")
    sm = np.zeros(img.shape[:2])
    sm[20:60, 30:75] = 1.0
    save_gray(sm, tmp_path / "s.png")
    out = tmp_path / "t.png"
    args = ["trimap", str(tmp_path / "sq.png"), "-o", str(out), "--saliency-from", f",,{tmp_path / 's.png'}", "--weights", "0,0,1"]
    assert cli.cli_main(args) == 0
    tm = load_trimap(out)
    fg = tm.labels == 2
    assert fg.any() and not fg[:15].any()
    save_gray(np.zeros((5, 5)), tmp_path / "small.png")
    args[-3] = str(tmp_path / "small.png")
    assert cli.cli_main(args) == 2


def test_corpus(tmp_path, capsys):
    d = tmp_path / "imgs"
    d.mkdir()
    save_rgb(square_on_gradient(), d / "b_square.png")
    save_rgb(disk_image(96, 30), d / "a_disk.png")
    save_rgb(np.full((40, 40, 3), 90, np.uint8), d / "c_flat.png")
    (d / "notes.txt").write_text("ignored")
    refs = tmp_path / "refs"
    refs.mkdir()
    save_gray(np.zeros((96, 96)), refs / "a_disk.png")
    report = tmp_path / "r.csv"
    code = cli.cli_main(["corpus", str(d), "-o", str(report), "--ref-dir", str(refs)])
    assert code == 1  # the flat image raises degenerate flags
    text = report.read_bytes()
    assert b"\r\n" not in text
    rows = list(csv.DictReader(text.decode("utf-8").splitlines()))
    assert [r["name"] for r in rows] == ["a_disk.png", "b_square.png", "c_flat.png"]
    assert rows[0]["ssd_vs_reference"] != "" and rows[1]["ssd_vs_reference"] == ""
    for r in rows:
        fg, unk = float(r["fg_fraction"]), float(r["unknown_fraction"])
        assert 0 <= fg <= 1 and 0 <= unk <= 1 and fg + unk <= 1
    assert "empty_foreground" in rows[2]["flags"]
    assert "images=3" in capsys.readouterr().out


def test_corpus_worker_count_irrelevant(tmp_path):
    d = tmp_path / "imgs"
    d.mkdir()
    for i in range(3):
        save_rgb(square_on_gradient(60 + 4 * i, 70), d / f"{i}.png")
    one = cli.run_corpus(d, cf.PipelineConfig(), workers=1)
    many = cli.run_corpus(d, cf.PipelineConfig(), workers=3)
    strip = lambda rep: [(r.name, r.fg_fraction, r.unknown_fraction, r.flags) for r in rep.rows]
    assert strip(one) == strip(many)


def test_corpus_bad_dir(tmp_path):
    assert cli.cli_main(["corpus", str(tmp_path / "nope"), "-o", str(tmp_path / "r.csv")]) == 2


def test_threads_env(monkeypatch):
    from automatte import kernels

    monkeypatch.setenv("AUTOMATTE_THREADS", "3")
    assert kernels.default_threads() == 3
    monkeypatch.setenv("AUTOMATTE_THREADS", "zero")
    with pytest.raises(ValueError):
        kernels.default_threads()
