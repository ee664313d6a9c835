import numpy as np
import pytest

from automatte import pipeline as pl
from automatte.config import PipelineConfig, replace
from automatte.raster import load_field, load_gray
from automatte.trimap import BACKGROUND, FOREGROUND, UNKNOWN, load_trimap
from conftest import disk_image, disk_mask
from fixtures import square_on_gradient, textured_object


@pytest.fixture(scope="module")
def disk_result():
    return pl.run_pipeline(disk_image(), replace(PipelineConfig(), dump_intermediates=True))


def test_disk_end_to_end(disk_result):
    res = disk_result
    truth = disk_mask()
    fg = res.trimap.labels == FOREGROUND
    assert fg.any() and not (fg & ~truth).any()
    pad = np.pad(truth, 1, mode="edge")
    edge = truth & ~(pad[:-2, 1:-1] & pad[2:, 1:-1] & pad[1:-1, :-2] & pad[1:-1, 2:])
    assert (res.trimap.labels[edge] == UNKNOWN).all()
    assert np.abs(res.matte.alpha - truth).mean() <= 0.1
    assert res.flags == set()


def test_stage_set_and_order(disk_result):
    assert tuple(disk_result.stages) == pl.STAGE_NAMES
    for name, arr in disk_result.stages.items():
        assert arr.shape == (128, 128), name


def test_timings_cover_total(disk_result):
    assert abs(sum(disk_result.timings.values()) - disk_result.total_ms) <= 0.05 * disk_result.total_ms


def test_constant_image_degenerates_cleanly():
    res = pl.run_pipeline(np.full((48, 48, 3), 128, np.uint8))
    assert (res.trimap.labels == BACKGROUND).all()
    assert {"saliency_constant", "otsu_degenerate", "empty_foreground", "no_foreground_superpixels"} <= res.flags
    assert not res.matte.alpha.any()


def test_repeat_runs_identical():
    img = textured_object()
    a = pl.run_pipeline(img)
    b = pl.run_pipeline(img)
    assert np.array_equal(a.trimap.labels, b.trimap.labels)
    assert np.array_equal(a.matte.alpha, b.matte.alpha)


def test_threads_do_not_change_result():
    img = square_on_gradient()
    a = pl.run_pipeline(img, threads=1)
    b = pl.run_pipeline(img, threads=4)
    assert np.array_equal(a.trimap.labels, b.trimap.labels)
    assert np.array_equal(a.matte.alpha, b.matte.alpha)


def test_saliency_injection_is_used():
    img = square_on_gradient()
    inject = np.zeros(img.shape[:2])
    inject[10:30, 10:30] = 1.0
    cfg = replace(PipelineConfig(), weights=type(PipelineConfig().weights)(0.0, 0.0, 1.0))
    res = pl.run_pipeline(img, cfg, saliency_maps=[None, None, inject * 0.5], stop_after_trimap=True)
    assert res.matte is None
    fg = res.trimap.labels == FOREGROUND
    assert fg.any() and fg[10:30, 10:30].sum() == fg.sum()
    with pytest.raises(pl.StageError):
        pl.run_pipeline(img, saliency_maps=[np.zeros((3, 3)), None, None])


def test_small_image_rejected():
    with pytest.raises(ValueError):
        pl.run_pipeline(np.zeros((31, 64, 3), np.uint8))


def test_stage_error_names_stage(monkeypatch):
    def boom(*a, **k):
        raise RuntimeError("kaput")

    monkeypatch.setattr(pl.features, "otc_descriptors", boom)
    with pytest.raises(pl.StageError) as info:
        pl.run_pipeline(square_on_gradient())
    assert info.value.stage == "descriptors"


def test_written_files_reload(tmp_path, disk_result):
    paths = pl.write_outputs(disk_result, tmp_path, dump=True)
    names = {p.name for p in paths}
    assert {"trimap.png", "matte.png", "labels.pgm", "regions.csv", "descriptors.csv", "classification.csv"} <= names
    assert len([n for n in names if n.startswith("stage_")]) == 11
    assert np.array_equal(load_trimap(tmp_path / "trimap.png").labels, disk_result.trimap.labels)
    back = load_field(tmp_path / "matte.png")
    assert np.abs(back - disk_result.matte.alpha).max() <= 0.5 / 255 + 1e-12
    expect = np.floor(disk_result.matte.alpha * 255 + 0.5)
    assert np.array_equal(load_gray(tmp_path / "matte.png"), expect)


def test_ssd_examples():
    assert pl.ssd(np.ones((10, 10)), np.zeros((10, 10)))[0] == 100.0
    assert pl.ssd(np.ones((4, 4)), np.ones((4, 4))) == (0.0, 0.0)


def test_fallback_backend_matches(tmp_path):
    import os
    import subprocess
    import sys

    from automatte import kernels

    if "cython" not in kernels.available_backends():
        pytest.skip("compiled kernels not built")
    img_path = tmp_path / "disk.png"
    from automatte.raster import save_rgb

    save_rgb(disk_image(96, 30), img_path)
    outs = {}
    for pure in ("0", "1"):
        out = tmp_path / f"out{pure}"
        env = {**os.environ, "AUTOMATTE_PURE_PYTHON": pure}
        code = (
            "import sys; from automatte import kernels; from automatte.cli import cli_main; "
            f"print(kernels.BACKEND); sys.exit(cli_main(['auto', {str(img_path)!r}, '-o', {str(out)!r}]))"
        )
        proc = subprocess.run([sys.executable, "-c", code], env=env, capture_output=True, text=True)
        assert proc.returncode == 0, proc.stderr
        outs[proc.stdout.strip()] = out
    assert set(outs) == {"cython", "python"}
    a, b = outs["cython"], outs["python"]
    assert (a / "trimap.png").read_bytes() == (b / "trimap.png").read_bytes()
    diff = np.abs(load_gray(a / "matte.png").astype(int) - load_gray(b / "matte.png").astype(int))
    assert diff.max() <= 1
