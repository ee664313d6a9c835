"""End-to-end flow: image -> superpixels -> saliency -> classification -> trimap -> matte."""
from __future__ import annotations

import logging
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from automatte import classification as cls
from automatte import features, matting, saliency, segmentation, trimap
from automatte.config import PipelineConfig
from automatte.raster import check_rgb, luminance_gray, normalize, rgb_to_lab, save_gray

log = logging.getLogger(__name__)

STAGE_NAMES = (
    "oversegmentation",
    "saliency",
    "fg_superpixels",
    "bg_superpixels",
    "modified_saliency",
    "binarized",
    "eroded",
    "dilated",
    "difference",
    "trimap",
    "matte",
)

MIN_PIPELINE_SIDE = 32


class StageError(RuntimeError):
    def __init__(self, stage: str, exc: Exception):
        super().__init__(f"stage {stage!r} failed: {exc}")
        self.stage = stage
        self.cause = exc


@dataclass
class PipelineResult:
    trimap: trimap.Trimap
    matte: matting.AlphaMatte | None
    stages: dict = field(default_factory=dict)
    timings: dict = field(default_factory=dict)  # stage -> milliseconds
    flags: set = field(default_factory=set)
    superpixels: segmentation.SuperpixelMap | None = None
    descriptors: np.ndarray | None = None
    medians: np.ndarray | None = None
    initial: cls.LabelAssignment | None = None
    final: cls.LabelAssignment | None = None
    reassign_report: cls.ReassignReport | None = None
    total_ms: float = 0.0


class _Clock:
    def __init__(self, timings: dict):
        self.timings = timings

    def run(self, name, fn, *args, **kwargs):
        t0 = time.perf_counter()
        try:
            return fn(*args, **kwargs)
        except StageError:
            raise
        except Exception as exc:
            raise StageError(name, exc) from exc
        finally:
            self.timings[name] = self.timings.get(name, 0.0) + (time.perf_counter() - t0) * 1e3


def _saliency_maps(img, lab, sp, injected, threads):
    injected = list(injected or [None, None, None])
    if len(injected) != 3:
        raise ValueError("saliency overrides must be a list of three entries (None to compute)")
    tasks = [
        lambda: saliency.saliency_frequency_tuned(img, lab),
        lambda: saliency.saliency_spectral_residual(luminance_gray(lab)),
        lambda: saliency.saliency_region_contrast(lab, sp),
    ]
    maps: list = [None, None, None]
    todo = []
    for i in range(3):
        if injected[i] is not None:
            m = np.asarray(injected[i], dtype=np.float64)
            if m.shape != img.shape[:2]:
                raise ValueError(f"injected saliency map {i + 1} has shape {m.shape}, image is {img.shape[:2]}")
            maps[i] = normalize(m)
        else:
            todo.append(i)
    if threads > 1 and len(todo) > 1:
        with ThreadPoolExecutor(max_workers=min(threads, len(todo))) as pool:
            futs = {i: pool.submit(tasks[i]) for i in todo}
            for i, f in futs.items():
                maps[i] = f.result()
    else:
        for i in todo:
            maps[i] = tasks[i]()
    return maps


def _collect_stages(sp, sm, final, sm_mod, otsu, tm_stages, tm, matte) -> dict:
    fg_px = final.foreground[sp.labels]
    stages = {
        "oversegmentation": segmentation.boundary_map(sp.labels),
        "saliency": sm,
        "fg_superpixels": fg_px.astype(np.float64),
        "bg_superpixels": (~fg_px).astype(np.float64),
        "modified_saliency": sm_mod,
        "binarized": otsu.binary.astype(np.float64),
        "eroded": tm_stages["eroded"].astype(np.float64),
        "dilated": tm_stages["dilated"].astype(np.float64),
        "difference": tm_stages["difference"],
        "trimap": tm.value_field(),
    }
    if matte is not None:
        stages["matte"] = matte.alpha
    return stages


def run_pipeline(
    img: np.ndarray,
    cfg: PipelineConfig = PipelineConfig(),
    threads: int = 1,
    saliency_maps=None,
    stop_after_trimap: bool = False,
) -> PipelineResult:
    """Run every stage on an RGB raster; degenerate inputs raise flags, not errors."""
    t_start = time.perf_counter()
    img = check_rgb(img, MIN_PIPELINE_SIDE)
    timings: dict = {}
    clock = _Clock(timings)
    flags: set = set()

    lab = clock.run("lab", rgb_to_lab, img)
    sp = clock.run("segmentation", segmentation.slic_segment, lab, cfg.n_target, cfg.compactness, cfg.iters, cfg.seed)
    maps = clock.run("saliency", _saliency_maps, img, lab, sp, saliency_maps, threads)
    for i, m in enumerate(maps, start=1):
        if not m.any():
            flags.add(f"saliency_map{i}_constant")
    sm = clock.run("fusion", saliency.fuse_saliency, maps, cfg.weights)
    if not sm.any():
        flags.add("saliency_constant")

    medians = clock.run("region_median", segmentation.region_median, sp, sm)
    patches = clock.run("patches", features.extract_patches, img, sp)
    desc = clock.run("descriptors", features.otc_descriptors, patches)
    initial, final, _, _, report = clock.run(
        "classification", cls.classify_superpixels, desc, medians, float(sm.max()), cfg.classify
    )
    if not final.foreground.any():
        flags.add("no_foreground_superpixels")
    sm_mod = clock.run("modified_saliency", cls.modified_saliency, sm, sp, final)

    otsu = clock.run("binarize", trimap.otsu_binarize, sm_mod)
    if otsu.degenerate:
        flags.add("otsu_degenerate")
    tm_stages: dict = {}
    tm = clock.run("trimap", trimap.synthesize_trimap, otsu.binary, cfg.trimap, threads, tm_stages)
    flags |= tm.flags

    matte = None
    if not stop_after_trimap:
        mp = cfg.matting
        system = clock.run("build_system", matting.build_system, img, tm, mp.lam, mp.epsilon)
        matte = clock.run("solve_alpha", matting.solve_alpha, system, mp.tol, mp.maxiter)
        if not matte.info.converged:
            flags.add("matting_not_converged")

    stages = {}
    if cfg.dump_intermediates:
        stages = clock.run("dump", _collect_stages, sp, sm, final, sm_mod, otsu, tm_stages, tm, matte)

    total_ms = (time.perf_counter() - t_start) * 1e3
    return PipelineResult(
        trimap=tm,
        matte=matte,
        stages=stages,
        timings=timings,
        flags=flags,
        superpixels=sp,
        descriptors=desc,
        medians=medians,
        initial=initial,
        final=final,
        reassign_report=report,
        total_ms=total_ms,
    )


def ssd(a, b) -> tuple[float, float]:
    """Sum of squared differences between two mattes and the per-pixel mean."""
    a = a.alpha if isinstance(a, matting.AlphaMatte) else a
    b = b.alpha if isinstance(b, matting.AlphaMatte) else b
    return matting.ssd(a, b)


def write_outputs(result: PipelineResult, out_dir, dump: bool = False) -> list[Path]:
    """Write trimap/matte (and every intermediate when ``dump``); returns the paths."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    written = []
    p = out / "trimap.png"
    trimap.save_trimap(result.trimap, p)
    written.append(p)
    if result.matte is not None:
        p = out / "matte.png"
        save_gray(result.matte.alpha, p)
        written.append(p)
    if dump:
        for i, name in enumerate(STAGE_NAMES):
            if name not in result.stages:
                continue
            p = out / f"stage_{i:02d}_{name}.png"
            save_gray(np.clip(result.stages[name], 0.0, 1.0), p)
            written.append(p)
        sp = result.superpixels
        for name, writer in (
            ("labels.pgm", lambda q: segmentation.save_label_pgm(sp, q)),
            ("regions.csv", lambda q: segmentation.save_region_table(sp, q)),
            ("descriptors.csv", lambda q: features.save_descriptor_table(result.descriptors, q)),
            (
                "classification.csv",
                lambda q: cls.save_classification_table(q, result.medians, result.initial, result.final, result.reassign_report),
            ),
        ):
            writer(out / name)
            written.append(out / name)
    return written
