"""Pipeline configuration and the flat ``key = value`` config file format."""
from __future__ import annotations

import dataclasses
from dataclasses import dataclass, field

from automatte.classification import ClassifyParams
from automatte.saliency import FusionWeights
from automatte.trimap import TrimapParams


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class MattingParams:
    lam: float = 100.0
    epsilon: float = 1e-5
    tol: float = 1e-6
    maxiter: int = 2000

    def __post_init__(self):
        if not self.lam > 0:
            raise ValueError(f"lambda must be > 0, got {self.lam}")
        if not self.epsilon > 0:
            raise ValueError(f"epsilon must be > 0, got {self.epsilon}")
        if not self.tol > 0:
            raise ValueError(f"cg_tol must be > 0, got {self.tol}")
        if self.maxiter < 1:
            raise ValueError(f"cg_maxiter must be >= 1, got {self.maxiter}")


@dataclass(frozen=True)
class PipelineConfig:
    n_target: int = 300
    compactness: float = 10.0
    iters: int = 10
    weights: FusionWeights = field(default_factory=FusionWeights)
    classify: ClassifyParams = field(default_factory=ClassifyParams)
    trimap: TrimapParams = field(default_factory=TrimapParams)
    matting: MattingParams = field(default_factory=MattingParams)
    seed: int = 0
    dump_intermediates: bool = False

    def __post_init__(self):
        if self.n_target < 1:
            raise ValueError(f"n_target must be >= 1, got {self.n_target}")
        if not self.compactness > 0:
            raise ValueError(f"compactness must be > 0, got {self.compactness}")
        if self.iters < 1:
            raise ValueError(f"iters must be >= 1, got {self.iters}")


def _floats(text: str, n: int) -> tuple[float, ...]:
    parts = [p.strip() for p in text.split(",")]
    if len(parts) != n:
        raise ValueError(f"expected {n} comma-separated numbers, got {text!r}")
    return tuple(float(p) for p in parts)


def _ints(text: str, n: int) -> tuple[int, ...]:
    parts = [p.strip() for p in text.split(",")]
    if len(parts) != n:
        raise ValueError(f"expected {n} comma-separated integers, got {text!r}")
    return tuple(int(p) for p in parts)


def _weights(text: str) -> tuple[float, float, float]:
    parts = [p.strip() for p in text.split(",")]
    if len(parts) != 3:
        raise ValueError(f"expected 3 comma-separated weights, got {text!r}")
    out = []
    for p in parts:
        if "/" in p:
            num, den = p.split("/", 1)
            out.append(float(num) / float(den))
        else:
            out.append(float(p))
    return tuple(out)


# key -> (parser, help); flags are "--" + key with "_" replaced by "-"
KEYS = {
    "n_target": (int, "target superpixel count"),
    "compactness": (float, "SLIC compactness m"),
    "iters": (int, "SLIC iterations"),
    "weights": (_weights, "saliency fusion weights b1,b2,b3 (fractions like 1/3 allowed)"),
    "t1_fraction": (float, "foreground threshold as a fraction of max saliency"),
    "gamma": (float, "reassignment threshold multiplier on the mean distance"),
    "k": (int, "k-means clusters per side"),
    "dfb_agg": (str, "aggregate of distances to opposite centers: mean or min"),
    "radii": (lambda s: _ints(s, 2), "erode,dilate disk radii"),
    "c": (float, "unknown level C of the trimap, 0 < C < 1"),
    "lambda": (float, "weight of the known-pixel data term"),
    "epsilon": (float, "ridge regulariser of the local colour model"),
    "cg_tol": (float, "relative residual tolerance of the matting solve"),
    "cg_maxiter": (int, "iteration cap of the matting solve"),
    "seed": (int, "seed recorded with the run (all stages are deterministic)"),
}


def flag_name(key: str) -> str:
    return "--" + key.replace("_", "-")


def to_flat(cfg: PipelineConfig) -> dict:
    return {
        "n_target": cfg.n_target,
        "compactness": cfg.compactness,
        "iters": cfg.iters,
        "weights": cfg.weights.as_tuple(),
        "t1_fraction": cfg.classify.t1_fraction,
        "gamma": cfg.classify.gamma,
        "k": cfg.classify.k,
        "dfb_agg": cfg.classify.dfb_agg,
        "radii": (cfg.trimap.erode_radius, cfg.trimap.dilate_radius),
        "c": cfg.trimap.c,
        "lambda": cfg.matting.lam,
        "epsilon": cfg.matting.epsilon,
        "cg_tol": cfg.matting.tol,
        "cg_maxiter": cfg.matting.maxiter,
        "seed": cfg.seed,
    }


def from_flat(values: dict, base: PipelineConfig | None = None) -> PipelineConfig:
    """Overlay parsed key values on ``base`` (defaults when omitted)."""
    flat = to_flat(base or PipelineConfig())
    unknown = set(values) - set(KEYS)
    if unknown:
        raise ConfigError(f"unknown config key(s): {', '.join(sorted(unknown))}")
    flat.update(values)
    dump = base.dump_intermediates if base else False
    try:
        return PipelineConfig(
            n_target=int(flat["n_target"]),
            compactness=float(flat["compactness"]),
            iters=int(flat["iters"]),
            weights=FusionWeights(*flat["weights"]),
            classify=ClassifyParams(
                t1_fraction=float(flat["t1_fraction"]),
                gamma=float(flat["gamma"]),
                k=int(flat["k"]),
                seed=int(flat["seed"]),
                dfb_agg=str(flat["dfb_agg"]),
            ),
            trimap=TrimapParams(erode_radius=int(flat["radii"][0]), dilate_radius=int(flat["radii"][1]), c=float(flat["c"])),
            matting=MattingParams(
                lam=float(flat["lambda"]),
                epsilon=float(flat["epsilon"]),
                tol=float(flat["cg_tol"]),
                maxiter=int(flat["cg_maxiter"]),
            ),
            seed=int(flat["seed"]),
            dump_intermediates=dump,
        )
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc


def parse_value(key: str, text: str):
    if key not in KEYS:
        raise ConfigError(f"unknown config key: {key}")
    try:
        return KEYS[key][0](text.strip())
    except ValueError as exc:
        raise ConfigError(f"{key}: {exc}") from exc


def parse_config_text(text: str, source: str = "<config>") -> dict:
    values = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"{source}:{lineno}: expected 'key = value', got {raw.strip()!r}")
        key, _, val = line.partition("=")
        key = key.strip()
        if key not in KEYS:
            raise ConfigError(f"{source}:{lineno}: unknown key {key!r}")
        try:
            values[key] = KEYS[key][0](val.strip())
        except ValueError as exc:
            raise ConfigError(f"{source}:{lineno}: bad value for {key}: {exc}") from exc
    return values


def load_config(path, base: PipelineConfig | None = None) -> PipelineConfig:
    try:
        with open(path, encoding="utf-8") as fh:
            text = fh.read()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    return from_flat(parse_config_text(text, str(path)), base)


def replace(cfg: PipelineConfig, **changes) -> PipelineConfig:
    return dataclasses.replace(cfg, **changes)
