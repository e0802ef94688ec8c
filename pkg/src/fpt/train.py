"""On-the-fly augmentation and the unsupervised training loop.

Each training pair starts from one pre-normalized base shape: the target is
the base (occluded under partial_to_partial), the source is the base run
through the canonical augmentation order occlude -> deform -> rotate ->
translate. The loop minimizes mean Chamfer distance between the displaced
source and the target; everything is seed-deterministic.
"""

from __future__ import annotations

import json
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field, fields
from typing import Optional, Sequence

import numpy as np

from .autodiff import Tape, add, mean_of
from .deform import RBFDeformation, apply_rbf, sample_rbf
from .geometry import EulerAngles, euler_to_matrix, occlude
from .loss import ChamferConfig, chamfer_forward
from .model import FPTModel, fpt_forward, save_checkpoint
from .optim import Adam

AUGMENTATION_ORDER = "occlude,deform,rotate,translate"

OCCLUSION_MODES = ("none", "partial_to_full", "partial_to_partial")


@dataclass
class AugmentationConfig:
    rot_range_deg: float = 45.0
    trans_range: float = 1.0
    rbf_sigma_shift: float = 0.1
    rbf_kernel_width: float = 1.0
    occlusion: str = "none"
    occlusion_k: int = 512
    deform: bool = True

    def __post_init__(self):
        if self.occlusion not in OCCLUSION_MODES:
            raise ValueError(
                f"AugmentationConfig: occlusion must be one of {OCCLUSION_MODES}, "
                f"got {self.occlusion!r}")


@dataclass
class GroundTruth:
    """Everything needed to rebuild the source from the base shape."""
    angles: EulerAngles
    translation: np.ndarray
    deformation: Optional[RBFDeformation]
    source_occlusion_seed: Optional[int]
    target_occlusion_seed: Optional[int]


@dataclass
class TrainingPair:
    source: np.ndarray
    target: np.ndarray
    gt: GroundTruth


@dataclass
class TrainingConfig:
    batch_size: int = 32
    lr: float = 0.001
    steps: int = 2000
    seed: int = 0
    chamfer: ChamferConfig = field(default_factory=ChamferConfig)
    augmentation: AugmentationConfig = field(default_factory=AugmentationConfig)
    checkpoint_every: int = 0          # 0 disables periodic checkpoints
    checkpoint_dir: Optional[str] = None


def make_pair(base: np.ndarray, cfg: AugmentationConfig, seed: int) -> TrainingPair:
    """One augmented (source, target) pair from a normalized base shape."""
    base = np.asarray(base, dtype=np.float64)
    if base.ndim != 2 or base.shape[1] != 3:
        raise ValueError(f"make_pair: base must be [N, 3], got {base.shape}")
    if np.abs(base).max() > 1.0 + 1e-6:
        raise ValueError(
            f"make_pair: base not normalized to [-1, 1]^3 "
            f"(max |coord| = {np.abs(base).max():.6g})")

    # independent child streams so toggling one augmentation never shifts the rest
    deform_seed, transform_seed, occ_src, occ_tgt = (
        int(s) for s in np.random.SeedSequence(seed).generate_state(4))

    target = base.copy()
    tgt_seed = None
    if cfg.occlusion == "partial_to_partial":
        target = occlude(base, occ_tgt, cfg.occlusion_k)
        tgt_seed = occ_tgt

    source = base.copy()
    src_seed = None
    if cfg.occlusion != "none":
        source = occlude(base, occ_src, cfg.occlusion_k)
        src_seed = occ_src

    deformation = None
    if cfg.deform:
        deformation = sample_rbf(deform_seed, sigma_shift=cfg.rbf_sigma_shift,
                                 kernel_width=cfg.rbf_kernel_width)
        source = apply_rbf(deformation, source)

    rng = np.random.default_rng(transform_seed)
    r = cfg.rot_range_deg
    angles = EulerAngles(*rng.uniform(-r, r, size=3))
    translation = rng.uniform(-cfg.trans_range, cfg.trans_range, size=3)
    source = source @ euler_to_matrix(angles).T + translation

    gt = GroundTruth(angles=angles, translation=translation, deformation=deformation,
                     source_occlusion_seed=src_seed, target_occlusion_seed=tgt_seed)
    return TrainingPair(source=source, target=target, gt=gt)


def _pair_seeds(seed: int, step: int, batch_size: int) -> np.ndarray:
    return np.random.SeedSequence(seed, spawn_key=(step, 2)).generate_state(batch_size)


def _shape_indices(seed: int, step: int, batch_size: int, n_shapes: int) -> np.ndarray:
    rng = np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(step, 1)))
    return rng.integers(n_shapes, size=batch_size)


def _build_batch(dataset, aug: AugmentationConfig, seeds, shape_indices, pool):
    jobs = [(dataset[i], aug, int(s)) for s, i in zip(seeds, shape_indices)]
    if pool is None:
        return [make_pair(*job) for job in jobs]
    # each pair is a pure function of its seed, so pool size never changes results
    return list(pool.map(lambda job: make_pair(*job), jobs))


def train(model: FPTModel, dataset: Sequence[np.ndarray], cfg: TrainingConfig,
          threads: int = 1):
    """Returns (model, log rows); rows are dicts with step, loss, wall_ms.

    threads > 1 parallelizes batch augmentation only; the output is identical
    to the single-threaded run.
    """
    if not len(dataset):
        raise ValueError("train: dataset is empty")
    if threads < 1:
        raise ValueError("train: threads must be >= 1")
    dtype = model.parameters()[0].value.dtype
    opt = Adam(lr=cfg.lr)
    params = model.parameters()
    rows = []
    pool = ThreadPoolExecutor(max_workers=threads) if threads > 1 else None
    try:
        rows = _train_loop(model, dataset, cfg, dtype, opt, params, pool)
    finally:
        if pool is not None:
            pool.shutdown()
    return model, rows


def _train_loop(model, dataset, cfg, dtype, opt, params, pool):
    rows = []
    for step in range(cfg.steps):
        t0 = time.perf_counter()
        seeds = _pair_seeds(cfg.seed, step, cfg.batch_size)
        shapes = _shape_indices(cfg.seed, step, cfg.batch_size, len(dataset))
        pairs = _build_batch(dataset, cfg.augmentation, seeds, shapes, pool)
        tape = Tape()
        losses = []
        for pair_seed, pair in zip(seeds, pairs):
            src = pair.source.astype(dtype)
            tgt = pair.target.astype(dtype)
            disp = fpt_forward(src, tgt, model, tape)
            moved = add(tape, disp.node, src)
            li = chamfer_forward(tape, moved, tgt, cfg.chamfer)
            if not np.isfinite(li.data):
                raise RuntimeError(
                    f"train: non-finite loss at step {step} (pair seed {int(pair_seed)})")
            losses.append(li)
        batch_loss = mean_of(tape, losses)
        value = float(batch_loss.data)
        if not np.isfinite(value):
            raise RuntimeError(f"train: non-finite batch loss at step {step}")
        tape.backward(batch_loss, parameters=params)
        opt.step(params)
        wall_ms = (time.perf_counter() - t0) * 1000.0
        rows.append({"step": step, "loss": value, "wall_ms": wall_ms})
        if (cfg.checkpoint_every > 0 and cfg.checkpoint_dir
                and (step + 1) % cfg.checkpoint_every == 0):
            save_checkpoint(model, f"{cfg.checkpoint_dir}/step_{step + 1:06d}.fpt",
                            extra=_provenance(cfg))
    return rows


def _provenance(cfg: TrainingConfig) -> dict:
    return {
        "augmentation_order": AUGMENTATION_ORDER,
        "train_config": config_to_dict(cfg),
    }


# ---------------------------------------------------------------------------
# Config and log I/O


def config_to_dict(cfg: TrainingConfig) -> dict:
    return asdict(cfg)


def config_from_dict(d: dict) -> TrainingConfig:
    d = dict(d)
    known = {"batch_size", "lr", "steps", "seed", "chamfer", "augmentation",
             "checkpoint_every", "checkpoint_dir"}
    unknown = set(d) - known
    if unknown:
        raise ValueError(f"training config: unknown keys {sorted(unknown)}")
    if "chamfer" in d:
        d["chamfer"] = ChamferConfig(**d["chamfer"])
    if "augmentation" in d:
        aug = d["augmentation"]
        bad = set(aug) - {f.name for f in fields(AugmentationConfig)}
        if bad:
            raise ValueError(f"training config: unknown augmentation keys {sorted(bad)}")
        d["augmentation"] = AugmentationConfig(**aug)
    return TrainingConfig(**d)


def load_training_config(path) -> TrainingConfig:
    with open(path, "r", encoding="utf-8") as fh:
        return config_from_dict(json.load(fh))


def save_training_config(cfg: TrainingConfig, path):
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(config_to_dict(cfg), fh, indent=2, sort_keys=True)
        fh.write("\n")


def write_loss_log(rows, path):
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("step,loss,wall_ms\n")
        for r in rows:
            fh.write(f"{r['step']},{r['loss']:.9g},{r['wall_ms']:.3f}\n")
