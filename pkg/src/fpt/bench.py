"""ICP baseline, rigid-parameter extraction, RMSE metrics, and the benchmark
runner that emits Table-style CSV reports.

Rigid parameters of a non-rigid prediction are read off by index-paired
Kabsch between the source and its transformed copy; that choice defines what
RMSE(R)/RMSE(t) mean for displacement-field methods here.
"""

from __future__ import annotations

import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .geometry import (
    RigidTransform,
    euler_to_matrix,
    kabsch,
    matrix_to_euler,
    nearest_neighbors,
)
from .model import FPTModel, fpt_forward, load_checkpoint
from .train import AugmentationConfig, make_pair


@dataclass
class RegistrationResult:
    method: str
    transformed_source: np.ndarray
    est_rigid: Optional[RigidTransform]
    inference_seconds: float
    residuals: list = field(default_factory=list)  # mean squared NN residual per iteration
    degenerate: bool = False


@dataclass
class MetricsRow:
    method: str
    transformation: str
    occlusion: str
    time_s: float
    rmse_r_deg: float
    rmse_t: float
    n_cases: int
    errors: int


def icp(source: np.ndarray, target: np.ndarray, iterations: int = 10) -> RegistrationResult:
    """Classic rigid ICP: exact NN matching then Kabsch, repeated."""
    source = np.asarray(source, dtype=np.float64)
    target = np.asarray(target, dtype=np.float64)
    if source.shape[0] == 0 or target.shape[0] == 0:
        raise ValueError("icp: point sets must be nonempty")
    current = source.copy()
    total = RigidTransform.identity()
    residuals = []
    degenerate = False
    t0 = time.perf_counter()
    for _ in range(iterations):
        idx, _ = nearest_neighbors(current, target)
        matched = target[idx]
        try:
            step = kabsch(current, matched)
        except ValueError:
            degenerate = True
            break
        current = step.apply(current)
        total = step.compose(total)
        _, sqd = nearest_neighbors(current, target)
        residuals.append(float(sqd.mean()))
    seconds = time.perf_counter() - t0
    return RegistrationResult(method="icp", transformed_source=current,
                              est_rigid=total, inference_seconds=seconds,
                              residuals=residuals, degenerate=degenerate)


def rigid_from_displacements(source: np.ndarray, transformed: np.ndarray):
    """Best-fit (RigidTransform, EulerAngles) between index-paired sets."""
    transform = kabsch(source, transformed)
    angles = matrix_to_euler(transform.rotation)
    transform.source_angles = angles
    return transform, angles


def _wrap_degrees(d: np.ndarray) -> np.ndarray:
    """Map angle differences into (-180, 180]."""
    d = np.mod(d, 360.0)
    return np.where(d > 180.0, d - 360.0, d)


def rmse_metrics(cases: Sequence) -> tuple:
    """cases: ((pred EulerAngles, pred t), (gt EulerAngles, gt t)) pairs.

    Returns (rmse over per-axis angle differences in degrees, rmse over
    per-axis translation differences); angle differences are wrapped.
    """
    if not len(cases):
        raise ValueError("rmse_metrics: no cases")
    r_sq, t_sq = [], []
    for (pred_a, pred_t), (gt_a, gt_t) in cases:
        da = _wrap_degrees(pred_a.as_array() - gt_a.as_array())
        r_sq.append(da ** 2)
        t_sq.append((np.asarray(pred_t, dtype=np.float64) - np.asarray(gt_t)) ** 2)
    return (float(np.sqrt(np.mean(r_sq))), float(np.sqrt(np.mean(t_sq))))


@dataclass
class BenchmarkProtocol:
    transformation: str = "rigid"       # rigid | nonrigid
    occlusion: str = "none"
    rot_range_deg: float = 45.0
    trans_range: float = 1.0
    rbf_sigma_shift: float = 0.1
    occlusion_k: int = 512

    def augmentation(self) -> AugmentationConfig:
        if self.transformation not in ("rigid", "nonrigid"):
            raise ValueError(f"protocol: unknown transformation {self.transformation!r}")
        return AugmentationConfig(
            rot_range_deg=self.rot_range_deg, trans_range=self.trans_range,
            rbf_sigma_shift=self.rbf_sigma_shift, occlusion=self.occlusion,
            occlusion_k=self.occlusion_k, deform=(self.transformation == "nonrigid"))


def _case_gt(pair) -> tuple:
    # methods estimate the source -> target map, i.e. the inverse of the
    # rigid augmentation that produced the source
    fwd = euler_to_matrix(pair.gt.angles)
    return (matrix_to_euler(fwd.T), -fwd.T @ pair.gt.translation)


def _run_fpt(model: FPTModel, source: np.ndarray, target: np.ndarray) -> RegistrationResult:
    dtype = model.parameters()[0].value.dtype
    src = source.astype(dtype)
    tgt = target.astype(dtype)
    t0 = time.perf_counter()
    disp = fpt_forward(src, tgt, model)
    moved = disp.apply_to(src)
    seconds = time.perf_counter() - t0
    return RegistrationResult(method="fpt", transformed_source=np.asarray(moved, dtype=np.float64),
                              est_rigid=None, inference_seconds=seconds)


def _evaluate_case(shape, case_seed, aug, methods):
    """[(method, (estimate, gt) or None, seconds or None)] for one case."""
    pair = make_pair(shape, aug, int(case_seed))
    gt = _case_gt(pair)
    out = []
    for name, run in methods.items():
        try:
            result = run(pair.source, pair.target)
            est, est_angles = rigid_from_displacements(pair.source,
                                                       result.transformed_source)
            out.append((name, ((est_angles, est.translation), gt),
                        result.inference_seconds))
        except (ValueError, RuntimeError):
            out.append((name, None, None))
    return out


def run_benchmark(models: dict, shapes: Sequence[np.ndarray],
                  protocol: BenchmarkProtocol, seed: int,
                  out_path=None, icp_iterations: int = 10, threads: int = 1):
    """Evaluate each model plus the ICP baseline over one augmented case per
    shape; returns MetricsRow list and optionally writes the CSV report.

    threads > 1 runs cases in parallel; results are aggregated in case order,
    so everything except the timing column is independent of thread count.
    """
    if not len(shapes):
        raise ValueError("run_benchmark: empty shape list")
    if threads < 1:
        raise ValueError("run_benchmark: threads must be >= 1")
    resolved = {}
    for name, model in models.items():
        resolved[name] = model if isinstance(model, FPTModel) else load_checkpoint(model)
    aug = protocol.augmentation()
    case_seeds = np.random.SeedSequence(seed).generate_state(len(shapes))

    methods = {"icp": lambda s, t: icp(s, t, icp_iterations)}
    for name, model in resolved.items():
        methods[name] = (lambda m: lambda s, t: _run_fpt(m, s, t))(model)

    jobs = list(zip(shapes, case_seeds))
    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            case_results = list(pool.map(
                lambda job: _evaluate_case(job[0], job[1], aug, methods), jobs))
    else:
        case_results = [_evaluate_case(shape, cs, aug, methods) for shape, cs in jobs]

    cases = {name: [] for name in methods}
    times = {name: [] for name in methods}
    errors = {name: 0 for name in methods}
    for per_method in case_results:
        for name, outcome, seconds in per_method:
            if outcome is None:
                errors[name] += 1
            else:
                cases[name].append(outcome)
                times[name].append(seconds)

    rows = []
    for name in methods:
        if cases[name]:
            rmse_r, rmse_t = rmse_metrics(cases[name])
            mean_time = float(np.mean(times[name]))
        else:
            rmse_r = rmse_t = float("nan")
            mean_time = float("nan")
        rows.append(MetricsRow(method=name, transformation=protocol.transformation,
                               occlusion=protocol.occlusion, time_s=mean_time,
                               rmse_r_deg=rmse_r, rmse_t=rmse_t,
                               n_cases=len(cases[name]), errors=errors[name]))
    if out_path is not None:
        write_report(rows, out_path)
    return rows


def write_report(rows: Sequence[MetricsRow], path):
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("method,transformation,occlusion,time_s,rmse_r_deg,rmse_t,n_cases,errors\n")
        for r in rows:
            fh.write(f"{r.method},{r.transformation},{r.occlusion},"
                     f"{r.time_s:.6f},{r.rmse_r_deg:.9g},{r.rmse_t:.9g},"
                     f"{r.n_cases},{r.errors}\n")
