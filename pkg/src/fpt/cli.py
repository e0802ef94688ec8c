"""Command-line front end: sample, train, register, benchmark, txa.

Every run prints its resolved configuration (defaults made explicit) as one
JSON line before doing any work, and all randomness hangs off --seed. For
training, flags override config-file values, which override built-in
defaults. Output files are byte-reproducible per seed except for timing
columns. Nothing is written outside paths named in flags.
"""

from __future__ import annotations

import argparse
import json
import os
import sys

import numpy as np

from .bench import BenchmarkProtocol, run_benchmark
from .geometry import (
    load_off,
    load_xyz,
    normalize_to_unit_box,
    sample_surface,
    save_xyz,
    unit_box_record,
)
from .model import (
    FE_WIDTHS,
    PT_HIDDEN,
    fpt_forward,
    init_model,
    load_checkpoint,
    save_checkpoint,
)
from .shapes import primitive_meshes
from .spine import LabeledSpineModel, load_landmarks, measure_case, write_txa_report
from .train import (
    TrainingConfig,
    config_from_dict,
    config_to_dict,
    train,
    write_loss_log,
)

BUILTIN_SHAPES = "builtin:primitives"


def _print_config(command: str, resolved: dict):
    doc = {"command": command}
    doc.update(resolved)
    print("resolved-config: " + json.dumps(doc, sort_keys=True))


def _int_tuple(text: str) -> tuple:
    try:
        return tuple(int(t) for t in text.split(","))
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated ints, got {text!r}")


def _load_dataset(shapes_dir, n_points: int, seed: int):
    """Named unit-box-normalized point sets from a directory of OFF meshes,
    or from the built-in primitives when no directory is given."""
    if shapes_dir is None:
        meshes = list(primitive_meshes().items())
    else:
        names = sorted(n for n in os.listdir(shapes_dir) if n.endswith(".off"))
        if not names:
            raise ValueError(f"no .off meshes found in {shapes_dir}")
        meshes = [(name, load_off(os.path.join(shapes_dir, name))) for name in names]
    # shape-sampling seeds live in their own namespace, away from the
    # (step, 1)/(step, 2) streams the training loop draws from
    sample_seeds = np.random.SeedSequence(seed, spawn_key=(0, 3)).generate_state(len(meshes))
    dataset = []
    for (name, mesh), s in zip(meshes, sample_seeds):
        pts, _ = normalize_to_unit_box(sample_surface(mesh, n_points, seed=int(s)))
        dataset.append((name, pts))
    return dataset


# ---------------------------------------------------------------------------
# Subcommands


def _cmd_sample(args) -> int:
    _print_config("sample", {"mesh": args.mesh, "n": args.n, "seed": args.seed,
                             "out": args.out})
    mesh = load_off(args.mesh)
    save_xyz(args.out, sample_surface(mesh, args.n, seed=args.seed))
    print(f"wrote {args.n} points to {args.out}")
    return 0


def _resolve_train_config(args) -> TrainingConfig:
    doc = config_to_dict(TrainingConfig())
    if args.config is not None:
        with open(args.config, "r", encoding="utf-8") as fh:
            file_doc = json.load(fh)
        for key, value in file_doc.items():
            if key in ("augmentation", "chamfer") and isinstance(value, dict):
                doc[key].update(value)
            else:
                doc[key] = value
    flag_map = {"steps": args.steps, "batch_size": args.batch_size, "lr": args.lr,
                "seed": args.seed, "checkpoint_every": args.checkpoint_every,
                "checkpoint_dir": args.checkpoint_dir}
    for key, value in flag_map.items():
        if value is not None:
            doc[key] = value
    aug_map = {"occlusion": args.occlusion, "occlusion_k": args.occlusion_k,
               "rot_range_deg": args.rot_range_deg, "trans_range": args.trans_range,
               "rbf_sigma_shift": args.sigma_shift, "deform": args.deform}
    for key, value in aug_map.items():
        if value is not None:
            doc["augmentation"][key] = value
    return config_from_dict(doc)


def _cmd_train(args) -> int:
    cfg = _resolve_train_config(args)
    resolved = config_to_dict(cfg)
    resolved.update({"shapes": args.shapes or BUILTIN_SHAPES, "points": args.points,
                     "fe_widths": list(args.fe_widths), "pt_hidden": list(args.pt_hidden),
                     "threads": args.threads, "out": args.out,
                     "loss_log": args.loss_log})
    _print_config("train", resolved)

    dataset = _load_dataset(args.shapes, args.points, cfg.seed)
    model = init_model(cfg.seed, fe_widths=args.fe_widths, pt_hidden=args.pt_hidden)
    model, rows = train(model, [pts for _, pts in dataset], cfg, threads=args.threads)
    save_checkpoint(model, args.out)
    if args.loss_log is not None:
        write_loss_log(rows, args.loss_log)
    final = f"final loss {rows[-1]['loss']:.9g}; " if rows else ""
    print(f"trained {cfg.steps} steps over {len(dataset)} shapes; "
          f"{final}wrote {args.out}")
    return 0


def _cmd_register(args) -> int:
    _print_config("register", {"checkpoint": args.checkpoint, "source": args.source,
                               "target": args.target, "seed": args.seed,
                               "out": args.out})
    model = load_checkpoint(args.checkpoint)
    raw_src = load_xyz(args.source)
    raw_tgt = load_xyz(args.target)
    # one shared frame so the relative pose survives normalization; adding the
    # rescaled displacement back keeps a zero-displacement network exactly
    # the identity on the output file
    record = unit_box_record(np.vstack([raw_src, raw_tgt]))
    dtype = model.parameters()[0].value.dtype
    field = fpt_forward(record.normalize(raw_src).astype(dtype),
                        record.normalize(raw_tgt).astype(dtype), model)
    moved = raw_src + field.displacements.astype(np.float64) * record.half
    save_xyz(args.out, moved)
    print(f"registered {len(raw_src)} points onto {len(raw_tgt)}; wrote {args.out}")
    return 0


def _cmd_benchmark(args) -> int:
    _print_config("benchmark", {
        "protocol": args.protocol, "occlusion": args.occlusion,
        "shapes": args.shapes or BUILTIN_SHAPES, "points": args.points,
        "checkpoint": args.checkpoint, "icp_iterations": args.icp_iterations,
        "threads": args.threads, "seed": args.seed, "out": args.out})
    protocol = BenchmarkProtocol(transformation=args.protocol,
                                 occlusion=args.occlusion)
    dataset = _load_dataset(args.shapes, args.points, args.seed)
    rows = run_benchmark({"fpt": args.checkpoint}, [pts for _, pts in dataset],
                         protocol, seed=args.seed, out_path=args.out,
                         icp_iterations=args.icp_iterations, threads=args.threads)
    for r in rows:
        print(f"{r.method}: rmse_r={r.rmse_r_deg:.6g} deg, rmse_t={r.rmse_t:.6g}, "
              f"cases={r.n_cases}, errors={r.errors}")
    print(f"wrote {args.out}")
    return 0


def _cmd_txa(args) -> int:
    _print_config("txa", {"surface": args.surface, "landmarks": args.landmarks,
                          "recon": args.recon, "checkpoint": args.checkpoint,
                          "upper": args.upper, "lower": args.lower,
                          "prealign": args.prealign, "seed": args.seed,
                          "out": args.out})
    surface = load_xyz(args.surface)
    landmarks, ap_axis = load_landmarks(args.landmarks)
    model = LabeledSpineModel(surface=surface, landmarks=landmarks, ap_axis=ap_axis)
    recon = load_xyz(args.recon)
    net = load_checkpoint(args.checkpoint)
    result = measure_case(model, recon, net, args.upper, args.lower,
                          prealign=args.prealign)
    write_txa_report(result, checkpoint_id=args.checkpoint, path=args.out)
    print(f"txa_deg: {result.angle_deg:.6f}")
    print(f"wrote {args.out}")
    return 0


# ---------------------------------------------------------------------------
# Parser and entry point


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="fpt",
        description="Point-set registration: train, register, benchmark, and "
                    "measure spinal curvature with a displacement-field network.")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("sample", help="sample points from a mesh surface")
    p.add_argument("--mesh", required=True, help="input OFF mesh")
    p.add_argument("--n", type=int, default=2048, help="number of points")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True, help="output point file (x y z per line)")
    p.set_defaults(handler=_cmd_sample)

    p = sub.add_parser("train", help="train a registration model")
    p.add_argument("--shapes", default=None,
                   help="directory of OFF meshes (default: built-in primitives)")
    p.add_argument("--points", type=int, default=2048, help="points sampled per shape")
    p.add_argument("--config", default=None, help="JSON training config file")
    p.add_argument("--steps", type=int, default=None)
    p.add_argument("--batch-size", type=int, default=None)
    p.add_argument("--lr", type=float, default=None)
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--occlusion", default=None,
                   choices=("none", "partial_to_full", "partial_to_partial"))
    p.add_argument("--occlusion-k", type=int, default=None)
    p.add_argument("--rot-range-deg", type=float, default=None)
    p.add_argument("--trans-range", type=float, default=None)
    p.add_argument("--sigma-shift", type=float, default=None)
    p.add_argument("--deform", action=argparse.BooleanOptionalAction, default=None)
    p.add_argument("--checkpoint-every", type=int, default=None)
    p.add_argument("--checkpoint-dir", default=None)
    p.add_argument("--fe-widths", type=_int_tuple, default=FE_WIDTHS,
                   help="feature extractor widths, e.g. 3,64,128,1024")
    p.add_argument("--pt-hidden", type=_int_tuple, default=PT_HIDDEN,
                   help="point transformer hidden widths, e.g. 1024,512,256,128")
    p.add_argument("--threads", type=int, default=1,
                   help="worker threads for batch augmentation")
    p.add_argument("--loss-log", default=None, help="optional CSV loss log")
    p.add_argument("--out", required=True, help="output checkpoint path")
    p.set_defaults(handler=_cmd_train)

    p = sub.add_parser("register", help="register a source point set to a target")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--source", required=True, help="source point file")
    p.add_argument("--target", required=True, help="target point file")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True, help="output point file")
    p.set_defaults(handler=_cmd_register)

    p = sub.add_parser("benchmark", help="compare methods over augmented cases")
    p.add_argument("--protocol", default="rigid", choices=("rigid", "nonrigid"))
    p.add_argument("--occlusion", default="none",
                   choices=("none", "partial_to_full", "partial_to_partial"))
    p.add_argument("--shapes", default=None,
                   help="directory of OFF meshes (default: built-in primitives)")
    p.add_argument("--points", type=int, default=2048, help="points sampled per shape")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--icp-iterations", type=int, default=10)
    p.add_argument("--threads", type=int, default=1,
                   help="worker threads for per-case evaluation")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True, help="output CSV report")
    p.set_defaults(handler=_cmd_benchmark)

    p = sub.add_parser("txa", help="measure transverse process angle")
    p.add_argument("--surface", required=True, help="labeled model surface point file")
    p.add_argument("--landmarks", required=True, help="landmark JSON with ap_axis")
    p.add_argument("--recon", required=True, help="reconstruction point file")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--upper", required=True, help="upper vertebra name, e.g. v0")
    p.add_argument("--lower", required=True, help="lower vertebra name, e.g. v4")
    p.add_argument("--prealign", default="centroid",
                   choices=("none", "centroid", "centroid_scale"))
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True, help="output JSON report")
    p.set_defaults(handler=_cmd_txa)
    return parser


def run(argv) -> int:
    """0 on success, 1 on runtime failure, 2 on usage errors."""
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:  # argparse prints usage itself
        return int(e.code or 0)
    try:
        return args.handler(args)
    except OSError as e:
        path = e.filename if e.filename else ""
        detail = e.strerror if e.strerror else str(e)
        print(f"error: {path}: {detail}" if path else f"error: {detail}",
              file=sys.stderr)
        return 1
    except (ValueError, RuntimeError) as e:
        print(f"error: {e}", file=sys.stderr)
        return 1


def main():
    sys.exit(run(sys.argv[1:]))


if __name__ == "__main__":
    main()
