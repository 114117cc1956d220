"""Command-line surface: corpus generation, training, evaluation, and
cross-run aggregation.

Heavy imports happen inside the command handlers so the BLAS thread cap from
MAVR_THREADS (default 1) is in place before numpy loads.
"""

import argparse
import json
import os
import sys

THREAD_ENV_VARS = (
    "OMP_NUM_THREADS",
    "OPENBLAS_NUM_THREADS",
    "MKL_NUM_THREADS",
    "NUMEXPR_NUM_THREADS",
    "VECLIB_MAXIMUM_THREADS",
)


def _cap_threads(force_single=False):
    cap = "1" if force_single else os.environ.get("MAVR_THREADS", "1")
    for var in THREAD_ENV_VARS:
        if force_single:
            os.environ[var] = cap
        else:
            os.environ.setdefault(var, cap)


def _parse_frame_size(text):
    parts = text.lower().split("x")
    try:
        if len(parts) == 1:
            side = int(parts[0])
            return (side, side)
        if len(parts) == 2:
            return (int(parts[0]), int(parts[1]))
    except ValueError:
        pass
    raise argparse.ArgumentTypeError(f"frame size must be N or HxW, got {text!r}")


def _load_config(path):
    from .config import RunConfig

    return RunConfig.from_file(path) if path else RunConfig()


def cmd_generate(args):
    cfg = _load_config(args.config)
    r = cfg.render
    if args.frame_size is not None:
        r.frame_size = args.frame_size
    if args.n is not None:
        r.n_per_class_per_scale = args.n
    if args.background is not None:
        r.background = args.background
    if args.noise_sigma is not None:
        r.pixel_noise_sigma = args.noise_sigma
    if args.illum_jitter is not None:
        r.illumination_jitter = args.illum_jitter

    from .synthetic import RenderConfig, build_dataset

    render_cfg = RenderConfig(
        frame_size=r.frame_size,
        background=r.background,
        illumination_jitter=r.illumination_jitter,
        pixel_noise_sigma=r.pixel_noise_sigma,
    )
    flow_cfg = cfg.flow.resolve(r.frame_size)
    cfg.flow.levels = flow_cfg.levels
    os.makedirs(args.out, exist_ok=True)
    cfg.write(os.path.join(args.out, "config.json"))
    manifest = build_dataset(
        args.out,
        r.n_per_class_per_scale,
        render_cfg,
        seed=args.seed,
        flow_cfg=flow_cfg,
        mask_cfg=cfg.mask,
    )
    print(f"wrote {len(manifest['clips'])} clips under {args.out}")
    return 0


def cmd_train(args):
    cfg = _load_config(args.config)
    t, m = cfg.train, cfg.model
    for name in ("epochs", "seed", "lr", "batch_size", "lambda1", "lambda2", "crop"):
        value = getattr(args, name)
        if value is not None:
            setattr(t, name, value)
    if args.checkpoint_policy is not None:
        t.checkpoint_policy = args.checkpoint_policy
    if args.deterministic:
        t.deterministic = True
    if args.views is not None:
        m.views = tuple(v.strip() for v in args.views.split(",") if v.strip())
    if args.no_attention:
        m.use_attention = False
    if args.no_mvfpn:
        m.use_mvfpn = False
    if args.no_alignment:
        m.use_alignment = False
    m.to_model_config()  # validates the view subset before any heavy work

    from .train import train

    summary = train(
        args.data, cfg, args.out, progress=lambda row: print(json.dumps(row), flush=True)
    )
    print(f"best test_acc {summary['best_test_acc']:.4f} at epoch {summary['best_epoch']}")
    return 0


def cmd_eval(args):
    out_dir = args.out or os.path.dirname(os.path.abspath(args.ckpt))
    os.makedirs(out_dir, exist_ok=True)

    from .metrics import render_confusion
    from .train import evaluate_checkpoint, load_checkpoint

    header, _ = load_checkpoint(args.ckpt)
    report = evaluate_checkpoint(args.ckpt, args.data, split=args.split)
    with open(os.path.join(out_dir, "report.json"), "w") as fp:
        json.dump(report.to_dict(), fp, indent=1, sort_keys=True)
        fp.write("\n")
    with open(os.path.join(out_dir, "confusion.csv"), "w") as fp:
        fp.write(render_confusion(report))
    with open(os.path.join(out_dir, "confusion_normalized.csv"), "w") as fp:
        fp.write(render_confusion(report, normalize=True))
    with open(os.path.join(out_dir, "eval_config.json"), "w") as fp:
        snapshot = {
            "checkpoint": os.path.abspath(args.ckpt),
            "data": os.path.abspath(args.data),
            "split": args.split,
            "config": header["config"],
        }
        json.dump(snapshot, fp, indent=1, sort_keys=True)
        fp.write("\n")
    print(f"accuracy {report.accuracy:.4f} on {args.split} -> {out_dir}")
    return 0


REPORT_METRICS = ("accuracy", "precision_macro", "recall_macro", "f1_macro")


def cmd_report(args):
    from .config import RunConfig

    groups = {}
    n_classes = None
    for run_dir in args.runs:
        cfg_path = os.path.join(run_dir, "config.json")
        rep_path = os.path.join(run_dir, "report.json")
        if not os.path.exists(cfg_path) or not os.path.exists(rep_path):
            raise FileNotFoundError(f"{run_dir} lacks config.json or report.json")
        with open(cfg_path) as fp:
            cfg = RunConfig.from_dict(json.load(fp))
        with open(rep_path) as fp:
            report = json.load(fp)
        classes = len(report["class_names"])
        if n_classes is None:
            n_classes = classes
        elif classes != n_classes:
            raise ValueError(f"mixed class counts across runs: {n_classes} vs {classes} in {run_dir}")
        groups.setdefault(cfg.group_hash(), []).append(report)

    import numpy as np

    lines = ["group,runs," + ",".join(f"{m}_mean,{m}_std" for m in REPORT_METRICS)]
    for ghash in sorted(groups):
        reports = groups[ghash]
        cells = [ghash, str(len(reports))]
        for metric in REPORT_METRICS:
            values = np.array([r[metric] for r in reports], dtype=np.float64)
            cells.append(f"{values.mean():.6g}")
            cells.append(f"{values.std():.6g}")  # population std over seeds
        lines.append(",".join(cells))
    text = "\n".join(lines) + "\n"
    if args.out:
        with open(args.out, "w") as fp:
            fp.write(text)
    print(text, end="")
    return 0


def build_parser():
    parser = argparse.ArgumentParser(prog="mavrnet", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    gen = sub.add_parser("generate", help="render a synthetic corpus with extracted views")
    gen.add_argument("--out", required=True)
    gen.add_argument("--n", type=int, help="clips per class per scale")
    gen.add_argument("--frame-size", type=_parse_frame_size)
    gen.add_argument("--seed", type=int, default=0)
    gen.add_argument("--background", choices=("flat", "textured_noise", "clutter"))
    gen.add_argument("--noise-sigma", type=float)
    gen.add_argument("--illum-jitter", type=float)
    gen.add_argument("--config")
    gen.set_defaults(handler=cmd_generate)

    tr = sub.add_parser("train", help="train a model on a generated corpus")
    tr.add_argument("--data", required=True)
    tr.add_argument("--out", required=True)
    tr.add_argument("--config")
    tr.add_argument("--epochs", type=int)
    tr.add_argument("--seed", type=int)
    tr.add_argument("--lr", type=float)
    tr.add_argument("--batch-size", type=int, dest="batch_size")
    tr.add_argument("--crop", type=int)
    tr.add_argument("--lambda1", type=float)
    tr.add_argument("--lambda2", type=float)
    tr.add_argument("--views", help="comma-separated subset of rgb,flow,mask")
    tr.add_argument("--no-attention", action="store_true")
    tr.add_argument("--no-mvfpn", action="store_true")
    tr.add_argument("--no-alignment", action="store_true")
    tr.add_argument("--deterministic", action="store_true")
    tr.add_argument("--checkpoint-policy", choices=("best", "final"), dest="checkpoint_policy")
    tr.set_defaults(handler=cmd_train)

    ev = sub.add_parser("eval", help="evaluate a checkpoint on a dataset split")
    ev.add_argument("--ckpt", required=True)
    ev.add_argument("--data", required=True)
    ev.add_argument("--split", choices=("train", "test"), default="test")
    ev.add_argument("--out")
    ev.set_defaults(handler=cmd_eval)

    rep = sub.add_parser("report", help="aggregate eval reports grouped by config")
    rep.add_argument("--runs", nargs="+", required=True)
    rep.add_argument("--out")
    rep.set_defaults(handler=cmd_report)
    return parser


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    _cap_threads(force_single=bool(getattr(args, "deterministic", False)))
    try:
        return args.handler(args)
    except BrokenPipeError:
        return 1
    except (OSError, ValueError, RuntimeError) as err:
        print(f"error: {err}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
