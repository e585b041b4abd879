"""Command-line surface: train models, explain inputs, run the statistics
battery, run the evaluation protocols.

Exit codes: 0 success, 2 usage/input error, 1 internal error. Artifacts are
staged and renamed into place, so a failing run leaves no partial outputs.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import os
import sys
import time
from pathlib import Path

import numpy as np

from . import datasets as dsets
from .attacks import AttackConfig, pgd_l2
from .evaluate import BandSpec, alpha_distribution, ablation_study, band_accuracy
from .explainer import ExplainConfig, explain
from .formats import load_image, load_labels, load_tensor, save_image, save_labels, save_tensor
from .models import (
    LabeledDataset, accuracy, build_cnn, build_mlp, build_textcnn,
    load_weights, save_weights, train_sgd, predict,
)
from .segment import SegmentMap
from .stats import (
    beta_mom_fit, bootstrap_ci, mann_whitney_u, one_way_anova, qq_points,
    summarize, two_sample_t,
)
from .tensor import Tensor

VALID_TESTS = ("skew", "t", "mwu", "anova", "beta", "ci", "qq")


class CliError(Exception):
    """Usage or input problem; maps to exit code 2."""


# ---------------------------------------------------------------------------
# staged output directory
# ---------------------------------------------------------------------------

class Stage:
    """Collects artifacts in a scratch subdirectory, then renames them into
    the output directory only after the command succeeds."""

    def __init__(self, out_dir: Path):
        self.out_dir = Path(out_dir)
        self.out_dir.mkdir(parents=True, exist_ok=True)
        self.dir = self.out_dir / f".stage.{os.getpid()}"
        self.dir.mkdir(exist_ok=True)
        self.names: list[str] = []

    def path(self, name: str) -> Path:
        self.names.append(name)
        return self.dir / name

    def commit(self) -> list[str]:
        for name in self.names:
            os.replace(self.dir / name, self.out_dir / name)
        self.dir.rmdir()
        return list(self.names)

    def abort(self) -> None:
        for name in self.names:
            (self.dir / name).unlink(missing_ok=True)
        if self.dir.exists():
            self.dir.rmdir()


def _sha256(path: Path) -> str:
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()


def _write_manifest(stage: Stage, command: str, args: argparse.Namespace,
                    input_paths: list, started: float) -> None:
    manifest = {
        "command": command,
        "config": {k: v for k, v in sorted(vars(args).items()) if k != "func"},
        "inputs": {str(p): _sha256(p) for p in input_paths},
        "outputs": sorted(set(stage.names)),
        "seed": getattr(args, "seed", 0),
        "wall_clock_s": time.perf_counter() - started,
    }
    stage.path("manifest.json").write_text(json.dumps(manifest, sort_keys=True, indent=2, default=str) + "\n")


def _write_json(path: Path, obj) -> None:
    path.write_text(json.dumps(obj, sort_keys=True, indent=2) + "\n")


def _write_csv(path: Path, header: list[str], rows) -> None:
    lines = [",".join(header)]
    for row in rows:
        lines.append(",".join(repr(v) if isinstance(v, float) else str(v) for v in row))
    path.write_text("\n".join(lines) + "\n")


# ---------------------------------------------------------------------------
# input loading
# ---------------------------------------------------------------------------

def _require_file(path_str: str) -> Path:
    path = Path(path_str)
    if not path.is_file():
        raise CliError(f"no such file: {path}")
    return path


def _load_model(path_str: str):
    path = _require_file(path_str)
    try:
        return load_weights(path)
    except ValueError as e:
        raise CliError(str(e)) from e


def _load_input(path_str: str) -> Tensor:
    path = _require_file(path_str)
    try:
        if path.suffix in (".ppm", ".pgm"):
            return load_image(path)
        return load_tensor(path)
    except ValueError as e:
        raise CliError(str(e)) from e


def _load_dataset(name_or_path: str, seed: int) -> LabeledDataset:
    if name_or_path in dsets.BUILTIN_NAMES:
        return dsets.builtin_dataset(name_or_path, seed=seed)
    root = Path(name_or_path)
    batch_path, labels_path = root / "inputs.axt1", root / "labels.csv"
    if not batch_path.is_file() or not labels_path.is_file():
        raise CliError(
            f"dataset {name_or_path!r} is neither a builtin name {dsets.BUILTIN_NAMES} "
            f"nor a directory holding inputs.axt1 and labels.csv"
        )
    try:
        batch = load_tensor(batch_path)
        labels = load_labels(labels_path)
    except ValueError as e:
        raise CliError(str(e)) from e
    if batch.shape[0] != len(labels):
        raise CliError(f"{batch_path} holds {batch.shape[0]} inputs but {labels_path} has {len(labels)} labels")
    inputs = [Tensor(batch.data[i]) for i in range(batch.shape[0])]
    return LabeledDataset(inputs, labels)


def _attack_config(args) -> AttackConfig:
    try:
        return AttackConfig(epsilon=args.eps, iterations=args.iters, seed=args.seed)
    except ValueError as e:
        raise CliError(str(e)) from e


def _explain_config(args) -> ExplainConfig:
    params = {}
    for key in ("ratio", "kernel_size", "max_dist", "rows", "cols"):
        value = getattr(args, key, None)
        if value is not None:
            params[key] = value
    try:
        return ExplainConfig(attack=_attack_config(args), alpha=args.alpha, k=args.k,
                             segmenter=args.segmenter, segmenter_params=params)
    except ValueError as e:
        raise CliError(str(e)) from e


# ---------------------------------------------------------------------------
# commands
# ---------------------------------------------------------------------------

def cmd_explain(args) -> int:
    started = time.perf_counter()
    model = _load_model(args.model)
    x = _load_input(args.input)
    cfg = _explain_config(args)

    stage = Stage(Path(args.out))
    try:
        expl = explain(model, x, cfg)
        input_id = Path(args.input).stem

        mask_kind = "ppm" if expl.mask.data.ndim == 3 and expl.mask.shape[0] == 3 else "pgm"
        save_image(stage.path(f"mask.{mask_kind}"), expl.mask)
        save_tensor(stage.path("flag_map.axt1"), expl.flag_map, dtype="f32")
        save_tensor(stage.path("diff.axt1"), expl.diff, dtype="f32")
        _write_segment_viz(stage.path("segments.pgm"), expl.segments)

        summary = summarize(expl.diff.ravel())
        _write_csv(stage.path("distribution.csv"),
                   ["n", "mean", "median", "skewness", "q15", "q25", "q75", "q85"],
                   [[summary.n, summary.mean, summary.median, summary.skewness,
                     summary.quantiles[0.15], summary.quantiles[0.25],
                     summary.quantiles[0.75], summary.quantiles[0.85]]])

        _write_json(stage.path("explanation.json"), {
            "input_id": input_id,
            "label": expl.label,
            "predicted": expl.predicted,
            "alpha": expl.alpha,
            "k": expl.k,
            "segments": [{"id": i, "density": d} for i, d in expl.ranked],
            "files": {"mask": f"mask.{mask_kind}", "flag_map": "flag_map.axt1", "diff": "diff.axt1"},
        })
        _write_manifest(stage, "explain", args, [args.model, args.input], started)
    except Exception:
        stage.abort()
        raise
    stage.commit()
    return 0


def _write_segment_viz(path: Path, seg: SegmentMap) -> None:
    save_image(path, Tensor((seg.labels % 256) / 255.0))


def cmd_stats(args) -> int:
    started = time.perf_counter()
    tests = [t.strip() for t in args.tests.split(",") if t.strip()]
    unknown = [t for t in tests if t not in VALID_TESTS]
    if unknown:
        raise CliError(f"unknown test name(s) {unknown}; valid names: {', '.join(VALID_TESTS)}")
    if not tests:
        raise CliError(f"no tests requested; valid names: {', '.join(VALID_TESTS)}")

    model = _load_model(args.model)
    data = _load_dataset(args.dataset, args.seed)
    cfg = _attack_config(args)
    pairwise = [t for t in tests if t in ("t", "mwu", "anova")]
    if pairwise and len(data) < 2:
        raise CliError("need >= 2 samples for pairwise or grouped tests")

    samples = []
    for x, y in zip(data.inputs, data.labels):
        outcome = pgd_l2(model, x, int(y), cfg)
        samples.append(outcome.x_diff.ravel())

    stage = Stage(Path(args.out))
    try:
        rows = []
        for i, s in enumerate(samples):
            d = summarize(s)
            rows.append([i, d.n, d.mean, d.median, d.skewness,
                         d.quantiles[0.15], d.quantiles[0.25], d.quantiles[0.75], d.quantiles[0.85]])
        _write_csv(stage.path("summary.csv"),
                   ["input", "n", "mean", "median", "skewness", "q15", "q25", "q75", "q85"], rows)

        if "t" in tests:
            _write_pairwise(stage.path("pairwise_t.csv"), samples, lambda a, b: two_sample_t(a, b).p_value)
        if "mwu" in tests:
            _write_pairwise(stage.path("pairwise_mwu.csv"), samples, lambda a, b: mann_whitney_u(a, b).p_value)
        if "anova" in tests:
            res = one_way_anova(samples)
            _write_csv(stage.path("anova.csv"), ["statistic", "p_value"], [[res.statistic, res.p_value]])
        if "beta" in tests:
            fit_rows = []
            for i, s in enumerate(samples):
                fit = beta_mom_fit(s)
                fit_rows.append([i, fit.p, fit.q, fit.a, fit.b])
            _write_csv(stage.path("beta_fits.csv"), ["input", "p", "q", "a", "b"], fit_rows)
        if "ci" in tests:
            ci_rows = []
            for i, s in enumerate(samples):
                for stat in ("mean", "median", ("quantile", 0.15), ("quantile", 0.25),
                             ("quantile", 0.75), ("quantile", 0.85)):
                    ci = bootstrap_ci(s, stat, level=0.95, resamples=args.resamples, seed=args.seed + i)
                    ci_rows.append([i, ci.statistic, ci.lo, ci.hi, ci.level])
            _write_csv(stage.path("bootstrap_ci.csv"), ["input", "statistic", "lo", "hi", "level"], ci_rows)
        if "qq" in tests:
            qq_rows = []
            for i, s in enumerate(samples):
                standardized = (np.asarray(s) - np.mean(s)) / np.std(s)
                for theo, samp in qq_points(standardized):
                    qq_rows.append([i, theo, samp])
            _write_csv(stage.path("qq_points.csv"), ["input", "theoretical", "sample"], qq_rows)

        _write_manifest(stage, "stats", args, [args.model], started)
    except ValueError as e:
        stage.abort()
        raise CliError(str(e)) from e
    except Exception:
        stage.abort()
        raise
    stage.commit()
    return 0


def _write_pairwise(path: Path, samples, p_of) -> None:
    n = len(samples)
    header = ["input"] + [str(j) for j in range(n)]
    rows = []
    for i in range(n):
        row = [i]
        for j in range(n):
            row.append(1.0 if i == j else p_of(samples[i], samples[j]))
        rows.append(row)
    _write_csv(path, header, rows)


def _parse_band(spec: str) -> BandSpec:
    parts = spec.split(":")
    if len(parts) != 3 or parts[0] not in ("tails", "middle"):
        raise CliError(f"band spec {spec!r} must look like middle:15:85 or tails:15:85")
    try:
        lo, hi = float(parts[1]), float(parts[2])
    except ValueError as e:
        raise CliError(f"band spec {spec!r} has non-numeric bounds") from e
    if lo >= hi:
        raise CliError(f"invalid band spec {spec!r}: need lo < hi")
    return BandSpec(lo, hi, parts[0])


def cmd_eval(args) -> int:
    started = time.perf_counter()
    model = _load_model(args.model)
    data = _load_dataset(args.dataset, args.seed)
    if not len(data):
        raise CliError("empty dataset")

    stage = Stage(Path(args.out))
    try:
        if args.protocol == "alpha":
            report = alpha_distribution(model, data, _attack_config(args))
            _write_csv(stage.path("alpha_sample.csv"), ["alpha"], [[a] for a in report.alphas])
            payload = {"protocol": "alpha", "alphas": report.alphas,
                       "no_flip_count": report.no_flip_count,
                       "mean_alpha": float(np.mean(report.alphas)) if report.alphas else None}
        elif args.protocol == "bands":
            if not args.band:
                raise CliError("bands protocol requires at least one --band")
            bands = [_parse_band(b) for b in args.band]
            cfg = _attack_config(args)
            rows = [[b.describe(), band_accuracy(model, data, b, cfg)] for b in bands]
            _write_csv(stage.path("band_accuracy.csv"), ["band", "accuracy"], rows)
            payload = {"protocol": "bands", "bands": [{"band": r[0], "accuracy": r[1]} for r in rows]}
        else:
            report = ablation_study(model, data, _explain_config(args))
            _write_csv(stage.path("ablation.csv"),
                       ["clean_accuracy", "blur_top5_accuracy", "blur_6to10_accuracy"],
                       [[report.clean_accuracy, report.blur_top_accuracy, report.blur_next_accuracy]])
            payload = {"protocol": "ablation", "clean_accuracy": report.clean_accuracy,
                       "blur_top5_accuracy": report.blur_top_accuracy,
                       "blur_6to10_accuracy": report.blur_next_accuracy}
        _write_json(stage.path("report.json"), payload)
        _write_manifest(stage, "eval", args, [args.model], started)
    except ValueError as e:
        stage.abort()
        raise CliError(str(e)) from e
    except Exception:
        stage.abort()
        raise
    stage.commit()
    return 0


def cmd_train(args) -> int:
    started = time.perf_counter()
    data = _load_dataset(args.dataset, args.seed)
    if len(data) < 8:  # too small to hold anything out
        train = test = data
    else:
        train, test = dsets.split_dataset(data, 0.75, args.seed)

    sample = train.inputs[0]
    classes = max(data.labels) + 1
    if args.arch == "mlp":
        model = build_mlp(sample.size, [args.hidden], classes, seed=args.seed)
    elif args.arch == "cnn":
        if len(sample.shape) != 3:
            raise CliError(f"cnn expects (C,H,W) inputs, dataset has shape {sample.shape}")
        model = build_cnn(sample.shape, classes, seed=args.seed,
                          filters=args.filters, hidden=args.hidden, pool=not args.no_pool)
    elif args.arch == "textcnn":
        vocab = int(max(float(x.data.max()) for x in data.inputs)) + 1
        model = build_textcnn(vocab, sample.size, args.embed_dim, classes, seed=args.seed)
    else:
        raise CliError(f"unknown arch {args.arch!r}; expected mlp, cnn, or textcnn")

    if args.lr <= 0:
        raise CliError("lr must be > 0")
    if args.epochs < 0:
        raise CliError("epochs must be >= 0")
    model = train_sgd(model, train, {"lr": args.lr, "epochs": args.epochs,
                                     "batch": args.batch, "seed": args.seed})

    stage = Stage(Path(args.out))
    try:
        save_weights(stage.path("model.axw1"), model, dtype="f32")
        _write_manifest(stage, "train", args, [], started)
    except Exception:
        stage.abort()
        raise
    stage.commit()
    print(f"train accuracy {accuracy(model, train):.4f}  test accuracy {accuracy(model, test):.4f}")
    return 0


# ---------------------------------------------------------------------------
# argument parsing
# ---------------------------------------------------------------------------

def _add_attack_flags(p, with_explain=False):
    p.add_argument("--eps", type=float, default=1.0, help="l2 attack radius")
    p.add_argument("--iters", type=int, default=20, help="attack iterations")
    if with_explain:
        p.add_argument("--alpha", type=float, default=15.0, help="tail percentage threshold")
        p.add_argument("--k", type=int, default=10, help="explanation length")
        p.add_argument("--segmenter", choices=["quickshift", "grid", "tokens"], default="quickshift")
        p.add_argument("--ratio", type=float, default=None, help="quickshift color weight")
        p.add_argument("--kernel-size", dest="kernel_size", type=float, default=None)
        p.add_argument("--max-dist", dest="max_dist", type=float, default=None)
        p.add_argument("--rows", type=int, default=None, help="grid rows")
        p.add_argument("--cols", type=int, default=None, help="grid cols")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="advexplain",
                                     description="Attack-driven segment explanations for small classifiers")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("explain", help="explain one input")
    p.add_argument("--model", required=True)
    p.add_argument("--input", required=True)
    _add_attack_flags(p, with_explain=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_explain)

    p = sub.add_parser("stats", help="attack-magnitude statistics over a dataset")
    p.add_argument("--model", required=True)
    p.add_argument("--dataset", required=True)
    _add_attack_flags(p)
    p.add_argument("--tests", default="skew", help=f"comma list from {{{','.join(VALID_TESTS)}}}")
    p.add_argument("--resamples", type=int, default=1000)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_stats)

    p = sub.add_parser("eval", help="run an evaluation protocol")
    p.add_argument("--model", required=True)
    p.add_argument("--dataset", required=True)
    p.add_argument("--protocol", choices=["alpha", "bands", "ablation"], required=True)
    p.add_argument("--band", action="append", default=[],
                   help="band spec mode:lo:hi, repeatable (bands protocol)")
    _add_attack_flags(p, with_explain=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("train", help="train a desk model and write AXW1 weights")
    p.add_argument("--arch", required=True)
    p.add_argument("--dataset", required=True)
    p.add_argument("--epochs", type=int, default=30)
    p.add_argument("--lr", type=float, default=0.5)
    p.add_argument("--batch", type=int, default=16)
    p.add_argument("--hidden", type=int, default=32)
    p.add_argument("--filters", type=int, default=8)
    p.add_argument("--no-pool", action="store_true", help="cnn without the pooling stage")
    p.add_argument("--embed-dim", dest="embed_dim", type=int, default=8)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_train)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return 2 if e.code not in (0, None) else 0
    try:
        return args.func(args)
    except CliError as e:
        print(f"error: {e}", file=sys.stderr)
        return 2
    except (FileNotFoundError, PermissionError) as e:
        print(f"error: {e}", file=sys.stderr)
        return 2
    except Exception as e:  # internal failure
        print(f"internal error: {type(e).__name__}: {e}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
