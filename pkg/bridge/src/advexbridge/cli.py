"""Entry points: export-weights, export-dataset, parity-check."""

from __future__ import annotations

import argparse
import sys

import numpy as np
import torch

from .data import DATASET_NAMES, export_dataset
from .export import TORCH_ARCHS, ExportSpec, UnsupportedLayerError, export_weights
from .parity import parity_check


def _build_source(arch: str, seed: int, ckpt: str | None):
    if arch not in TORCH_ARCHS:
        raise ValueError(f"unknown arch {arch!r}; expected one of {sorted(TORCH_ARCHS)}")
    model = TORCH_ARCHS[arch](seed=seed)
    if ckpt:
        model.load_state_dict(torch.load(ckpt, weights_only=True))
    return model.eval()


def _sample_inputs(arch: str, n: int, seed: int) -> np.ndarray:
    rng = np.random.default_rng(seed)
    if arch == "cnn":
        return rng.uniform(0.0, 1.0, (n, 1, 8, 8))
    return rng.uniform(0.0, 1.0, (n, 64))


def export_weights_main(argv=None) -> int:
    parser = argparse.ArgumentParser(prog="export-weights")
    parser.add_argument("--arch", required=True, help="mlp or cnn")
    parser.add_argument("--ckpt", default=None, help="optional torch state_dict")
    parser.add_argument("--seed", type=int, default=0)
    parser.add_argument("--out", required=True)
    args = parser.parse_args(argv)
    try:
        path = export_weights(ExportSpec(_build_source(args.arch, args.seed, args.ckpt), args.out))
    except (ValueError, OSError) as e:
        print(f"error: {e}", file=sys.stderr)
        return 2
    print(path)
    return 0


def export_dataset_main(argv=None) -> int:
    parser = argparse.ArgumentParser(prog="export-dataset")
    parser.add_argument("--name", required=True, help=f"one of {', '.join(DATASET_NAMES)}")
    parser.add_argument("--seed", type=int, default=0)
    parser.add_argument("--out", required=True)
    args = parser.parse_args(argv)
    try:
        batch_path, labels_path = export_dataset(args.name, args.out, seed=args.seed)
    except (ValueError, OSError) as e:
        print(f"error: {e}", file=sys.stderr)
        return 2
    print(batch_path)
    print(labels_path)
    return 0


def parity_check_main(argv=None) -> int:
    parser = argparse.ArgumentParser(prog="parity-check")
    parser.add_argument("--arch", required=True)
    parser.add_argument("--ckpt", default=None)
    parser.add_argument("--axw1", required=True)
    parser.add_argument("--inputs", type=int, default=10)
    parser.add_argument("--seed", type=int, default=0)
    parser.add_argument("--tol", type=float, default=None)
    args = parser.parse_args(argv)
    try:
        source = _build_source(args.arch, args.seed, args.ckpt)
        worst = parity_check(source, args.axw1, _sample_inputs(args.arch, args.inputs, args.seed))
    except (UnsupportedLayerError, ValueError, OSError) as e:
        print(f"error: {e}", file=sys.stderr)
        return 2
    print(f"max_abs_logit_diff {worst:.3e}")
    if args.tol is not None and worst > args.tol:
        print(f"parity failure: {worst:.3e} > {args.tol:.3e}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(export_weights_main())
