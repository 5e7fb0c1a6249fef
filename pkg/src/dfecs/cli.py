"""Command-line interface.

Subcommands: standardize, fit, encode, evaluate, visualize, compare. On
failure a JSON object ``{"error": <category>, "message": ...}`` is written to
stderr and the exit status is nonzero.
"""
from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path
from typing import List, Optional

import numpy as np

from . import __version__
from .config import OUTPUT_ENV, RunConfig
from .errors import ConfigError, DfecsError
from .evaluation import (
    compare_au_sets,
    comparison_table,
    encode_dataset,
    interpretability_metric,
    variance_explained,
    ve_curve_by_k,
    ve_curve_by_l1,
)
from .ffm import fit_ffm
from .geometry import StandardizedFrame
from .io import (
    load_dataset,
    load_external_au_matrix,
    load_keypoints,
    load_labels,
    load_model,
    read_archive,
    read_curve,
    save_au_matrix,
    save_model,
    write_archive,
    write_curve,
    write_standardized,
)
from .kpm import select_neutral
from .pca import fit_pca_baseline
from .pipeline import frames_to_matrix, standardize_frames
from .svg import auto_scale, curves_svg, export_au_svg
from .synthetic import face_template

log = logging.getLogger("dfecs")

EXIT_ERROR = 2
EXIT_INTERNAL = 3


def _dump(obj) -> str:
    return json.dumps(obj, sort_keys=True, indent=2)


def _emit(report: dict, path: Optional[Path] = None) -> None:
    text = _dump(report)
    print(text)
    if path is not None:
        path.write_text(text + "\n", encoding="utf-8")


def _config(args) -> RunConfig:
    base = RunConfig.from_file(args.config) if getattr(args, "config", None) else RunConfig()
    overrides = {}
    for name in ("beta", "grid", "seed", "sample_count", "anchors", "alpha", "n_jobs",
                 "reference_subject", "per_k_refit"):
        value = getattr(args, name, None)
        if value is not None:
            overrides[name] = value
    if getattr(args, "output", None):
        overrides["output_dir"] = args.output
    return base.with_overrides(**overrides)


def _outdir(cfg: RunConfig) -> Path:
    p = Path(cfg.output_dir)
    p.mkdir(parents=True, exist_ok=True)
    return p


def _frames(args):
    if getattr(args, "manifest", None):
        return load_dataset(args.manifest)
    if not args.input:
        raise ConfigError("give input CSV files or --manifest")
    frames = []
    for p in args.input:
        frames.extend(load_keypoints(p))
    return frames


def _matrix(args, cfg: RunConfig, template=None):
    frames = _frames(args)
    sample = None if cfg.sample_count is None else (cfg.sample_count, cfg.seed)
    X, template = frames_to_matrix(frames, anchors=cfg.anchors, template=template,
                                   reference_subject=cfg.reference_subject, sample=sample)
    if X.m == 0:
        raise ConfigError("no KPM columns: no subject has a usable neutral frame")
    return X, template


def _au_source(path):
    """(matrix, provenance, template) from a model archive or an AU matrix file."""
    header, _ = read_archive(path)
    if header.get("kind") == "ffm_model":
        model = load_model(path)
        return model.U_prime, "dfecs", model.template
    au = load_external_au_matrix(path)
    return au.matrix, au.provenance, None


# ------------------------------------------------------------------ commands

def cmd_standardize(args) -> int:
    cfg = _config(args)
    frames = _frames(args)
    std, template = standardize_frames(frames, cfg.anchors, reference_subject=cfg.reference_subject)
    out = Path(args.out) if args.out else _outdir(cfg) / "standardized.csv"
    write_standardized(std, out)
    _emit({"frames_in": len(frames), "frames_out": len(std), "output": str(out),
           "template_subject": template.subject_id,
           "notes": sum(1 for f in std if f.notes)})
    return 0


def cmd_fit(args) -> int:
    cfg = _config(args)
    X, template = _matrix(args, cfg)
    model = fit_ffm(X, cfg.beta, cfg.grid_spec(), cfg.solver(), template=template,
                    n_jobs=cfg.n_jobs, metadata={"run_config": cfg.to_dict()})
    out_dir = _outdir(cfg)
    path = Path(args.model_out) if args.model_out else out_dir / "model.dfecs"
    save_model(model, path)
    log.info("VE(train) = %.4f%% with q = %d AUs", model.ve_train, model.q)
    _emit({"model": str(path), "ve_train": model.ve_train, "q": model.q, "k": model.k,
           "m": X.m, "parts": list(model.parts), "hierarchy": model.hierarchy},
          out_dir / "fit_report.json")
    return 0


def _budgets(cfg):
    return np.arange(0.0, cfg.l1_max + 0.5 * cfg.l1_step, cfg.l1_step)


def cmd_encode(args) -> int:
    cfg = _config(args)
    U, provenance, template = _au_source(args.model or args.au_matrix)
    X, _ = _matrix(args, cfg, template)
    out = _outdir(cfg)
    if cfg.alpha is not None:
        enc = encode_dataset(X, U, cfg.alpha, mode="fixed", provenance=provenance, n_jobs=cfg.n_jobs)
        paths = None
    else:
        enc = encode_dataset(X, U, mode="path", provenance=provenance, n_jobs=cfg.n_jobs)
        paths = enc.paths
    write_archive(out / "encoding.dfecs", "encoding",
                  {"provenance": provenance, "alpha": enc.alpha, "eval_alpha": enc.eval_alpha,
                   "subjects": list(X.subject_ids), "frames": list(X.frame_indices)},
                  {"V": enc.V})
    report = {"n_samples": X.m, "n_aus": U.shape[1], "alpha": enc.alpha,
              "ve": variance_explained(X.X, U @ enc.V), "max_kkt": enc.max_kkt,
              "mean_support": float(enc.supports.mean()) if X.m else 0.0}
    if paths is not None:
        by_k = ve_curve_by_k(X, U, paths, refit=cfg.per_k_refit, label=provenance)
        by_l1 = ve_curve_by_l1(X, U, paths, budgets=_budgets(cfg), label=provenance)
        write_curve(by_k, out / "curve_by_k.tsv")
        write_curve(by_l1, out / "curve_by_l1.tsv")
        (out / "curve_by_k.svg").write_text(curves_svg(
            [(provenance, by_k.values, by_k.mean_ve)], xlabel="number of AUs k"), encoding="utf-8")
        (out / "curve_by_l1.svg").write_text(curves_svg(
            [(provenance, by_l1.values, by_l1.mean_ve)], xlabel="L1 norm of encoding", log_x=True),
            encoding="utf-8")
        report["curve_by_k_endpoint"] = float(by_k.mean_ve[-1])
    _emit(report, out / "encode_report.json")
    return 0


def cmd_evaluate(args) -> int:
    cfg = _config(args)
    report = {}
    if args.labels:
        rec = load_labels(args.labels)
        majority = rec.majority
        report["interpretability"] = interpretability_metric(rec)
        report["non_interpretable"] = [au for au, ni in majority.items() if ni]
        report["rater_interpretability"] = [rec.rater_metric(i) for i in range(3)]
        report["n_aus"] = len(majority)
    if args.curves:
        report["curves"] = {}
        for p in args.curves:
            c = read_curve(p)
            report["curves"][str(p)] = {
                "axis": c["axis"], "label": c["label"], "n_samples": c["n_samples"],
                "endpoint_mean_ve": float(c["mean_ve"][-1]) if len(c["mean_ve"]) else None,
                "monotone": bool(np.all(np.diff(c["mean_ve"]) >= -1e-9))}
    if args.model:
        report["ve_train"] = load_model(args.model).ve_train
    if not report:
        raise ConfigError("nothing to evaluate: give --labels, --curves or --model")
    _emit(report, _outdir(cfg) / "evaluate_report.json")
    return 0


def cmd_visualize(args) -> int:
    cfg = _config(args)
    U, provenance, template = _au_source(args.model or args.au_matrix)
    if args.neutral:
        frames = load_keypoints(args.neutral)
        neutral = select_neutral(frames) or (frames[0] if frames else None)
        if neutral is None:
            raise ConfigError(f"{args.neutral}: no frames")
    elif template is not None:
        neutral = template.as_frame()
    else:
        neutral = StandardizedFrame("synthetic", 0, True, face_template(), np.ones(68, bool))
    scale = args.scale if args.scale is not None else auto_scale(U, neutral.coords[neutral.validity])
    out = _outdir(cfg)
    written = []
    for j in range(U.shape[1]):
        path = out / f"au_{j + 1:02d}.svg"
        path.write_text(export_au_svg(U[:, j], neutral, scale, threshold=args.threshold,
                                      title=f"{provenance} AU {j + 1}"), encoding="utf-8")
        written.append(str(path))
    _emit({"files": written, "scale": scale})
    return 0


def cmd_compare(args) -> int:
    cfg = _config(args)
    sets, template = {}, None
    for spec in args.au or []:
        name, sep, path = spec.partition("=")
        if not sep or not name:
            raise ConfigError(f"--au expects NAME=PATH, got {spec!r}")
        U, _, tmpl = _au_source(path)
        template = template or tmpl
        sets[name] = U
    if args.pca_train:
        frames = []
        for p in args.pca_train:
            frames.extend(load_keypoints(p))
        Xp, _ = frames_to_matrix(frames, anchors=cfg.anchors, template=template,
                                 reference_subject=cfg.reference_subject)
        pca = fit_pca_baseline(Xp.X, target_ve=args.pca_target)
        sets["pca"] = pca.expanded
        save_au_matrix(pca.expanded, _outdir(cfg) / "pca_aus.dfecs", "pca-expanded")
    if not sets:
        raise ConfigError("give at least one --au NAME=PATH or --pca-train")
    X, _ = _matrix(args, cfg, template)
    results = compare_au_sets(X, sets, budgets=_budgets(cfg), refit=cfg.per_k_refit,
                              n_jobs=cfg.n_jobs)
    out = _outdir(cfg)
    lines = ["name\tn_aus\tmean_ve\tpooled_ve"]
    for name, n, mean, pooled in comparison_table(results):
        lines.append(f"{name}\t{n}\t{mean!r}\t{pooled!r}")
    (out / "comparison.tsv").write_text("\n".join(lines) + "\n", encoding="utf-8")
    for name, res in results.items():
        write_curve(res.by_k, out / f"curve_by_k_{name}.tsv")
        write_curve(res.by_l1, out / f"curve_by_l1_{name}.tsv")
    (out / "compare_by_k.svg").write_text(curves_svg(
        [(n, r.by_k.values, r.by_k.mean_ve) for n, r in results.items()],
        xlabel="number of AUs k"), encoding="utf-8")
    (out / "compare_by_l1.svg").write_text(curves_svg(
        [(n, r.by_l1.values, r.by_l1.mean_ve) for n, r in results.items()],
        xlabel="L1 norm of encoding", log_x=True), encoding="utf-8")
    _emit({name: {"n_aus": n, "endpoint_mean_ve": mean, "endpoint_pooled_ve": pooled}
           for name, n, mean, pooled in comparison_table(results)}, out / "compare_report.json")
    return 0


# ------------------------------------------------------------------ parser

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="dfecs", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"dfecs {__version__}")
    parser.add_argument("-v", "--verbose", action="count", default=0)
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, data=True):
        p.add_argument("--config", help="JSON run configuration")
        p.add_argument("-o", "--output", help=f"output directory (default ${OUTPUT_ENV} or .)")
        p.add_argument("--seed", type=int)
        if data:
            p.add_argument("input", nargs="*", help="keypoint CSV files")
            p.add_argument("--manifest", help="dataset manifest (JSON)")
            p.add_argument("--anchors", choices=["default", "no-jawline"])
            p.add_argument("--reference-subject", dest="reference_subject")
            p.add_argument("--sample-count", dest="sample_count", type=int)
            p.add_argument("--n-jobs", dest="n_jobs", type=int)

    p = sub.add_parser("standardize", help="raw frames to standardized CSV")
    common(p)
    p.add_argument("--out", help="output CSV path")
    p.set_defaults(func=cmd_standardize)

    p = sub.add_parser("fit", help="fit a full face model")
    common(p)
    p.add_argument("--beta", type=float)
    p.add_argument("--grid", help="default | extended | published:<DATASET> | custom")
    p.add_argument("--model-out", dest="model_out")
    p.set_defaults(func=cmd_fit)

    p = sub.add_parser("encode", help="encode data against AUs")
    common(p)
    src = p.add_mutually_exclusive_group(required=True)
    src.add_argument("--model")
    src.add_argument("--au-matrix", dest="au_matrix")
    p.add_argument("--alpha", type=float, help="fixed penalty; omit for full paths and curves")
    p.add_argument("--path-points", dest="per_k_refit", action="store_const", const=False,
                   help="score per-k curves with shrunken path coefficients instead of support refits")
    p.set_defaults(func=cmd_encode)

    p = sub.add_parser("evaluate", help="interpretability and curve report")
    common(p, data=False)
    p.add_argument("--labels")
    p.add_argument("--curves", nargs="*")
    p.add_argument("--model")
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("visualize", help="AU arrow SVGs")
    common(p, data=False)
    src = p.add_mutually_exclusive_group(required=True)
    src.add_argument("--model")
    src.add_argument("--au-matrix", dest="au_matrix")
    p.add_argument("--neutral", help="CSV whose first neutral frame is drawn")
    p.add_argument("--scale", type=float)
    p.add_argument("--threshold", type=float, default=1e-9)
    p.set_defaults(func=cmd_visualize)

    p = sub.add_parser("compare", help="compare AU sets on a dataset")
    common(p)
    p.add_argument("--au", action="append", help="NAME=PATH (model archive or AU matrix)")
    p.add_argument("--pca-train", dest="pca_train", nargs="*", help="CSV files to fit PCA AUs on")
    p.add_argument("--pca-target", dest="pca_target", type=float, default=95.0)
    p.add_argument("--path-points", dest="per_k_refit", action="store_const", const=False,
                   help="score per-k curves with shrunken path coefficients instead of support refits")
    p.set_defaults(func=cmd_compare)
    return parser


def main(argv: Optional[List[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.WARNING - 10 * min(args.verbose, 2),
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except DfecsError as exc:
        print(json.dumps({"error": exc.category, "type": type(exc).__name__, "message": str(exc)}),
              file=sys.stderr)
        return EXIT_ERROR
    except OSError as exc:
        print(json.dumps({"error": "io", "type": type(exc).__name__, "message": str(exc)}),
              file=sys.stderr)
        return EXIT_ERROR
    except Exception as exc:  # noqa: BLE001
        print(json.dumps({"error": "internal", "type": type(exc).__name__, "message": str(exc)}),
              file=sys.stderr)
        return EXIT_INTERNAL


if __name__ == "__main__":
    sys.exit(main())
