"""From raw frames to a KPM matrix, plus the train-on-one, encode-on-others
experiment built on top of it."""
from __future__ import annotations

import logging
from pathlib import Path
from typing import List, Mapping, Optional, Sequence, Tuple

import numpy as np

from .config import RunConfig
from .errors import ConfigError, GeometryError
from .evaluation import compare_au_sets
from .ffm import fit_ffm
from .geometry import (ANCHOR_SETS, GeometryConfig, RawFrame, StandardizedFrame, Template,
                       build_template, standardize_frame)
from .io import load_dataset, save_model, write_curve
from .kpm import KpmMatrix, build_matrix, kpms_from_frames, select_neutral
from .pca import fit_pca_baseline
from .svg import curves_svg

log = logging.getLogger(__name__)


def reference_template(frames: Sequence[RawFrame], anchors: str = "default",
                       subject: Optional[str] = None) -> Template:
    """Template from the neutral frame of ``subject``, or of the first
    subject whose neutral frame has every anchor of the chosen set."""
    by_subject = {}
    for f in frames:
        by_subject.setdefault(f.subject_id, []).append(f)
    if subject is not None:
        if subject not in by_subject:
            raise ConfigError(f"reference subject {subject!r} not in the data")
        candidates = [subject]
    else:
        candidates = list(by_subject)
    fallbacks = [ANCHOR_SETS[anchors]] + ([ANCHOR_SETS["no-jawline"]] if anchors == "default" else [])
    for indices in fallbacks:
        for s in candidates:
            neutral = select_neutral(by_subject[s])
            if neutral is not None and all(neutral.validity[i] for i in indices):
                return build_template(neutral)
    raise ConfigError("no subject has a neutral frame with all anchor keypoints")


def standardize_frames(frames: Sequence[RawFrame], anchors: str = "default",
                       template: Optional[Template] = None,
                       reference_subject: Optional[str] = None
                       ) -> Tuple[List[StandardizedFrame], Template]:
    """Standardize every frame; frames failing registration are dropped with a warning."""
    if template is None:
        template = reference_template(frames, anchors, reference_subject)
    cfg = GeometryConfig(template, anchors)
    out, dropped = [], 0
    for f in frames:
        try:
            out.append(standardize_frame(f, cfg))
        except GeometryError as exc:
            dropped += 1
            log.warning("frame %d of %r dropped: %s", f.frame_index, f.subject_id, exc)
    if dropped:
        log.warning("%d of %d frames could not be standardized", dropped, len(frames))
    return out, template


def kpm_matrix(frames: Sequence[StandardizedFrame], sample: Optional[Tuple[int, int]] = None) -> KpmMatrix:
    return build_matrix(kpms_from_frames(frames), sample)


def frames_to_matrix(frames: Sequence[RawFrame], *, anchors: str = "default",
                     template: Optional[Template] = None, reference_subject: Optional[str] = None,
                     sample: Optional[Tuple[int, int]] = None) -> Tuple[KpmMatrix, Template]:
    """Raw or already standardized frames to a KPM matrix."""
    if frames and all(isinstance(f, StandardizedFrame) for f in frames):
        return kpm_matrix(frames, sample), template
    std, template = standardize_frames(frames, anchors, template, reference_subject)
    return kpm_matrix(std, sample), template


def cross_dataset_run(train_manifest, test_manifests: Mapping[str, object], out_dir,
                      config: Optional[RunConfig] = None, *, pca_target: float = 95.0) -> dict:
    """Fit on one dataset, then encode others with the fitted AUs and a PCA
    baseline trained on the same data. Writes the model, per-set curves and
    plots under ``out_dir``; returns endpoint VE numbers per test dataset."""
    cfg = config or RunConfig()
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    sample = None if cfg.sample_count is None else (cfg.sample_count, cfg.seed)
    X, template = frames_to_matrix(load_dataset(train_manifest), anchors=cfg.anchors,
                                   reference_subject=cfg.reference_subject, sample=sample)
    model = fit_ffm(X, cfg.beta, cfg.grid_spec(), cfg.solver(), template=template,
                    n_jobs=cfg.n_jobs, metadata={"run_config": cfg.to_dict()})
    save_model(model, out / "model.dfecs")
    pca = fit_pca_baseline(X.X, target_ve=pca_target)
    sets = {"dfecs": model.U_prime, "pca": pca.expanded}
    budgets = np.arange(0.0, cfg.l1_max + 0.5 * cfg.l1_step, cfg.l1_step)
    report = {"ve_train": model.ve_train, "q": model.q, "pca_components": pca.c, "tests": {}}
    for name, manifest in test_manifests.items():
        Y, _ = frames_to_matrix(load_dataset(manifest), anchors=cfg.anchors, template=template)
        res = compare_au_sets(Y, sets, budgets=budgets, refit=cfg.per_k_refit, n_jobs=cfg.n_jobs)
        for s, r in res.items():
            write_curve(r.by_k, out / f"{name}_{s}_by_k.tsv")
            write_curve(r.by_l1, out / f"{name}_{s}_by_l1.tsv")
        (out / f"{name}_by_k.svg").write_text(curves_svg(
            [(s, r.by_k.values, r.by_k.mean_ve) for s, r in res.items()],
            xlabel="number of AUs k", title=name), encoding="utf-8")
        (out / f"{name}_by_l1.svg").write_text(curves_svg(
            [(s, r.by_l1.values, r.by_l1.mean_ve) for s, r in res.items()],
            xlabel="L1 norm of encoding", log_x=True, title=name), encoding="utf-8")
        report["tests"][name] = {s: float(r.by_k.mean_ve[-1]) for s, r in res.items()}
    return report
