"""Acceptance criteria, one check per criterion at the stated tolerances.

Each check returns ``(ok, detail)``. Under pytest the outcome is asserted
and summarised at the end of the run; ``python3 tests/test_acceptance.py``
runs the checks directly and prints one line per criterion.

The dataset-gated half of criterion 5 runs when ``DFECS_DATASETS`` points
to a JSON file ``{"train": manifest, "tests": {name: manifest, ...}}``.
"""
import json
import os
import sys
import tempfile
import time
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))
from oracles import brute_force_positive_lasso, random_lasso_instance  # noqa: E402

from dfecs.config import RunConfig  # noqa: E402
from dfecs.evaluation import (InterpretabilityRecord, encode_dataset, interpretability_metric,  # noqa: E402
                              ve_curve_by_k, variance_explained)
from dfecs.ffm import GridSpec, fit_ffm  # noqa: E402
from dfecs.geometry import (N_KEYPOINTS, AffineParams, GeometryConfig, RawFrame,  # noqa: E402
                            apply_affine, build_template, estimate_similarity, standardize_frame)
from dfecs.io import load_model, save_model  # noqa: E402
from dfecs.kpm import DEFAULT_PARTITION  # noqa: E402
from dfecs.pca import fit_pca_baseline  # noqa: E402
from dfecs.pipeline import cross_dataset_run, frames_to_matrix  # noqa: E402
from dfecs.presets import DFECS_AU_VOTES, PCA_AU_VOTES  # noqa: E402
from dfecs.solvers import (SolverConfig, fit_dictionary, fit_nmf, kkt_residual, objective,  # noqa: E402
                           positive_lasso, positive_lasso_path)
from dfecs.synthetic import anchor_free_aus, face_template, planted_ffm, synthetic_frames  # noqa: E402


def check_1():
    rng = np.random.default_rng(1)
    t0 = time.perf_counter()
    worst_gap = worst_kkt = 0.0
    for _ in range(200):
        U, y, alpha = random_lasso_instance(rng, max_k=6, wide=bool(rng.integers(2)))
        v = positive_lasso(U, y, alpha)
        _, best = brute_force_positive_lasso(U, y, alpha)
        worst_gap = max(worst_gap, abs(objective(U, y, v, alpha) - best))
        worst_kkt = max(worst_kkt, kkt_residual(U, y, v, alpha))
    elapsed = time.perf_counter() - t0
    ok = worst_gap <= 1e-6 and worst_kkt <= 1e-8 and elapsed < 10
    return ok, f"max |obj - brute| {worst_gap:.2e}, max KKT {worst_kkt:.2e}, {elapsed:.1f} s"


def check_2():
    rng = np.random.default_rng(2)
    worst = 0.0
    for _ in range(50):
        k = int(rng.integers(1, 7))
        U, y = rng.normal(size=(k + int(rng.integers(0, 6)), k)), None
        y = rng.normal(size=U.shape[0]) * rng.uniform(0.1, 10)
        path = positive_lasso_path(U, y)
        for a in np.linspace(0, 1.05 * max(path.alpha_max, 1e-9), 20):
            worst = max(worst, float(np.abs(path.at(a) - positive_lasso(U, y, a)).max()))
    return worst <= 1e-6, f"max coefficient gap {worst:.2e} over 50 x 20 evaluations"


def _monotone_violation(trace):
    t = np.asarray(trace)
    if t.size < 2:
        return 0.0
    return float(np.max((t[1:] - t[:-1]) / np.maximum(np.abs(t[:-1]), 1e-300)))


def check_3():
    worst_rel, worst_norm, min_val = 0.0, 0.0, 0.0
    for seed in range(100):
        rng = np.random.default_rng(seed)
        cfg = SolverConfig(max_iterations=100, seed=seed)
        X = rng.normal(size=(10, 40)) * rng.uniform(0.2, 5)
        d = fit_dictionary(X, int(rng.integers(1, 8)), float(rng.uniform(0, 3)), cfg)
        worst_rel = max(worst_rel, _monotone_violation(d.objective_trace))
        worst_norm = max(worst_norm, float(np.linalg.norm(d.U, axis=0).max()) - 1.0)
        min_val = min(min_val, float(d.V.min()))
        V = np.abs(rng.normal(size=(12, 40))) * (rng.random((12, 40)) < 0.5)
        n = fit_nmf(V, int(rng.integers(1, 7)), float(rng.uniform(0, 2)), float(rng.uniform(0, 2)),
                    SolverConfig(max_iterations=100, seed=seed,
                                 nmf_init="random" if seed % 2 else "nndsvd"))
        worst_rel = max(worst_rel, _monotone_violation(n.objective_trace))
        min_val = min(min_val, float(n.A.min()), float(n.B.min()))
    ok = worst_rel <= 1e-9 and worst_norm <= 1e-9 and min_val >= 0.0
    return ok, (f"max relative increase {worst_rel:.1e}, max column norm - 1 {worst_norm:.1e}, "
                f"min entry {min_val:.1e}")


def check_4():
    q_star = 8
    pm = planted_ffm(m=2000, atoms_per_part=5, q=q_star, noise=0.01, seed=0)
    t0 = time.perf_counter()
    model = fit_ffm(pm.X, 0.05)
    elapsed = time.perf_counter() - t0
    ok = model.ve_train >= 95.0 and q_star <= model.q <= q_star + 4 and elapsed < 300
    return ok, f"VE(train) {model.ve_train:.3f}%, q = {model.q}, {elapsed:.0f} s"


def _dataset_part():
    spec = os.environ.get("DFECS_DATASETS")
    if not spec:
        return "dataset runs skipped (DFECS_DATASETS unset)"
    d = json.loads(Path(spec).read_text())
    out = Path(d.get("output", tempfile.mkdtemp(prefix="dfecs_datasets_")))
    cfg = RunConfig(**d.get("config", {}), output_dir=str(out))
    report = cross_dataset_run(d["train"], d["tests"], out, cfg)
    means = {name: round(v["dfecs"], 2) for name, v in report["tests"].items()}
    return f"datasets: VE(train) {report['ve_train']:.2f}%, q {report['q']}, test endpoint VE {means} (reported only)"


def check_5():
    dfecs = interpretability_metric(InterpretabilityRecord(DFECS_AU_VOTES))
    pca = interpretability_metric(InterpretabilityRecord(PCA_AU_VOTES))
    X = np.array([[1.0, 2.0], [3.0, 4.0]])
    y = np.array([[1.0], [1.0]])
    ve = (variance_explained(X, X), variance_explained(X, 0 * X),
          variance_explained(y, np.array([[1.0], [0.0]])))
    ok = dfecs == 87.5 and pca == 62.5 and ve == (100.0, 0.0, 50.0)
    return ok, f"metric {dfecs} / {pca}, VE cases {ve}; {_dataset_part()}"


def _random_invertible(rng):
    while True:
        M = rng.normal(size=(2, 2)) + 2 * np.eye(2) * rng.choice([-1, 1])
        if abs(np.linalg.det(M)) > 0.2 and np.linalg.cond(M) < 20:
            return AffineParams(M, rng.normal(scale=50, size=2))


def check_6():
    rng = np.random.default_rng(6)
    face = face_template()
    valid = np.ones(N_KEYPOINTS, bool)
    template = build_template(RawFrame("ref", 0, True, face, valid))
    cfg = GeometryConfig(template)
    frame = RawFrame("s", 1, False, face + rng.normal(scale=2, size=face.shape), valid)
    ref = standardize_frame(frame, cfg).coords
    worst = 0.0
    for _ in range(100):
        out = standardize_frame(apply_affine(frame, _random_invertible(rng)), cfg)
        worst = max(worst, float(np.abs(out.coords - ref).max()))
    worst_sim = 0.0
    for _ in range(100):
        src, dst = rng.normal(scale=100, size=(2, 2)), rng.normal(scale=100, size=(2, 2))
        coords = np.zeros((N_KEYPOINTS, 2))
        coords[[36, 39]] = src
        s = estimate_similarity(RawFrame("s", 1, False, coords, valid), [36, 39], dst)
        worst_sim = max(worst_sim, float(np.abs(s.apply(src) - dst).max()))
    ok = worst <= 1e-9 and worst_sim <= 1e-12
    return ok, f"max invariance gap {worst:.1e}, max similarity residual {worst_sim:.1e}"


def check_7():
    rng = np.random.default_rng(7)
    worst = 0.0
    for _ in range(20):
        r, m = int(rng.integers(5, 30)), int(rng.integers(5, 60))
        X = rng.normal(size=(r, m))
        pca = fit_pca_baseline(X, c=int(rng.integers(1, min(r, m) + 1)))
        P = pca.components
        proj = variance_explained(X, P @ (P.T @ X))
        enc = encode_dataset(X, pca.expanded, 0.0)
        worst = max(worst, abs(variance_explained(X, pca.expanded @ enc.V) - proj))
    return worst <= 1e-6, f"max VE gap {worst:.1e}"


def check_8():
    rng = np.random.default_rng(8)
    U_true = anchor_free_aus(8, 0)
    frames = synthetic_frames(U_true, 3, 40, seed=8, magnitude=6.0)
    X, _ = frames_to_matrix(frames)
    fixtures = {
        "synthetic keypoints": X.X,
        "gaussian": rng.normal(size=(136, 60)),
        "nonnegative": np.abs(rng.normal(size=(136, 60))),
    }
    au_sets = {
        "planted": U_true,
        "pca": fit_pca_baseline(X.X, 95.0).expanded,
        "random nonnegative": np.abs(rng.normal(size=(136, 12))),
        "random signed": rng.normal(size=(136, 10)),
    }
    worst = 0.0
    for Y in fixtures.values():
        for U in au_sets.values():
            curve = ve_curve_by_k(Y, U)
            worst = min(worst, float(np.diff(curve.mean_ve).min()), float(np.diff(curve.pooled_ve).min()))
    Q, _ = np.linalg.qr(rng.normal(size=(20, 8)))
    Y = rng.normal(size=(20, 50))
    dominated = True
    for size in range(1, 8):
        small = ve_curve_by_k(Y, Q[:, :size], ks=range(9))
        big = ve_curve_by_k(Y, Q[:, :size + 1], ks=range(9))
        dominated &= bool(np.all(big.mean_ve >= small.mean_ve - 1e-9))
    ok = worst >= -1e-9 and dominated
    return ok, f"min curve step {worst:.1e} over {len(fixtures) * len(au_sets)} curves, superset dominance {dominated}"


def check_9():
    pm = planted_ffm(m=200, q=4, atoms_per_part=2, seed=9)
    grid = GridSpec(k_values={p: (1, 2, 3) for p in DEFAULT_PARTITION.names}, q_values=range(1, 9))
    with tempfile.TemporaryDirectory() as d:
        d = Path(d)
        for name in ("a", "b"):
            save_model(fit_ffm(pm.X, 0.05, grid, SolverConfig(seed=3)), d / f"{name}.dfecs")
        identical = (d / "a.dfecs").read_bytes() == (d / "b.dfecs").read_bytes()
        loaded = load_model(d / "a.dfecs")  # raises if U' != U A
        u_prime_ok = np.array_equal(loaded.U_prime, loaded.U @ loaded.A)
        save_model(loaded, d / "c.dfecs")
        round_trip = (d / "c.dfecs").read_bytes() == (d / "a.dfecs").read_bytes()
    ok = identical and round_trip and u_prime_ok
    return ok, f"identical runs {identical}, round trip bit-exact {round_trip}, U' check {u_prime_ok}"


CHECKS = {1: check_1, 2: check_2, 3: check_3, 4: check_4, 5: check_5,
          6: check_6, 7: check_7, 8: check_8, 9: check_9}


@pytest.mark.parametrize("number", sorted(CHECKS))
def test_criterion(number, acceptance):
    ok, detail = CHECKS[number]()
    acceptance(number, ok, detail)
    print(f"criterion {number}: {'PASS' if ok else 'FAIL'}  {detail}")
    assert ok, detail


if __name__ == "__main__":
    failed = 0
    for number, check in CHECKS.items():
        ok, detail = check()
        failed += not ok
        print(f"criterion {number}: {'PASS' if ok else 'FAIL'}  {detail}", flush=True)
    sys.exit(1 if failed else 0)
