"""Acceptance gate: one test per criterion, each printing a PASS/FAIL line.

Run with ``pytest tests/test_acceptance.py -v -s`` to see the summary lines;
they are also printed with capture disabled under plain ``pytest``.
"""

import csv
import json
import os
import time
from dataclasses import replace

import numpy as np
import pytest
import scipy.linalg

from conftest import dft_matrix
from mctf import prox
from mctf.cli import main
from mctf.data import apply_mask, sample_uniform, synth_mctf
from mctf.io import save_tensor
from mctf.metrics import ergas, psnr, sam, ssim
from mctf.solver import (
    SolverConfig,
    SolverState,
    solve,
    update_G,
    update_J,
    update_X,
    update_Z,
)
from mctf.tensor import (
    fft_mode,
    fold,
    ifft_mode,
    mode_n_product,
    permute_from_mode3,
    permute_to_mode3,
    unfold,
)

TABLE_TENSOR_ENV = "MCTF_TABLE_TENSOR"


@pytest.fixture
def report(capsys):
    def emit(number, name, ok, detail, elapsed, bound):
        line = (f"ACCEPTANCE {number} {'PASS' if ok and elapsed < bound else 'FAIL'} "
                f"{name}: {detail}; {elapsed:.2f} s (bound {bound} s)")
        with capsys.disabled():
            print("\n" + line)
        assert ok, line
        assert elapsed < bound, line
    return emit


def slice_oracle(t, mode, shrink):
    p = permute_to_mode3(t, mode)
    F = dft_matrix(p.shape[2])
    spec = fold(F @ unfold(p, 3), 3, p.shape)
    out = np.empty_like(spec)
    for k in range(p.shape[2]):
        U, s, Vh = scipy.linalg.svd(spec[:, :, k], full_matrices=False, lapack_driver="gesvd")
        out[:, :, k] = (U * shrink(s)) @ Vh
    return permute_from_mode3((fold(F.conj() @ unfold(out, 3), 3, p.shape) / p.shape[2]).real, mode)


def test_1_algebraic_identities(report):
    start = time.perf_counter()
    rng = np.random.default_rng(1)
    shapes = [tuple(rng.integers(1, 17, 3)) for _ in range(30)] + [(64, 64, 64), (1, 64, 3)]
    worst = {"prod": 0.0, "fft": 0.0, "parseval": 0.0}
    ok = True
    for shape in shapes:
        t = rng.standard_normal(shape)
        for mode in (1, 2, 3):
            ok &= np.array_equal(fold(unfold(t, mode), mode, shape), t)
            ok &= np.array_equal(permute_from_mode3(permute_to_mode3(t, mode), mode), t)
            M = rng.standard_normal((3, shape[mode - 1]))
            rhs = M @ unfold(t, mode)
            worst["prod"] = max(worst["prod"], np.linalg.norm(
                unfold(mode_n_product(t, M, mode), mode) - rhs) / np.linalg.norm(rhs))
            spec = fft_mode(t, mode)
            worst["fft"] = max(worst["fft"], np.linalg.norm(ifft_mode(spec, mode) - t)
                               / np.linalg.norm(t))
            lhs = np.linalg.norm(spec) ** 2
            worst["parseval"] = max(worst["parseval"], abs(
                lhs - shape[mode - 1] * np.linalg.norm(t) ** 2) / lhs)
    ok &= worst["prod"] <= 1e-12 and worst["fft"] <= 1e-10 and worst["parseval"] <= 1e-9
    detail = ", ".join(f"{k} {v:.1e}" for k, v in worst.items())
    report(1, "algebraic identity suite", bool(ok), detail, time.perf_counter() - start, 10)


def test_2_prox_oracles(report):
    start = time.perf_counter()
    rng = np.random.default_rng(2)
    worst_sv = worst_tnn = 0.0
    objective_ok = True
    for _ in range(10):
        m, n = rng.integers(1, 9, 2)
        M = rng.standard_normal((m, n))
        delta = rng.uniform(0, 2)
        X = prox.svt(M, delta)
        s = scipy.linalg.svd(M, compute_uv=False, lapack_driver="gesvd")
        got = scipy.linalg.svd(X, compute_uv=False, lapack_driver="gesvd")
        worst_sv = max(worst_sv, np.max(np.abs(got - np.maximum(s - delta, 0))))

        def f(Y):
            return delta * scipy.linalg.svd(Y, compute_uv=False).sum() + 0.5 * np.sum((Y - M) ** 2)

        fx = f(X)
        radius = np.linalg.norm(M)
        for _ in range(200):
            d = rng.standard_normal(M.shape)
            d *= rng.uniform(0, radius) / np.linalg.norm(d)
            objective_ok &= fx <= f(X + d) + 1e-10
    for _ in range(8):
        t = rng.standard_normal(tuple(rng.integers(1, 9, 3)))
        d, eps = rng.uniform(0, 2), rng.uniform(0.01, 1)
        for mode in (1, 2, 3):
            a = prox.tnn_prox(t, mode, d)
            b = prox.log_tnn_prox(t, mode, d, eps)
            worst_tnn = max(
                worst_tnn,
                np.linalg.norm(a - slice_oracle(t, mode, lambda s: np.maximum(s - d, 0))),
                np.linalg.norm(b - slice_oracle(t, mode, lambda s: np.maximum(s - d / (s + eps), 0))),
            )
    ok = worst_sv <= 1e-8 and objective_ok and worst_tnn <= 1e-8
    detail = f"sv err {worst_sv:.1e}, perturbations ok {objective_ok}, slice oracle {worst_tnn:.1e}"
    report(2, "prox oracle suite", bool(ok), detail, time.perf_counter() - start, 30)


def random_state(rng):
    shape = tuple(int(v) for v in rng.integers(3, 8, 3))
    ranks = tuple(int(rng.integers(1, s + 1)) for s in shape)
    X = [rng.standard_normal((shape[n], ranks[n])) for n in range(3)]
    G = []
    for n in range(3):
        s = list(shape)
        s[n] = ranks[n]
        G.append(rng.standard_normal(s))
    state = SolverState(
        X=X, Z=[rng.standard_normal(x.shape) for x in X], G=G,
        J=[rng.standard_normal(g.shape) for g in G],
        GX=[rng.standard_normal(x.shape) for x in X],
        GG=[rng.standard_normal(g.shape) for g in G],
        Y=rng.standard_normal(shape), rho=tuple(rng.uniform(0.1, 2, 3)),
    )
    w = rng.uniform(0.1, 1, 3)
    cfg = SolverConfig(ranks=ranks, alpha=tuple(w / w.sum()), lam=tuple(rng.uniform(0, 1, 3)),
                       tau=tuple(rng.uniform(0, 1, 3)))
    return state, cfg


def test_3_block_optimality(report):
    start = time.perf_counter()
    rng = np.random.default_rng(3)
    worst_x = worst_g = 0.0
    exact = True
    for _ in range(10):
        s, cfg = random_state(rng)
        nx, ng = update_X(s, cfg), update_G(s, cfg)
        for n in range(3):
            rho, a = s.rho[n], cfg.alpha[n]
            X = nx.X[n]
            Gn, Yn = unfold(s.G[n], n + 1), unfold(s.Y, n + 1)
            ax = (s.Z[n] - s.GX[n] / rho + s.X[n]) / 2
            gx = a * (X @ Gn - Yn) @ Gn.T + 2 * rho * (X - ax)
            worst_x = max(worst_x, np.linalg.norm(gx) / (1 + np.linalg.norm(X)))
            Gm = unfold(ng.G[n], n + 1)
            ag = unfold((s.J[n] - s.GG[n] / rho + s.G[n]) / 2, n + 1)
            Xn = s.X[n]
            gg = a * Xn.T @ (Xn @ Gm - Yn) + 2 * rho * (Gm - ag)
            worst_g = max(worst_g, np.linalg.norm(gg) / (1 + np.linalg.norm(Gm)))
        for variant in ("convex", "log"):
            c = replace(cfg, variant=variant)
            z, j = update_Z(s, c), update_J(s, c)
            for n in range(3):
                rho = s.rho[n]
                U = s.X[n] + s.GX[n] / rho
                V = s.G[n] + s.GG[n] / rho
                if variant == "convex":
                    wz = prox.svt(U, c.tau[n] / rho) if c.tau[n] else U
                    wj = prox.tnn_prox(V, n + 1, c.lam[n] / rho) if c.lam[n] else V
                else:
                    wz = prox.log_svt(U, c.tau[n] / rho, c.log_eps)
                    wj = prox.log_tnn_prox(V, n + 1, c.lam[n] / rho, c.log_eps)
                exact &= np.array_equal(z.Z[n], wz) and np.array_equal(j.J[n], wj)
    ok = worst_x <= 1e-8 and worst_g <= 1e-8 and exact
    detail = f"X residual {worst_x:.1e}, G residual {worst_g:.1e}, Z/J equal oracle {exact}"
    report(3, "solver block optimality", bool(ok), detail, time.perf_counter() - start, 30)


def suite4():
    Y, _ = synth_mctf((20, 20, 20), (2, 2, 2), 0)
    out = {}
    for sr in (0.6, 0.3):
        m = sample_uniform(Y.shape, sr, 1)
        t0 = time.perf_counter()
        res = solve(apply_mask(Y, m), m, SolverConfig(ranks=(2, 2, 2), max_iter=500))
        rse = np.linalg.norm(res.Y_hat - Y) / np.linalg.norm(Y)
        out[sr] = (res, rse, time.perf_counter() - t0)
    return out


@pytest.fixture(scope="module")
def suite4_runs():
    return suite4()


def test_4_synthetic_recovery(report, suite4_runs):
    limits = {0.6: 1e-2, 0.3: 5e-2}
    ok = all(suite4_runs[sr][1] <= lim and suite4_runs[sr][0].iterations <= 500
             for sr, lim in limits.items())
    elapsed = max(v[2] for v in suite4_runs.values())
    detail = ", ".join(
        f"SR {sr}: RSE {suite4_runs[sr][1]:.2e} (<= {lim:g}) in {suite4_runs[sr][0].iterations} it"
        for sr, lim in limits.items())
    report(4, "synthetic recovery", ok, detail, elapsed, 60)


def nc_vs_convex_suite(instances=10):
    """SR 0.1 with 1% noise on 20^3 rank-(2,2,2) tensors, PSNR vs the clean truth."""
    base = dict(ranks=(2, 2, 2), lam=10.0, rho=1e-6)
    gaps = []
    means = np.zeros(2)
    for s in range(instances):
        Y, _ = synth_mctf((20, 20, 20), (2, 2, 2), s)
        noisy = Y + 0.01 * np.sqrt(np.mean(Y**2)) * np.random.default_rng(100 + s).standard_normal(Y.shape)
        m = sample_uniform(Y.shape, 0.1, s + 1)
        vals = []
        for variant in ("convex", "log"):
            res = solve(apply_mask(noisy, m), m, SolverConfig(variant=variant, **base))
            vals.append(psnr(Y, res.Y_hat))
        means += np.array(vals) / instances
        gaps.append(vals[1] - vals[0])
    return means, np.array(gaps)


def test_5_nc_vs_convex(report):
    start = time.perf_counter()
    means, gaps = nc_vs_convex_suite()
    wins = int(np.sum(gaps > 0))
    ok = means[1] >= means[0] - 0.5 and wins >= 6
    detail = f"mean PSNR NC {means[1]:.2f} dB vs convex {means[0]:.2f} dB, NC wins {wins}/10"
    report(5, "NC-vs-convex trend", bool(ok), detail, time.perf_counter() - start, 300)


def test_6_objective_behavior(report, suite4_runs):
    start = time.perf_counter()
    ok = True
    parts = []
    for sr, (res, _, _) in suite4_runs.items():
        obj = np.asarray(res.objective_trace)
        window = bool(np.all(obj[5:] <= obj[:-5])) if obj.size > 5 else True
        conv = res.converged and res.rel_change_trace[-1] < 1e-5
        ok &= window and conv
        parts.append(f"SR {sr}: 5-window {window}, converged {conv} at {res.iterations} it")
    report(6, "objective behavior", ok, "; ".join(parts), time.perf_counter() - start, 60)


def test_7_metric_fixtures(report):
    start = time.perf_counter()
    rng = np.random.default_rng(7)
    t = rng.random((8, 8, 4)) + 0.5
    identical = (psnr(t, t), ssim(t, t), ergas(t, t), sam(t, t)) == (100.0, 1.0, 0.0, 0.0)
    p20 = psnr(np.zeros((4, 4, 2)), np.full((4, 4, 2), 0.1), peak=1)
    err = 0.01 * rng.standard_normal(t.shape)
    law = psnr(t, t + err, 1) - psnr(t, t + 2 * err, 1)
    ref = np.full((2, 2, 1), 2.0)
    e50 = ergas(ref, ref + np.array([1.0, -1, 1, -1]).reshape(2, 2, 1))
    a = np.zeros((3, 3, 2))
    b = np.zeros((3, 3, 2))
    a[:, :, 0] = b[:, :, 1] = 1
    right = sam(a, b)
    ok = (identical and abs(p20 - 20) <= 1e-9 and abs(law - 20 * np.log10(2)) <= 1e-9
          and abs(e50 - 50) <= 1e-9 and abs(right - np.pi / 2) <= 1e-9)
    detail = (f"identical exact {identical}, psnr {p20:.12f}, doubling {law:.12f}, "
              f"ergas {e50:.12f}, sam {right:.12f}")
    report(7, "metrics fixtures", bool(ok), detail, time.perf_counter() - start, 5)


def test_8_pipeline_determinism(report, tmp_path, monkeypatch):
    start = time.perf_counter()
    truth = tmp_path / "truth.tns"
    assert main(["synth", "--shape", "12,12,12", "--ranks", "2,2,2", "--seed", "5",
                 "--noise", "0.01", "--out", str(truth)]) == 0
    spec = tmp_path / "spec.json"
    spec.write_text(json.dumps({
        "inputs": ["truth.tns"], "sr": [0.2, 0.5], "variants": ["mctf", "ncmctf"],
        "seeds": [1, 2], "ranks": [2, 2, 2], "config": {"max_iter": 100}, "out": "table.csv",
    }))
    outputs = []
    for threads in ("1", "4", None):
        if threads is None:
            monkeypatch.delenv("MCTF_NUM_THREADS", raising=False)
        else:
            monkeypatch.setenv("MCTF_NUM_THREADS", threads)
        assert main(["experiment", "--spec", str(spec)]) == 0
        outputs.append((tmp_path / "table.csv").read_bytes())
    rows = len(outputs[0].decode().splitlines()) - 1
    ok = all(o == outputs[0] for o in outputs) and rows == 8
    detail = f"{rows} rows, identical across thread settings 1/4/unset: {ok}"
    report(8, "pipeline determinism", ok, detail, time.perf_counter() - start, 120)


def test_9_table_pipeline_hook(report, tmp_path, capsys):
    """Conditional: needs a user-supplied 150x150x181 TNS1 tensor.

    Set MCTF_TABLE_TENSOR to its path. Numerical agreement with any
    published table is not checked, only the table shape.
    """
    path = os.environ.get(TABLE_TENSOR_ENV)
    if not path:
        with capsys.disabled():
            print(f"\nACCEPTANCE 9 SKIP table pipeline hook: set {TABLE_TENSOR_ENV} to a "
                  "150x150x181 TNS1 tensor to run it (not gating)")
        pytest.skip(f"{TABLE_TENSOR_ENV} not set")
    start = time.perf_counter()
    spec = tmp_path / "spec.json"
    spec.write_text(json.dumps({
        "inputs": [os.path.abspath(path)], "sr": [0.05, 0.1, 0.2, 0.3],
        "variants": ["mctf", "ncmctf"], "seeds": [0], "ranks": "auto",
        "out": str(tmp_path / "table.csv"),
    }))
    code = main(["experiment", "--spec", str(spec)])
    rows = list(csv.DictReader((tmp_path / "table.csv").open())) if code == 0 else []
    ok = code == 0 and len(rows) == 8 and all(r["psnr"] for r in rows)
    report(9, "table pipeline hook", ok, f"exit {code}, {len(rows)} rows",
           time.perf_counter() - start, 24 * 3600)


def test_9_hook_shape_on_stand_in(report, tmp_path):
    # exercises the same code path on a small stand-in so the hook stays wired
    start = time.perf_counter()
    Y, _ = synth_mctf((15, 15, 18), (2, 2, 2), 9)
    save_tensor(Y - Y.min() + 1, tmp_path / "cube.tns")
    spec = tmp_path / "spec.json"
    spec.write_text(json.dumps({
        "inputs": ["cube.tns"], "sr": [0.05, 0.1, 0.2, 0.3], "variants": ["mctf", "ncmctf"],
        "seeds": [0], "ranks": "auto", "config": {"max_iter": 50}, "out": "table.csv",
    }))
    code = main(["experiment", "--spec", str(spec)])
    rows = list(csv.reader((tmp_path / "table.csv").open())) if code == 0 else []
    ok = code == 0 and len(rows) == 9 and len(rows[0]) == 11
    report("9s", "table pipeline shape (stand-in tensor)", ok,
           f"exit {code}, {max(len(rows) - 1, 0)} rows", time.perf_counter() - start, 60)
