"""End-to-end acceptance checks, one test per criterion.

Each test prints (and records for the terminal summary) a single line
``[n] PASS|FAIL <name>: <measured values> (<seconds>)``.  Tolerances and
instance counts are fixed here and must not be relaxed.
"""
import math
import time

import numpy as np
import pytest

from localdenoise.checks import discrete_recovery_checks, random_dist, telescoping_checks
from localdenoise.discrete import LocalChannel, bayes_channel, denoise_master, flip_generator, integrate_master, random_stochastic
from localdenoise.gaussian import gmrf_chain, multi_step_local_recovery
from localdenoise.infotools import FiniteDist, entropy, tv
from localdenoise.lattice import Lattice, check_schedule, reorganize
from localdenoise.mine import MineConfig, mine_estimate
from localdenoise.scorefield import (
    Dataset,
    NoiseSchedule,
    SamplerConfig,
    finite_difference_score,
    flow_velocity,
    mixture_logpdf,
    mixture_score,
    sample_backward,
)
from localdenoise.toric import (
    TorusCode,
    apply_all,
    bypass_path_channels,
    edge_tripartition,
    loop_dist,
    regional_entropy_via_anyons,
    toric_cmi_sweep,
)
from localdenoise.discrete import FlipChannel, apply_flip

from conftest import ACCEPTANCE_LINES


def report(n: int, name: str, ok: bool, detail: str, seconds: float) -> None:
    line = f"[{n}] {'PASS' if ok else 'FAIL'} {name}: {detail} ({seconds:.1f} s)"
    ACCEPTANCE_LINES.append(line)
    print(line)
    assert ok, line


@pytest.fixture(scope="module")
def recovery_instances():
    t0 = time.perf_counter()
    checks = discrete_recovery_checks(1000, seed=2024)
    return checks, time.perf_counter() - t0


def test_01_exact_bayes_reversal():
    t0 = time.perf_counter()
    rng = np.random.default_rng(101)
    worst = 0.0
    for _ in range(200):
        K = int(rng.integers(1, 11))
        P = random_dist(rng, K)
        a = int(rng.integers(1, min(K, 3) + 1))
        A = tuple(int(s) for s in rng.choice(K, size=a, replace=False))
        ch = LocalChannel(A, random_stochastic(rng, 2**a))
        worst = max(worst, tv(bayes_channel(ch, P)(ch(P)), P))
    dt = time.perf_counter() - t0
    report(1, "exact Bayes reversal", worst <= 1e-10 and dt < 30, f"200 instances, max TV {worst:.2e} <= 1e-10", dt)


def test_02_recovery_chain(recovery_instances):
    checks, dt = recovery_instances
    bad = [c for c in checks if not c.chain_ok]
    tight = max(c.kl - c.cmi_before for c in checks)
    report(
        2,
        "2TV^2 <= KL <= CMI chain",
        not bad and dt < 120,
        f"{len(checks)} instances, {len(bad)} violations, max KL-CMI {tight:.2e}",
        dt,
    )


def test_03_cmi_difference_bound(recovery_instances):
    checks, dt = recovery_instances
    bad = [c for c in checks if not c.difference_ok]
    slack = min(c.cmi_before - c.cmi_after - c.kl for c in checks)
    report(3, "KL <= CMI_before - CMI_after", not bad, f"{len(checks)} instances, {len(bad)} violations, min slack {slack:.2e}", dt)


def test_04_telescoping_bound():
    t0 = time.perf_counter()
    runs = telescoping_checks(50, seed=404, max_K=8, max_N=6)
    bad = [c for c in runs if not c.ok]
    dt = time.perf_counter() - t0
    report(4, "telescoping TV bound", not bad, f"{len(runs)} runs (K<=8, N<=6), {len(bad)} violations", dt)


def test_05_toric_code():
    t0 = time.perf_counter()
    notes, ok = [], True
    code = TorusCode(3)
    part = edge_tripartition(code, code.center_edge(), 1)
    ps = np.linspace(0.0, 0.5, 26)
    cs = np.array([c for _, c in toric_cmi_sweep(code, ps, part)])
    ok &= cs[0] <= 1e-9 and cs[-1] <= 1e-9
    notes.append(f"CMI(0)={cs[0]:.1e} CMI(0.5)={cs[-1]:.1e}")
    sizes = [np.count_nonzero(loop_dist(TorusCode(L)).probs) for L in (2, 3)]
    ok &= sizes == [2**3, 2**8]
    notes.append(f"supports {sizes}")
    rng = np.random.default_rng(505)
    worst = 0.0
    for _ in range(20):
        Q = sorted(int(e) for e in rng.choice(code.K, size=int(rng.integers(1, 11)), replace=False))
        p = float(rng.uniform(0, 0.5))
        direct = entropy(apply_flip(FlipChannel(p, range(code.K)), loop_dist(code)).marginal(Q))
        worst = max(worst, abs(regional_entropy_via_anyons(code, Q, p) - direct))
    ok &= worst <= 1e-9
    notes.append(f"anyon entropy err {worst:.1e}")
    tvs = []
    for L in (2, 3):
        c = TorusCode(L)
        tvs.append(tv(apply_all(bypass_path_channels(c)[2], FiniteDist.point(c.K, 0)), loop_dist(c)))
    ok &= max(tvs) <= 1e-12
    notes.append(f"plaquette-flip TV {max(tvs):.1e}")
    k = int(np.argmax(cs))
    ok &= 0 < k < len(ps) - 1 and cs[k] > max(cs[0], cs[-1]) + 1e-6
    notes.append(f"peak {cs[k]:.4f} at p={ps[k]:.2f}")
    dt = time.perf_counter() - t0
    report(5, "toric code", bool(ok) and dt < 300, ", ".join(notes), dt)


def test_06_gaussian_recovery():
    t0 = time.perf_counter()
    P = gmrf_chain(16, 0.4)
    lat = Lattice(1, 16, periodic=False)
    rs = [0, 1, 2, 3, 4]
    kls = [multi_step_local_recovery(P, lat, 8, r).kl for r in rs]
    full = multi_step_local_recovery(P, lat, 8, 16).kl
    slope = np.polyfit(rs, np.log(kls), 1)[0]
    ratio = kls[0] / kls[4]
    dt = time.perf_counter() - t0
    ok = ratio >= 100 and slope < 0 and full <= 1e-8 and dt < 60
    report(6, "Gaussian local recovery", ok, f"KL(r=0)/KL(r=4)={ratio:.3g}, ln KL slope {slope:.3f}, full buffer KL {full:.1e}", dt)


def test_07_score_correctness():
    t0 = time.perf_counter()
    rng = np.random.default_rng(707)
    ds = Dataset(rng.standard_normal((5, 2)))
    worst_fd, worst_id = 0.0, 0.0
    for _ in range(100):
        t = float(rng.uniform(0.1, 0.9))
        x = rng.standard_normal(2) * 1.5
        s = mixture_score(ds, t, x)
        fd = finite_difference_score(lambda y: mixture_logpdf(ds, t, y)[0], x)
        worst_fd = max(worst_fd, np.linalg.norm(s - fd) / np.linalg.norm(s))
        worst_id = max(worst_id, np.max(np.abs(flow_velocity(ds, t, x) - (x + t * s) / (1 - t))))
    dt = time.perf_counter() - t0
    ok = worst_fd <= 1e-5 and worst_id <= 1e-8
    report(7, "score correctness", ok, f"max rel FD err {worst_fd:.1e}, affine identity err {worst_id:.1e}", dt)


def test_08_sampler():
    t0 = time.perf_counter()
    ds = Dataset(np.array([[-1.0, 0.0], [1.0, 0.0]]))
    out = sample_backward(ds, NoiseSchedule(200, 0.01), SamplerConfig(eta=0.0, n_samples=1000, seed=808))
    d = np.linalg.norm(out[:, None, :] - ds.samples[None], axis=-1)
    close = np.mean(d.min(axis=1) <= 0.1)
    left = np.mean(d.argmin(axis=1) == 0)
    sigma = math.sqrt(0.25 / 1000)
    dt = time.perf_counter() - t0
    ok = close >= 0.95 and abs(left - 0.5) <= 3 * sigma and dt < 30
    report(8, "two-point sampler", ok, f"{close:.1%} within 0.1, basin split {left:.3f} (3 sigma = {3 * sigma:.3f})", dt)


def _mine_run(x, y):
    t0 = time.perf_counter()
    est = mine_estimate(x, y, MineConfig(batch_size=256, iterations=20_000, seed=909))
    return est, time.perf_counter() - t0


def test_09_mine():
    rng = np.random.default_rng(909)
    n, rho = 25_000, 0.8
    z = rng.standard_normal((n, 3))
    exact = -0.5 * math.log(1 - rho**2)
    est_c, dt_c = _mine_run(z[:, 0], rho * z[:, 0] + math.sqrt(1 - rho**2) * z[:, 1])
    est_i, dt_i = _mine_run(z[:, 0], z[:, 2])
    ok = 0.43 <= est_c <= 0.59 and abs(est_i) <= 0.05 and dt_c < 120 and dt_i < 120
    report(
        9,
        "MINE",
        ok,
        f"rho=0.8 estimate {est_c:.4f} (exact {exact:.4f}, window [0.43, 0.59]), independent {est_i:+.4f}, "
        f"runs {dt_c:.0f} s / {dt_i:.0f} s",
        dt_c + dt_i,
    )


def test_10_reorganization():
    t0 = time.perf_counter()
    rng = np.random.default_rng(1010)
    problems, count = [], 0
    while count < 50:
        d = int(rng.integers(1, 3))
        L = int(rng.integers(2, 17 if d == 1 else 13))
        k = int(rng.integers(1, 4))
        r = int(rng.integers(0, 4))
        if k > L:
            continue
        lat = Lattice(d, L, periodic=bool(rng.integers(2)))
        problems += check_schedule(lat, reorganize(lat, k, r))
        count += 1
    dt = time.perf_counter() - t0
    report(10, "reorganization", not problems, f"{count} schedules, {len(problems)} violations", dt)


def test_11_master_equation():
    t0 = time.perf_counter()
    worst = 0.0
    for t in (0.05, 0.3, 1.0, 2.0, 4.0):
        Q = integrate_master(flip_generator(1), FiniteDist.point(1, 0), t, 400)
        worst = max(worst, np.max(np.abs(Q.probs - [(1 + math.exp(-t)) / 2, (1 - math.exp(-t)) / 2])))
    rng = np.random.default_rng(1111)
    P0 = random_dist(rng, 4)
    _, back = denoise_master(flip_generator(4), P0, 1.0, 400)
    trip = tv(back, P0)
    dt = time.perf_counter() - t0
    report(11, "master equation", worst <= 1e-8 and trip <= 1e-6, f"closed-form err {worst:.1e}, round-trip TV {trip:.1e}", dt)
