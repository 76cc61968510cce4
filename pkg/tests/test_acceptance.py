"""Acceptance suite: every criterion at its stated tolerance, one printed
pass/fail line each.  Run with ``pytest tests/test_acceptance.py -v -s``.

Tolerances (pinned here, nowhere else):
  1. recurrent vs convolutional scan       max abs diff <= 1e-9 (f64), < 10 s
  2. one ZOH step vs exact ODE oracle      rel err <= 1e-10 (f64), incl. series branch
  3. analytic adjoint vs central FD        rel err <= 1e-6 (f64, h = 1e-5), < 30 s
  4. shape anchors                          exact
  5. parameter anchors                      exact; simple total within +-10% of 3.92M
  6. communication volume                   19.69 +- 0.01, 25.69 +- 0.01, ratio 64 +- 1%
  7. timed linearity                        R^2 >= 0.98, doubling ratios in [1.6, 2.6], < 5 min
  8. analytic FLOPs                         simple within +-40% of 79.06G; exact additivity
  9. protocol                               fractions exactly 1/m; replay byte-identical
 10. residual identities                    bitwise
"""

import contextlib
import time
from fractions import Fraction

import numpy as np
import pytest

from oracles import fd_gradients, one_step_ode_oracle, random_selective, rel_err

from collamamba import runtime, use_precision
from collamamba.bench import run_bench
from collamamba.blocks import FusionStack, Mamba2DBlock, STMambaBlock
from collamamba.net import (
    CollaMambaNet,
    NetConfig,
    Variant,
    count_flops,
    count_params,
)
from collamamba.sim import Mode, ScenarioConfig, decide_mode, mode_fractions, run_scenario
from collamamba.ssm import DiscreteSsmParams, SsmParams, discretize_zoh, scan_conv, scan_recurrent, selective_scan_backward


@contextlib.contextmanager
def criterion(n, description):
    try:
        yield
    except BaseException:
        print(f"\nFAIL criterion-{n}: {description}")
        raise
    print(f"\nPASS criterion-{n}: {description}")


def test_criterion_1_scan_form_equivalence():
    with criterion(1, "recurrent and convolutional scans agree (200 instances, <=1e-9, f64)"):
        rng = np.random.default_rng(2024)
        t0 = time.perf_counter()
        with use_precision("f64"):
            worst = 0.0
            for _ in range(200):
                d = int(rng.integers(1, 33))
                length = int(rng.integers(2, 1025))
                p = SsmParams.stable_init(d, 16, rng)
                delta = rng.uniform(0.05, 0.8)
                a_bar, b_bar = discretize_zoh(p.a, p.b, delta)
                dp = DiscreteSsmParams(a_bar, b_bar, p.c, p.d_skip, delta)
                x = rng.standard_normal((length, d))
                diff = float(np.abs(scan_recurrent(dp, x) - scan_conv(dp, x)).max())
                worst = max(worst, diff)
        elapsed = time.perf_counter() - t0
        assert worst <= 1e-9, f"max abs diff {worst:.3e} > 1e-9"
        assert elapsed < 10.0, f"took {elapsed:.1f}s >= 10s"


def test_criterion_2_zoh_correctness():
    with criterion(2, "one ZOH step matches the exact exponential+quadrature oracle (rel <= 1e-10)"):
        rng = np.random.default_rng(2025)
        with use_precision("f64"):
            worst = 0.0
            for trial in range(50):
                n = 16
                a = -rng.uniform(0.01, 8.0, (1, n))
                a[0, :4] *= 1e-5  # |delta*a| < 1e-4: series branch engaged
                b = rng.standard_normal((1, n))
                delta = float(rng.uniform(0.005, 1.0))
                assert np.abs(delta * a[0, :4]).max() < 1e-4
                h0 = rng.standard_normal(n)
                u = float(rng.standard_normal())
                a_bar, b_bar = discretize_zoh(a, b, delta)
                stepped = a_bar[0] * h0 + b_bar[0] * u
                exact = one_step_ode_oracle(a[0], b[0], delta, h0, u)
                rel = np.abs(stepped - exact) / np.maximum(np.abs(exact), 1e-30)
                worst = max(worst, float(rel.max()))
            assert worst <= 1e-10, f"rel err {worst:.3e} > 1e-10"


def test_criterion_3_gradient_correctness():
    with criterion(3, "analytic adjoint matches central differences (50 instances, rel <= 1e-6)"):
        rng = np.random.default_rng(2026)
        t0 = time.perf_counter()
        with use_precision("f64"):
            worst = 0.0
            for _ in range(50):
                p, s, x = random_selective(rng, 16, 2, 4)
                dy = rng.standard_normal((16, 2))
                dx, ddelta, db, dc, da, dd = selective_scan_backward(p, s, x, dy)
                fd = fd_gradients(p, s, x, dy, step=1e-5)
                for name, got in [("dx", dx), ("ddelta", ddelta), ("db", db),
                                  ("dc", dc), ("da", da), ("dd", dd)]:
                    err = rel_err(got, fd[name])
                    worst = max(worst, err)
                    assert err <= 1e-6, f"{name}: rel err {err:.3e} > 1e-6"
        elapsed = time.perf_counter() - t0
        assert elapsed < 30.0, f"took {elapsed:.1f}s >= 30s"


FULL = NetConfig.defaults()


@pytest.fixture(scope="module")
def full_nets():
    return {
        Variant.SIMPLE: CollaMambaNet(FULL, Variant.SIMPLE),
        Variant.ST: CollaMambaNet(NetConfig.defaults(Variant.ST), Variant.ST),
    }


def test_criterion_4_shape_anchors(full_nets):
    with criterion(4, "shape anchors: embeddings, l=2200/c=96, heads, end-to-end grid"):
        simple = full_nets[Variant.SIMPLE]
        st = full_nets[Variant.ST]
        assert simple.pos_embed.table.shape == (1, 50, 176, 96)
        assert st.hist_temporal.table.shape == (1, 1, 1, 10, 96)
        bev = np.random.default_rng(7).standard_normal((1, 200, 704, 64)).astype(np.float32)
        seq = simple.encode(bev)
        assert seq.shape == (1, 2200, 96)
        neighbor = np.asarray(seq + np.float32(0.05))
        out = simple.detect(simple.decode(simple.fuse_global(seq, [neighbor])))
        assert out.cls.shape == (1, 100, 352, 2)
        assert out.reg.shape == (1, 100, 352, 14)
        assert out.dir.shape == (1, 100, 352, 4)
        assert np.isfinite(out.cls).all() and np.isfinite(out.reg).all()


def test_criterion_5_parameter_budgets():
    with criterion(5, "parameter anchors exact; simple within +-10% of 3.92M; ordering"):
        rows, total = count_params(FULL, Variant.SIMPLE)
        d = {r.path: r.value for r in rows}
        assert d["encoder.patch_embed"] == 393504
        assert d["encoder.merge"] == 37632
        assert d["head.cls"] == 770
        assert d["head.reg"] == 5390
        assert d["head.dir"] == 1540
        assert abs(total - 3.92e6) / 3.92e6 <= 0.10, f"simple total {total}"
        _, t_st = count_params(NetConfig.defaults(Variant.ST), Variant.ST)
        _, t_miss = count_params(NetConfig.defaults(Variant.MISS), Variant.MISS)
        assert total < t_st < t_miss, f"{total} !< {t_st} !< {t_miss}"


def test_criterion_6_communication_volume():
    with criterion(6, "#CV 19.69 +- 0.01 vs dense 25.69 +- 0.01; byte ratio 64 +- 1%"):
        payload = np.zeros((FULL.seq_len, FULL.c), dtype=np.float32).nbytes
        dense = np.zeros((*FULL.dec_hw, FULL.out_ch), dtype=np.float32).nbytes
        from collamamba.sim import comm_volume
        assert payload == 844800 and dense == 54067200
        assert abs(comm_volume(payload) - 19.69) <= 0.01, comm_volume(payload)
        assert abs(comm_volume(dense) - 25.69) <= 0.01, comm_volume(dense)
        ratio = dense / payload
        assert abs(ratio - 64.0) / 64.0 <= 0.01, f"byte ratio {ratio}"


def test_criterion_7_linear_complexity():
    with criterion(7, "timed linearity: R^2 >= 0.98, doubling ratios in [1.6, 2.6]"):
        t0 = time.perf_counter()
        seq = run_bench("seqlen", points=[550, 1100, 2200, 4400], repeats=5,
                        cfg=FULL, depth=2)
        assert seq.r_squared >= 0.98, f"seqlen R^2 {seq.r_squared:.4f}"
        for ratio in seq.doubling_ratios:
            assert 1.6 <= ratio <= 2.6, f"seqlen doubling ratio {ratio:.2f}"
        flops = {p.value: p.flops_est for p in seq.points}
        assert flops[1100] == 2 * flops[550] and flops[4400] == 8 * flops[550]

        nb = run_bench("neighbors", points=list(range(1, 9)), repeats=5,
                       cfg=FULL, depth=2)
        assert nb.r_squared >= 0.98, f"neighbors R^2 {nb.r_squared:.4f}"
        nb_flops = {p.value: p.flops_est for p in nb.points}
        assert all(nb_flops[k] == k * nb_flops[1] for k in range(1, 9))
        elapsed = time.perf_counter() - t0
        assert elapsed < 300.0, f"bench took {elapsed:.0f}s >= 5 min"


def test_criterion_8_flops_window_and_additivity():
    with criterion(8, "analytic FLOPs: simple within +-40% of 79.06G; ST-simple additivity exact"):
        _, total = count_flops(FULL, Variant.SIMPLE, neighbors=1)
        assert abs(total - 79.06e9) / 79.06e9 <= 0.40, f"simple flops {total/1e9:.1f}G"
        cfg_st = NetConfig.defaults(Variant.ST)
        rows_st, total_st = count_flops(cfg_st, Variant.ST)
        _, total_simple = count_flops(cfg_st, Variant.SIMPLE)
        history = sum(r.value for r in rows_st
                      if r.path.startswith(("history", "boost")))
        assert total_st - total_simple == history
        assert total_st > total_simple


def test_criterion_9_protocol_correctness():
    with criterion(9, "prediction fraction exactly 1/m; truth table; byte-identical replay"):
        def scenario(m):
            return ScenarioConfig(n_agents=2, n_frames=200, miss_interval=m,
                                  tau0_ms=50.0, latency_ms=20.0, seed=99,
                                  variant="miss", net={"l_his": 20})

        for m in (1, 2, 5, 10, 20):
            res = run_scenario(scenario(m))
            assert res.warmup_frames == 20
            fr = mode_fractions(res.log, res.warmup_frames)
            assert fr[Mode.COLLABORATIVE_PREDICTION] == Fraction(1, m), (
                f"m={m}: {fr[Mode.COLLABORATIVE_PREDICTION]}")
        res_inf = run_scenario(scenario(None))
        fr = mode_fractions(res_inf.log, res_inf.warmup_frames)
        assert fr[Mode.COLLABORATIVE_PREDICTION] == 0
        assert fr[Mode.FEATURE_FUSION] == 1

        # all 8 guard combinations
        for late in (False, True):
            dt, tau = (120.0, 100.0) if late else (80.0, 100.0)
            for recv in (True, False):
                for ready in (True, False):
                    mode = decide_mode(dt, recv, tau, ready)
                    if not late and recv:
                        assert mode is Mode.FEATURE_FUSION
                    elif late and not recv and ready:
                        assert mode is Mode.COLLABORATIVE_PREDICTION
                    elif late and not recv and not ready:
                        assert mode is Mode.EGO_ONLY
                    elif recv:
                        assert mode is Mode.FEATURE_FUSION
                    else:
                        assert mode is (Mode.COLLABORATIVE_PREDICTION if ready
                                        else Mode.EGO_ONLY)

        cfg = scenario(2)
        csv_a = run_scenario(cfg).log.to_csv_text()
        csv_b = run_scenario(cfg).log.to_csv_text()
        assert csv_a == csv_b, "replay differs across runs"
        old = runtime.get_threads()
        try:
            runtime.set_threads(4)
            csv_c = run_scenario(cfg).log.to_csv_text()
        finally:
            runtime.set_threads(old)
        assert csv_a == csv_c, "replay differs across thread settings"


def test_criterion_10_residual_identities():
    with criterion(10, "zeroed blocks are exact identities; empty fusion is bitwise ego"):
        rng = np.random.default_rng(31337)
        kw = dict(n_state=4, dt_rank=2)
        m2d = Mamba2DBlock(8, seed=1, tag="acc.m2d", **kw)
        st = STMambaBlock(8, seed=1, tag="acc.st", **kw)
        fu = FusionStack(2, 8, seed=1, tag="acc.fu", **kw)
        for mod in (m2d, st, fu):
            mod.zero_params()
        x = rng.standard_normal((2, 4, 5, 8)).astype(np.float32)
        f = rng.standard_normal((1, 3, 2, 2, 8)).astype(np.float32)
        e = rng.standard_normal((1, 7, 8)).astype(np.float32)
        nb = rng.standard_normal((1, 7, 8)).astype(np.float32)
        assert np.array_equal(m2d(x), x)
        assert np.array_equal(st(f), f)
        assert np.array_equal(fu.fuse_one(e, nb), e)

        cfg = NetConfig.tiny()
        net = CollaMambaNet(cfg, Variant.MISS)
        net.zero_params()
        bev = rng.standard_normal((1, cfg.h0, cfg.w0, cfg.c0)).astype(np.float32)
        seq = net.encode(bev)
        hist = rng.standard_normal((1, cfg.l_his, cfg.seq_len, cfg.c)).astype(np.float32)
        assert np.array_equal(net.boost_features(seq, hist), seq)
        ego = rng.standard_normal((1, cfg.seq_len, cfg.c)).astype(np.float32)
        fused = CollaMambaNet(cfg, Variant.SIMPLE).fuse_global(ego, [])
        assert fused is ego
