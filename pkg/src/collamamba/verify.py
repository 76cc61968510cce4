"""Invariant suites behind the ``verify`` command.

Each suite is a list of (invariant id, callable); a callable raises
AssertionError with the observed error to fail.  Suites run in 64-bit
mode and use only runtime dependencies (the quadrature oracle here is
Gauss-Legendre via numpy, independent of the test suite's scipy oracle).
Module-level access (``ssm.discretize_zoh`` rather than a local import)
keeps the checks sensitive to patched internals, which the fault-injection
test exploits.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import runtime, ssm
from .blocks import (
    SCAN_DIRECTIONS,
    FusionStack,
    Mamba2DBlock,
    STMambaBlock,
    inverse_order,
    order_directions,
)
from .net import CollaMambaNet, NetConfig, Variant, count_flops, count_params, save_weights, load_weights
from .sim import Mode, ScenarioConfig, decide_mode, mode_fractions, run_scenario


@dataclass
class InvariantResult:
    invariant_id: str
    ok: bool
    detail: str = ""


# ---------------------------------------------------------------------------
# kernels

def _random_lti(rng, d, n):
    p = ssm.SsmParams.stable_init(d, n, rng)
    delta = rng.uniform(0.05, 0.8)
    a_bar, b_bar = ssm.discretize_zoh(p.a, p.b, delta)
    return ssm.DiscreteSsmParams(a_bar, b_bar, p.c, p.d_skip, delta)


def check_form_equivalence():
    rng = np.random.default_rng(101)
    worst = 0.0
    for _ in range(30):
        dp = _random_lti(rng, d=int(rng.integers(1, 9)), n=16)
        x = rng.standard_normal((int(rng.integers(2, 513)), dp.n_channels))
        diff = float(np.abs(ssm.scan_conv(dp, x) - ssm.scan_recurrent(dp, x)).max())
        worst = max(worst, diff)
    assert worst <= 1e-9, f"recurrent/convolutional disagreement {worst:.3e} > 1e-9"


def check_zoh_against_quadrature():
    rng = np.random.default_rng(103)
    nodes, wts = np.polynomial.legendre.leggauss(60)
    worst = 0.0
    for _ in range(10):
        n = 16
        a = -rng.uniform(0.01, 8.0, (1, n))
        a[0, :4] *= 1e-5  # series branch coverage
        b = rng.standard_normal((1, n))
        delta = float(rng.uniform(0.01, 1.0))
        h0 = rng.standard_normal(n)
        u = float(rng.standard_normal())
        a_bar, b_bar = ssm.discretize_zoh(a, b, delta)
        stepped = a_bar[0] * h0 + b_bar[0] * u
        s = 0.5 * delta * (nodes + 1.0)
        integ = (np.exp(a[0, :, None] * (delta - s)) * wts).sum(axis=1) * 0.5 * delta
        exact = np.exp(a[0] * delta) * h0 + b[0] * u * integ
        rel = np.abs(stepped - exact) / np.maximum(np.abs(exact), 1e-30)
        worst = max(worst, float(rel.max()))
    assert worst <= 1e-10, f"one-step rel error {worst:.3e} > 1e-10"


def check_zoh_series_branch():
    for z in (1e-5, -1e-5, 3e-7, -1e-9, 0.0):
        _, b_bar = ssm.discretize_zoh(np.array([[z]]), np.array([[1.0]]), 1.0)
        ref = float(np.expm1(z) / z) if z else 1.0
        assert abs(b_bar[0, 0] - ref) <= 1e-12, (
            f"series branch at z={z}: {b_bar[0, 0]!r} vs {ref!r}")


def check_stability():
    rng = np.random.default_rng(107)
    a = -rng.uniform(1e-6, 40.0, (5, 8))
    delta = rng.uniform(1e-6, 4.0, (5,))
    a_bar, _ = ssm.discretize_zoh(a, np.ones((5, 8)), delta)
    assert np.all(np.abs(a_bar) < 1.0), "negative evolution produced |a_bar| >= 1"
    dp = _random_lti(rng, 3, 8)
    y = ssm.scan_recurrent(dp, np.clip(rng.standard_normal((800, 3)), -1, 1))
    assert np.all(np.isfinite(y)), "bounded input produced non-finite output"


def check_gradients():
    rng = np.random.default_rng(109)
    for _ in range(5):
        d, n, length = 2, 4, 12
        p = ssm.SsmParams.stable_init(d, n, rng)
        s = ssm.SelectiveInputs(rng.uniform(0.05, 0.6, (length, d)),
                                rng.standard_normal((length, n)),
                                rng.standard_normal((length, n)))
        x = rng.standard_normal((length, d))
        dy = rng.standard_normal((length, d))
        grads = ssm.selective_scan_backward(p, s, x, dy)
        names = ("dx", "ddelta", "db", "dc", "da", "dd")

        def loss(a, d_skip, delta, b_s, c_s, xv):
            pp = ssm.SsmParams(a, p.b, p.c, d_skip)
            return float(np.sum(ssm.selective_scan(pp, ssm.SelectiveInputs(delta, b_s, c_s), xv) * dy))

        base = [np.array(p.a), np.array(p.d_skip), np.array(s.delta),
                np.array(s.b), np.array(s.c), np.array(x)]
        order = {"da": 0, "dd": 1, "ddelta": 2, "db": 3, "dc": 4, "dx": 5}
        step = 1e-5
        for name, got in zip(names, grads):
            idx = order[name]
            fd = np.zeros_like(base[idx])
            for flat in range(base[idx].size):
                plus = [arr.copy() for arr in base]
                minus = [arr.copy() for arr in base]
                plus[idx].flat[flat] += step
                minus[idx].flat[flat] -= step
                fd.flat[flat] = (loss(*plus) - loss(*minus)) / (2 * step)
            rel = np.max(np.abs(got - fd) / np.maximum(1.0, np.maximum(np.abs(got), np.abs(fd))))
            assert rel <= 1e-6, f"{name} rel error {rel:.3e} > 1e-6"


def check_linearity():
    rng = np.random.default_rng(113)
    dp = _random_lti(rng, 4, 8)
    x = rng.standard_normal((64, 4))
    z = rng.standard_normal((64, 4))
    lhs = ssm.scan_recurrent(dp, 0.7 * x - 1.3 * z)
    rhs = 0.7 * ssm.scan_recurrent(dp, x) - 1.3 * ssm.scan_recurrent(dp, z)
    diff = float(np.abs(lhs - rhs).max())
    assert diff <= 1e-12, f"scan not linear in x: {diff:.3e}"


def check_selective_reduction():
    rng = np.random.default_rng(127)
    d, n, length = 3, 16, 48
    p = ssm.SsmParams.stable_init(d, n, rng)
    b = rng.standard_normal(n)
    c = rng.standard_normal(n)
    delta = 0.25
    a_bar, b_bar = ssm.discretize_zoh(p.a, b, delta)
    dp = ssm.DiscreteSsmParams(a_bar, b_bar, c, p.d_skip, delta)
    s = ssm.SelectiveInputs(np.full((length, d), delta), np.tile(b, (length, 1)),
                            np.tile(c, (length, 1)))
    x = rng.standard_normal((length, d))
    y_sel = ssm.selective_scan(ssm.SsmParams(p.a, b, c, p.d_skip), s, x)
    y_lti = ssm.scan_recurrent(dp, x)
    assert np.array_equal(y_sel, y_lti), "constant-stream selective scan is not bitwise LTI"


# ---------------------------------------------------------------------------
# blocks

def check_direction_bijection():
    for h, w in ((1, 7), (2, 2), (5, 3), (8, 8)):
        for direction in SCAN_DIRECTIONS:
            perm = order_directions(h, w, direction)
            inv = inverse_order(h, w, direction)
            assert np.array_equal(perm[inv], np.arange(h * w)), (
                f"{direction} on {h}x{w}: inverse∘forward != identity")
            assert np.array_equal(np.sort(perm), np.arange(h * w)), (
                f"{direction} on {h}x{w}: not a bijection over the grid")


def _tiny_blocks():
    kw = dict(n_state=4, dt_rank=2)
    return (Mamba2DBlock(8, seed=3, tag="v.m2d", **kw),
            STMambaBlock(8, seed=3, tag="v.st", **kw),
            FusionStack(2, 8, seed=3, tag="v.fu", **kw))


def check_residual_identity():
    rng = np.random.default_rng(131)
    m2d, st, fu = _tiny_blocks()
    x = rng.standard_normal((2, 3, 4, 8))
    f = rng.standard_normal((1, 2, 3, 4, 8))
    e = rng.standard_normal((1, 6, 8))
    nb = rng.standard_normal((1, 6, 8))
    for mod in (m2d, st, fu):
        mod.zero_params()
    assert np.array_equal(m2d(x), x), "zeroed 2D block is not an identity"
    assert np.array_equal(st(f), f), "zeroed spatial-temporal block is not an identity"
    assert np.array_equal(fu.fuse_one(e, nb), e), "zeroed fusion stack is not an identity"


def check_shape_preservation():
    rng = np.random.default_rng(137)
    m2d, st, fu = _tiny_blocks()
    for shape in ((1, 2, 9, 8), (3, 6, 1, 8)):
        x = rng.standard_normal(shape)
        assert m2d(x).shape == x.shape, f"2D block changed shape {shape}"
    f = rng.standard_normal((2, 3, 2, 2, 8))
    assert st(f).shape == f.shape, "st block changed shape"
    e = rng.standard_normal((2, 5, 8))
    assert fu.fuse_one(e, rng.standard_normal((2, 5, 8))).shape == e.shape


def check_block_determinism():
    rng = np.random.default_rng(139)
    x = rng.standard_normal((1, 4, 5, 8))
    a = Mamba2DBlock(8, seed=9, tag="v.det", n_state=4, dt_rank=2)
    b = Mamba2DBlock(8, seed=9, tag="v.det", n_state=4, dt_rank=2)
    assert np.array_equal(a(x), b(x)), "same (seed, config, input) differs bitwise"


# ---------------------------------------------------------------------------
# net

def _tiny_cfg():
    return NetConfig.tiny()


def check_pipeline_shape():
    rng = np.random.default_rng(149)
    cfg = _tiny_cfg()
    bev = rng.standard_normal((2, cfg.h0, cfg.w0, cfg.c0))
    for variant in Variant:
        net = CollaMambaNet(cfg, variant)
        seq = net.encode(bev)
        assert seq.shape == (2, cfg.seq_len, cfg.c), f"{variant}: bad sequence shape"
        for k in (0, 1, 2):
            nbs = [rng.standard_normal(seq.shape) for _ in range(k)]
            out = net.detect(net.decode(net.fuse_global(seq, nbs)))
            want = (2, *cfg.dec_hw)
            assert out.cls.shape == (*want, 2) and out.reg.shape == (*want, 14) \
                and out.dir.shape == (*want, 4), f"{variant}, k={k}: bad head shapes"


def check_fusion_noop():
    rng = np.random.default_rng(151)
    net = CollaMambaNet(_tiny_cfg(), Variant.SIMPLE)
    ego = rng.standard_normal((1, net.cfg.seq_len, net.cfg.c))
    assert net.fuse_global(ego, []) is ego, "empty fusion must return ego bitwise"


def check_budget_anchors():
    rows, total = count_params(NetConfig.defaults(), Variant.SIMPLE)
    d = {r.path: r.value for r in rows}
    anchors = {"encoder.patch_embed": 393504, "encoder.merge": 37632,
               "head.cls": 770, "head.reg": 5390, "head.dir": 1540}
    for path, want in anchors.items():
        assert d[path] == want, f"{path}: {d[path]} != {want}"
    ref = 3.92e6
    assert abs(total - ref) / ref <= 0.10, (
        f"total {total} outside +-10% of {ref:.0f}")
    _, t_st = count_params(NetConfig.defaults(Variant.ST), Variant.ST)
    _, t_miss = count_params(NetConfig.defaults(Variant.MISS), Variant.MISS)
    assert total < t_st < t_miss, f"ordering violated: {total}, {t_st}, {t_miss}"


def check_flops_properties():
    cfg = NetConfig.defaults()
    _, base = count_flops(cfg, Variant.SIMPLE, neighbors=1)
    _, more_nb = count_flops(cfg, Variant.SIMPLE, neighbors=3)
    assert more_nb > base, "flops not increasing in neighbor count"
    rows_st, total_st = count_flops(NetConfig.defaults(Variant.ST), Variant.ST)
    rows_s, total_s = count_flops(NetConfig.defaults(Variant.ST), Variant.SIMPLE)
    extra = {r.path: r.value for r in rows_st if r.path.startswith(("history", "boost"))}
    assert total_st - total_s == sum(extra.values()), "history additivity broken"
    big = NetConfig(h0=2 * cfg.h0)
    _, total_big = count_flops(big, Variant.SIMPLE)
    assert total_big > base, "flops not increasing in grid size"


def check_warmup_bypass():
    rng = np.random.default_rng(157)
    cfg = _tiny_cfg()
    bev = rng.standard_normal((1, cfg.h0, cfg.w0, cfg.c0))
    simple = CollaMambaNet(cfg, Variant.SIMPLE)
    st = CollaMambaNet(cfg, Variant.ST)
    a = simple.forward_single(bev)
    b = st.forward_single(bev)  # empty buffer -> boost bypassed
    assert np.array_equal(a.cls, b.cls), "short-buffer st output differs from simple"


def check_snapshot_roundtrip(tmp_dir=None):
    import tempfile
    import os
    rng = np.random.default_rng(163)
    cfg = _tiny_cfg()
    net = CollaMambaNet(cfg, Variant.SIMPLE)
    bev = rng.standard_normal((1, cfg.h0, cfg.w0, cfg.c0))
    ref = net.forward_single(bev)
    with tempfile.TemporaryDirectory() as td:
        path = os.path.join(td, "w.cmbw")
        save_weights(net, path)
        other = CollaMambaNet(NetConfig.tiny(seed=777), Variant.SIMPLE)
        load_weights(other, path)
        got = other.forward_single(bev)
    assert np.array_equal(ref.cls, got.cls), "snapshot replay not bitwise"


# ---------------------------------------------------------------------------
# sim

def check_mode_totality():
    for dt, tau0 in ((80.0, 100.0), (120.0, 100.0)):
        for recv in (True, False):
            for ready in (True, False):
                mode = decide_mode(dt, recv, tau0, ready)
                assert isinstance(mode, Mode)
                if dt <= tau0 and recv:
                    assert mode is Mode.FEATURE_FUSION
                if dt > tau0 and not recv:
                    assert mode is (Mode.COLLABORATIVE_PREDICTION if ready
                                    else Mode.EGO_ONLY)


def _proto_cfg(m, frames=48):
    return ScenarioConfig(n_agents=2, n_frames=frames, miss_interval=m,
                          tau0_ms=50.0, latency_ms=20.0, seed=11,
                          variant="miss", net={"l_his": 8})


def check_fractions_exact():
    from fractions import Fraction
    for m in (2, 4):
        res = run_scenario(_proto_cfg(m, frames=8 + 8 * m))
        fr = mode_fractions(res.log, res.warmup_frames)
        assert fr[Mode.COLLABORATIVE_PREDICTION] == Fraction(1, m), (
            f"m={m}: prediction fraction {fr[Mode.COLLABORATIVE_PREDICTION]}")


def check_conservation():
    res = run_scenario(_proto_cfg(3, frames=20))
    per_msg = res.message_nbytes
    for rec in res.log.records:
        want = per_msg * (res.config.n_agents - 1) \
            if rec.mode is Mode.FEATURE_FUSION else 0
        assert rec.bytes_received == want, (
            f"frame {rec.frame} agent {rec.agent_id}: "
            f"{rec.bytes_received} != {want}")


def check_replay():
    cfg = _proto_cfg(2, frames=24)
    a = run_scenario(cfg).log.to_csv_text()
    b = run_scenario(cfg).log.to_csv_text()
    assert a == b, "replay not byte-identical"
    old = runtime.get_threads()
    try:
        runtime.set_threads(2)
        c = run_scenario(cfg).log.to_csv_text()
    finally:
        runtime.set_threads(old)
    assert a == c, "thread count changed the log"


def check_prediction_isolation():
    cfg = ScenarioConfig(n_agents=2, n_frames=20, miss_interval=2, tau0_ms=50.0,
                         latency_ms=20.0, seed=19, variant="miss",
                         net={"l_his": 4}, store_outputs=True)
    clean = run_scenario(cfg)
    corrupted = run_scenario(cfg, _zero_dropped_payloads=True)
    for t, (row_a, row_b) in enumerate(zip(clean.outputs, corrupted.outputs)):
        for a, (da, db) in enumerate(zip(row_a, row_b)):
            assert np.array_equal(da.cls, db.cls), (
                f"frame {t} agent {a}: dropped payloads leaked into output")


# ---------------------------------------------------------------------------
# registry

SUITES: dict[str, list] = {
    "kernels": [
        ("kernels.form_equivalence", check_form_equivalence),
        ("kernels.zoh_quadrature", check_zoh_against_quadrature),
        ("kernels.zoh_series_branch", check_zoh_series_branch),
        ("kernels.stability", check_stability),
        ("kernels.gradient_check", check_gradients),
        ("kernels.linearity", check_linearity),
        ("kernels.selective_reduction", check_selective_reduction),
    ],
    "blocks": [
        ("blocks.direction_bijection", check_direction_bijection),
        ("blocks.residual_identity", check_residual_identity),
        ("blocks.shape_preservation", check_shape_preservation),
        ("blocks.determinism", check_block_determinism),
    ],
    "net": [
        ("net.pipeline_shape", check_pipeline_shape),
        ("net.fusion_noop", check_fusion_noop),
        ("net.budget_anchors", check_budget_anchors),
        ("net.flops_properties", check_flops_properties),
        ("net.warmup_bypass", check_warmup_bypass),
        ("net.snapshot_roundtrip", check_snapshot_roundtrip),
    ],
    "sim": [
        ("sim.mode_totality", check_mode_totality),
        ("sim.fractions_exact", check_fractions_exact),
        ("sim.conservation", check_conservation),
        ("sim.replay", check_replay),
        ("sim.prediction_isolation", check_prediction_isolation),
    ],
}


def run_suite(name: str) -> list[InvariantResult]:
    """Run one suite (or 'all') in 64-bit mode; returns per-invariant results."""
    names = list(SUITES) if name == "all" else [name]
    results = []
    for suite in names:
        if suite not in SUITES:
            raise KeyError(f"unknown suite {suite!r}; choose from "
                           f"{sorted(SUITES)} or 'all'")
        for invariant_id, fn in SUITES[suite]:
            with runtime.use_precision("f64"):
                try:
                    fn()
                    results.append(InvariantResult(invariant_id, True))
                except AssertionError as exc:
                    results.append(InvariantResult(invariant_id, False, str(exc)))
                except Exception as exc:  # noqa: BLE001 - report, don't crash
                    results.append(InvariantResult(
                        invariant_id, False, f"{type(exc).__name__}: {exc}"))
    return results
