"""Simulator protocol: mode decisions, exact fractions, volume accounting,
pose noise, replay determinism, and prediction isolation."""

import math
from fractions import Fraction

import numpy as np
import pytest

from collamamba import runtime
from collamamba.errors import InvalidArgumentError
from collamamba.sim import (
    AgentMessage,
    Mode,
    ScenarioConfig,
    comm_volume,
    decide_mode,
    inject_pose_noise,
    load_scenario,
    mode_fractions,
    run_scenario,
    save_scenario,
)


def proto(m, frames, l_his=8, **kw):
    return ScenarioConfig(n_agents=2, n_frames=frames, miss_interval=m,
                          tau0_ms=50.0, latency_ms=20.0, seed=11, variant="miss",
                          net={"l_his": l_his}, **kw)


class TestDecideMode:
    def test_defining_branches(self):
        assert decide_mode(80, True, 100, True) is Mode.FEATURE_FUSION
        assert decide_mode(120, False, 100, True) is Mode.COLLABORATIVE_PREDICTION
        assert decide_mode(120, False, 100, False) is Mode.EGO_ONLY

    def test_total_on_all_guard_combinations(self):
        table = {}
        for dt, tau in ((80.0, 100.0), (120.0, 100.0)):
            for recv in (True, False):
                for ready in (True, False):
                    table[(dt > tau, recv, ready)] = decide_mode(dt, recv, tau, ready)
        assert len(table) == 8
        # arrived data always wins; otherwise readiness gates prediction
        for (late, recv, ready), mode in table.items():
            if recv:
                assert mode is Mode.FEATURE_FUSION
            elif ready:
                assert mode is Mode.COLLABORATIVE_PREDICTION
            else:
                assert mode is Mode.EGO_ONLY


class TestCommVolume:
    def test_reference_payload(self):
        # 2200 x 96 float32 sequence
        nbytes = 2200 * 96 * 4
        assert nbytes == 844800
        assert abs(comm_volume(nbytes) - 19.69) <= 0.01

    def test_dense_baseline_payload(self):
        nbytes = 100 * 352 * 384 * 4
        assert nbytes == 54067200
        assert abs(comm_volume(nbytes) - 25.69) <= 0.01
        assert nbytes / 844800 == 64.0

    def test_single_byte(self):
        assert comm_volume(1) == 0.0

    def test_message_object(self):
        msg = AgentMessage(0, 0, np.zeros((10, 3), np.float32), "float32", 0.0, 1.0)
        assert comm_volume(msg) == math.log2(120)

    def test_empty_rejected(self):
        with pytest.raises(InvalidArgumentError):
            comm_volume(0)


class TestPoseNoise:
    def test_zero_error_identity(self):
        bev = np.random.default_rng(0).standard_normal((6, 8, 2)).astype(np.float32)
        out = inject_pose_noise(bev, (0.0, 0.0), 0.4)
        assert np.array_equal(out, bev) and out is not bev

    def test_one_cell_shift(self):
        bev = np.zeros((6, 8, 1), np.float32)
        bev[3, 4] = 1.0
        out = inject_pose_noise(bev, (0.4, 0.0), 0.4)
        assert out[3, 5] == 1.0 and out.sum() == 1.0

    def test_mass_conserved_up_to_border(self):
        bev = np.ones((5, 5, 1), np.float32)
        out = inject_pose_noise(bev, (0.8, -0.4), 0.4)
        assert out.sum() == (5 - 2) * (5 - 1)

    def test_seeded_replay(self):
        bev = np.random.default_rng(1).standard_normal((6, 8, 2)).astype(np.float32)
        a = inject_pose_noise(bev, None, 0.4, rng=np.random.default_rng(5), std_m=1.0)
        b = inject_pose_noise(bev, None, 0.4, rng=np.random.default_rng(5), std_m=1.0)
        assert np.array_equal(a, b)


class TestScenarioRuns:
    def test_no_miss_always_fusion(self):
        res = run_scenario(proto(None, frames=12, l_his=4))
        assert all(r.mode is Mode.FEATURE_FUSION for r in res.log.records)
        fr = mode_fractions(res.log, res.warmup_frames)
        assert fr[Mode.FEATURE_FUSION] == 1

    def test_every_other_frame_prediction(self):
        m = 2
        res = run_scenario(proto(m, frames=8 + 16))
        fr = mode_fractions(res.log, res.warmup_frames)
        assert fr[Mode.COLLABORATIVE_PREDICTION] == Fraction(1, m)
        assert fr[Mode.EGO_ONLY] == 0

    def test_warmup_miss_frames_are_ego_only(self):
        res = run_scenario(proto(2, frames=12, l_his=6))
        pre = [r for r in res.log.records if r.frame < res.warmup_frames]
        assert any(r.mode is Mode.EGO_ONLY for r in pre)
        assert not any(r.mode is Mode.COLLABORATIVE_PREDICTION for r in pre)

    def test_latency_beyond_budget_never_fuses(self):
        cfg = ScenarioConfig(n_agents=2, n_frames=10, miss_interval=None,
                             tau0_ms=10.0, latency_ms=20.0, seed=3,
                             variant="miss", net={"l_his": 3})
        res = run_scenario(cfg)
        assert not any(r.mode is Mode.FEATURE_FUSION for r in res.log.records)

    def test_bytes_conservation(self):
        res = run_scenario(proto(3, frames=20, l_his=4))
        per_msg = res.message_nbytes
        for rec in res.log.records:
            want = per_msg if rec.mode is Mode.FEATURE_FUSION else 0
            assert rec.bytes_received == want

    def test_cv_constant_across_frames(self):
        res = run_scenario(proto(2, frames=10, l_his=4))
        cvs = {r.cv_log2 for r in res.log.records}
        assert len(cvs) == 1
        assert cvs.pop() == math.log2(res.message_nbytes)

    def test_replay_byte_identical(self):
        cfg = proto(2, frames=16, l_his=4)
        assert run_scenario(cfg).log.to_csv_text() == run_scenario(cfg).log.to_csv_text()

    def test_replay_across_thread_settings(self):
        cfg = proto(2, frames=10, l_his=4)
        base = run_scenario(cfg).log.to_csv_text()
        old = runtime.get_threads()
        try:
            runtime.set_threads(3)
            threaded = run_scenario(cfg).log.to_csv_text()
        finally:
            runtime.set_threads(old)
        assert base == threaded

    def test_prediction_isolation(self):
        cfg = proto(2, frames=14, l_his=4, store_outputs=True)
        clean = run_scenario(cfg)
        corrupted = run_scenario(cfg, _zero_dropped_payloads=True)
        for row_a, row_b in zip(clean.outputs, corrupted.outputs):
            for da, db in zip(row_a, row_b):
                assert np.array_equal(da.cls, db.cls)
                assert np.array_equal(da.reg, db.reg)

    def test_partial_arrivals_still_fuse(self):
        """With per-link jitter straddling the wait budget, frames where
        only some neighbors arrive must fuse exactly those arrivals."""
        cfg = ScenarioConfig(n_agents=3, n_frames=30, miss_interval=None,
                             tau0_ms=50.0, latency_ms=20.0,
                             latency_jitter_ms=60.0, seed=12, variant="miss",
                             net={"l_his": 3})
        res = run_scenario(cfg)
        per_msg = res.message_nbytes
        counts = {r.bytes_received // per_msg for r in res.log.records
                  if r.mode is Mode.FEATURE_FUSION}
        assert counts <= {1, 2}
        assert 1 in counts and 2 in counts  # both partial and full frames occur
        for r in res.log.records:
            if r.mode is not Mode.FEATURE_FUSION:
                assert r.bytes_received == 0

    def test_simple_variant_never_predicts(self):
        cfg = ScenarioConfig(n_agents=2, n_frames=12, miss_interval=2,
                             tau0_ms=50.0, latency_ms=20.0, seed=4,
                             variant="simple")
        res = run_scenario(cfg)
        modes = {r.mode for r in res.log.records}
        assert Mode.COLLABORATIVE_PREDICTION not in modes
        assert Mode.EGO_ONLY in modes

    def test_bernoulli_mode_seeded(self):
        cfg = proto(3, frames=30, l_his=4, miss_mode="bernoulli")
        a = run_scenario(cfg).log.to_csv_text()
        b = run_scenario(cfg).log.to_csv_text()
        assert a == b

    def test_pose_noise_scenario_deterministic(self):
        cfg = proto(None, frames=6, l_his=3, pose_noise_std_m=0.5)
        assert run_scenario(cfg).log.to_csv_text() == run_scenario(cfg).log.to_csv_text()


class TestModeFractions:
    def test_fractions_sum_to_one_exactly(self):
        res = run_scenario(proto(5, frames=8 + 10))
        fr = mode_fractions(res.log, res.warmup_frames)
        assert sum(fr.values()) == 1
        assert all(isinstance(v, Fraction) for v in fr.values())

    def test_empty_post_warmup_rejected(self):
        res = run_scenario(proto(None, frames=4, l_his=3))
        with pytest.raises(InvalidArgumentError):
            mode_fractions(res.log, warmup_frames=99)


class TestScenarioConfigIO:
    def test_roundtrip(self, tmp_path):
        cfg = proto(4, frames=9)
        path = tmp_path / "s.json"
        save_scenario(cfg, path)
        assert load_scenario(path) == cfg

    def test_unknown_keys_rejected(self, tmp_path):
        path = tmp_path / "s.json"
        path.write_text('{"n_agents": 2, "bogus": 1}')
        with pytest.raises(InvalidArgumentError):
            load_scenario(path)

    def test_validation(self):
        with pytest.raises(InvalidArgumentError):
            ScenarioConfig(n_agents=0)
        with pytest.raises(InvalidArgumentError):
            ScenarioConfig(miss_interval=0)
        with pytest.raises(InvalidArgumentError):
            ScenarioConfig(miss_mode="sometimes")
