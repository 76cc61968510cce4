"""Synthetic scenes: determinism, motion bounds, rasterisation geometry,
occlusion, and the dataset container round trip."""

import math

import numpy as np
import pytest

from collamamba.data import (
    AgentRig,
    Dataset,
    GridSpec,
    SceneObject,
    export_dataset,
    feature_signature,
    fov_mask,
    generate_scene,
    import_dataset,
    is_occluded,
    is_visible,
    rasterize_bev,
    rasterize_frame,
)
from collamamba.errors import FormatError, InvalidArgumentError

GRID = GridSpec(x_min=-12.8, x_max=12.8, y_min=-12.8, y_max=12.8, voxel=0.4, c0=4)
RIG = AgentRig(0, 0.0, 0.0, 0.0, fov_range=18.0, fov_half_angle=math.pi,
               feature_seed=1)


class TestScene:
    def test_same_seed_identical_trajectories(self):
        a = generate_scene(7, 2, 5, 12, grid=GRID)
        b = generate_scene(7, 2, 5, 12, grid=GRID)
        assert a.frames == b.frames and a.rigs == b.rigs

    def test_different_seed_differs(self):
        a = generate_scene(7, 1, 5, 3, grid=GRID)
        b = generate_scene(8, 1, 5, 3, grid=GRID)
        assert a.frames != b.frames

    def test_empty_world(self):
        scene = generate_scene(1, 1, 0, 4, grid=GRID)
        assert all(frame == [] for frame in scene.frames)

    def test_bounded_motion_long_rollout(self):
        scene = generate_scene(3, 1, 8, 1000, grid=GRID)
        for frame in scene.frames:
            for o in frame:
                assert GRID.x_min <= o.x <= GRID.x_max
                assert GRID.y_min <= o.y <= GRID.y_max

    def test_fov_within_detection_range(self):
        scene = generate_scene(11, 6, 1, 1, grid=GRID)
        for rig in scene.rigs:
            assert rig.fov_range <= GRID.max_range

    def test_invalid_counts(self):
        with pytest.raises(InvalidArgumentError):
            generate_scene(0, 0, 1, 1, grid=GRID)


class TestRaster:
    def test_empty_world_zero_grid(self):
        bev = rasterize_bev([], RIG, GRID)
        assert bev.shape == (GRID.h0, GRID.w0, GRID.c0)
        assert not bev.any()

    def test_footprint_area_oracle(self):
        """Cell count of an in-view axis-aligned box matches area / voxel^2
        within one cell per edge."""
        obj = SceneObject(0, 2.0, 1.0, length=4.0, width=2.0, heading=0.0, vx=0, vy=0)
        bev = rasterize_bev([obj], RIG, GRID)
        cells = int((np.abs(bev).sum(axis=-1) > 0).sum())
        per_edge_l = 4.0 / GRID.voxel
        per_edge_w = 2.0 / GRID.voxel
        assert (per_edge_l - 1) * (per_edge_w - 1) <= cells <= (per_edge_l + 1) * (per_edge_w + 1)

    def test_out_of_range_object_invisible(self):
        far = SceneObject(1, 100.0, 0.0, 4.0, 2.0, 0.0, 0, 0)
        assert not rasterize_bev([far], RIG, GRID).any()

    def test_out_of_sector_object_invisible(self):
        rig = AgentRig(0, 0.0, 0.0, 0.0, fov_range=18.0,
                       fov_half_angle=math.pi / 4, feature_seed=1)
        behind = SceneObject(0, -6.0, 0.0, 4.0, 2.0, 0.0, 0, 0)
        assert not rasterize_bev([behind], rig, GRID).any()
        assert not is_visible(behind, rig, [behind])

    def test_occlusion(self):
        front = SceneObject(0, 4.0, 0.0, 4.0, 2.0, 0.0, 0, 0)
        back = SceneObject(1, 10.0, 0.0, 4.0, 2.0, 0.0, 0, 0)
        assert is_occluded(back, RIG, [front, back])
        assert is_visible(front, RIG, [front, back])
        bev = rasterize_bev([front, back], RIG, GRID)
        only_front = rasterize_bev([front], RIG, GRID)
        assert np.array_equal(bev, only_front)

    def test_fov_mask_idempotent(self):
        obj = SceneObject(0, 2.0, 1.0, 4.0, 2.0, 0.3, 0, 0)
        rig = AgentRig(0, 1.0, -2.0, 0.5, fov_range=10.0,
                       fov_half_angle=2 * math.pi / 3, feature_seed=1)
        bev = rasterize_bev([obj], rig, GRID)
        assert np.array_equal(fov_mask(bev, rig, GRID), bev)

    def test_translation_consistency(self):
        obj = SceneObject(0, 2.0, 1.0, 4.0, 2.0, 0.0, 0, 0)
        moved = SceneObject(0, 2.0 + 3 * GRID.voxel, 1.0, 4.0, 2.0, 0.0, 0, 0)
        a = rasterize_bev([obj], RIG, GRID)
        b = rasterize_bev([moved], RIG, GRID)
        assert np.array_equal(b[:, 3:], a[:, :-3])

    def test_signature_correlated_across_agents(self):
        rig_b = AgentRig(1, 3.0, 3.0, 1.0, fov_range=18.0,
                         fov_half_angle=math.pi, feature_seed=1)
        sig_a = feature_signature(5, RIG.feature_seed, GRID.c0)
        sig_b = feature_signature(5, rig_b.feature_seed, GRID.c0)
        assert np.array_equal(sig_a, sig_b)
        assert not np.array_equal(sig_a, feature_signature(6, 1, GRID.c0))

    def test_raster_determinism(self):
        scene = generate_scene(9, 2, 6, 3, grid=GRID)
        a = rasterize_frame(scene, 2)
        b = rasterize_frame(scene, 2)
        assert all(np.array_equal(x, y) for x, y in zip(a, b))


class TestDatasetIO:
    def make(self):
        scene = generate_scene(5, 2, 4, 3, grid=GRID)
        grids = np.stack([np.stack(rasterize_frame(scene, t))
                          for t in range(scene.n_frames)])
        return Dataset(scene=scene, grids=grids)

    def test_roundtrip_bitwise(self, tmp_path):
        ds = self.make()
        path = tmp_path / "d.cmbd"
        export_dataset(ds, path)
        back = import_dataset(path)
        assert np.array_equal(back.grids, ds.grids)
        assert back.grids.dtype == ds.grids.dtype
        assert back.scene == ds.scene

    def test_empty_scene_roundtrip(self, tmp_path):
        scene = generate_scene(1, 1, 0, 1, grid=GRID)
        ds = Dataset(scene=scene,
                     grids=np.zeros((1, 1, GRID.h0, GRID.w0, GRID.c0), np.float32))
        path = tmp_path / "e.cmbd"
        export_dataset(ds, path)
        back = import_dataset(path)
        assert back.scene == scene and not back.grids.any()

    def test_corrupt_magic_rejected(self, tmp_path):
        ds = self.make()
        path = tmp_path / "d.cmbd"
        export_dataset(ds, path)
        raw = bytearray(path.read_bytes())
        raw[0] ^= 0xFF
        path.write_bytes(bytes(raw))
        with pytest.raises(FormatError):
            import_dataset(path)

    def test_truncation_rejected(self, tmp_path):
        ds = self.make()
        path = tmp_path / "d.cmbd"
        export_dataset(ds, path)
        path.write_bytes(path.read_bytes()[:50])
        with pytest.raises(FormatError):
            import_dataset(path)
