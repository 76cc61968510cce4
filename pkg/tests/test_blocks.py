"""Block-level contracts: direction orders, residual identities, shape
preservation, determinism, and the resolution-changing layers."""

import numpy as np
import pytest

from collamamba import use_precision
from collamamba.blocks import (
    SCAN_DIRECTIONS,
    CausalConv1d,
    DirectionOrder,
    FusionBlock,
    FusionStack,
    Mamba2DBlock,
    PatchEmbed,
    PatchExpand,
    PatchMerge,
    PosEmbed2D,
    STMambaBlock,
    TemporalPosEmbed,
    inverse_order,
    order_directions,
    temporal_order,
)
from collamamba.errors import InvalidArgumentError, NumericOverflowError

TINY = dict(n_state=4, dt_rank=2)


class TestDirections:
    def test_two_by_two_enumeration(self):
        assert order_directions(2, 2, DirectionOrder.LEFT_RIGHT).tolist() == [0, 1, 2, 3]
        assert order_directions(2, 2, DirectionOrder.RIGHT_LEFT).tolist() == [3, 2, 1, 0]
        assert order_directions(2, 2, DirectionOrder.TOP_DOWN).tolist() == [0, 2, 1, 3]
        assert order_directions(2, 2, DirectionOrder.BOTTOM_UP).tolist() == [3, 1, 2, 0]

    def test_row_grid_is_identity(self):
        assert order_directions(1, 9, DirectionOrder.LEFT_RIGHT).tolist() == list(range(9))

    def test_bijection_with_inverse(self):
        rng = np.random.default_rng(0)
        for _ in range(20):
            h, w = int(rng.integers(1, 12)), int(rng.integers(1, 12))
            for d in SCAN_DIRECTIONS:
                perm = order_directions(h, w, d)
                inv = inverse_order(h, w, d)
                assert np.array_equal(perm[inv], np.arange(h * w))
                assert np.array_equal(np.sort(perm), np.arange(h * w))

    def test_temporal_order_example(self):
        # frames [a,b] then [c,d] flattened [a,b,c,d] -> temporal [a,c,b,d]
        assert temporal_order(2, 2).tolist() == [0, 2, 1, 3]


class TestMamba2DBlock:
    def test_zeroed_projections_identity(self):
        blk = Mamba2DBlock(8, seed=5, tag="b", **TINY)
        blk.zero_params()
        x = np.random.default_rng(1).standard_normal((2, 3, 4, 8)).astype(np.float32)
        assert np.array_equal(blk(x), x)

    def test_shape_preserved(self):
        blk = Mamba2DBlock(8, seed=5, tag="b", **TINY)
        for shape in ((1, 1, 1, 8), (2, 7, 3, 8), (1, 4, 9, 8)):
            x = np.random.default_rng(2).standard_normal(shape).astype(np.float32)
            assert blk(x).shape == shape

    def test_determinism_bitwise(self):
        x = np.random.default_rng(3).standard_normal((1, 5, 6, 8)).astype(np.float32)
        a = Mamba2DBlock(8, seed=7, tag="b", **TINY)
        b = Mamba2DBlock(8, seed=7, tag="b", **TINY)
        assert np.array_equal(a(x), b(x))
        assert np.array_equal(a(x), a(x))

    def test_determinism_f64(self):
        with use_precision("f64"):
            x = np.random.default_rng(3).standard_normal((1, 5, 6, 8))
            a = Mamba2DBlock(8, seed=7, tag="b", **TINY)
            assert np.array_equal(a(x), a(x))

    @pytest.mark.filterwarnings("ignore::RuntimeWarning")
    def test_nonfinite_raises_with_block_tag(self):
        blk = Mamba2DBlock(8, seed=5, tag="enc.3", **TINY)
        x = np.full((1, 2, 2, 8), np.inf, dtype=np.float32)
        with pytest.raises(NumericOverflowError, match="enc.3"):
            blk(x)

    def test_channel_mismatch(self):
        blk = Mamba2DBlock(8, seed=5, tag="b", **TINY)
        with pytest.raises(InvalidArgumentError):
            blk(np.zeros((1, 2, 2, 9), dtype=np.float32))


class TestSTBlock:
    def test_zeroed_identity_and_shape(self):
        blk = STMambaBlock(8, seed=6, tag="st", **TINY)
        f = np.random.default_rng(4).standard_normal((2, 3, 2, 2, 8)).astype(np.float32)
        assert blk(f).shape == f.shape
        blk.zero_params()
        assert np.array_equal(blk(f), f)

    def test_single_frame_degenerates(self):
        blk = STMambaBlock(8, seed=6, tag="st", **TINY)
        f = np.random.default_rng(5).standard_normal((1, 1, 2, 3, 8)).astype(np.float32)
        assert blk(f).shape == f.shape


class TestFusion:
    def test_zeroed_identity(self):
        blk = FusionBlock(8, seed=8, tag="f", **TINY)
        rng = np.random.default_rng(6)
        e = rng.standard_normal((1, 5, 8)).astype(np.float32)
        n = rng.standard_normal((1, 5, 8)).astype(np.float32)
        blk.zero_params()
        assert np.array_equal(blk(e, n), e)

    def test_output_shape_independent_of_neighbor(self):
        blk = FusionBlock(8, seed=8, tag="f", **TINY)
        rng = np.random.default_rng(7)
        e = rng.standard_normal((2, 6, 8)).astype(np.float32)
        for scale in (0.0, 1.0, 100.0):
            n = scale * rng.standard_normal((2, 6, 8)).astype(np.float32)
            assert blk(e, n).shape == e.shape

    def test_length_mismatch_rejected(self):
        blk = FusionBlock(8, seed=8, tag="f", **TINY)
        with pytest.raises(InvalidArgumentError):
            blk(np.zeros((1, 5, 8), dtype=np.float32),
                np.zeros((1, 6, 8), dtype=np.float32))

    def test_shared_parameters_across_neighbors(self):
        stack = FusionStack(2, 8, seed=9, tag="fs", **TINY)
        rng = np.random.default_rng(8)
        ego = rng.standard_normal((1, 4, 8)).astype(np.float32)
        nbs = [rng.standard_normal((1, 4, 8)).astype(np.float32) for _ in range(3)]
        params_before = {k: v.copy() for k, v in stack.named_params()}
        stack.fuse_all(ego, nbs)
        # one parameter set, untouched, regardless of neighbor count
        for k, v in stack.named_params():
            assert np.array_equal(params_before[k], v)
        assert len(list(stack.named_params())) == len(params_before)

    def test_sequential_semantics(self):
        stack = FusionStack(1, 8, seed=9, tag="fs", **TINY)
        rng = np.random.default_rng(9)
        ego = rng.standard_normal((1, 4, 8)).astype(np.float32)
        nb = rng.standard_normal((1, 4, 8)).astype(np.float32)
        manual = stack.fuse_one(stack.fuse_one(ego, nb), nb)
        assert np.array_equal(stack.fuse_all(ego, [nb, nb]), manual)


class TestPatchOps:
    def test_patch_embed_shape_and_anchor_pad(self):
        pe = PatchEmbed(4, 12, patch=8, stride=4, seed=1, tag="pe")
        out = pe(np.zeros((2, 16, 24, 4), dtype=np.float32))
        assert out.shape == (2, 4, 6, 12)

    def test_patch_embed_passthrough_1x1(self):
        pe = PatchEmbed(6, 6, patch=1, stride=1, seed=1, tag="pe1")
        pe.w[:] = np.eye(6).reshape(1, 1, 6, 6)
        pe.b[:] = 0
        x = np.random.default_rng(10).standard_normal((1, 5, 5, 6)).astype(np.float32)
        got = pe(x)
        # identity projection up to the trailing normalisation
        mu = x.mean(-1, keepdims=True)
        sd = np.sqrt(x.var(-1, keepdims=True) + np.float32(1e-5))
        assert np.allclose(got, (x - mu) / sd, atol=1e-5)

    def test_patch_embed_constant_interior(self):
        pe = PatchEmbed(3, 5, patch=4, stride=2, seed=2, tag="pe2")
        const = np.ones((1, 12, 12, 3), dtype=np.float32)
        out = pe(const)
        interior = out[:, 1:-1, 1:-1]
        assert np.abs(interior - interior[:, :1, :1]).max() < 1e-6

    def test_patch_embed_rejects_bad_c_out(self):
        with pytest.raises(InvalidArgumentError):
            PatchEmbed(4, 0, patch=8, stride=4, seed=1, tag="bad")

    def test_pos_embed_identity_when_zero(self):
        pos = PosEmbed2D(3, 4, 6, seed=3, tag="pos")
        pos.zero_params()
        x = np.random.default_rng(11).standard_normal((2, 3, 4, 6)).astype(np.float32)
        assert np.array_equal(pos(x), x)

    def test_pos_embed_extent_mismatch(self):
        pos = PosEmbed2D(3, 4, 6, seed=3, tag="pos")
        with pytest.raises(InvalidArgumentError):
            pos(np.zeros((1, 3, 5, 6), dtype=np.float32))

    def test_temporal_embed_shape_and_mismatch(self):
        emb = TemporalPosEmbed(5, 6, seed=4, tag="tmp")
        assert emb.table.shape == (1, 1, 1, 5, 6)
        x = np.zeros((2, 5, 3, 4, 6), dtype=np.float32)
        assert emb(x).shape == x.shape
        with pytest.raises(InvalidArgumentError):
            emb(np.zeros((2, 4, 3, 4, 6), dtype=np.float32))

    def test_merge_halves_and_param_count(self):
        pm = PatchMerge(96, seed=5, tag="pm")
        assert pm.param_count() == 4 * 96 * 96 + 2 * 4 * 96 == 37632
        x = np.random.default_rng(12).standard_normal((1, 50, 176, 96)).astype(np.float32)
        assert pm(x).shape == (1, 25, 88, 96)

    def test_merge_constant_input(self):
        pm = PatchMerge(8, seed=5, tag="pm8")
        out = pm(np.ones((1, 6, 4, 8), dtype=np.float32))
        assert np.abs(out - out[:, :1, :1]).max() == 0

    def test_merge_odd_extents_padded(self):
        pm = PatchMerge(8, seed=5, tag="pm8")
        assert pm(np.ones((1, 5, 7, 8), dtype=np.float32)).shape == (1, 3, 4, 8)

    def test_expand_doubles(self):
        px = PatchExpand(8, seed=6, tag="px")
        x = np.random.default_rng(13).standard_normal((2, 3, 5, 8)).astype(np.float32)
        assert px(x).shape == (2, 6, 10, 8)

    def test_expand_to_no_stage_passthrough(self):
        from collamamba.blocks import expand_to
        x = np.random.default_rng(15).standard_normal((1, 4, 6, 8)).astype(np.float32)
        assert expand_to(x, [], (4, 6)) is x
        with pytest.raises(InvalidArgumentError):
            expand_to(x, [], (2, 6))

    def test_causal_conv_is_causal(self):
        conv = CausalConv1d(4, 3, np.random.default_rng(14))
        x = np.zeros((1, 8, 3), dtype=np.float32)
        x[0, 4] = 1.0
        y = conv(x) - conv.b
        assert np.abs(y[0, :4]).max() == 0  # nothing before the impulse
        assert np.abs(y[0, 4:]).max() > 0
