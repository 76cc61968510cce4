"""Parameter and FLOPs accounting tables.

Parameter counts are exact: they walk the constructed model's tensors.
FLOPs are analytic, integer-valued, and follow the published convention:

* one multiply-add = 2 FLOPs;
* projections, convolutions, and scans are counted; normalisation, gating,
  bias adds, embeddings, and interpolation are excluded;
* each scan step charges SCAN_MACS_PER_STATE (=6) multiply-adds per state
  element (discretise + state update + output projection).

Every term is linear in the token count, so totals are exactly linear in
the sequence length, history length, and neighbor count.
"""

from __future__ import annotations

from dataclasses import dataclass

from ..ssm import scan_flops
from .config import NetConfig, Variant
from .model import CollaMambaNet


@dataclass(frozen=True)
class Row:
    path: str
    value: int
    shape: str = ""


# ---------------------------------------------------------------------------
# parameters (exact, from tensors)

_EMBED_SUFFIX = ("pos_embed", "temporal_embed")


def _group(path: str) -> str:
    parts = path.split(".")
    for i, part in enumerate(parts):
        if part.isdigit():
            return ".".join(parts[:i])
    return ".".join(parts[:2])


def count_params(net_or_cfg, variant: Variant | None = None):
    """Per-module parameter table -> (rows, total).

    Accepts a built net, or a config plus variant (the net is then built
    with its seeded initialisation; counts do not depend on the seed).
    """
    if isinstance(net_or_cfg, CollaMambaNet):
        net = net_or_cfg
    else:
        net = CollaMambaNet(net_or_cfg, Variant.parse(variant or Variant.SIMPLE))
    groups: dict[str, int] = {}
    shapes: dict[str, str] = {}
    for path, arr in net.named_params():
        g = _group(path)
        groups[g] = groups.get(g, 0) + arr.size
        if g.endswith(_EMBED_SUFFIX):
            shapes[g] = str(tuple(arr.shape))
    rows = [Row(path, count, shapes.get(path, "")) for path, count in groups.items()]
    return rows, sum(groups.values())


# ---------------------------------------------------------------------------
# FLOPs (analytic)

def _linear(tokens: int, c_in: int, c_out: int) -> int:
    return 2 * tokens * c_in * c_out


def _branch(tokens: int, cfg: NetConfig) -> int:
    d = cfg.d_inner
    return (_linear(tokens, d, cfg.dt_rank + 2 * cfg.n_state)
            + _linear(tokens, cfg.dt_rank, d)
            + scan_flops(tokens, d, cfg.n_state))


def _scan_block(tokens: int, cfg: NetConfig, n_directions: int) -> int:
    d = cfg.d_inner
    return (_linear(tokens, cfg.c, 2 * d)
            + 2 * tokens * d * cfg.conv_width
            + n_directions * _branch(tokens, cfg)
            + _linear(tokens, d, cfg.c))


def _fusion_block(length: int, cfg: NetConfig) -> int:
    d = cfg.d_inner
    both = 2 * length
    return (2 * _linear(length, cfg.c, 2 * d)        # per-stream input maps
            + 2 * both * d * cfg.conv_width
            + 2 * _branch(both, cfg)                 # forward + backward sweep
            + _linear(length, d, cfg.c))             # ego half projected out


def count_flops(cfg: NetConfig, variant: Variant = Variant.SIMPLE,
                batch: int = 1, neighbors: int = 1):
    """Analytic per-forward FLOPs table -> (rows, total)."""
    variant = Variant.parse(variant)
    rows: list[Row] = []

    def add(path, value):
        rows.append(Row(path, batch * value))

    g_tokens = cfg.grid_h * cfg.grid_w
    l = cfg.seq_len
    add("encoder.patch_embed", _linear(g_tokens, cfg.patch * cfg.patch * cfg.c0, cfg.c))
    enc = (cfg.enc_merge_after * _scan_block(g_tokens, cfg, 4)
           + (cfg.enc_depth - cfg.enc_merge_after) * _scan_block(l, cfg, 4))
    add("encoder.block", enc)
    add("encoder.merge", _linear(l, 4 * cfg.c, cfg.c))

    add("fusion", neighbors * cfg.fusion_depth * _fusion_block(l, cfg))

    dec = 0
    exp = 0
    tokens = l
    for _ in range(cfg.dec_stages):
        dec += cfg.dec_depth * _scan_block(tokens, cfg, 4)
        exp += _linear(tokens, cfg.c, 4 * cfg.c)
        tokens *= 4
    add("decoder.block", dec)
    add("decoder.expand", exp)
    head_cells = cfg.dec_hw[0] * cfg.dec_hw[1]
    add("decoder.out_conv", _linear(head_cells, 9 * cfg.c, cfg.out_ch))
    for name, ch in zip(("cls", "reg", "dir"), cfg.head_channels):
        add(f"head.{name}", _linear(head_cells, cfg.out_ch, ch))

    if variant in (Variant.ST, Variant.MISS):
        t = cfg.l_his
        add("history.embed", t * _linear(g_tokens, cfg.patch * cfg.patch * cfg.c0, cfg.c))
        add("history.merge", t * _linear(l, 4 * cfg.c, cfg.c))
        add("history.block", cfg.st_depth * _scan_block(t * l, cfg, 3))
        add("boost.temporal.block",
            cfg.boost_temporal_depth * _scan_block(l * t, cfg, 4))
        add("boost.mlp", _linear(l, t * cfg.c, cfg.c))
        add("boost.fusion", cfg.boost_spatial_depth * _fusion_block(l, cfg))

    if variant is Variant.MISS:
        t = cfg.l_his
        add("predictor.block", cfg.st_depth * _scan_block(t * l, cfg, 3))
        add("predictor.head.block",
            cfg.boost_temporal_depth * _scan_block(l * t, cfg, 4))
        add("predictor.mlp", _linear(l, t * cfg.c, cfg.c))

    return rows, sum(r.value for r in rows)
