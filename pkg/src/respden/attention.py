"""Differential-attention backbone over spectrogram patches.

Each block is pre-norm residual: LN -> multi-head differential attention,
then LN -> SwishGLU. Attention computes two softmax maps from split
query/key projections and subtracts the second, scaled by a learnable
per-head factor, before multiplying by the values; common-mode attention
mass cancels while stable structure survives.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .audio import DEFAULT_SPEC_CONFIG, N_FRAMES
from .errors import ShapeError
from .tensor import (
    Tensor,
    add,
    concat,
    layer_norm,
    matmul,
    mul,
    narrow,
    reshape,
    softmax,
    sub,
    swish_glu,
    transpose,
)

PATCH = 16
#: token grid over the zero-padded 256 x 64 spectrogram
N_TIME_PATCHES = -(-N_FRAMES // PATCH)  # 16
N_FREQ_PATCHES = DEFAULT_SPEC_CONFIG.n_mels // PATCH  # 4
N_TOKENS = N_TIME_PATCHES * N_FREQ_PATCHES  # 64
PATCH_DIM = PATCH * PATCH  # 256


@dataclass
class MhdaParams:
    """Projection matrices plus one differential scale per head.

    `wq`/`wk` columns are laid out head-major: for head i the slice
    [2*d*i, 2*d*i + d) holds the first map's projection and the next d
    columns the second map's; `wv` uses d_v-wide slices.
    """

    wq: Tensor
    wk: Tensor
    wv: Tensor
    wo: Tensor
    lam: Tensor
    heads: int

    def __post_init__(self):
        qw = self.wq.shape[1]
        if qw != self.wk.shape[1] or qw % (2 * self.heads) != 0:
            raise ShapeError(
                f"query/key width {qw} must be even and divisible by 2*heads={2 * self.heads}"
            )
        if self.wv.shape[1] % self.heads != 0:
            raise ShapeError(f"value width {self.wv.shape[1]} not divisible by heads={self.heads}")
        if self.lam.shape not in ((self.heads,), (1,)):
            raise ShapeError(f"lambda must have one entry per head or be shared, got {self.lam.shape}")

    @property
    def d_qk(self) -> int:
        return self.wq.shape[1] // (2 * self.heads)

    @property
    def d_v(self) -> int:
        return self.wv.shape[1] // self.heads


def mhda_with_maps(x: Tensor, params: MhdaParams) -> tuple[Tensor, list[tuple[Tensor, Tensor]]]:
    """Differential attention plus the per-head softmax map pair."""
    if x.shape[1] != params.wq.shape[0]:
        raise ShapeError(f"token width {x.shape[1]} does not match wq rows {params.wq.shape[0]}")
    q = matmul(x, params.wq)
    k = matmul(x, params.wk)
    v = matmul(x, params.wv)
    d, dv = params.d_qk, params.d_v
    scale = 1.0 / math.sqrt(d)
    shared = params.lam.shape == (1,)
    heads_out = []
    maps = []
    for i in range(params.heads):
        off = 2 * d * i
        q1, q2 = narrow(q, 1, off, d), narrow(q, 1, off + d, d)
        k1, k2 = narrow(k, 1, off, d), narrow(k, 1, off + d, d)
        vi = narrow(v, 1, dv * i, dv)
        m1 = softmax(mul(scale, matmul(q1, transpose(k1))), axis=1)
        m2 = softmax(mul(scale, matmul(q2, transpose(k2))), axis=1)
        lam_i = reshape(narrow(params.lam, 0, 0 if shared else i, 1), ())
        heads_out.append(matmul(sub(m1, mul(lam_i, m2)), vi))
        maps.append((m1, m2))
    return matmul(concat(heads_out, axis=1), params.wo), maps


def mhda(x: Tensor, params: MhdaParams) -> Tensor:
    out, _ = mhda_with_maps(x, params)
    return out


@dataclass
class BlockParams:
    ln1_g: Tensor
    ln1_b: Tensor
    attn: MhdaParams
    ln2_g: Tensor
    ln2_b: Tensor
    ffn_w1: Tensor
    ffn_w2: Tensor
    ffn_w3: Tensor


def denoise_block(x: Tensor, params: BlockParams) -> Tensor:
    """Pre-norm residual block: attention sublayer then gated FFN sublayer."""
    y = add(x, mhda(layer_norm(x, params.ln1_g, params.ln1_b), params.attn))
    return add(y, swish_glu(layer_norm(y, params.ln2_g, params.ln2_b),
                            params.ffn_w1, params.ffn_w2, params.ffn_w3))


@dataclass
class BackboneParams:
    patch_w: Tensor
    patch_b: Tensor
    pos: Tensor
    blocks: list[BlockParams]
    final_g: Tensor
    final_b: Tensor


def extract_patches(values: np.ndarray) -> np.ndarray:
    """Zero-pad the T x 64 grid to 256 x 64 and flatten 16 x 16 patches.

    Tokens are ordered time-major (time block index * 4 + frequency block
    index); each patch is flattened row-major into 256 values.
    """
    t, f = values.shape
    if f != DEFAULT_SPEC_CONFIG.n_mels or t > N_TIME_PATCHES * PATCH:
        raise ShapeError(f"expected a spectrogram of at most {N_TIME_PATCHES * PATCH} x "
                         f"{DEFAULT_SPEC_CONFIG.n_mels}, got {values.shape}")
    padded = np.zeros((N_TIME_PATCHES * PATCH, f))
    padded[:t] = values
    blocks = padded.reshape(N_TIME_PATCHES, PATCH, N_FREQ_PATCHES, PATCH)
    return blocks.transpose(0, 2, 1, 3).reshape(N_TOKENS, PATCH_DIM)


def patch_embed(x: Tensor, params: BackboneParams) -> Tensor:
    """Project flattened patches to model width and add positions."""
    if x.data.ndim != 2:
        raise ShapeError(f"patch_embed expects a 2-D spectrogram, got {x.shape}")
    patches = patchify(x)
    return add(add(matmul(patches, params.patch_w), params.patch_b), params.pos)


def patchify(x: Tensor) -> Tensor:
    """Differentiable patch extraction (gradient scatters back to the grid)."""
    t, f = x.shape
    out = extract_patches(x.data)

    def backward(g):
        blocks = g.reshape(N_TIME_PATCHES, N_FREQ_PATCHES, PATCH, PATCH).transpose(0, 2, 1, 3)
        padded = blocks.reshape(N_TIME_PATCHES * PATCH, f)
        return (padded[:t],)

    return Tensor._from_op(out, (x,), backward, "patchify")


def backbone_forward(x: Tensor, params: BackboneParams) -> Tensor:
    """Patch embedding, the block stack, then a final layer norm."""
    tokens = patch_embed(x, params)
    for block in params.blocks:
        tokens = denoise_block(tokens, block)
    return layer_norm(tokens, params.final_g, params.final_b)
