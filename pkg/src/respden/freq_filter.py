"""Adaptive frequency filter.

The log-mel spectrogram is mapped to its modulation spectrum with a 2-D
DFT, attenuated bin-by-bin with a learnable instance-adaptive real mask
passed through soft shrink, and mapped back. The mask network is a tiny
pointwise MLP over each bin's (re, im) pair, so the mask depends on the
input content and not only on bin position.

A real pointwise mask alone does not keep the masked spectrum
conjugate-symmetric (the MLP is not even in the imaginary part), so the
raw mask is symmetrized across conjugate bin pairs before shrinking; that
is what guarantees a real output signal.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .fourier import ComplexTensor, fft2, ifft2, scale_complex
from .tensor import Tensor, add, concat, matmul, mul, relu, reshape, soft_shrink


@dataclass
class FilterParams:
    """Pointwise mask MLP (2 -> hidden -> 1) plus the fixed shrink threshold."""

    w1: Tensor
    b1: Tensor
    w2: Tensor
    b2: Tensor
    alpha: float = 0.02

    def __post_init__(self):
        if self.w1.shape[1] < 1:
            raise ValueError("mask hidden width must be >= 1")
        if self.alpha < 0:
            raise ValueError(f"shrink threshold must be >= 0, got {self.alpha}")


def mask_net(spectrum: ComplexTensor, params: FilterParams) -> Tensor:
    """One real mask value per bin from that bin's (re, im) pair."""
    t, f = spectrum.shape
    n = t * f
    feats = concat(
        [reshape(spectrum.re, (n, 1)), reshape(spectrum.im, (n, 1))], axis=1
    )
    hidden = relu(add(matmul(feats, params.w1), params.b1))
    raw = add(matmul(hidden, params.w2), params.b2)
    return reshape(raw, (t, f))


def _negation_perm(n: int) -> np.ndarray:
    return (-np.arange(n)) % n


def mirror_spectrum(m: Tensor) -> Tensor:
    """Reindex a T x F bin grid by frequency negation (an involution)."""
    perm = np.ix_(_negation_perm(m.shape[0]), _negation_perm(m.shape[1]))
    out = m.data[perm].copy()

    def backward(g):
        return (g[perm],)

    return Tensor._from_op(out, (m,), backward, "mirror_spectrum")


def symmetrize(m: Tensor) -> Tensor:
    """Average each bin with its conjugate partner; makes the mask even."""
    return mul(0.5, add(m, mirror_spectrum(m)))


def filter_forward(x: Tensor, params: FilterParams, residual: bool = False) -> Tensor:
    """fft2 -> instance mask -> soft shrink -> multiply -> ifft2.

    Fully differentiable; the returned signal is real because the shrunk
    mask is even-symmetric. With `residual` the filtered signal is added
    to the input instead of replacing it.
    """
    spectrum = fft2(x)
    mask = soft_shrink(symmetrize(mask_net(spectrum, params)), params.alpha)
    y = ifft2(scale_complex(spectrum, mask))
    return add(x, y) if residual else y
