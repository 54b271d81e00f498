"""Full classifier: frequency filter -> patch backbone -> two heads.

Parameters live in one flat, insertion-ordered name -> Tensor map, which
is what the optimizer, checkpoints, and gradient checks all consume.
"""

from __future__ import annotations

import numpy as np

from .attention import BackboneParams, BlockParams, MhdaParams, N_TOKENS, PATCH_DIM, backbone_forward
from .audio import Spectrogram
from .config import RunConfig
from .errors import ShapeError
from .freq_filter import FilterParams, filter_forward
from .losses import HeadParams, N_CLASSES, cls_logits, total_loss
from .tensor import Tensor, no_grad

LAMBDA_INIT = 0.8
INIT_STD = 0.02
#: mask MLP starts as a near-identity filter: tiny weights, output bias 1.
#: (an all-zero mask would sit inside the shrink dead zone, whose
#: subgradient is zero, and the filter could never learn its way out)
#: The hidden bias keeps rectifier preactivations well away from zero at
#: init, which also keeps finite-difference probes off the kinks.
MASK_W_STD = 1e-4
MASK_B1 = 0.5
#: patch projection: the bias starts at -floor * colsum(W), cancelling the
#: projection of the log-mel silence floor so token features begin
#: zero-mean; numerically equivalent to standardizing patch pixels but
#: expressed purely as an initialization
PATCH_W_STD = 0.005
LOG_FLOOR_VALUE = float(np.log(1e-6))


def seed_stream(seed: int, name: str) -> np.random.Generator:
    """Named deterministic child stream of one root seed."""
    return np.random.default_rng(np.random.SeedSequence(entropy=seed, spawn_key=tuple(name.encode())))


def init_params(cfg: RunConfig, rng: np.random.Generator) -> dict[str, Tensor]:
    """Build the named parameter map for the configured dimensions."""
    d, h, layers, hidden = cfg.dim, cfg.heads, cfg.layers, cfg.mask_hidden
    ffn = 2 * d

    def gauss(*shape, std=INIT_STD):
        return Tensor(rng.normal(0.0, std, size=shape), requires_grad=True)

    def const(value, *shape):
        return Tensor(np.full(shape, float(value)), requires_grad=True)

    params: dict[str, Tensor] = {}
    params["aff.w1"] = gauss(2, hidden, std=MASK_W_STD)
    params["aff.b1"] = const(MASK_B1, hidden)
    params["aff.w2"] = gauss(hidden, 1, std=MASK_W_STD)
    params["aff.b2"] = const(1.0, 1)
    params["patch.w"] = gauss(PATCH_DIM, d, std=PATCH_W_STD)
    params["patch.b"] = Tensor(-LOG_FLOOR_VALUE * params["patch.w"].data.sum(axis=0),
                               requires_grad=True)
    params["pos"] = gauss(N_TOKENS, d)
    lam_shape = 1 if cfg.shared_lambda else h
    for i in range(layers):
        params[f"block{i}.ln1.g"] = const(1.0, d)
        params[f"block{i}.ln1.b"] = const(0.0, d)
        params[f"block{i}.wq"] = gauss(d, d)
        params[f"block{i}.wk"] = gauss(d, d)
        params[f"block{i}.wv"] = gauss(d, d)
        params[f"block{i}.wo"] = gauss(d, d)
        params[f"block{i}.lam"] = const(LAMBDA_INIT, lam_shape)
        params[f"block{i}.ln2.g"] = const(1.0, d)
        params[f"block{i}.ln2.b"] = const(0.0, d)
        params[f"block{i}.ffn.w1"] = gauss(d, ffn)
        params[f"block{i}.ffn.w2"] = gauss(d, ffn)
        params[f"block{i}.ffn.w3"] = gauss(ffn, d)
    params["final.g"] = const(1.0, d)
    params["final.b"] = const(0.0, d)
    params["head.norm.g"] = const(1.0, d)
    params["head.norm.b"] = const(0.0, d)
    # zero-init heads: initial logits are exactly uniform, so early updates
    # follow the pooled features instead of unlearning random projections
    params["head.phi.w"] = const(0.0, d, N_CLASSES)
    params["head.phi.b"] = const(0.0, N_CLASSES)
    params["head.cls.w"] = const(0.0, d, N_CLASSES)
    params["head.cls.b"] = const(0.0, N_CLASSES)
    return params


class Model:
    """Binds a parameter map to the forward computation for one config."""

    def __init__(self, cfg: RunConfig, params: dict[str, Tensor] | None = None,
                 rng: np.random.Generator | None = None):
        self.cfg = cfg
        if params is None:
            params = init_params(cfg, rng if rng is not None else seed_stream(cfg.seed, "init"))
        self.params = params
        if cfg.no_ddl:
            # standard attention: freeze the differential scale at zero
            for name, p in params.items():
                if name.endswith(".lam"):
                    p.data[...] = 0.0
                    p.requires_grad = False
                    p.grad = None
        self._check_shapes()

    # -- parameter plumbing ---------------------------------------------------

    def _check_shapes(self) -> None:
        expect = {n: t.shape for n, t in init_params(self.cfg, np.random.default_rng(0)).items()}
        for name, shape in expect.items():
            if name not in self.params:
                raise ShapeError(f"parameter '{name}' missing from model parameters")
            if self.params[name].shape != shape:
                raise ShapeError(
                    f"parameter '{name}' has shape {self.params[name].shape}, expected {shape}"
                )

    def trainable(self) -> dict[str, Tensor]:
        return {n: p for n, p in self.params.items() if p.requires_grad}

    def zero_grads(self) -> None:
        for p in self.params.values():
            p.zero_grad()

    # -- component views --------------------------------------------------------

    def filter_params(self) -> FilterParams:
        p = self.params
        return FilterParams(p["aff.w1"], p["aff.b1"], p["aff.w2"], p["aff.b2"], self.cfg.alpha)

    def backbone_params(self) -> BackboneParams:
        p = self.params
        blocks = [
            BlockParams(
                p[f"block{i}.ln1.g"], p[f"block{i}.ln1.b"],
                MhdaParams(p[f"block{i}.wq"], p[f"block{i}.wk"], p[f"block{i}.wv"],
                           p[f"block{i}.wo"], p[f"block{i}.lam"], self.cfg.heads),
                p[f"block{i}.ln2.g"], p[f"block{i}.ln2.b"],
                p[f"block{i}.ffn.w1"], p[f"block{i}.ffn.w2"], p[f"block{i}.ffn.w3"],
            )
            for i in range(self.cfg.layers)
        ]
        return BackboneParams(p["patch.w"], p["patch.b"], p["pos"], blocks, p["final.g"], p["final.b"])

    def head_params(self) -> HeadParams:
        p = self.params
        return HeadParams(p["head.norm.g"], p["head.norm.b"], p["head.phi.w"], p["head.phi.b"],
                          p["head.cls.w"], p["head.cls.b"])

    # -- forward -----------------------------------------------------------------

    def features(self, spec: Spectrogram | np.ndarray) -> Tensor:
        values = spec.values if isinstance(spec, Spectrogram) else np.asarray(spec, dtype=np.float64)
        x = Tensor(values)
        if not self.cfg.no_aff:
            x = filter_forward(x, self.filter_params(), residual=self.cfg.aff_residual)
        return backbone_forward(x, self.backbone_params())

    def sample_loss(self, spec, label: int) -> Tensor:
        p = self.features(spec)
        logits = cls_logits(p, self.head_params())
        beta = 0.0 if self.cfg.no_bias_loss else self.cfg.beta
        return total_loss(p, logits, label, beta, self.cfg.epsilon, self.head_params(),
                          project_first=self.cfg.bd_project_first)

    def logits(self, spec) -> np.ndarray:
        with no_grad():
            return cls_logits(self.features(spec), self.head_params()).data.copy()

    def predict(self, spec) -> int:
        """Argmax over prediction-head logits; ties go to the lower class index."""
        return int(np.argmax(self.logits(spec)))
