"""Kolmogorov-Arnold network with B-spline edge activations.

Every edge ``(j, i)`` of layer ``l`` carries

    phi(x) = w_b * silu(x) + w_s * sum_m c_m B_m(x)

and node ``j`` of layer ``l+1`` sums its incoming edges. Parameters of a layer
are stored as dense arrays indexed ``[out, in, ...]``; :class:`EdgeActivation`
is a read-only view of one edge.

All forward/backward routines are batched over samples. The single-sample
:func:`forward`/:func:`backward` pair is a thin wrapper kept for gradient
checks and for callers that think in terms of one covariate vector.
"""

from __future__ import annotations

import copy
from dataclasses import dataclass, field

import numpy as np

from .bspline import (
    DEFAULT_DEGREE,
    DEFAULT_GRID,
    KnotVector,
    SplineFunction,
    basis_deriv_matrix,
    basis_matrix,
    make_grid,
)
from .errors import ConfigError, ContractViolation, DomainError, ShapeError

NETWORK_FORMAT = "kanaft.network/1"
HIDDEN_RANGE = (-1.0, 1.0)


def silu(x):
    return x / (1.0 + np.exp(-x))


def silu_deriv(x):
    s = 1.0 / (1.0 + np.exp(-x))
    return s * (1.0 + x * (1.0 - s))


@dataclass(frozen=True)
class EdgeActivation:
    w_b: float
    w_s: float
    spline: SplineFunction
    active: bool = True

    def __call__(self, x):
        """Evaluate phi on a scalar or array (ignores the mask)."""
        x = np.asarray(x, dtype=float)
        kv = self.spline.knotvec
        spl = basis_matrix(x, kv.knots, kv.degree) @ self.spline.coefficients
        return self.w_b * silu(x) + self.w_s * spl


@dataclass(frozen=True)
class RegConfig:
    """Weights of the sparsity regularizer.

    Total penalty is ``lam0 * (sum|Phi|_1 + lam1 * sum S(Phi) + lam2 * sum|C|_1)``.
    """

    lam0: float = 0.01
    lam1: float = 1.0
    lam2: float = 0.0

    def __post_init__(self):
        if min(self.lam0, self.lam1, self.lam2) < 0:
            raise ConfigError("regularization weights must be non-negative")


@dataclass
class KanLayer:
    w_b: np.ndarray  # (out, in)
    w_s: np.ndarray  # (out, in)
    coef: np.ndarray  # (out, in, G + k)
    knots: np.ndarray  # (out, in, G + 2k + 1)
    mask: np.ndarray  # (out, in) bool, True = active
    degree: int
    grid_size: int
    domains: np.ndarray  # (in, 2) grid [lo, hi] per input node

    @property
    def in_dim(self) -> int:
        return self.w_b.shape[1]

    @property
    def out_dim(self) -> int:
        return self.w_b.shape[0]

    def knotvec(self, j: int, i: int) -> KnotVector:
        lo, hi = self.domains[i]
        return KnotVector(self.knots[j, i], self.degree, self.grid_size, lo, hi)

    def edge(self, j: int, i: int) -> EdgeActivation:
        spline = SplineFunction(self.knotvec(j, i), self.coef[j, i].copy())
        return EdgeActivation(
            float(self.w_b[j, i]), float(self.w_s[j, i]), spline, bool(self.mask[j, i])
        )


@dataclass
class KanNetwork:
    shape: tuple[int, ...]
    layers: list[KanLayer]
    seed: int = 0

    def __post_init__(self):
        self.shape = tuple(int(s) for s in self.shape)
        if len(self.layers) != len(self.shape) - 1:
            raise ShapeError("layer count must be len(shape) - 1")
        for l, layer in enumerate(self.layers):
            if (layer.in_dim, layer.out_dim) != (self.shape[l], self.shape[l + 1]):
                raise ShapeError(f"layer {l} dims do not chain with shape {self.shape}")

    @property
    def n_inputs(self) -> int:
        return self.shape[0]

    @property
    def is_shallow(self) -> bool:
        return len(self.shape) == 2 and self.shape[-1] == 1

    def copy(self) -> KanNetwork:
        return copy.deepcopy(self)

    def parameters(self) -> list[np.ndarray]:
        """Trainable arrays in a fixed order (w_b, w_s, coef per layer)."""
        out = []
        for layer in self.layers:
            out.extend([layer.w_b, layer.w_s, layer.coef])
        return out

    def param_vector(self) -> np.ndarray:
        return np.concatenate([p.ravel() for p in self.parameters()])

    def set_param_vector(self, vec: np.ndarray) -> None:
        vec = np.asarray(vec, dtype=float)
        pos = 0
        for p in self.parameters():
            p[...] = vec[pos : pos + p.size].reshape(p.shape)
            pos += p.size
        if pos != vec.size:
            raise ShapeError("parameter vector length mismatch")

    def _state(self) -> np.ndarray:
        masks = [layer.mask.ravel().astype(float) for layer in self.layers]
        return np.concatenate([self.param_vector(), *masks])

    def edge_count(self) -> int:
        return sum(layer.w_b.size for layer in self.layers)


def init_network(
    shape,
    G: int = DEFAULT_GRID,
    k: int = DEFAULT_DEGREE,
    seed: int = 0,
    input_ranges=None,
    coef_std: float = 0.1,
) -> KanNetwork:
    """Fresh network: ``w_b = w_s = 1`` and N(0, coef_std^2) spline coefficients.

    ``input_ranges`` gives a grid domain per input covariate; hidden layers use
    ``[-1, 1]``.
    """
    shape = tuple(int(s) for s in shape)
    if len(shape) < 2 or min(shape) < 1:
        raise ConfigError(f"invalid network shape {shape}")
    if input_ranges is None:
        input_ranges = [HIDDEN_RANGE] * shape[0]
    input_ranges = np.asarray(input_ranges, dtype=float)
    if input_ranges.shape != (shape[0], 2):
        raise ConfigError("input_ranges needs one [lo, hi] pair per input")
    rng = np.random.default_rng(seed)
    layers = []
    for l, (n_in, n_out) in enumerate(zip(shape[:-1], shape[1:])):
        domains = input_ranges if l == 0 else np.tile(HIDDEN_RANGE, (n_in, 1))
        grids = np.stack([make_grid(lo, hi, G, k).knots for lo, hi in domains])
        layers.append(
            KanLayer(
                w_b=np.ones((n_out, n_in)),
                w_s=np.ones((n_out, n_in)),
                coef=rng.normal(0.0, coef_std, size=(n_out, n_in, G + k)),
                knots=np.broadcast_to(grids, (n_out, *grids.shape)).copy(),
                mask=np.ones((n_out, n_in), dtype=bool),
                degree=int(k),
                grid_size=int(G),
                domains=np.array(domains, dtype=float),
            )
        )
    return KanNetwork(shape, layers, int(seed))


@dataclass
class LayerCache:
    x: np.ndarray  # (n, in) layer input
    silu: np.ndarray  # (n, in)
    basis: np.ndarray  # (n, out, in, nb)
    spline: np.ndarray  # (n, out, in)
    phi: np.ndarray  # (n, out, in), zero on masked edges


@dataclass
class ForwardCache:
    layers: list[LayerCache]
    output: np.ndarray
    state: np.ndarray = field(repr=False)


@dataclass
class LayerGrad:
    w_b: np.ndarray
    w_s: np.ndarray
    coef: np.ndarray


@dataclass
class GradientSet:
    layers: list[LayerGrad]

    def arrays(self) -> list[np.ndarray]:
        out = []
        for g in self.layers:
            out.extend([g.w_b, g.w_s, g.coef])
        return out

    def vector(self) -> np.ndarray:
        return np.concatenate([a.ravel() for a in self.arrays()])

    def __add__(self, other: GradientSet) -> GradientSet:
        return GradientSet(
            [
                LayerGrad(a.w_b + b.w_b, a.w_s + b.w_s, a.coef + b.coef)
                for a, b in zip(self.layers, other.layers)
            ]
        )

    @classmethod
    def zeros_like(cls, net: KanNetwork) -> GradientSet:
        return cls(
            [
                LayerGrad(np.zeros_like(l.w_b), np.zeros_like(l.w_s), np.zeros_like(l.coef))
                for l in net.layers
            ]
        )


def layer_basis(layer: KanLayer, x: np.ndarray) -> np.ndarray:
    """Basis values of every edge for inputs ``x`` of shape (n, in)."""
    return basis_matrix(x[:, None, :], layer.knots[None], layer.degree)


def forward_batch(net: KanNetwork, Z, first_basis: np.ndarray | None = None):
    """Network output for every row of ``Z``; returns ``(pred, cache)``.

    ``first_basis`` lets a training loop reuse the layer-0 basis values, which
    depend only on the (fixed) inputs.
    """
    Z = np.asarray(Z, dtype=float)
    if Z.ndim != 2 or Z.shape[1] != net.n_inputs:
        raise ShapeError(f"expected inputs of shape (n, {net.n_inputs}), got {Z.shape}")
    x = Z
    caches = []
    for l, layer in enumerate(net.layers):
        B = first_basis if (l == 0 and first_basis is not None) else layer_basis(layer, x)
        s = silu(x)
        spl = np.einsum("nojb,ojb->noj", B, layer.coef)
        phi = layer.w_b * s[:, None, :] + layer.w_s * spl
        phi = np.where(layer.mask, phi, 0.0)
        caches.append(LayerCache(x, s, B, spl, phi))
        x = phi.sum(axis=2)
    return x[:, 0] if x.shape[1] == 1 else x, ForwardCache(caches, x, net._state())


def forward(net: KanNetwork, z):
    """Single covariate vector -> (prediction, cache)."""
    z = np.asarray(z, dtype=float)
    if z.ndim != 1 or z.shape[0] != net.n_inputs:
        raise ShapeError(f"expected a vector of length {net.n_inputs}, got shape {z.shape}")
    if not np.all(np.isfinite(z)):
        raise DomainError("non-finite covariate")
    pred, cache = forward_batch(net, z[None, :])
    return float(np.ravel(pred)[0]), cache


def backward_batch(
    net: KanNetwork,
    cache: ForwardCache,
    upstream,
    edge_grads: list[np.ndarray] | None = None,
    check: bool = True,
) -> GradientSet:
    """Parameter gradients, summed over the batch.

    ``upstream`` is dL/d(output) with shape (n,) or (n, out). ``edge_grads``
    optionally adds a direct dL/dphi term per layer, shape (n, out, in); the
    regularizer uses it because it depends on edge outputs, not only on the
    network output.
    """
    if check and not np.array_equal(cache.state, net._state()):
        raise ContractViolation("stale forward cache: network changed since forward()")
    g = np.asarray(upstream, dtype=float)
    n = cache.output.shape[0]
    g = np.broadcast_to(g.reshape(n, -1) if g.ndim else g, cache.output.shape)
    grads: list[LayerGrad] = [None] * len(net.layers)  # type: ignore[list-item]
    for l in range(len(net.layers) - 1, -1, -1):
        layer, lc = net.layers[l], cache.layers[l]
        total = np.broadcast_to(g[:, :, None], lc.phi.shape)
        if edge_grads is not None and edge_grads[l] is not None:
            total = total + edge_grads[l]
        total = np.where(layer.mask, total, 0.0)
        grads[l] = LayerGrad(
            w_b=np.einsum("noj,nj->oj", total, lc.silu),
            w_s=np.einsum("noj,noj->oj", total, lc.spline),
            coef=np.einsum("noj,nojb->ojb", total, lc.basis) * layer.w_s[:, :, None],
        )
        if l > 0:
            dB = basis_deriv_matrix(lc.x[:, None, :], layer.knots[None], layer.degree)
            dspl = np.einsum("nojb,ojb->noj", dB, layer.coef)
            dphi = layer.w_b * silu_deriv(lc.x)[:, None, :] + layer.w_s * dspl
            g = np.einsum("noj,noj->nj", total, dphi)
    return GradientSet(grads)


def backward(net: KanNetwork, cache: ForwardCache, upstream: float) -> GradientSet:
    """Gradient of ``upstream * prediction`` for a single-sample cache."""
    return backward_batch(net, cache, np.full(cache.output.shape[0], float(upstream)))


def edge_l1_norms(cache: ForwardCache) -> list[np.ndarray]:
    """Mean |phi| over the batch, one (out, in) array per layer."""
    return [np.abs(lc.phi).mean(axis=0) for lc in cache.layers]


def layer_entropy(norms: np.ndarray, mask: np.ndarray) -> float:
    """Entropy of the normalized edge norms over active edges (0 log 0 = 0)."""
    v = norms[mask]
    total = v.sum()
    if total <= 0:
        return 0.0
    p = v / total
    p = p[p > 0]
    return float(-(p * np.log(p)).sum())


def regularization_terms(net: KanNetwork, cache: ForwardCache, cfg: RegConfig):
    """Value of the regularizer plus (edge_grads, coef_grads) for backprop."""
    n = cache.output.shape[0]
    value = 0.0
    edge_grads, coef_grads = [], []
    for layer, lc in zip(net.layers, cache.layers):
        norms = np.abs(lc.phi).mean(axis=0)
        act = np.where(layer.mask, norms, 0.0)
        total = act.sum()
        S = layer_entropy(norms, layer.mask)
        coef_l1 = np.abs(np.where(layer.mask[:, :, None], layer.coef, 0.0)).sum()
        value += total + cfg.lam1 * S + cfg.lam2 * coef_l1

        # dS/dn_e = -(log p_e + S) / total, with p clipped away from 0
        if total > 0:
            p = np.maximum(act / total, 1e-300)
            dS = -(np.log(p) + S) / total
        else:
            dS = np.zeros_like(act)
        dn = np.where(layer.mask, 1.0 + cfg.lam1 * dS, 0.0)
        edge_grads.append(cfg.lam0 * dn * np.sign(lc.phi) / n)
        coef_grads.append(cfg.lam0 * cfg.lam2 * np.sign(layer.coef) * layer.mask[:, :, None])
    return cfg.lam0 * value, edge_grads, coef_grads


def regularization_loss(net: KanNetwork, cfg: RegConfig, batch):
    """Regularization value on ``batch`` and its gradient w.r.t. all parameters."""
    batch = np.asarray(batch, dtype=float)
    if batch.ndim != 2 or batch.shape[0] == 0:
        raise DomainError("regularization needs a non-empty (n, p) batch")
    _, cache = forward_batch(net, batch)
    value, edge_grads, coef_grads = regularization_terms(net, cache, cfg)
    grads = backward_batch(net, cache, np.zeros(cache.output.shape), edge_grads, check=False)
    for g, cg in zip(grads.layers, coef_grads):
        g.coef = g.coef + cg
    return value, grads


def prune(net: KanNetwork, theta: float, batch) -> KanNetwork:
    """Copy of ``net`` with edges of mean |phi| below ``theta`` masked out."""
    if theta < 0:
        raise DomainError("pruning threshold must be non-negative")
    _, cache = forward_batch(net, np.asarray(batch, dtype=float))
    out = net.copy()
    for layer, norms in zip(out.layers, edge_l1_norms(cache)):
        layer.mask = layer.mask & ~(norms < theta)
    return out


def network_to_dict(net: KanNetwork) -> dict:
    layers = []
    for layer in net.layers:
        edges = []
        for j in range(layer.out_dim):
            for i in range(layer.in_dim):
                edges.append(
                    {
                        "out": j,
                        "in": i,
                        "w_b": float(layer.w_b[j, i]),
                        "w_s": float(layer.w_s[j, i]),
                        "coefficients": layer.coef[j, i].tolist(),
                        "knots": layer.knots[j, i].tolist(),
                        "mask": bool(layer.mask[j, i]),
                    }
                )
        layers.append(
            {
                "in_dim": layer.in_dim,
                "out_dim": layer.out_dim,
                "degree": layer.degree,
                "grid_size": layer.grid_size,
                "domains": layer.domains.tolist(),
                "edges": edges,
            }
        )
    return {"format": NETWORK_FORMAT, "shape": list(net.shape), "seed": net.seed, "layers": layers}


def network_from_dict(doc: dict) -> KanNetwork:
    if doc.get("format") != NETWORK_FORMAT:
        raise ConfigError(f"unrecognized network format {doc.get('format')!r}")
    layers = []
    for ld in doc["layers"]:
        n_out, n_in = ld["out_dim"], ld["in_dim"]
        k, G = ld["degree"], ld["grid_size"]
        layer = KanLayer(
            w_b=np.zeros((n_out, n_in)),
            w_s=np.zeros((n_out, n_in)),
            coef=np.zeros((n_out, n_in, G + k)),
            knots=np.zeros((n_out, n_in, G + 2 * k + 1)),
            mask=np.zeros((n_out, n_in), dtype=bool),
            degree=k,
            grid_size=G,
            domains=np.array(ld["domains"], dtype=float),
        )
        for e in ld["edges"]:
            j, i = e["out"], e["in"]
            layer.w_b[j, i] = e["w_b"]
            layer.w_s[j, i] = e["w_s"]
            layer.coef[j, i] = e["coefficients"]
            layer.knots[j, i] = e["knots"]
            layer.mask[j, i] = e["mask"]
        layers.append(layer)
    return KanNetwork(tuple(doc["shape"]), layers, int(doc.get("seed", 0)))
