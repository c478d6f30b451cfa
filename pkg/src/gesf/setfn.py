"""Partially permutation invariant functions and their deep-set form.

A grouped input holds ``K`` groups of elements; a function is partially
permutation invariant when reordering elements inside any single group leaves
it unchanged. The deep-set form ``h(sum_n g_1(x_1n), ..., sum_n g_K(x_Kn))``
is invariant by construction; the helpers here check that numerically, build
invariant functions by brute force, and fit deep-set models to targets.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass

import numpy as np

from .diffnet import MlpParams, mlp_backward, mlp_forward, mlp_init
from .errors import PreconditionError, ResourceError

BRUTE_FORCE_LIMIT = 10**6


@dataclass(frozen=True, eq=False)
class GroupedInput:
    """``K`` groups; group ``k`` is an ``(N_k, e_k)`` array of elements."""

    groups: tuple

    def __post_init__(self):
        gs = []
        for k, grp in enumerate(self.groups):
            a = np.array(grp, dtype=float)
            if a.ndim == 1:
                a = a[:, None]
            if a.ndim != 2 or a.shape[0] == 0:
                raise ValueError(f"group {k} must hold at least one element")
            if not np.all(np.isfinite(a)):
                raise ValueError(f"group {k} has non-finite values")
            a.setflags(write=False)
            gs.append(a)
        if not gs:
            raise ValueError("need at least one group")
        object.__setattr__(self, "groups", tuple(gs))

    @property
    def sizes(self) -> tuple[int, ...]:
        return tuple(g.shape[0] for g in self.groups)

    @property
    def element_dims(self) -> tuple[int, ...]:
        return tuple(g.shape[1] for g in self.groups)

    @property
    def flat(self) -> np.ndarray:
        return np.concatenate([g.reshape(-1) for g in self.groups])

    def with_flat(self, vec) -> GroupedInput:
        """Same group layout filled from a flat vector."""
        vec = np.asarray(vec, dtype=float).reshape(-1)
        if vec.size != self.flat.size:
            raise ValueError(f"flat vector has {vec.size} entries, expected {self.flat.size}")
        out, pos = [], 0
        for g in self.groups:
            out.append(vec[pos:pos + g.size].reshape(g.shape))
            pos += g.size
        return GroupedInput(tuple(out))

    def permuted(self, perms) -> GroupedInput:
        return GroupedInput(tuple(g[list(p)] for g, p in zip(self.groups, perms)))


@dataclass
class DeepSetModel:
    g: list
    h: MlpParams

    def __post_init__(self):
        if not self.g:
            raise ValueError("need one inner network per group")
        width = sum(net.dims[-1] for net in self.g)
        if self.h.dims[0] != width:
            raise ValueError(f"outer network takes {self.h.dims[0]} inputs, pooled width is {width}")
        if self.h.dims[-1] != 1:
            raise ValueError("outer network must produce a scalar")

    def arrays(self) -> list[np.ndarray]:
        out = []
        for net in self.g:
            out += net.arrays()
        return out + self.h.arrays()


def random_deepset(element_dims, feature_dims, hidden=8, seed=0) -> DeepSetModel:
    """Random tanh deep-set model; ``hidden`` is one width or a list of layer widths."""
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    widths = [int(hidden)] if np.isscalar(hidden) else [int(w) for w in hidden]
    g = [mlp_init([e, *widths, m], seed=rng) for e, m in zip(element_dims, feature_dims)]
    h = mlp_init([sum(feature_dims), *widths, 1], seed=rng)
    return DeepSetModel(g, h)


def _check_model_input(m: DeepSetModel, x: GroupedInput):
    if len(m.g) != len(x.groups):
        raise ValueError(f"model has {len(m.g)} groups, input has {len(x.groups)}")
    for k, (net, grp) in enumerate(zip(m.g, x.groups)):
        if net.dims[0] != grp.shape[1]:
            raise ValueError(f"group {k}: element dim {grp.shape[1]} != network input {net.dims[0]}")


def deepset_eval(m: DeepSetModel, x: GroupedInput) -> float:
    """``h`` of the per-group pooled sums, pooled strictly left to right."""
    _check_model_input(m, x)
    pooled = []
    for net, grp in zip(m.g, x.groups):
        feats, _ = mlp_forward(net, grp)
        acc = np.zeros(feats.shape[1])
        for row in feats:
            acc = acc + row
        pooled.append(acc)
    out, _ = mlp_forward(m.h, np.concatenate(pooled))
    return float(out[0])


def _batch_forward(m: DeepSetModel, batch):
    """Vectorized forward over a list of ``(B, N_k, e_k)`` group arrays."""
    pooled, caches = [], []
    for net, arr in zip(m.g, batch):
        b, n, e = arr.shape
        feats, cache = mlp_forward(net, arr.reshape(b * n, e))
        pooled.append(feats.reshape(b, n, -1).sum(axis=1))
        caches.append((cache, n))
    z = np.concatenate(pooled, axis=1)
    y, hcache = mlp_forward(m.h, z)
    return y[:, 0], (caches, hcache)


def _batch_backward(m: DeepSetModel, tape, dy):
    caches, hcache = tape
    gh, dz = mlp_backward(m.h, hcache, dy[:, None])
    grads, pos = [], 0
    for net, (cache, n) in zip(m.g, caches):
        w = net.dims[-1]
        dpool = dz[:, pos:pos + w]
        pos += w
        gk, _ = mlp_backward(net, cache, np.repeat(dpool, n, axis=0))
        grads += gk.arrays()
    return grads + gh.arrays()


def _check_guard(sizes):
    count = math.prod(math.factorial(n) for n in sizes)
    if count > BRUTE_FORCE_LIMIT:
        raise ResourceError(f"{count} within-group permutations exceed the limit {BRUTE_FORCE_LIMIT}")
    return count


def all_permutations(sizes):
    """Every tuple of within-group permutations, in lexicographic order."""
    return itertools.product(*(itertools.permutations(range(n)) for n in sizes))


def brute_symmetrize(q, x: GroupedInput, unnormalized: bool = False) -> float:
    """Average of ``q(flat)`` over all within-group permutations of ``x``.

    ``unnormalized=True`` returns the plain sum instead of the average.
    """
    count = _check_guard(x.sizes)
    vals = [float(q(x.permuted(perms).flat)) for perms in all_permutations(x.sizes)]
    total = math.fsum(vals)
    return total if unnormalized else total / count


def power_sums(values, max_degree: int) -> np.ndarray:
    """``[sum x, sum x^2, ..., sum x^max_degree]``."""
    if max_degree < 1:
        raise ValueError("max_degree must be >= 1")
    v = np.asarray(values, dtype=float).reshape(-1)
    return np.array([np.sum(v ** d) for d in range(1, max_degree + 1)])


def _check_partition(lam):
    lam = tuple(int(a) for a in lam)
    if any(a < 0 for a in lam):
        raise ValueError(f"negative exponent in {lam}")
    if any(a < b for a, b in zip(lam, lam[1:])):
        raise ValueError(f"exponents {lam} are not sorted non-increasing")
    return lam


def monomial_sym(lam, values) -> float:
    """Monomial symmetric polynomial: sum over the distinct rearrangements of ``lam``."""
    lam = _check_partition(lam)
    v = np.asarray(values, dtype=float).reshape(-1)
    if v.size != len(lam):
        raise ValueError(f"{len(lam)} exponents for {v.size} values")
    terms = [float(np.prod(v ** np.array(alpha))) for alpha in sorted(set(itertools.permutations(lam)))]
    return math.fsum(terms)


def appendix_example(x11: float, x12: float, x21: float, x22: float) -> tuple[float, float]:
    """An eight-monomial invariant polynomial and its factored form ``(expanded, factored)``."""
    expanded = (x11 * x12**2 * x21 * x22**2 + x11**2 * x12 * x21**2 * x22
                + x11 * x12**2 * x21**2 * x22 + x11**2 * x12 * x21 * x22**2
                + x11**2 * x12**3 * x21**3 * x22**4 + x11**3 * x12**2 * x21**4 * x22**3
                + x11**2 * x12**3 * x21**4 * x22**3 + x11**3 * x12**2 * x21**3 * x22**4)
    g1, g2 = (x11, x12), (x21, x22)
    factored = (monomial_sym((2, 1), g1) * monomial_sym((2, 1), g2)
                + monomial_sym((3, 2), g1) * monomial_sym((4, 3), g2))
    return expanded, factored


def partitions_up_to(n: int, max_part: int):
    """All non-increasing exponent vectors of length ``n`` with entries in ``[0, max_part]``."""
    return [lam for lam in itertools.product(range(max_part, -1, -1), repeat=n)
            if all(a >= b for a, b in zip(lam, lam[1:]))]


def _power_products(degree: int, n: int):
    """Exponent tuples ``(a_1..a_n)`` with ``sum_k k*a_k == degree``."""
    ranges = [range(degree // k + 1) for k in range(1, n + 1)]
    return [a for a in itertools.product(*ranges)
            if sum((k + 1) * ak for k, ak in enumerate(a)) == degree]


def power_sum_expansion(lam, samples: int | None = None, seed: int = 0):
    """Write ``m^lam`` as a polynomial in ``p_1..p_n`` by least squares on sampled points.

    Returns ``(coefficients, residual)``: a dict from power-product exponents
    to coefficients, and the max relative error on fresh points.
    """
    lam = _check_partition(lam)
    n = len(lam)
    basis = _power_products(sum(lam), n)
    rng = np.random.default_rng(seed)
    samples = samples or 4 * len(basis) + 20

    def design(pts):
        ps = np.array([power_sums(p, n) for p in pts])
        return np.array([[np.prod(row ** np.array(a)) for a in basis] for row in ps])

    pts = rng.uniform(-1.0, 1.0, size=(samples, n))
    target = np.array([monomial_sym(lam, p) for p in pts])
    coef, *_ = np.linalg.lstsq(design(pts), target, rcond=None)
    fresh = rng.uniform(-1.0, 1.0, size=(samples, n))
    truth = np.array([monomial_sym(lam, p) for p in fresh])
    err = np.abs(design(fresh) @ coef - truth) / np.maximum(1.0, np.abs(truth))
    return dict(zip(basis, coef.tolist())), float(err.max())


def sample_inputs(rng, sizes, element_dims, count: int):
    """``count`` grouped inputs drawn uniformly from ``[-1, 1]``, as per-group batches."""
    return [rng.uniform(-1.0, 1.0, size=(count, n, e)) for n, e in zip(sizes, element_dims)]


def _as_inputs(batch, i):
    return GroupedInput(tuple(arr[i] for arr in batch))


def invariance_deviation(f, sizes, element_dims=None, probes: int = 100, seed: int = 0) -> float:
    """Max relative change of ``f`` under random within-group permutations."""
    element_dims = element_dims or (1,) * len(sizes)
    rng = np.random.default_rng(seed)
    batch = sample_inputs(rng, sizes, element_dims, probes)
    worst = 0.0
    for i in range(probes):
        x = _as_inputs(batch, i)
        perms = [rng.permutation(n) for n in sizes]
        a, b = float(f(x)), float(f(x.permuted(perms)))
        worst = max(worst, abs(a - b) / max(1.0, abs(a)))
    return worst


def fit_invariant(target, sizes, feature_dims=None, train_n: int = 65536, seed: int = 0,
                  steps: int = 5000, hidden=(32, 32), lr: float = 2e-3, batch_size: int = 256,
                  test_n: int = 4096, element_dims=None, relative: bool = False):
    """Fit a deep-set model to an invariant ``target`` on inputs uniform in ``[-1, 1]``.

    Training is minibatch Adam on squared error. Returns ``(model, test_mse)``;
    with ``relative=True`` the test MSE is divided by the target variance on
    the test sample.
    """
    sizes = tuple(int(n) for n in sizes)
    element_dims = tuple(element_dims or (1,) * len(sizes))
    feature_dims = tuple(feature_dims or (8,) * len(sizes))
    dev = invariance_deviation(target, sizes, element_dims, probes=100, seed=seed)
    if dev > 1e-8:
        raise PreconditionError(f"target is not partially invariant (deviation {dev:.3e})")

    rng = np.random.default_rng(seed)
    train = sample_inputs(rng, sizes, element_dims, train_n)
    test = sample_inputs(rng, sizes, element_dims, test_n)
    y_train = np.array([float(target(_as_inputs(train, i))) for i in range(train_n)])
    y_test = np.array([float(target(_as_inputs(test, i))) for i in range(test_n)])

    # fit standardized targets, then fold the scale into the last layer
    shift = float(np.mean(y_train))
    scale = float(np.std(y_train)) or 1.0
    y_fit = (y_train - shift) / scale

    m = random_deepset(element_dims, feature_dims, hidden=hidden, seed=rng)
    params = m.arrays()
    mom = [np.zeros_like(p) for p in params]
    vel = [np.zeros_like(p) for p in params]
    b1, b2 = 0.9, 0.999
    batch_size = min(batch_size, train_n)
    for step in range(1, steps + 1):
        idx = rng.integers(0, train_n, size=batch_size)
        pred, tape = _batch_forward(m, [arr[idx] for arr in train])
        resid = pred - y_fit[idx]
        grads = _batch_backward(m, tape, 2.0 * resid / batch_size)
        # cosine decay helps the final digits of precision
        rate = lr * 0.5 * (1.0 + math.cos(math.pi * step / steps))
        for p, g, s1, s2 in zip(params, grads, mom, vel):
            s1 *= b1
            s1 += (1 - b1) * g
            s2 *= b2
            s2 += (1 - b2) * g * g
            p -= rate * (s1 / (1 - b1**step)) / (np.sqrt(s2 / (1 - b2**step)) + 1e-8)

    m.h.weights[-1] *= scale
    m.h.biases[-1] *= scale
    m.h.biases[-1] += shift
    pred, _ = _batch_forward(m, test)
    mse = float(np.mean((pred - y_test) ** 2))
    if relative:
        var = float(np.var(y_test))
        mse = mse / var if var > 0 else mse
    return m, mse
