"""Numerical property batteries and the naive reference implementations they use.

Each suite returns a list of :class:`CheckResult`; a check passes when its
worst observed deviation is within tolerance.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass

import numpy as np

from .diffnet import logistic_label, mlp_backward, mlp_forward, mlp_init, numeric_grad, softmax_ce
from .graph import Graph, adjacency, make_split
from .model import GesfModel, TrainConfig, init_model, objective, represent, represent_batch
from .setfn import (GroupedInput, all_permutations, appendix_example, brute_symmetrize,
                    deepset_eval, monomial_sym, partitions_up_to, power_sum_expansion,
                    power_sums, random_deepset)
from .spectral import eigh_truncated, jacobi_eigh, proximity_column, proximity_column_grad


@dataclass(frozen=True)
class CheckResult:
    name: str
    deviation: float
    tolerance: float
    seconds: float = 0.0

    @property
    def passed(self) -> bool:
        return bool(self.deviation <= self.tolerance)

    def line(self) -> str:
        status = "PASS" if self.passed else "FAIL"
        return f"{status}  {self.name:<40} max dev {self.deviation:.3e}  (tol {self.tolerance:.0e})"


def _timed(name, tol, fn):
    t0 = time.perf_counter()
    dev = float(fn())
    return CheckResult(name, dev, tol, time.perf_counter() - t0)


def _rel(a, b) -> float:
    a, b = np.asarray(a, dtype=float), np.asarray(b, dtype=float)
    scale = max(1.0, float(np.max(np.abs(a), initial=0.0)), float(np.max(np.abs(b), initial=0.0)))
    return float(np.max(np.abs(a - b), initial=0.0)) / scale


def group_rel_error(analytic, numeric) -> float:
    """Max absolute difference relative to the larger max magnitude (floored at 1e-8)."""
    a, n = np.asarray(analytic, dtype=float), np.asarray(numeric, dtype=float)
    scale = max(float(np.max(np.abs(a), initial=0.0)), float(np.max(np.abs(n), initial=0.0)), 1e-8)
    return float(np.max(np.abs(a - n), initial=0.0)) / scale


# ---------------------------------------------------------------- instances

def random_graph(rng, n: int, p: float = 0.3, num_types: int = 1, mode: str = "multiclass",
                 num_classes: int = 3) -> Graph:
    """Erdos-Renyi graph; type 0 is labeled and always holds at least two nodes."""
    iu, ju = np.triu_indices(n, k=1)
    keep = rng.random(iu.size) < p
    edges = np.stack([iu[keep], ju[keep]], axis=1)
    types = np.concatenate([[0, 0], np.arange(1, num_types), rng.integers(0, num_types, n - num_types - 1)])
    types = rng.permutation(types[:n])
    labels = {}
    for v in np.flatnonzero(types == 0):
        if mode == "multiclass":
            labels[int(v)] = int(rng.integers(num_classes))
        else:
            labels[int(v)] = {int(i) for i in np.flatnonzero(rng.random(num_classes) < 0.5)}
    if mode == "multiclass":
        # every class index below num_classes appears at least once when possible
        for c, v in zip(range(num_classes), sorted(labels)):
            labels[v] = c
    return Graph(n=n, node_type=types, edges=edges, labels=labels, mode=mode)


def small_config(g: Graph, seed: int, **kw) -> TrainConfig:
    base = dict(dims=[3], psi_dim=4, hidden=5, rank=g.n, seed=seed, mode=g.mode,
                lambdas=[0.5], lambda_w=0.1, init_scale=0.5, epochs=1, batch_size=g.n)
    base.update(kw)
    return TrainConfig(**base)


def random_instance(seed: int, n: int = 6, num_types: int = 2, mode: str = "multiclass"):
    """(graph, config, model, full-rank basis, split) with small random dimensions."""
    rng = np.random.default_rng(seed)
    g = random_graph(rng, n, p=0.4, num_types=num_types, mode=mode)
    dims = [int(d) for d in rng.integers(2, 4, size=num_types)]
    cfg = small_config(g, seed, dims=dims, lambdas=[float(x) for x in rng.uniform(0.3, 2.0, num_types)])
    m = init_model(g, cfg, num_outputs=3)
    basis = eigh_truncated(adjacency(g), g.n)
    # a non-trivial filter network so rho gradients are informative
    m.rho = mlp_init([1, 3, 1], seed=rng)
    m.rho.biases[-1][:] = 0.3
    split = make_split(g, 0.5, seed)
    return g, cfg, m, basis, split


# ---------------------------------------------------------------- references

def naive_represent(m: GesfModel, basis, g: Graph, v: int, filt=None) -> np.ndarray:
    """R(v) by explicit loops: proximity entries, per-node psi, then phi."""
    if filt is None:
        filt = [float(mlp_forward(m.rho, np.array([s]))[0][0]) for s in basis.sigma]
    U = basis.U
    prox = []
    for u in range(g.n):
        acc = 0.0
        for i in range(basis.rank):
            acc += U[u, i] * filt[i] * U[v, i]
        prox.append(acc)
    return _pool_and_phi(m, g, v, prox)


def _pool_and_phi(m, g, v, prox):
    pooled = []
    for k, part in enumerate(g.type_partition):
        s = np.zeros(m.psi[k].dims[-1])
        for j, u in enumerate(part):
            s = s + prox[u] * mlp_forward(m.psi[k], m.X[k][j])[0]
        pooled.append(s)
    t = int(g.node_type[v])
    return mlp_forward(m.phi[t], np.concatenate(pooled))[0]


def walk_represent(m: GesfModel, g: Graph, v: int, coeffs) -> np.ndarray:
    """R(v) with proximity ``sum_n coeffs[n] * (#walks of length n from v)``."""
    counts = np.zeros(g.n)
    counts[v] = 1.0
    prox = coeffs[0] * counts
    for c in coeffs[1:]:
        nxt = np.zeros(g.n)
        for u in range(g.n):
            for w in g.adjacency_lists[u]:
                nxt[w] += counts[u]
        counts = nxt
        prox = prox + c * counts
    return _pool_and_phi(m, g, v, prox)


def relabel_within_type(g: Graph, m: GesfModel, k: int, perm):
    """Relabel the nodes of type ``k`` by ``perm``; returns (graph, model, new_id)."""
    part = g.type_partition[k]
    new_id = np.arange(g.n)
    new_id[part] = part[np.asarray(perm)]
    edges = new_id[g.edges]
    labels = {int(new_id[v]): y for v, y in g.labels.items()}
    g2 = Graph(n=g.n, node_type=g.node_type, edges=edges, labels=labels, mode=g.mode)
    m2 = m.copy()
    # node part[j] moves to part[perm[j]], so its row moves to perm[j]
    rows = np.empty_like(np.asarray(perm))
    rows[np.asarray(perm)] = np.arange(part.size)
    m2.X[k] = m.X[k][rows]
    return g2, m2, new_id


# ---------------------------------------------------------------- suites

def oracle_suite(seed: int = 0, models: int = 100) -> list[CheckResult]:
    rng = np.random.default_rng(seed)

    def invariance():
        worst = 0.0
        for _ in range(models):
            K = int(rng.integers(1, 4))
            sizes = tuple(int(rng.integers(1, hi + 1)) for hi in (3, 3, 2)[:K])
            edims = tuple(int(rng.integers(1, 3)) for _ in range(K))
            m = random_deepset(edims, tuple(int(rng.integers(1, 4)) for _ in range(K)),
                               hidden=int(rng.integers(2, 6)), seed=rng)
            x = GroupedInput(tuple(rng.normal(size=(n, e)) for n, e in zip(sizes, edims)))
            base = deepset_eval(m, x)
            for perms in all_permutations(sizes):
                worst = max(worst, _rel(base, deepset_eval(m, x.permuted(perms))))
            sym = brute_symmetrize(lambda flat, m=m, x=x: deepset_eval(m, x.with_flat(flat)), x)
            worst = max(worst, _rel(base, sym))
        return worst

    def worked_example():
        pts = rng.uniform(-2.0, 2.0, size=(1000, 4))
        worst = max(_rel(*appendix_example(*p)) for p in pts)
        e, f = appendix_example(1, 2, 1, 2)
        return max(worst, abs(e - 324), abs(f - 324))

    def m21_identity():
        worst = 0.0
        for _ in range(100):
            x = rng.uniform(-2.0, 2.0, size=2)
            p1, p2, p3 = power_sums(x, 3)
            worst = max(worst, _rel(monomial_sym((2, 1), x), p1 * p2 - p3))
        return worst

    def power_sum_basis():
        return max(power_sum_expansion(lam, seed=seed)[1]
                   for n in (1, 2, 3) for lam in partitions_up_to(n, 3))

    return [
        _timed("deepset permutation invariance", 1e-9, invariance),
        _timed("worked example expanded vs factored", 1e-9, worked_example),
        _timed("m^(2,1) = p1 p2 - p3", 1e-9, m21_identity),
        _timed("monomials from power sums", 1e-8, power_sum_basis),
    ]


def spectral_suite(seed: int = 0, graphs: int = 20) -> list[CheckResult]:
    rng = np.random.default_rng(seed)
    cases = []
    for _ in range(graphs):
        n = int(rng.integers(2, 51))
        g = random_graph(rng, n, p=float(rng.uniform(0.05, 0.6)))
        cases.append(adjacency(g))

    def reconstruction():
        worst = 0.0
        for a in cases:
            b = eigh_truncated(a, a.shape[0], method="jacobi")
            worst = max(worst, float(np.max(np.abs(b.U @ np.diag(b.sigma) @ b.U.T - a))),
                        float(np.max(np.abs(b.U.T @ b.U - np.eye(b.rank)))))
        return worst

    def poly_bridge():
        worst = 0.0
        for a in cases:
            b = eigh_truncated(a, a.shape[0])
            c = rng.normal(size=3)
            filt = c[0] + c[1] * b.sigma + c[2] * b.sigma**2
            dense = c[0] * np.eye(a.shape[0]) + c[1] * a + c[2] * a @ a
            for v in range(a.shape[0]):
                worst = max(worst, float(np.max(np.abs(proximity_column(b, filt, v) - dense[:, v]))))
        return worst

    def analytic():
        k2 = eigh_truncated(np.array([[0.0, 1.0], [1.0, 0.0]]), 2)
        p3 = eigh_truncated(np.array([[0.0, 1, 0], [1, 0, 1], [0, 1, 0]]), 3)
        r2 = math.sqrt(2.0)
        return max(float(np.max(np.abs(k2.sigma - [1.0, -1.0]))),
                   float(np.max(np.abs(p3.sigma - [r2, -r2, 0.0]))))

    def monotone():
        worst = 0.0
        for a in cases[:5]:
            full = eigh_truncated(a, a.shape[0])
            errs = [np.linalg.norm(full.U[:, :r] @ np.diag(full.sigma[:r]) @ full.U[:, :r].T - a)
                    for r in range(1, a.shape[0] + 1)]
            worst = max(worst, max((max(0.0, e2 - e1) for e1, e2 in zip(errs, errs[1:])), default=0.0))
        return worst

    def solver_agreement():
        worst = 0.0
        for a in cases:
            w1 = np.sort(jacobi_eigh(a)[0])
            w2 = np.linalg.eigvalsh(a)
            worst = max(worst, float(np.max(np.abs(w1 - w2))))
        return worst

    return [
        _timed("full-rank reconstruction", 1e-8, reconstruction),
        _timed("polynomial filter vs matrix powers", 1e-8, poly_bridge),
        _timed("analytic spectra K2 and P3", 1e-12, analytic),
        _timed("truncation error monotone in rank", 1e-10, monotone),
        _timed("jacobi vs lapack eigenvalues", 1e-9, solver_agreement),
    ]


def model_gradient_errors(seed: int, mode: str = "multiclass") -> dict:
    """Per-parameter-block relative error of objective gradients vs central differences."""
    g, cfg, m, basis, split = random_instance(seed, n=6, num_types=2, mode=mode)
    nodes = np.arange(g.n)
    _, grads = objective(m, basis, g, split, cfg, nodes)
    f = lambda: objective(m, basis, g, split, cfg, nodes)[0]
    out = {}
    for (name, arr), (_, gan) in zip(m.named_arrays(), grads.named_arrays()):
        out[name] = group_rel_error(gan, numeric_grad(f, arr, eps=1e-6))
    return out


def grad_suite(seed: int = 0, seeds: int = 10) -> list[CheckResult]:
    rng = np.random.default_rng(seed)

    def model_grads(mode):
        def run():
            worst = 0.0
            for s in range(seed, seed + seeds):
                worst = max(worst, max(model_gradient_errors(s, mode).values()))
            return worst
        return run

    def mlp_grads():
        worst = 0.0
        for _ in range(5):
            p = mlp_init([3, 4, 2], seed=rng)
            x = rng.normal(size=(5, 3))
            dy = rng.normal(size=(5, 2))
            y, cache = mlp_forward(p, x)
            grads, dx = mlp_backward(p, cache, dy)
            f = lambda: float(np.sum(mlp_forward(p, x)[0] * dy))
            for a, ga in zip(p.arrays(), grads.arrays()):
                worst = max(worst, group_rel_error(ga, numeric_grad(f, a)))
            worst = max(worst, group_rel_error(dx, numeric_grad(f, x)))
        return worst

    def loss_grads():
        worst = 0.0
        for _ in range(5):
            z = rng.normal(size=4)
            _, dz = softmax_ce(z, 2)
            worst = max(worst, group_rel_error(dz, numeric_grad(lambda: softmax_ce(z, 2)[0], z)))
            s = rng.normal(size=3)
            y = (rng.random(3) < 0.5).astype(float)
            _, ds = logistic_label(s, y)
            fn = lambda: float(np.sum(logistic_label(s, y)[0]))
            worst = max(worst, group_rel_error(ds, numeric_grad(fn, s)))
        return worst

    def prox_grads():
        worst = 0.0
        for _ in range(5):
            a = adjacency(random_graph(rng, 8, p=0.4))
            b = eigh_truncated(a, 6)
            filt = rng.normal(size=6)
            up = rng.normal(size=8)
            ga = proximity_column_grad(b, 3, up)
            gn = numeric_grad(lambda: float(up @ proximity_column(b, filt, 3)), filt)
            worst = max(worst, group_rel_error(ga, gn))
        return worst

    return [
        _timed("objective gradients (multiclass)", 1e-4, model_grads("multiclass")),
        _timed("objective gradients (multilabel)", 1e-4, model_grads("multilabel")),
        _timed("mlp backward", 1e-6, mlp_grads),
        _timed("softmax and logistic losses", 1e-6, loss_grads),
        _timed("proximity column gradient", 1e-6, prox_grads),
    ]


def model_suite(seed: int = 0, instances: int = 50) -> list[CheckResult]:
    rng = np.random.default_rng(seed)
    seeds = rng.integers(0, 2**31, size=instances)

    def instance(s, n_max):
        r = np.random.default_rng(s)
        n = int(r.integers(3, n_max + 1))
        k = int(r.integers(1, min(3, n - 1) + 1))
        return random_instance(int(s), n=n, num_types=k)

    def fast_vs_naive():
        worst = 0.0
        for s in seeds:
            g, _, m, basis, _ = instance(s, 12)
            fast = represent_batch(m, basis, g, np.arange(g.n))
            for v in range(g.n):
                worst = max(worst, float(np.max(np.abs(fast[v] - naive_represent(m, basis, g, v)))))
        return worst

    def permutation():
        worst = 0.0
        for s in seeds:
            g, _, m, basis, _ = instance(s, 12)
            r = np.random.default_rng(s + 1)
            k = int(r.integers(g.num_types))
            perm = r.permutation(g.type_partition[k].size)
            g2, m2, new_id = relabel_within_type(g, m, k, perm)
            basis2 = eigh_truncated(adjacency(g2), g2.n)
            before = represent_batch(m, basis, g, np.arange(g.n))
            after = represent_batch(m2, basis2, g2, new_id)
            worst = max(worst, max(float(np.max(np.abs(a - b))) for a, b in zip(before, after)))
        return worst

    def walk_bridge():
        worst = 0.0
        for s in seeds[:20]:
            g, _, m, basis, _ = instance(s, 10)
            c = np.random.default_rng(s).normal(size=3)
            filt = c[0] + c[1] * basis.sigma + c[2] * basis.sigma**2
            for v in range(g.n):
                worst = max(worst, float(np.max(np.abs(
                    represent(m, basis, g, v, filt=filt) - walk_represent(m, g, v, c)))))
        return worst

    return [
        _timed("factored vs naive representation", 1e-10, fast_vs_naive),
        _timed("within-type relabeling", 1e-9, permutation),
        _timed("spectral vs walk-sum proximity", 1e-8, walk_bridge),
    ]


SUITES = {
    "oracle": oracle_suite,
    "spectral": spectral_suite,
    "grad": grad_suite,
    "model": model_suite,
}


def run_suite(name: str) -> list[CheckResult]:
    """Run one suite by name, or every suite for ``"all"``."""
    if name == "all":
        return [r for fn in SUITES.values() for r in fn()]
    if name not in SUITES:
        raise KeyError(name)
    return SUITES[name]()
