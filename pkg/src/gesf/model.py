"""GESF node embeddings: set-function representation, objective and training.

A node ``v`` of type ``t`` is represented as::

    R(v) = phi_t( concat_k  sum_{u in V_k} P[u, v] * psi_k(x_u) )

with ``P = U diag(rho(sigma)) U^T``. Embeddings are stored row-major: the
block for type ``k`` has shape ``(|V_k|, d_k)``.
"""

from __future__ import annotations

import dataclasses
import json
import math
from dataclasses import dataclass, field

import numpy as np

from .diffnet import MlpParams, logistic_label, mlp_backward, mlp_forward, mlp_init, sigmoid, softmax_ce
from .errors import ConfigurationError, TrainingError
from .graph import MODES, Graph, Split, adjacency
from .spectral import SpectralBasis, cached_basis, normalized_adjacency

OPTIMIZERS = ("sgd", "momentum", "adam")


@dataclass
class TrainConfig:
    lambdas: list = field(default_factory=lambda: [1e-3])
    lambda_w: float = 1e-3
    rank: int = 1000
    dims: list = field(default_factory=lambda: [64])
    psi_dim: int = 64
    hidden: int = 64
    lr: float = 0.003
    epochs: int = 400
    batch_size: int = 256
    seed: int = 0
    mode: str = "multiclass"
    init_scale: float = 0.1
    labeled_type: int = 0
    optimizer: str = "adam"
    momentum: float = 0.9
    normalize: bool = False
    eig_selection: str = "magnitude"
    eig_method: str = "auto"

    def __post_init__(self):
        self.lambdas = [float(x) for x in np.atleast_1d(self.lambdas)]
        self.dims = [int(x) for x in np.atleast_1d(self.dims)]
        if any(x <= 0 for x in self.lambdas):
            raise ConfigurationError("every lambda_k must be positive")
        if self.lambda_w < 0:
            raise ConfigurationError("lambda_w must be non-negative")
        for name in ("rank", "psi_dim", "hidden", "epochs", "batch_size"):
            if int(getattr(self, name)) <= 0:
                raise ConfigurationError(f"{name} must be positive")
        if any(d <= 0 for d in self.dims):
            raise ConfigurationError("embedding dims must be positive")
        if self.lr <= 0 or self.init_scale <= 0:
            raise ConfigurationError("lr and init_scale must be positive")
        if self.mode not in MODES:
            raise ConfigurationError(f"unknown mode {self.mode!r}")
        if self.optimizer not in OPTIMIZERS:
            raise ConfigurationError(f"unknown optimizer {self.optimizer!r}")

    def per_type(self, name: str, k: int) -> list:
        vals = getattr(self, name)
        if len(vals) == 1:
            return vals * k
        if len(vals) != k:
            raise ConfigurationError(f"{name} has {len(vals)} entries for {k} node types")
        return list(vals)

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> TrainConfig:
        known = {f.name for f in dataclasses.fields(cls)}
        unknown = sorted(set(d) - known)
        if unknown:
            raise ConfigurationError(f"unknown config keys: {', '.join(unknown)}")
        return cls(**d)

    @classmethod
    def load(cls, path) -> TrainConfig:
        with open(path) as fh:
            return cls.from_dict(json.load(fh))


@dataclass
class GesfModel:
    X: list
    psi: list
    phi: list
    rho: MlpParams
    W: np.ndarray
    b: np.ndarray
    node_type: np.ndarray
    labeled_type: int = 0
    mode: str = "multiclass"

    @property
    def num_types(self) -> int:
        return len(self.X)

    def named_arrays(self) -> list[tuple[str, np.ndarray]]:
        """Every learnable array with a stable name, in a fixed order."""
        out = [(f"X.{k}", x) for k, x in enumerate(self.X)]
        for tag, nets in (("psi", self.psi), ("phi", self.phi)):
            for k, net in enumerate(nets):
                for i, (w, b) in enumerate(zip(net.weights, net.biases)):
                    out += [(f"{tag}.{k}.W{i}", w), (f"{tag}.{k}.b{i}", b)]
        for i, (w, b) in enumerate(zip(self.rho.weights, self.rho.biases)):
            out += [(f"rho.W{i}", w), (f"rho.b{i}", b)]
        out += [("classifier.W", self.W), ("classifier.b", self.b)]
        return out

    def zeros_like(self) -> GesfModel:
        return GesfModel(
            X=[np.zeros_like(x) for x in self.X],
            psi=[p.zeros_like() for p in self.psi],
            phi=[p.zeros_like() for p in self.phi],
            rho=self.rho.zeros_like(),
            W=np.zeros_like(self.W), b=np.zeros_like(self.b),
            node_type=self.node_type, labeled_type=self.labeled_type, mode=self.mode)

    def copy(self) -> GesfModel:
        return GesfModel(
            X=[x.copy() for x in self.X], psi=[p.copy() for p in self.psi],
            phi=[p.copy() for p in self.phi], rho=self.rho.copy(),
            W=self.W.copy(), b=self.b.copy(), node_type=self.node_type,
            labeled_type=self.labeled_type, mode=self.mode)

    def embedding(self, v: int) -> np.ndarray:
        k = int(self.node_type[v])
        return self.X[k][_local_index(self.node_type)[v]]


def _local_index(node_type):
    idx = np.empty(node_type.size, dtype=np.int64)
    for k in range(int(node_type.max()) + 1):
        part = np.flatnonzero(node_type == k)
        idx[part] = np.arange(part.size)
    return idx


def init_model(g: Graph, cfg: TrainConfig, num_outputs: int) -> GesfModel:
    rng = np.random.default_rng(cfg.seed)
    K = g.num_types
    dims = cfg.per_type("dims", K)
    if not 0 <= cfg.labeled_type < K:
        raise ConfigurationError(f"labeled_type {cfg.labeled_type} not in [0, {K})")
    X = [rng.normal(0.0, cfg.init_scale, size=(part.size, d))
         for part, d in zip(g.type_partition, dims)]
    psi = [mlp_init([d, cfg.hidden, cfg.psi_dim], seed=rng) for d in dims]
    phi = [mlp_init([K * cfg.psi_dim, cfg.hidden, d], seed=rng) for d in dims]
    rho = mlp_init([1, 3, 1], seed=rng)
    clf = mlp_init([dims[cfg.labeled_type], num_outputs], seed=rng)
    return GesfModel(X, psi, phi, rho, clf.weights[0], clf.biases[0],
                     node_type=np.array(g.node_type), labeled_type=cfg.labeled_type,
                     mode=cfg.mode)


def type_blocks(basis: SpectralBasis, g: Graph) -> tuple:
    """Rows of U grouped by node type, cached on the basis object."""
    cache = basis.__dict__.setdefault("_type_blocks", {})
    key = g.node_type.tobytes()
    if key not in cache:
        cache.clear()
        cache[key] = tuple(np.ascontiguousarray(basis.U[part]) for part in g.type_partition)
    return cache[key]


def _check_dims(m: GesfModel, basis: SpectralBasis, g: Graph):
    if basis.n != g.n:
        raise ValueError(f"basis has {basis.n} rows but graph has {g.n} nodes")
    if m.num_types != g.num_types or not np.array_equal(m.node_type, g.node_type):
        raise ValueError("model node types do not match the graph")
    for k, part in enumerate(g.type_partition):
        if m.X[k].shape[0] != part.size:
            raise ValueError(f"embedding block {k} has {m.X[k].shape[0]} rows, expected {part.size}")


def _forward(m: GesfModel, basis: SpectralBasis, g: Graph, nodes: np.ndarray, filt=None):
    """Batched R(v) for ``nodes``; returns (R rows aligned with nodes, tape)."""
    _check_dims(m, basis, g)
    blocks = type_blocks(basis, g)
    tape = {"nodes": nodes, "blocks": blocks}
    if filt is None:
        out, tape["rho"] = mlp_forward(m.rho, basis.sigma[:, None])
        f = out[:, 0]
    else:
        f = np.asarray(filt, dtype=float)
        if f.shape != (basis.rank,):
            raise ValueError(f"filter has shape {f.shape}, expected ({basis.rank},)")
    G = basis.U[nodes] * f
    tape["G"], tape["Unodes"] = G, basis.U[nodes]
    Ms, caches, S = [], [], []
    for k in range(m.num_types):
        psi_out, cache = mlp_forward(m.psi[k], m.X[k])
        M = psi_out.T @ blocks[k]
        Ms.append(M)
        caches.append(cache)
        S.append(G @ M.T)
    tape["M"], tape["psi"] = Ms, caches
    Z = np.concatenate(S, axis=1)
    tape["Z"] = Z
    types = g.node_type[nodes]
    dmax = max(x.shape[1] for x in m.X)
    R = np.zeros((nodes.size, dmax))
    tape["phi"] = {}
    for t in np.unique(types):
        rows = np.flatnonzero(types == t)
        out, cache = mlp_forward(m.phi[t], Z[rows])
        R[rows, : out.shape[1]] = out
        tape["phi"][int(t)] = (rows, cache)
    return R, tape


def _backward(m: GesfModel, tape, dR: np.ndarray, grads: GesfModel):
    """Accumulate gradients of ``<dR, R>`` into ``grads``; returns d(filter)."""
    dZ = np.zeros_like(tape["Z"])
    for t, (rows, cache) in tape["phi"].items():
        d = m.X[t].shape[1]
        gp, dz = mlp_backward(m.phi[t], cache, dR[rows, :d])
        _accumulate(grads.phi[t], gp)
        dZ[rows] = dz
    G = tape["G"]
    dG = np.zeros_like(G)
    dpsi = m.psi[0].dims[-1]
    for k in range(m.num_types):
        dS = dZ[:, k * dpsi:(k + 1) * dpsi]
        dM = dS.T @ G
        dG += dS @ tape["M"][k]
        dpsi_out = tape["blocks"][k] @ dM.T
        gp, dx = mlp_backward(m.psi[k], tape["psi"][k], dpsi_out)
        _accumulate(grads.psi[k], gp)
        grads.X[k] += dx
    df = np.sum(dG * tape["Unodes"], axis=0)
    if "rho" in tape:
        gp, _ = mlp_backward(m.rho, tape["rho"], df[:, None])
        _accumulate(grads.rho, gp)
    return df


def _accumulate(into: MlpParams, g: MlpParams):
    for a, b in zip(into.arrays(), g.arrays()):
        a += b


def represent_batch(m: GesfModel, basis: SpectralBasis, g: Graph, nodes, filt=None) -> list:
    """R(v) for several nodes; each entry has the dimension of its node's type."""
    nodes = np.asarray(nodes, dtype=np.int64).reshape(-1)
    R, _ = _forward(m, basis, g, nodes, filt)
    return [R[i, : m.X[g.node_type[v]].shape[1]].copy() for i, v in enumerate(nodes)]


def represent(m: GesfModel, basis: SpectralBasis, g: Graph, v: int, filt=None) -> np.ndarray:
    if not 0 <= v < g.n:
        raise ValueError(f"node {v} out of range")
    return represent_batch(m, basis, g, [v], filt)[0]


def _label_targets(g: Graph, nodes, mode, num_outputs):
    if mode == "multiclass":
        return np.array([g.labels[v] for v in nodes], dtype=np.int64)
    Y = np.zeros((len(nodes), num_outputs))
    for i, v in enumerate(nodes):
        Y[i, list(g.labels[v])] = 1.0
    return Y


def objective(m: GesfModel, basis: SpectralBasis, g: Graph, split: Split, cfg: TrainConfig,
              node_batch, filt=None, parts: bool = False):
    """Batch contribution to the training objective and its gradients.

    Summed over a partition of the nodes this equals the full objective.
    With ``parts=True`` the loss is returned as a dict with the
    ``representation``, ``supervised`` and ``regularizer`` terms.
    """
    nodes = np.asarray(node_batch, dtype=np.int64).reshape(-1)
    if nodes.size == 0:
        raise ValueError("empty node batch")
    if nodes.min() < 0 or nodes.max() >= g.n:
        raise ValueError("batch node out of range")
    K = g.num_types
    lambdas = cfg.per_type("lambdas", K)
    sizes = [p.size for p in g.type_partition]
    local = g.local_index
    types = g.node_type[nodes]
    grads = m.zeros_like()

    R, tape = _forward(m, basis, g, nodes, filt)
    dR = np.zeros_like(R)
    rep = 0.0
    for t in np.unique(types):
        rows = np.flatnonzero(types == t)
        c = 1.0 / (lambdas[t] * sizes[t])
        d = m.X[t].shape[1]
        xl = local[nodes[rows]]
        diff = m.X[t][xl] - R[rows, :d]
        rep += c * float(np.sum(diff * diff))
        dR[rows, :d] = -2.0 * c * diff
        np.add.at(grads.X[t], xl, 2.0 * c * diff)
    df = _backward(m, tape, dR, grads)

    sup = reg = 0.0
    train = np.asarray(split.train_nodes, dtype=np.int64)
    in_train = nodes[np.isin(nodes, train)]
    if in_train.size:
        lt = m.labeled_type
        if np.any(g.node_type[in_train] != lt):
            raise ValueError("training nodes must belong to the labeled type")
        xl = local[in_train]
        xs = m.X[lt][xl]
        logits = xs @ m.W.T + m.b
        y = _label_targets(g, in_train, cfg.mode, m.W.shape[0])
        if cfg.mode == "multiclass":
            losses, dlog = softmax_ce(logits, y)
        else:
            losses, dlog = logistic_label(logits, y)
        scale = 1.0 / train.size
        sup = scale * float(np.sum(losses))
        dlog = dlog * scale
        grads.W += dlog.T @ xs
        grads.b += dlog.sum(axis=0)
        np.add.at(grads.X[lt], xl, dlog @ m.W)
        frac = in_train.size / train.size
        reg = cfg.lambda_w * frac * float(np.sum(m.W * m.W))
        grads.W += 2.0 * cfg.lambda_w * frac * m.W

    total = rep + sup + reg
    if parts:
        return {"representation": rep, "supervised": sup, "regularizer": reg, "total": total}, grads
    return total, grads


class _Optimizer:
    def __init__(self, cfg: TrainConfig, arrays):
        self.cfg = cfg
        self.t = 0
        self.state = [(np.zeros_like(a), np.zeros_like(a)) for a in arrays]

    def step(self, arrays, grads):
        cfg = self.cfg
        self.t += 1
        for a, g, (s1, s2) in zip(arrays, grads, self.state):
            if cfg.optimizer == "sgd":
                a -= cfg.lr * g
            elif cfg.optimizer == "momentum":
                s1 *= cfg.momentum
                s1 += g
                a -= cfg.lr * s1
            else:
                b1, b2 = 0.9, 0.999
                s1 *= b1
                s1 += (1 - b1) * g
                s2 *= b2
                s2 += (1 - b2) * g * g
                mhat = s1 / (1 - b1 ** self.t)
                vhat = s2 / (1 - b2 ** self.t)
                a -= cfg.lr * mhat / (np.sqrt(vhat) + 1e-8)


def build_basis(g: Graph, cfg: TrainConfig, cache_dir=None) -> SpectralBasis:
    a = adjacency(g)
    if cfg.normalize:
        a = normalized_adjacency(a)
    return cached_basis(a, min(cfg.rank, g.n), cache_dir=cache_dir,
                        method=cfg.eig_method, selection=cfg.eig_selection)


def num_outputs(g: Graph) -> int:
    c = g.num_classes
    if g.mode == "multiclass" and c < 2:
        raise ConfigurationError("multiclass mode needs at least two classes")
    return max(c, 1)


def train(g: Graph, split: Split, cfg: TrainConfig, basis: SpectralBasis | None = None,
          model: GesfModel | None = None, cache_dir=None):
    """Minibatch optimization of every learnable block; returns (model, per-epoch mean loss)."""
    if g.mode != cfg.mode:
        raise ConfigurationError(f"graph mode {g.mode!r} differs from config mode {cfg.mode!r}")
    if basis is None:
        basis = build_basis(g, cfg, cache_dir)
    m = model.copy() if model is not None else init_model(g, cfg, num_outputs(g))
    arrays = [a for _, a in m.named_arrays()]
    opt = _Optimizer(cfg, arrays)
    batch = min(cfg.batch_size, g.n)
    steps = math.ceil(g.n / batch)
    history = []
    step = 0
    for epoch in range(cfg.epochs):
        order = np.random.default_rng([cfg.seed, epoch]).permutation(g.n)
        total = 0.0
        for s in range(steps):
            nodes = order[s * batch:(s + 1) * batch]
            # overflow surfaces as non-finite values, reported below with the step index
            with np.errstate(over="ignore", invalid="ignore"):
                loss, grads = objective(m, basis, g, split, cfg, nodes)
            garrays = [a for _, a in grads.named_arrays()]
            if not math.isfinite(loss) or not all(np.all(np.isfinite(x)) for x in garrays):
                raise TrainingError(f"non-finite loss or gradient at step {step} (epoch {epoch})")
            with np.errstate(over="ignore", invalid="ignore"):
                opt.step(arrays, garrays)
            if not all(np.all(np.isfinite(x)) for x in arrays):
                raise TrainingError(f"non-finite parameters after step {step} (epoch {epoch})")
            total += loss
            step += 1
        history.append(total / steps)
    return m, history


def representation_residual(m: GesfModel, basis: SpectralBasis, g: Graph) -> float:
    """Mean over all nodes of ||x_u - R(u)||^2."""
    nodes = np.arange(g.n)
    R, _ = _forward(m, basis, g, nodes)
    local = g.local_index
    total = 0.0
    for k, part in enumerate(g.type_partition):
        d = m.X[k].shape[1]
        pos = np.flatnonzero(g.node_type == k)
        total += float(np.sum((m.X[k][local[part]] - R[pos, :d]) ** 2))
    return total / g.n


def scores(m: GesfModel, nodes) -> np.ndarray:
    nodes = np.asarray(nodes, dtype=np.int64).reshape(-1)
    if np.any(m.node_type[nodes] != m.labeled_type):
        raise ValueError("prediction requested for a node outside the labeled type")
    local = _local_index(m.node_type)
    return m.X[m.labeled_type][local[nodes]] @ m.W.T + m.b


def predict(m: GesfModel, v: int, mode: str | None = None):
    """Class index (lowest index wins ties) or set of labels with sigmoid >= 0.5."""
    mode = mode or m.mode
    s = scores(m, [v])[0]
    if mode == "multiclass":
        return int(np.argmax(s))
    return frozenset(int(i) for i in np.flatnonzero(sigmoid(s) >= 0.5))


def accuracy(truth, pred) -> float:
    truth, pred = list(truth), list(pred)
    if not truth:
        raise ConfigurationError("empty evaluation set")
    return sum(int(a == b) for a, b in zip(truth, pred)) / len(truth)


def f1_scores(truth, pred, num_labels: int) -> tuple[float, float]:
    """(macro-F1, micro-F1) over label sets; a 0/0 per-label F1 counts as 0."""
    tp = np.zeros(num_labels)
    fp = np.zeros(num_labels)
    fn = np.zeros(num_labels)
    for t, p in zip(truth, pred):
        for i in range(num_labels):
            tp[i] += (i in t) and (i in p)
            fp[i] += (i not in t) and (i in p)
            fn[i] += (i in t) and (i not in p)
    denom = 2 * tp + fp + fn
    per = np.divide(2 * tp, denom, out=np.zeros(num_labels), where=denom > 0)
    d = 2 * tp.sum() + fp.sum() + fn.sum()
    micro = float(2 * tp.sum() / d) if d > 0 else 0.0
    return float(per.mean()) if num_labels else 0.0, micro


def evaluate(m: GesfModel, g: Graph, split: Split, mode: str | None = None) -> dict:
    """Test-split metrics: accuracy, or macro/micro F1 in multilabel mode."""
    mode = mode or m.mode
    test = list(split.test_nodes)
    if not test:
        raise ConfigurationError("empty test set")
    preds = [predict(m, v, mode) for v in test]
    truth = [g.labels[v] for v in test]
    if mode == "multiclass":
        return {"accuracy": accuracy(truth, preds)}
    macro, micro = f1_scores(truth, preds, m.W.shape[0])
    return {"macro_f1": macro, "micro_f1": micro}
