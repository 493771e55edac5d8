"""Random sparse Gaussian precision matrices with a known conditional-independence graph.

Two generators are provided: an Erdős–Rényi graph with a random percolation
probability and a Galton–Watson branching tree. Both return a unit-diagonal
``Gamma = I + B`` that is positive definite, optionally with ``||B|| < 1``.
"""
from dataclasses import dataclass, field
from typing import FrozenSet, Optional, Tuple

import numpy as np

from .errors import DegenerateTree, DimensionMismatch, RetriesExhausted
from .matcore import as_symmetric, is_positive_definite, matrix_from_json, matrix_to_json, spectral_norm

Edge = Tuple[int, int]


def _edge(i, j):
    i, j = int(i), int(j)
    if i == j:
        raise ValueError(f"self-loop ({i}, {i}) is not a valid edge")
    return (i, j) if i < j else (j, i)


@dataclass(frozen=True)
class GraphStructure:
    dim: int
    edges: FrozenSet[Edge] = frozenset()

    def __post_init__(self):
        if self.dim < 1:
            raise ValueError("dim must be positive")
        edges = frozenset(_edge(i, j) for i, j in self.edges)
        for i, j in edges:
            if j >= self.dim:
                raise ValueError(f"edge ({i}, {j}) out of range for dim {self.dim}")
        object.__setattr__(self, "edges", edges)

    def sorted_edges(self):
        return sorted(self.edges)

    def adjacency(self):
        a = np.zeros((self.dim, self.dim), dtype=bool)
        for i, j in self.edges:
            a[i, j] = a[j, i] = True
        return a

    def permuted(self, perm):
        """Relabel node ``k`` as ``perm[k]``."""
        return GraphStructure(self.dim, frozenset(_edge(perm[i], perm[j]) for i, j in self.edges))

    def to_json(self):
        return {"dim": self.dim, "edges": [list(e) for e in self.sorted_edges()]}

    @classmethod
    def from_json(cls, obj):
        return cls(int(obj["dim"]), frozenset(_edge(i, j) for i, j in obj["edges"]))


@dataclass(frozen=True)
class PrecisionModel:
    """Unit-diagonal Gaussian precision ``gamma_rho = I + B`` and its graph."""

    gamma_rho: np.ndarray
    b_norm: float
    edges: FrozenSet[Edge]
    edge_prob: Optional[float] = None

    @property
    def dim(self):
        return self.gamma_rho.shape[0]

    @property
    def b(self):
        return self.gamma_rho - np.eye(self.dim)

    def structure(self):
        return GraphStructure(self.dim, self.edges)

    def to_json(self):
        out = {"matrix": matrix_to_json(self.gamma_rho), "graph": self.structure().to_json(), "b_norm": self.b_norm}
        if self.edge_prob is not None:
            out["edge_prob"] = self.edge_prob
        return out

    @classmethod
    def from_json(cls, obj):
        if "matrix" in obj:
            return model_from_matrix(matrix_from_json(obj["matrix"]), edge_prob=obj.get("edge_prob"))
        return model_from_matrix(matrix_from_json(obj))


def model_from_matrix(gamma, edge_prob=None):
    """Wrap a unit-diagonal precision matrix, deriving its edges and ``||B||``."""
    gamma = as_symmetric(gamma)
    if not np.all(np.diag(gamma) == 1.0):
        raise ValueError("precision matrix must have unit diagonal")
    d = gamma.shape[0]
    iu, ju = np.nonzero(np.triu(gamma != 0.0, k=1))
    edges = frozenset(zip(iu.tolist(), ju.tolist()))
    return PrecisionModel(gamma, spectral_norm(gamma - np.eye(d)), edges, edge_prob)


def structure_of(model):
    """Edge set of the nonzero off-diagonal entries."""
    g = model.gamma_rho
    iu, ju = np.nonzero(np.triu(g != 0.0, k=1))
    return GraphStructure(g.shape[0], frozenset(zip(iu.tolist(), ju.tolist())))


def circle_precision(dim=8, alpha=1 / 22):
    """Cycle graph ``0-1-...-(dim-1)-0`` with every edge weight ``alpha``."""
    g = np.eye(dim)
    for i in range(dim):
        j = (i + 1) % dim
        g[i, j] = g[j, i] = alpha
    return model_from_matrix(g)


@dataclass(frozen=True)
class ErConfig:
    p_range: Tuple[float, float] = (0.1, 0.8)
    # N(0, 0.3) read as standard deviation 0.3; scale_is_variance=True reads it as a variance
    weight_scale: float = 0.3
    scale_is_variance: bool = False
    min_weight: float = 0.1
    max_retries: int = 10_000
    enforce_b_norm: bool = True
    forced_p: Optional[float] = None

    @property
    def weight_std(self):
        return float(np.sqrt(self.weight_scale)) if self.scale_is_variance else self.weight_scale


@dataclass(frozen=True)
class GwConfig:
    weight_scale: float = 0.3
    scale_is_variance: bool = False
    min_weight: float = 0.1
    max_retries: int = 10_000
    enforce_b_norm: bool = True
    restart_on_extinction: bool = True

    @property
    def weight_std(self):
        return float(np.sqrt(self.weight_scale)) if self.scale_is_variance else self.weight_scale


def _accept(b, enforce_b_norm):
    d = b.shape[0]
    gamma = np.eye(d) + b
    if not is_positive_definite(gamma):
        return None
    b_norm = spectral_norm(b)
    if enforce_b_norm and not b_norm < 1.0:
        return None
    return gamma, b_norm


def gen_erdos_renyi(dim, rng, cfg=ErConfig()):
    """Erdős–Rényi precision matrix with a uniformly random edge probability.

    Each attempt draws ``p`` once, keeps every off-diagonal pair with
    probability ``p``, weights kept pairs with centered normal draws, zeroes
    weights below ``cfg.min_weight`` in magnitude, and restarts if
    ``I + B`` is not positive definite (or, with ``cfg.enforce_b_norm``,
    if ``||B|| >= 1``).
    """
    if dim < 2:
        raise DimensionMismatch("dim must be at least 2")
    iu, ju = np.triu_indices(dim, k=1)
    std = cfg.weight_std
    for _ in range(cfg.max_retries):
        p = cfg.forced_p if cfg.forced_p is not None else rng.uniform(*cfg.p_range)
        present = rng.random(iu.size) < p
        w = np.zeros(iu.size)
        w[present] = rng.normal(0.0, std, size=int(present.sum()))
        w[np.abs(w) < cfg.min_weight] = 0.0
        b = np.zeros((dim, dim))
        b[iu, ju] = w
        b = b + b.T
        accepted = _accept(b, cfg.enforce_b_norm)
        if accepted is None:
            continue
        gamma, b_norm = accepted
        nz = w != 0.0
        edges = frozenset(zip(iu[nz].tolist(), ju[nz].tolist()))
        return PrecisionModel(gamma, b_norm, edges, float(p))
    raise RetriesExhausted(f"no valid Erdős–Rényi precision after {cfg.max_retries} attempts")


def _tree_edges(dim, lam, rng):
    """Breadth-first Galton–Watson tree on ``dim`` nodes, or None on extinction."""
    edges = []
    queue = [0]
    n_nodes = 1
    head = 0
    while n_nodes < dim:
        if head == len(queue):
            return None
        parent = queue[head]
        head += 1
        n_children = min(int(rng.poisson(lam)), dim - n_nodes)
        for _ in range(n_children):
            child = n_nodes
            n_nodes += 1
            edges.append((parent, child))
            queue.append(child)
    return edges


def _min_magnitude_normal(rng, std, min_weight):
    while True:
        w = rng.normal(0.0, std)
        if abs(w) >= min_weight:
            return w


def gen_galton_watson(dim, lam, rng, cfg=GwConfig()):
    """Tree-structured precision matrix grown by a Poisson(``lam``) branching process.

    Edge weights are resampled until their magnitude reaches
    ``cfg.min_weight`` so the tree stays connected.
    """
    if dim < 2:
        raise DimensionMismatch("dim must be at least 2")
    if lam <= 0:
        raise ValueError("lambda must be positive")
    std = cfg.weight_std
    for _ in range(cfg.max_retries):
        tree = _tree_edges(dim, lam, rng)
        if tree is None:
            if not cfg.restart_on_extinction:
                raise DegenerateTree(f"branching process died out before reaching {dim} nodes")
            continue
        b = np.zeros((dim, dim))
        for i, j in tree:
            b[i, j] = b[j, i] = _min_magnitude_normal(rng, std, cfg.min_weight)
        accepted = _accept(b, cfg.enforce_b_norm)
        if accepted is None:
            continue
        gamma, b_norm = accepted
        return PrecisionModel(gamma, b_norm, frozenset(_edge(i, j) for i, j in tree))
    raise RetriesExhausted(f"no valid Galton–Watson precision after {cfg.max_retries} attempts")
