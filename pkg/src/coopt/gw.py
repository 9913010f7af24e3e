"""Gromov-Wasserstein objective and the tied-coupling fixed-point solver.

Comparing two intra-domain similarity matrices with a single coupling on
both slots of the doubly contracted objective is the degenerate case of the
two-coupling problem. For squared Euclidean distance matrices the quadratic
form is concave over the polytope, so iterating

    pi <- OT(w, w', contracted_cost(pi))

minimizes a linear majorization each step (a difference-of-convex scheme)
and the objective can only decrease. The same iteration coincides with the
conditional-gradient update whose exact line search is always a full step:
the gradient is twice the contracted cost, and scaling a transport cost does
not change its minimizer.

For whitened data compared through cosine-similarity matrices, the optimum
here also agrees with transport formulations that optimize a linear feature
map (invariant-transport style); no such solver is provided.
"""

from __future__ import annotations

import enum
import itertools
from dataclasses import dataclass, field
from typing import List, Optional

import numpy as np

from .core import (
    Coupling,
    DimensionError,
    DomainError,
    Loss,
    SQUARED_EUCLIDEAN,
    as_histogram,
    as_matrix,
    uniform_histogram,
)
from .coot import ORACLE_MAX_SIZE, _scale_to_marginals, bap_oracle, random_coupling
from .ot import exact_ot, sinkhorn
from .tensorcost import Side, contract, coot_objective

__all__ = [
    "SimilarityKind",
    "SimilarityMatrix",
    "sqeuclid_matrix",
    "gw_objective",
    "gw_gradient",
    "GwSolution",
    "solve_gw_dc",
    "gw_permutation_oracle",
    "gw_coot_equivalence_check",
]


class SimilarityKind(enum.Enum):
    SQUARED_EUCLIDEAN = "squared_euclidean"
    GENERIC = "generic"


@dataclass(frozen=True)
class SimilarityMatrix:
    """Square symmetric matrix of pairwise similarities between samples."""

    matrix: np.ndarray
    kind: SimilarityKind = SimilarityKind.GENERIC

    def __post_init__(self):
        m = as_matrix(self.matrix, "similarity matrix")
        if m.shape[0] != m.shape[1]:
            raise DimensionError(f"similarity matrix must be square, got {m.shape}")
        if np.max(np.abs(m - m.T)) > 1e-12:
            raise DomainError("similarity matrix must be symmetric within 1e-12")
        if self.kind is SimilarityKind.SQUARED_EUCLIDEAN:
            if np.any(np.abs(np.diag(m)) > 0) or np.any(m < 0):
                raise DomainError(
                    "squared-Euclidean similarity needs a zero diagonal and nonnegative entries"
                )
        object.__setattr__(self, "matrix", m)

    @property
    def size(self) -> int:
        return self.matrix.shape[0]


def _sim_array(C) -> np.ndarray:
    if isinstance(C, SimilarityMatrix):
        return C.matrix
    return as_matrix(C, "similarity matrix")


def sqeuclid_matrix(points) -> SimilarityMatrix:
    """Pairwise squared Euclidean distances of the rows of ``points``.

    Uses the rank-one expansion ``x 1^T + 1 x^T - 2 X X^T`` with
    ``x = diag(X X^T)``; the result is symmetrized and clipped at zero to
    absorb cancellation at the 1e-16 scale.
    """
    X = as_matrix(points, "points")
    sq_norms = np.einsum("ij,ij->i", X, X)
    C = sq_norms[:, None] + sq_norms[None, :] - 2.0 * (X @ X.T)
    C = np.maximum((C + C.T) / 2.0, 0.0)
    np.fill_diagonal(C, 0.0)
    return SimilarityMatrix(C, SimilarityKind.SQUARED_EUCLIDEAN)


def gw_objective(C, C2, pi, loss: Loss = SQUARED_EUCLIDEAN) -> float:
    """Doubly contracted objective with the same coupling on both slots.

    Shares the code path of :func:`coopt.tensorcost.coot_objective` exactly,
    so the two agree bitwise on tied couplings.
    """
    return coot_objective(_sim_array(C), _sim_array(C2), pi, pi, loss)


def gw_gradient(C, C2, pi, loss: Loss = SQUARED_EUCLIDEAN) -> np.ndarray:
    """Gradient of the quadratic objective: twice the contracted cost."""
    return 2.0 * contract(_sim_array(C), _sim_array(C2), pi, loss, Side.SAMPLE)


@dataclass(frozen=True)
class GwSolution:
    coupling: Coupling
    cost: float
    objective_trace: List[float] = field(repr=False)
    iterations: int = 0
    converged: bool = False
    restart_index: int = 0


def _identity_biased_init(w: np.ndarray, wp: np.ndarray) -> np.ndarray:
    # strictly positive, identity-dominant, then projected to the polytope
    n = w.size
    return _scale_to_marginals(np.eye(n) * n + 1.0, w, wp)


def _dc_single(C, C2, w, wp, loss, eps, max_iter, tol, init, sinkhorn_max_iter,
               restart_index) -> GwSolution:
    pi = np.outer(w, wp) if init is None else np.array(init, dtype=np.float64)
    trace = [gw_objective(C, C2, pi, loss)]
    warm = None
    iterations = 0
    converged = False
    for _ in range(max_iter):
        pi_prev = pi
        cost = contract(C, C2, pi, loss, Side.SAMPLE)
        if eps > 0:
            res = sinkhorn(w, wp, cost, eps, max_iter=sinkhorn_max_iter,
                           init_potentials=warm)
            warm = res.potentials
        else:
            res = exact_ot(w, wp, cost)
        pi = res.coupling.plan
        trace.append(gw_objective(C, C2, pi, loss))
        iterations += 1
        if float(np.linalg.norm(pi - pi_prev)) <= tol:
            converged = True
            break
    return GwSolution(Coupling(pi, w, wp), trace[-1], trace, iterations, converged,
                      restart_index)


def solve_gw_dc(
    C,
    C2,
    w=None,
    wp=None,
    loss: Loss = SQUARED_EUCLIDEAN,
    eps: float = 0.0,
    max_iter: int = 100,
    tol: float = 1e-9,
    restarts: int = 1,
    seed: int = 0,
    sinkhorn_max_iter: int = 10000,
) -> GwSolution:
    """Tied-coupling fixed-point iteration for the quadratic transport problem.

    ``eps=0`` uses the exact inner solver; ``eps>0`` runs the entropic inner
    solver, which reproduces the projected-gradient scheme for the entropic
    quadratic problem. Restarts: product coupling first, then an
    identity-biased start when the two sides have equal size, then seeded
    heavy-tailed perturbations; lowest cost wins, ties to the lowest index.
    """
    C = _sim_array(C)
    C2 = _sim_array(C2)
    if np.max(np.abs(C - C.T)) > 1e-12 or np.max(np.abs(C2 - C2.T)) > 1e-12:
        raise DomainError("similarity matrices must be symmetric")
    if eps < 0:
        raise DomainError("eps must be >= 0")
    n, n2 = C.shape[0], C2.shape[0]
    w = uniform_histogram(n) if w is None else as_histogram(w, "w")
    wp = uniform_histogram(n2) if wp is None else as_histogram(wp, "w'")
    if (w.size, wp.size) != (n, n2):
        raise DimensionError("weights do not match similarity matrix sizes")
    inits: List[Optional[np.ndarray]] = [None]
    if n == n2 and restarts > 1:
        inits.append(_identity_biased_init(w, wp))
    r = 1
    while len(inits) < restarts:
        rng = np.random.default_rng([seed, r])
        inits.append(random_coupling(w, wp, rng))
        r += 1
    best: Optional[GwSolution] = None
    for idx, init in enumerate(inits):
        sol = _dc_single(C, C2, w, wp, loss, eps, max_iter, tol, init,
                         sinkhorn_max_iter, idx)
        if best is None or sol.cost < best.cost:
            best = sol
    return best


def gw_permutation_oracle(C, C2, loss: Loss = SQUARED_EUCLIDEAN) -> float:
    """Exhaustive tied-permutation minimum ``(1/n^2) sum_ik L(C_ik, C'_s(i)s(k))``.

    Exact for squared Euclidean inputs with uniform weights, where the
    quadratic program is concave and attains its minimum at a vertex; for
    generic symmetric inputs it upper-bounds the polytope minimum.
    """
    C = _sim_array(C)
    C2 = _sim_array(C2)
    n = C.shape[0]
    if C2.shape[0] != n:
        raise DimensionError("tied-permutation enumeration needs equal sizes")
    if n > ORACLE_MAX_SIZE:
        raise DimensionError(f"enumeration refuses n > {ORACLE_MAX_SIZE}")
    best = np.inf
    for s in itertools.permutations(range(n)):
        s = list(s)
        best = min(best, float(np.sum(loss.pair(C, C2[np.ix_(s, s)])) / (n * n)))
    return best


def gw_coot_equivalence_check(points, points2, tol: float = 1e-9) -> dict:
    """Certify agreement of the tied and two-coupling optima on squared
    Euclidean matrices built from two point clouds (enumeration-sized).

    Checks, all via brute force: the two-coupling value never exceeds the
    tied value; the two are equal here; and the tied pair built from the
    optimal single permutation attains the two-coupling optimum.
    """
    C = sqeuclid_matrix(as_matrix(points, "points")).matrix
    C2 = sqeuclid_matrix(as_matrix(points2, "points'")).matrix
    n, n2 = C.shape[0], C2.shape[0]
    if n != n2:
        raise DimensionError("equivalence check needs equal sample counts")
    if n > 4:
        raise DimensionError("equivalence check enumerates (n!)^2 pairs; n <= 4 only")
    gw_value = gw_permutation_oracle(C, C2)
    coot = bap_oracle(C, C2)
    # evaluate the tied pair built from the optimal single permutation
    # through the factored objective, independent of the enumeration sums
    best_perm = min(
        itertools.permutations(range(n)),
        key=lambda s: float(np.sum(SQUARED_EUCLIDEAN.pair(C, C2[np.ix_(list(s), list(s))]))),
    )
    plan = np.zeros((n, n))
    plan[np.arange(n), list(best_perm)] = 1.0 / n
    tied_pair_value = coot_objective(C, C2, plan, plan, SQUARED_EUCLIDEAN)
    return {
        "coot_value": coot.cost,
        "gw_value": gw_value,
        "coot_leq_gw": coot.cost <= gw_value + tol,
        "values_equal": abs(coot.cost - gw_value) <= tol,
        "tied_pair_attains_coot": abs(tied_pair_value - coot.cost) <= tol,
    }
