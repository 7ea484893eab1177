"""Restricted-isometry analysis: exact and sampled constants, the row
dependency graph of a symmetric Toeplitz slice, equitable colorings with
verifiable certificates, and evaluators for the theoretical bounds.

Index sets (column subsets T, rows, witnesses) are 0-based throughout the
Python API; JSON serializations are 1-based, matching the matrix notation in
the docs.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.special import ndtri

from .operators import SYMMETRIC_KINDS, MeasurementOperator
from .randgen import EntryStream, ParameterError, SeedSpec, sample_without_replacement


class BudgetExceededError(RuntimeError):
    """Exact enumeration would exceed the configured subset budget."""


class ColoringError(RuntimeError):
    """No equitable coloring was found within the move guard."""


class PartitionError(ValueError):
    """A partition does not disjointly cover the row set."""


# -- eigenvalues of small symmetric matrices ---------------------------------


def jacobi_eigvals(S: np.ndarray, tol: float = 1e-12, max_sweeps: int = 100) -> np.ndarray:
    """Eigenvalues of a small symmetric matrix by cyclic Jacobi rotations.

    Sweeps until the off-diagonal Frobenius norm drops below ``tol`` relative
    to the matrix norm (at most ``max_sweeps`` sweeps).  Returns eigenvalues
    in ascending order.
    """
    A = np.array(S, dtype=np.float64)
    m = A.shape[0]
    if A.shape != (m, m):
        raise ParameterError("matrix must be square")
    if m == 1:
        return A[0].copy()
    scale = max(np.linalg.norm(A), 1.0)
    for _ in range(max_sweeps):
        off = math.sqrt(max(0.0, np.sum(A**2) - np.sum(np.diag(A) ** 2)))
        if off <= tol * scale:
            break
        for p in range(m - 1):
            for q in range(p + 1, m):
                apq = A[p, q]
                if abs(apq) <= 1e-300:
                    continue
                tau = (A[q, q] - A[p, p]) / (2.0 * apq)
                t = math.copysign(1.0, tau) / (abs(tau) + math.hypot(1.0, tau))
                c = 1.0 / math.hypot(1.0, t)
                s = t * c
                colp, colq = A[:, p].copy(), A[:, q].copy()
                A[:, p] = c * colp - s * colq
                A[:, q] = s * colp + c * colq
                rowp, rowq = A[p, :].copy(), A[q, :].copy()
                A[p, :] = c * rowp - s * rowq
                A[q, :] = s * rowp + c * rowq
                A[p, q] = A[q, p] = 0.0
    return np.sort(np.diag(A).copy())


def gram_extremes(op: MeasurementOperator, T) -> tuple[float, float]:
    """Extreme eigenvalues of A_T^t A_T for the column subset T (0-based)."""
    T = np.asarray(sorted(T), dtype=np.int64)
    if T.size == 0:
        raise ParameterError("T must be nonempty")
    if T.size > op.k:
        raise ParameterError("|T| must not exceed the number of rows")
    if np.unique(T).size != T.size:
        raise ParameterError("T must contain distinct indices")
    cols = op.dense_columns(T)
    gram = cols.T @ cols
    lam = jacobi_eigvals(gram)
    return float(lam[0]), float(lam[-1])


# -- RIP constants ------------------------------------------------------------


@dataclass
class RipReport:
    """delta_s with the witnessing subset; exact or Monte Carlo lower bound."""

    s: int
    delta: float
    mode: str
    witness_subset: tuple[int, ...]
    trials: int | None = None
    per_subset_extremes: list | None = None

    @property
    def within_one_third(self) -> bool:
        return self.delta < 1.0 / 3.0

    def to_json(self) -> str:
        doc = {
            "s": self.s,
            "delta": self.delta,
            "mode": self.mode,
            "witness_subset": [int(i) + 1 for i in self.witness_subset],
            "within_one_third": self.within_one_third,
        }
        if self.trials is not None:
            doc["trials"] = self.trials
        if self.per_subset_extremes is not None:
            doc["per_subset_extremes"] = [
                {"subset": [int(i) + 1 for i in t], "lambda_min": lo, "lambda_max": hi}
                for (t, lo, hi) in self.per_subset_extremes
            ]
        return json.dumps(doc, sort_keys=True)


def colex_subsets(n: int, s: int):
    """All s-subsets of {0..n-1} in colexicographic order."""
    if s == 0:
        yield ()
        return
    for m in range(s - 1, n):
        for rest in colex_subsets(m, s - 1):
            yield rest + (m,)


def _subset_deviation(dense: np.ndarray, T) -> tuple[float, float, float]:
    cols = dense[:, list(T)]
    lam = jacobi_eigvals(cols.T @ cols)
    lo, hi = float(lam[0]), float(lam[-1])
    return max(hi - 1.0, 1.0 - lo), lo, hi


def rip_exact(
    op: MeasurementOperator,
    s: int,
    budget: int = 10**7,
    collect_extremes: bool = False,
) -> RipReport:
    """Exact delta_s by colexicographic enumeration of all s-column subsets.

    Refuses (BudgetExceededError) when C(n, s) exceeds ``budget``; use
    :func:`rip_monte_carlo` beyond that scale.  Ties go to the first subset
    in enumeration order.
    """
    if not 1 <= s <= op.n:
        raise ParameterError("need 1 <= s <= n")
    count = math.comb(op.n, s)
    if count > budget:
        raise BudgetExceededError(
            f"C({op.n},{s}) = {count} subsets exceeds the budget {budget}; "
            "use rip_monte_carlo for an estimated lower bound"
        )
    dense = op.dense()
    best = -np.inf
    witness: tuple[int, ...] = ()
    table = [] if collect_extremes else None
    for T in colex_subsets(op.n, s):
        dev, lo, hi = _subset_deviation(dense, T)
        if table is not None:
            table.append((T, lo, hi))
        if dev > best:
            best = dev
            witness = T
    return RipReport(
        s=s, delta=float(best), mode="exact", witness_subset=witness, per_subset_extremes=table
    )


def rip_monte_carlo(
    op: MeasurementOperator, s: int, trials: int, seed: SeedSpec
) -> RipReport:
    """Lower bound on delta_s: max deviation over uniformly sampled subsets."""
    if trials < 1:
        raise ParameterError("trials must be >= 1")
    if not 1 <= s <= op.n:
        raise ParameterError("need 1 <= s <= n")
    stream = EntryStream(seed)
    best = -np.inf
    witness: tuple[int, ...] = ()
    for _ in range(trials):
        T = tuple(int(i) for i in sample_without_replacement(op.n, s, stream))
        cols = op.dense_columns(np.asarray(T))
        lam = jacobi_eigvals(cols.T @ cols)
        dev = max(float(lam[-1]) - 1.0, 1.0 - float(lam[0]))
        if dev > best:
            best = dev
            witness = T
    return RipReport(s=s, delta=float(best), mode="monte_carlo", witness_subset=witness, trials=trials)


# -- row dependency graph ------------------------------------------------------


@dataclass
class DependencyGraph:
    """Graph on the k rows of A_T; rows are adjacent when they share a
    generator variable.  Simple, undirected, no self-loops."""

    k: int
    edges: list[tuple[int, int]]
    T: tuple[int, ...]
    degree_bound: int
    neighbors: list[set] = field(repr=False, default=None)

    def __post_init__(self):
        if self.neighbors is None:
            nbr = [set() for _ in range(self.k)]
            for i, j in self.edges:
                nbr[i].add(j)
                nbr[j].add(i)
            self.neighbors = nbr

    @property
    def max_degree(self) -> int:
        return max((len(s) for s in self.neighbors), default=0)

    @property
    def within_bound(self) -> bool:
        return self.max_degree <= self.degree_bound

    def to_json(self) -> str:
        return json.dumps(
            {
                "k": self.k,
                "T": [int(t) + 1 for t in self.T],
                "edges": [[i + 1, j + 1] for i, j in self.edges],
                "max_degree": self.max_degree,
                "degree_bound": self.degree_bound,
                "within_bound": self.within_bound,
            },
            sort_keys=True,
        )


def row_variable_indices(op: MeasurementOperator, row: int, T) -> set:
    """Generator indices feeding row ``row`` of A_T (row of the extension)."""
    n = op.n
    if op.kind == "sym_toeplitz":
        return {n - 1 - abs(row - t) for t in T}
    out = set()
    for t in T:
        s = row + t + 1
        out.add(s - 1 if s <= n else 2 * n - s - 1)
    return out


def dependency_graph(op: MeasurementOperator, T) -> DependencyGraph:
    """Dependency graph of the rows of A_T for a symmetric Toeplitz variant.

    Certifies max degree <= |T|(2|T|-1) in the output.
    """
    if op.kind not in SYMMETRIC_KINDS:
        raise ParameterError("dependency graph is defined for symmetric kinds")
    if op.compose_D:
        raise ParameterError("dependency graph applies to the uncomposed operator")
    T = tuple(sorted(int(t) for t in T))
    if len(T) == 0 or len(set(T)) != len(T) or T[0] < 0 or T[-1] >= op.n:
        raise ParameterError("T must be a nonempty set of distinct column indices")
    rows = op.rows
    incidence: dict[int, list[int]] = {}
    for pos in range(op.k):
        for v in row_variable_indices(op, int(rows[pos]), T):
            incidence.setdefault(v, []).append(pos)
    edge_set = set()
    for touching in incidence.values():
        for a in range(len(touching)):
            for b in range(a + 1, len(touching)):
                edge_set.add((touching[a], touching[b]))
    p = len(T)
    return DependencyGraph(
        k=op.k, edges=sorted(edge_set), T=T, degree_bound=p * (2 * p - 1)
    )


# -- equitable coloring ---------------------------------------------------------


@dataclass
class EquitablePartition:
    """q color classes over rows 0..k-1, balanced to within one element."""

    k: int
    q: int
    classes: list[list[int]]

    @property
    def sizes(self) -> list[int]:
        return [len(c) for c in self.classes]

    @property
    def lo(self) -> int:
        return self.k // self.q

    @property
    def hi(self) -> int:
        return -(-self.k // self.q)

    def to_json(self) -> str:
        # absent-edge assertion count: pairs verified independent per class
        checked = sum(len(c) * (len(c) - 1) // 2 for c in self.classes)
        return json.dumps(
            {
                "k": self.k,
                "q": self.q,
                "classes": [[v + 1 for v in c] for c in self.classes],
                "sizes": self.sizes,
                "size_floor": self.lo,
                "size_ceil": self.hi,
                "independence_pairs_checked": checked,
            },
            sort_keys=True,
        )


def verify_partition(graph: DependencyGraph, part: EquitablePartition) -> list[str]:
    """Independent checker; returns a list of problems (empty means valid)."""
    problems = []
    seen: dict[int, int] = {}
    for j, cls in enumerate(part.classes):
        for v in cls:
            if v in seen:
                problems.append(f"row {v} appears in classes {seen[v]} and {j}")
            seen[v] = j
            if not 0 <= v < part.k:
                problems.append(f"row {v} out of range")
    if len(seen) != part.k:
        problems.append(f"classes cover {len(seen)} of {part.k} rows")
    lo, hi = part.lo, part.hi
    for j, size in enumerate(part.sizes):
        if not lo <= size <= hi:
            problems.append(f"class {j} has size {size} outside [{lo}, {hi}]")
    cls_of = {v: j for j, cls in enumerate(part.classes) for v in cls}
    for i, j in graph.edges:
        if cls_of.get(i) == cls_of.get(j):
            problems.append(f"edge ({i},{j}) inside class {cls_of.get(i)}")
    return problems


def _greedy_coloring(graph: DependencyGraph, q: int) -> list[list[int]]:
    order = sorted(range(graph.k), key=lambda v: (-len(graph.neighbors[v]), v))
    color = [-1] * graph.k
    classes: list[list[int]] = [[] for _ in range(q)]
    for v in order:
        used = {color[u] for u in graph.neighbors[v] if color[u] >= 0}
        for c in range(q):
            if c not in used:
                color[v] = c
                classes[c].append(v)
                break
        else:
            raise ColoringError(
                f"greedy proper coloring needs more than q={q} colors "
                f"(max degree {graph.max_degree}); the equitable-coloring "
                "hypothesis q >= maxdeg+1 is violated"
            )
    return classes


def _kempe_component(graph, in_a, in_b, start):
    comp_a, comp_b = set(), set()
    stack = [start]
    seen = {start}
    while stack:
        v = stack.pop()
        (comp_a if v in in_a else comp_b).add(v)
        for u in graph.neighbors[v]:
            if u not in seen and (u in in_a or u in in_b):
                seen.add(u)
                stack.append(u)
    return comp_a, comp_b


def equitable_coloring(graph: DependencyGraph, q: int) -> EquitablePartition:
    """Equitable proper q-coloring: greedy coloring, then size rebalancing by
    direct moves and Kempe-chain swaps.

    Guaranteed to exist for q >= maxdeg+1; smaller q is attempted best-effort
    and raises ColoringError when no balanced proper coloring is reached
    within the 10*k*q move guard.
    """
    if q < 1:
        raise ParameterError("q must be >= 1")
    k = graph.k
    lo, hi = k // q, -(-k // q)
    if k <= q:
        classes = [[v] for v in range(k)] + [[] for _ in range(q - k)]
        part = EquitablePartition(k=k, q=q, classes=classes)
    else:
        classes = _greedy_coloring(graph, q)
        sets = [set(c) for c in classes]
        guard = 10 * k * q
        moves = 0

        def imbalance():
            return sum(max(0, len(s) - hi) + max(0, lo - len(s)) for s in sets)

        while imbalance() > 0:
            if moves > guard:
                raise ColoringError(
                    f"rebalancing exceeded the {guard}-move guard with sizes "
                    f"{sorted(len(s) for s in sets)}; target [{lo}, {hi}]"
                )
            donors = sorted(
                (j for j in range(q) if len(sets[j]) > lo),
                key=lambda j: (-len(sets[j]), j),
            )
            receivers = sorted(
                (j for j in range(q) if len(sets[j]) < hi),
                key=lambda j: (len(sets[j]), j),
            )
            base = imbalance()
            improved = False
            for a in donors:
                for b in receivers:
                    gain_possible = len(sets[a]) > hi or len(sets[b]) < lo
                    if not gain_possible:
                        continue
                    for v in sorted(sets[a]):
                        if graph.neighbors[v].isdisjoint(sets[b]):
                            sets[a].discard(v)
                            sets[b].add(v)
                            moves += 1
                            improved = True
                            break
                    if improved:
                        break
                if improved:
                    break
            if improved:
                continue
            # Kempe-chain fallback: swap a connected component between two
            # classes whenever that strictly reduces the imbalance.
            for a in donors:
                for b in range(q):
                    if b == a:
                        continue
                    tried = set()
                    for v in sorted(sets[a]):
                        if v in tried:
                            continue
                        comp_a, comp_b = _kempe_component(graph, sets[a], sets[b], v)
                        tried |= comp_a
                        sets[a] -= comp_a
                        sets[a] |= comp_b
                        sets[b] -= comp_b
                        sets[b] |= comp_a
                        if imbalance() < base:
                            moves += max(1, len(comp_a) + len(comp_b))
                            improved = True
                            break
                        # undo
                        sets[a] -= comp_b
                        sets[a] |= comp_a
                        sets[b] -= comp_a
                        sets[b] |= comp_b
                    if improved:
                        break
                if improved:
                    break
            if not improved:
                raise ColoringError(
                    "no direct move or Kempe swap reduces the imbalance; "
                    f"sizes {sorted(len(s) for s in sets)}, target [{lo}, {hi}]"
                )
        part = EquitablePartition(k=k, q=q, classes=[sorted(s) for s in sets])
    problems = verify_partition(graph, part)
    if problems:
        raise ColoringError("emitted partition failed verification: " + "; ".join(problems))
    return part


# -- block decomposition check ---------------------------------------------------


@dataclass
class DecompositionReport:
    passed: bool
    max_rel_error: float
    probes: int


def verify_decomposition(
    op: MeasurementOperator,
    T,
    part: EquitablePartition,
    probes: int = 50,
    seed: SeedSpec = SeedSpec(0, 0),
    rtol: float = 1e-10,
) -> DecompositionReport:
    """Check ||A_T x||^2 = sum_j ||A_T^j x||^2 = sum_j (|C_j|/k)||At_j x||^2
    on random probes, where At_j = sqrt(k/|C_j|) A_T^j and empty classes
    contribute zero."""
    T = np.asarray(sorted(T), dtype=np.int64)
    cols = op.dense_columns(T)
    k = op.k
    seen = sorted(v for cls in part.classes for v in cls)
    if len(seen) != k or seen != list(range(k)) or part.k != k:
        raise PartitionError("partition does not disjointly cover the rows")
    stream = EntryStream(seed)
    worst = 0.0
    for _ in range(probes):
        u = stream.uniform(T.size)
        x = ndtri(np.where(u == 0.0, 2.0**-54, u))
        lhs = float(np.sum((cols @ x) ** 2))
        mid = 0.0
        rhs = 0.0
        for cls in part.classes:
            if not cls:
                continue
            block = cols[cls, :] @ x
            sq = float(np.sum(block**2))
            mid += sq
            scale = k / len(cls)
            rhs += (len(cls) / k) * scale * sq
        denom = max(lhs, 1e-300)
        worst = max(worst, abs(mid - lhs) / denom, abs(rhs - lhs) / denom)
    return DecompositionReport(passed=bool(worst <= rtol), max_rel_error=worst, probes=probes)


# -- theoretical bounds ------------------------------------------------------------


@dataclass(frozen=True)
class TheoryParams:
    """Constants for the probability bounds.

    q, c0 and c3 are deterministic functions of (m, delta3m); c2 must satisfy
    18*c2 < c0 and c1 must exceed 54*c3/(c0 - 18*c2).
    """

    n: int
    m: int
    k: int
    delta3m: float
    c2: float
    c1: float
    q: int = field(init=False)
    c0: float = field(init=False)
    c3: float = field(init=False)
    c1_min: float = field(init=False)

    def __post_init__(self):
        if not (self.n >= 1 and self.m >= 1 and self.k >= 1):
            raise ParameterError("n, m, k must be positive")
        if not 0.0 < self.delta3m < 1.0 / 3.0:
            raise ParameterError("delta3m must lie in (0, 1/3)")
        d = self.delta3m
        c0 = d * d / 16.0 - d * d * d / 48.0
        if not 18.0 * self.c2 < c0:
            raise ParameterError("need 18*c2 < c0")
        c3 = math.log(12.0 / d) + 2.0 * math.log(2.0) + c0 + 4.0
        c1_min = 54.0 * c3 / (c0 - 18.0 * self.c2)
        if not self.c1 > c1_min:
            raise ParameterError(f"need c1 > {c1_min}")
        object.__setattr__(self, "q", 3 * self.m * (6 * self.m - 1) + 1)
        object.__setattr__(self, "c0", c0)
        object.__setattr__(self, "c3", c3)
        object.__setattr__(self, "c1_min", c1_min)


def make_theory_params(
    n: int, m: int, k: int, delta3m: float, c2: float | None = None, c1: float | None = None
) -> TheoryParams:
    """TheoryParams with admissible defaults: c2 = c0/36 and c1 just above
    its lower bound."""
    if not 0.0 < delta3m < 1.0 / 3.0:
        raise ParameterError("delta3m must lie in (0, 1/3)")
    c0 = delta3m**2 / 16.0 - delta3m**3 / 48.0
    if c2 is None:
        c2 = c0 / 36.0
    if c1 is None:
        c3 = math.log(12.0 / delta3m) + 2.0 * math.log(2.0) + c0 + 4.0
        c1 = 1.01 * (54.0 * c3 / (c0 - 18.0 * c2))
    return TheoryParams(n=n, m=m, k=k, delta3m=delta3m, c2=c2, c1=c1)


def f_value(k: int, m: int, delta3m: float) -> float:
    """f(k, m, delta) = c0*k - 3m*ln(12/delta) - ln 2 for the distributions
    in use (c0 = delta^2/16 - delta^3/48)."""
    c0 = delta3m**2 / 16.0 - delta3m**3 / 48.0
    return c0 * k - 3.0 * m * math.log(12.0 / delta3m) - math.log(2.0)


@dataclass
class TheoryReport:
    """Evaluated bounds; raw exponents are retained because the probability
    bounds are often vacuous (<= 0) at desk scales and silently clamping
    would hide that.

    Three nested bounds: ``subset_*`` is the success probability for one
    fixed column subset T (after the color-class union bound), ``rip_*``
    unions that over all C(n, 3m) subsets, and ``simple_*`` is the
    simplified exponential form 1 - exp(-c2 k / m^2) valid above the
    measurement threshold.
    """

    params: TheoryParams
    f_value: float
    subset_exponent: float
    subset_prob_raw: float
    subset_prob: float
    subset_vacuous: bool
    rip_exponent: float
    rip_prob_raw: float
    rip_prob: float
    rip_vacuous: bool
    simple_exponent: float
    simple_prob_raw: float
    simple_prob: float
    simple_vacuous: bool
    k_threshold: float
    k_above_threshold: bool

    def to_json(self) -> str:
        p = self.params

        def block(prefix):
            return {
                "exponent": getattr(self, f"{prefix}_exponent"),
                "prob_raw": getattr(self, f"{prefix}_prob_raw"),
                "prob": getattr(self, f"{prefix}_prob"),
                "vacuous": getattr(self, f"{prefix}_vacuous"),
            }

        doc = {
            "n": p.n,
            "m": p.m,
            "k": p.k,
            "delta3m": p.delta3m,
            "q": p.q,
            "c0": p.c0,
            "c1": p.c1,
            "c2": p.c2,
            "c3": p.c3,
            "f_value": self.f_value,
            "per_subset_bound": block("subset"),
            "rip_bound": block("rip"),
            "simplified_bound": block("simple"),
            "k_threshold": self.k_threshold,
            "k_above_threshold": self.k_above_threshold,
        }
        return json.dumps(doc, sort_keys=True)


def theory_bounds(p: TheoryParams) -> TheoryReport:
    """Evaluate f, the single-subset probability bound, the union bound over
    all subsets (full RIP), the simplified exponential form, and the
    measurement threshold c1*m^3*ln(n/m)."""
    d = p.delta3m
    m, k, n, q = p.m, p.k, p.n, p.q
    fv = f_value(k, m, d)
    subset_exp = -f_value(k // q, m, d) + math.log(q)
    rip_exp = (
        -p.c0 * k / (18.0 * m * m)
        + 3.0 * m * (math.log(12.0 / d) + math.log(n / (3.0 * m)) + 1.0)
        + math.log(2.0)
        + math.log(18.0 * m * m)
        + p.c0
    )
    simple_exp = -p.c2 * k / (m * m)

    def bound(exponent):
        raw = 1.0 - math.exp(exponent) if exponent < 700 else -math.inf
        return raw, min(max(raw, 0.0), 1.0), raw <= 0.0

    subset_raw, subset_prob, subset_vac = bound(subset_exp)
    rip_raw, rip_prob, rip_vac = bound(rip_exp)
    simple_raw, simple_prob, simple_vac = bound(simple_exp)
    k_threshold = p.c1 * m**3 * math.log(n / m)
    return TheoryReport(
        params=p,
        f_value=fv,
        subset_exponent=subset_exp,
        subset_prob_raw=subset_raw,
        subset_prob=subset_prob,
        subset_vacuous=subset_vac,
        rip_exponent=rip_exp,
        rip_prob_raw=rip_raw,
        rip_prob=rip_prob,
        rip_vacuous=rip_vac,
        simple_exponent=simple_exp,
        simple_prob_raw=simple_raw,
        simple_prob=simple_prob,
        simple_vacuous=simple_vac,
        k_threshold=k_threshold,
        k_above_threshold=bool(k > k_threshold),
    )
