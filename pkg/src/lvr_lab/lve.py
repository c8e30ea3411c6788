"""Forest-formula engine: tree and forest combinatorics, the interpolated
Gaussian covariance, corner-operator enumeration for resolvent
derivatives, and Monte Carlo tree amplitudes.

Amplitudes differentiate the action directly through the spectral chain
rule instead of assembling corner products; the corner combinatorics is
validated separately against finite differences.  The two routes are
algebraically identical and the direct gradient is far better
conditioned.
"""

from __future__ import annotations

import heapq
import math
from dataclasses import dataclass
from fractions import Fraction
from itertools import combinations, permutations, product

import numpy as np

from .errors import DegenerateSpectrum, QuadratureFailure, SizeBound
from .lvr_action import ModelParams, evaluator
from .oracle import MC_CHUNK, McConfig, _principal_log_action

__all__ = [
    "Forest",
    "DecoratedTree",
    "CornerWord",
    "AmplitudeEstimate",
    "LvePartialSum",
    "enumerate_forests",
    "enumerate_trees",
    "bkar_interpolate",
    "bkar_forest_sum",
    "bkar_identity_check",
    "faadibruno_enumerate",
    "faadibruno_numeric_check",
    "grad_s_entries",
    "amplitude_trivial",
    "amplitude_tree2",
    "lve_partial_sum",
    "amplitude_to_json_dict",
    "trees_to_csv",
]

MAX_N = 6
MAX_R = 5
MAX_ENUM = 1_000_000

RESOLVENT = "resolvent"
M_RESOLVENT = "m_resolvent"
MDAG_RESOLVENT = "mdag_resolvent"
MDAG_RESOLVENT_M = "mdag_resolvent_m"
IDENTITY = "identity"


def _norm_edge(e) -> tuple:
    a, b = int(e[0]), int(e[1])
    if a == b:
        raise ValueError(f"self-loop edge {e}")
    return (a, b) if a < b else (b, a)


@dataclass(frozen=True)
class Forest:
    """Acyclic edge set on vertices 0..n-1 with unique-path lookup."""

    n: int
    edges: frozenset

    def __post_init__(self) -> None:
        if self.n < 1:
            raise ValueError("need at least one vertex")
        norm = frozenset(_norm_edge(e) for e in self.edges)
        object.__setattr__(self, "edges", norm)
        parent = list(range(self.n))

        def find(v: int) -> int:
            while parent[v] != v:
                parent[v] = parent[parent[v]]
                v = parent[v]
            return v

        for a, b in norm:
            if not (0 <= a < self.n and 0 <= b < self.n):
                raise ValueError(f"edge ({a},{b}) outside vertex range")
            ra, rb = find(a), find(b)
            if ra == rb:
                raise ValueError("edge set contains a cycle")
            parent[ra] = rb

    def path(self, i: int, j: int):
        """Edges of the unique forest path i..j, or None if disconnected."""
        if i == j:
            return ()
        adj = {v: [] for v in range(self.n)}
        for a, b in self.edges:
            adj[a].append(b)
            adj[b].append(a)
        prev = {i: None}
        queue = [i]
        while queue:
            nxt = []
            for v in queue:
                for w in adj[v]:
                    if w not in prev:
                        prev[w] = v
                        nxt.append(w)
            queue = nxt
        if j not in prev:
            return None
        out = []
        v = j
        while prev[v] is not None:
            out.append(_norm_edge((prev[v], v)))
            v = prev[v]
        return tuple(reversed(out))


@dataclass(frozen=True)
class DecoratedTree:
    """Spanning tree with oriented edges and optional per-end loop labels.

    decorations[k] = (s_tail, s_head) in {1,2}^2 picks which of the two
    loops of each endpoint vertex the edge k hooks into.
    """

    n: int
    edges: tuple
    decorations: tuple | None = None

    def __post_init__(self) -> None:
        if len(self.edges) != self.n - 1:
            raise ValueError("a spanning tree on n vertices has n-1 edges")
        Forest(self.n, frozenset(self.edges))  # acyclicity + range check
        if self.decorations is not None:
            if len(self.decorations) != len(self.edges):
                raise ValueError("one decoration pair per edge")
            for s, t in self.decorations:
                if s not in (1, 2) or t not in (1, 2):
                    raise ValueError("decorations take values in {1, 2}")

    @property
    def coordinations(self) -> tuple:
        r = [0] * self.n
        for a, b in self.edges:
            r[a] += 1
            r[b] += 1
        return tuple(r)


def enumerate_forests(n: int):
    """All forests on n labeled vertices (including the empty one)."""
    if n > MAX_N:
        raise SizeBound(f"forest enumeration bounded at n = {MAX_N}")
    if n < 1:
        raise ValueError("need at least one vertex")
    all_edges = list(combinations(range(n), 2))
    out = []
    for k in range(n):
        for subset in combinations(all_edges, k):
            try:
                out.append(Forest(n, frozenset(subset)))
            except ValueError:
                continue
    return out


def _prufer_trees(n: int):
    if n == 1:
        yield ()
        return
    if n == 2:
        yield ((0, 1),)
        return
    for seq in product(range(n), repeat=n - 2):
        degree = [1] * n
        for v in seq:
            degree[v] += 1
        leaves = [v for v in range(n) if degree[v] == 1]
        heapq.heapify(leaves)
        edges = []
        for v in seq:
            leaf = heapq.heappop(leaves)
            edges.append((min(leaf, v), max(leaf, v)))
            degree[v] -= 1
            if degree[v] == 1:
                heapq.heappush(leaves, v)
        a = heapq.heappop(leaves)
        b = heapq.heappop(leaves)
        edges.append((min(a, b), max(a, b)))
        yield tuple(edges)


def enumerate_trees(n: int, oriented: bool = False, decorated: bool = False):
    """Spanning trees on n labeled vertices; n^(n-2) of them.

    oriented distinguishes the two directions of every edge; decorated
    additionally assigns a loop label in {1,2} to each edge end, giving
    2^(2(n-1)) variants per oriented tree.
    """
    if n > MAX_N:
        raise SizeBound(f"tree enumeration bounded at n = {MAX_N}")
    if n < 1:
        raise ValueError("need at least one vertex")
    if decorated and not oriented:
        raise ValueError("decorations are defined on oriented trees")
    total = n ** max(n - 2, 0)
    if oriented:
        total *= 2 ** (n - 1)
    if decorated:
        total *= 4 ** (n - 1)
    if total > MAX_ENUM:
        raise SizeBound(f"enumeration of {total} trees not materializable")
    if not oriented:
        return [Forest(n, frozenset(e)) for e in _prufer_trees(n)]
    out = []
    for base in _prufer_trees(n):
        for flips in product((False, True), repeat=len(base)):
            edges = tuple(
                (b, a) if flip else (a, b) for (a, b), flip in zip(base, flips)
            )
            if not decorated:
                out.append(DecoratedTree(n, edges))
                continue
            for deco in product(((1, 1), (1, 2), (2, 1), (2, 2)), repeat=len(base)):
                out.append(DecoratedTree(n, edges, deco))
    return out


def bkar_interpolate(forest: Forest, w) -> np.ndarray:
    """Interpolated coupling matrix: x_ij = min of w along the forest
    path i..j, 0 when disconnected, 1 on the diagonal."""
    x = np.eye(forest.n)
    wn = {_norm_edge(e): float(v) for e, v in w.items()}
    missing = set(forest.edges) - set(wn)
    if missing:
        raise ValueError(f"missing weakening parameters for edges {sorted(missing)}")
    for i in range(forest.n):
        for j in range(i + 1, forest.n):
            path = forest.path(i, j)
            if path:
                x[i, j] = x[j, i] = min(wn[e] for e in path)
    return x


# exact BKAR evaluation: polynomials in the off-diagonal x_e as
# {monomial: Fraction} with monomial = sorted tuple of edges, repeats
# encoding powers


def _poly_norm(f) -> dict:
    out = {}
    for mono, c in f.items():
        key = tuple(sorted(_norm_edge(e) for e in mono))
        out[key] = out.get(key, Fraction(0)) + Fraction(c)
    return {k: v for k, v in out.items() if v != 0}


def _poly_diff(f: dict, e: tuple) -> dict:
    out = {}
    for mono, c in f.items():
        m = mono.count(e)
        if m == 0:
            continue
        rest = list(mono)
        rest.remove(e)
        key = tuple(rest)
        out[key] = out.get(key, Fraction(0)) + m * c
    return out


def _integrate_ordered(exps) -> Fraction:
    """Integral of prod_i w_i^exps[i] over 0 < w_1 < ... < w_k < 1."""
    acc = Fraction(1)
    carry = 0
    for a in exps:
        carry += a + 1
        acc /= carry
    return acc


def _forest_term(forest: Forest, f: dict) -> Fraction:
    """Exact value of the forest's BKAR contribution for polynomial f."""
    g = dict(f)
    edges = sorted(forest.edges)
    for e in edges:
        g = _poly_diff(g, e)
        if not g:
            return Fraction(0)
    total = Fraction(0)
    if not edges:
        for mono, c in g.items():
            if len(mono) == 0:
                total += c
        return total
    for mono, c in g.items():
        # monomials may involve pairs outside the forest: their value is
        # a path minimum or 0; resolve per ordering of the forest w's
        paths = {}
        ok = True
        for pair in set(mono):
            path = forest.path(*pair)
            if path is None:
                ok = False
                break
            paths[pair] = path
        if not ok:
            continue
        for order in permutations(edges):
            rank = {e: k for k, e in enumerate(order)}
            exps = [0] * len(edges)
            for pair in mono:
                e_min = min(paths[pair], key=lambda e: rank[e])
                exps[rank[e_min]] += 1
            total += c * _integrate_ordered(exps)
    return total


def bkar_forest_sum(f, n: int, trees_only: bool = False) -> Fraction:
    """Sum over forests (or spanning trees only) of the interpolated
    derivative integrals, evaluated exactly for polynomial f."""
    fn = _poly_norm(f)
    if trees_only:
        family = enumerate_trees(n)
    else:
        family = enumerate_forests(n)
    return sum((_forest_term(forest, fn) for forest in family), Fraction(0))


def bkar_identity_check(f, n: int) -> Fraction:
    """Residual of the forest interpolation identity: the full forest sum
    minus f at the all-ones coupling.  Exactly zero for polynomial f."""
    if n > 4:
        raise SizeBound("exact identity check bounded at n = 4")
    fn = _poly_norm(f)
    at_one = sum(fn.values(), Fraction(0))
    return bkar_forest_sum(fn, n) - at_one


# corner words: derivatives of Tr 1/(v - M M^dag)


@dataclass(frozen=True)
class CornerWord:
    """One term of the r-th derivative of a resolvent trace.

    letters name the r+1 corner operators between the r derivative
    slots; slots record which derivative each insertion point carries.
    Corners dressed on both sides (mdag_resolvent_m) are tallied
    separately as b_pi: with that convention the corner counts obey
    r_pi = 1 + i_pi + b_pi and r_m + r_mdag + 2 b_pi = r - 2 i_pi, which
    reduces to the familiar two-count form when the doubly dressed
    corners are grouped with the identity count.
    """

    letters: tuple
    slots: tuple

    @property
    def r(self) -> int:
        return len(self.slots)

    @property
    def r_pi(self) -> int:
        return self.letters.count(RESOLVENT)

    @property
    def r_m(self) -> int:
        return self.letters.count(M_RESOLVENT)

    @property
    def r_mdag(self) -> int:
        return self.letters.count(MDAG_RESOLVENT)

    @property
    def b_pi(self) -> int:
        return self.letters.count(MDAG_RESOLVENT_M)

    @property
    def i_pi(self) -> int:
        return self.letters.count(IDENTITY)

    @property
    def lemma_counts(self) -> tuple:
        """(r_pi, r_m, r_mdag, i_pi) in the four-count bookkeeping that
        groups doubly dressed corners with the identity tally; in that
        convention r_pi = 1 + i_pi and r_m + r_mdag = r - 2 i_pi hold on
        every word."""
        return (self.r_pi, self.r_m, self.r_mdag, self.i_pi + self.b_pi)


_LETTER = {
    (False, True, False): RESOLVENT,
    (False, True, True): M_RESOLVENT,
    (True, True, False): MDAG_RESOLVENT,
    (True, True, True): MDAG_RESOLVENT_M,
    (False, False, False): IDENTITY,
}
_IDENT_CORNER = (False, False, False)


def _apply_m(term, label):
    """d/dM: hits a resolvent (splitting it around a new M^dag-dressed
    corner) or an explicit M numerator (leaving an identity corner)."""
    corners, slots = term
    out = []
    for c, (left, has_r, right) in enumerate(corners):
        if has_r:
            new = corners[:c] + ((left, True, False), (True, True, right)) + corners[c + 1 :]
            out.append((new, slots[:c] + (label,) + slots[c:]))
        if right:
            new = corners[:c] + ((left, has_r, False), _IDENT_CORNER) + corners[c + 1 :]
            out.append((new, slots[:c] + (label,) + slots[c:]))
    return out


def _apply_mdag(term, label):
    corners, slots = term
    out = []
    for c, (left, has_r, right) in enumerate(corners):
        if has_r:
            new = corners[:c] + ((left, True, True), (False, True, right)) + corners[c + 1 :]
            out.append((new, slots[:c] + (label,) + slots[c:]))
        if left:
            new = corners[:c] + (_IDENT_CORNER, (False, has_r, right)) + corners[c + 1 :]
            out.append((new, slots[:c] + (label,) + slots[c:]))
    return out


def faadibruno_enumerate(q: int, qbar: int):
    """All corner-word terms of the (q, qbar)-th mixed derivative of a
    resolvent trace, each carrying prefactor 1."""
    if q < 0 or qbar < 0:
        raise ValueError("derivative orders must be nonnegative")
    if q + qbar > MAX_R:
        raise SizeBound(f"corner enumeration bounded at r = {MAX_R}")
    terms = [(((False, True, False),), ())]
    for i in range(q):
        terms = [t2 for t in terms for t2 in _apply_m(t, ("M", i + 1))]
    for j in range(qbar):
        terms = [t2 for t in terms for t2 in _apply_mdag(t, ("Mdag", j + 1))]
    return [
        CornerWord(tuple(_LETTER[c] for c in corners), slots)
        for corners, slots in terms
    ]


def _fd_step(r: int) -> float:
    # balances O(h^2) truncation against the (2h)^-r roundoff blowup
    return {0: 1e-5, 1: 1e-5, 2: 1e-4, 3: 1e-3}.get(r, 5e-3)


def faadibruno_numeric_check(v: complex, m: np.ndarray, q: int, qbar: int, h: float | None = None) -> float:
    """Relative residual between the corner-word sum (slots contracted
    with unit entry directions) and the matching finite difference of
    Tr 1/(v - M M^dag) in the entries of M and M^dag."""
    m = np.asarray(m, dtype=complex)
    n = m.shape[0]
    if m.shape != (n, n):
        raise ValueError("square matrix required")
    r = q + qbar
    if h is None:
        h = _fd_step(r)
    mdag = m.conj().T
    entries = [(a, b) for a in range(n) for b in range(n)]
    dirs_m = [entries[i % len(entries)] for i in range(q)]
    dirs_d = [entries[(i + 1) % len(entries)] for i in range(qbar)]

    def unit(ab):
        e = np.zeros((n, n), dtype=complex)
        e[ab] = 1.0
        return e

    x = m @ mdag
    res = np.linalg.inv(v * np.eye(n) - x)
    corner_mat = {
        RESOLVENT: res,
        M_RESOLVENT: res @ m,
        MDAG_RESOLVENT: mdag @ res,
        MDAG_RESOLVENT_M: mdag @ res @ m,
        IDENTITY: np.eye(n, dtype=complex),
    }
    total = 0j
    for word in faadibruno_enumerate(q, qbar):
        acc = corner_mat[word.letters[0]]
        for slot, letter in zip(word.slots, word.letters[1:]):
            kind, idx = slot
            d = unit(dirs_m[idx - 1] if kind == "M" else dirs_d[idx - 1])
            acc = acc @ d @ corner_mat[letter]
        total += np.trace(acc)

    def f(eps, dls):
        mm = m + sum(e * unit(ab) for e, ab in zip(eps, dirs_m))
        md = mdag + sum(d * unit(ab) for d, ab in zip(dls, dirs_d))
        return np.trace(np.linalg.inv(v * np.eye(n) - mm @ md))

    def central(step):
        acc = 0j
        for signs in product((1.0, -1.0), repeat=r):
            se, sd = signs[:q], signs[q:]
            acc += math.prod(signs) * f([s * step for s in se], [s * step for s in sd])
        return acc / (2.0 * step) ** r

    # one Richardson step cancels the O(h^2) truncation term
    fd = (4.0 * central(h / 2) - central(h)) / 3.0
    return float(abs(total - fd) / max(abs(fd), 1e-12))


# gradients of the action in the matrix entries


def _d_eigen(params: ModelParams, vals: np.ndarray) -> np.ndarray:
    """dS/ds_i for a (batch, N) spectrum array via the pairwise form:
    the action is a symmetric double sum, so the eigenvalue derivative
    is twice the one-sided pair derivative summed over partners."""
    p, lam = params.p, complex(params.lam)
    ev = evaluator(p)
    a = ev.a_eval_many(lam, vals.ravel().astype(complex)).reshape(vals.shape)
    adu = 1.0 / (1.0 + p * lam * a ** (p - 1))
    pair = np.zeros(vals.shape + (vals.shape[1],), dtype=complex)
    dpair = np.zeros_like(pair)
    for k in range(p):
        pair += a[:, :, None] ** k * a[:, None, :] ** (p - 1 - k)
        if k >= 1:
            dpair += k * a[:, :, None] ** (k - 1) * a[:, None, :] ** (p - 1 - k)
    g1 = -lam * dpair * adu[:, :, None] / (1.0 + lam * pair)
    return 2.0 * np.sum(g1, axis=2)


def _s_of_matrices(params: ModelParams, ms: np.ndarray) -> np.ndarray:
    x = ms @ ms.conj().transpose(0, 2, 1)
    vals = np.clip(np.linalg.eigvalsh(x), 0.0, None)
    return _principal_log_action(params, vals)


def _grad_fd(params: ModelParams, m: np.ndarray, h: float = 1e-6):
    """Entrywise Wirtinger derivatives of S by central differences; the
    perturbed matrix keeps X = M M^dag Hermitian, so no eigenbasis is
    ever needed."""
    n = m.shape[0]
    pert = []
    for a in range(n):
        for b in range(n):
            for step in (h, -h, 1j * h, -1j * h):
                mm = m.copy()
                mm[a, b] += step
                pert.append(mm)
    s = _s_of_matrices(params, np.array(pert)).reshape(n, n, 4)
    d_re = (s[..., 0] - s[..., 1]) / (4 * h)
    d_im = (s[..., 2] - s[..., 3]) / (4 * h)
    dm = d_re - 1j * d_im
    dmbar = d_re + 1j * d_im
    return dm, dmbar.T


def _grads_batch(params: ModelParams, m: np.ndarray):
    """(G M, M^dag G) per sample, where G is dS/dX in the eigenbasis.

    dS/dM^dag_{ab} = (G M)_{ba} and dS/dM_{ab} = (M^dag G)_{ba}.  Samples
    with nearly coincident eigenvalues fall back to entrywise finite
    differences: the eigenbasis returned inside a near-degenerate
    cluster is noise-sensitive even though the assembled gradient is
    continuous there.
    """
    mdag = m.conj().transpose(0, 2, 1)
    x = m @ mdag
    vals, vecs = np.linalg.eigh(x)
    vals = np.clip(vals, 0.0, None)
    d = _d_eigen(params, vals)
    g = (vecs * d[:, None, :]) @ vecs.conj().transpose(0, 2, 1)
    gm = g @ m
    mdg = mdag @ g
    if vals.shape[1] > 1:
        scale = 1.0 + vals[:, -1]
        bad = np.min(np.diff(vals, axis=1), axis=1) < 1e-9 * scale
        for idx in np.nonzero(bad)[0]:
            dm, dd = _grad_fd(params, m[idx])
            gm[idx] = dd.T
            mdg[idx] = dm.T
    return gm, mdg


def grad_s_entries(params: ModelParams, m: np.ndarray, method: str = "spectral"):
    """Gradient matrices (dS/dM, dS/dM^dag), entry [a, b] differentiating
    with respect to that entry."""
    m = np.asarray(m, dtype=complex)
    if params.n_l != params.n_r or m.shape != (params.n_l, params.n_l):
        raise ValueError("square matrix matching the model shape required")
    if method == "fd":
        return _grad_fd(params, m)
    if method != "spectral":
        raise ValueError("method must be 'spectral' or 'fd'")
    if params.n_l > 1:
        vals = np.linalg.eigvalsh(m @ m.conj().T)
        if np.min(np.diff(vals)) < 1e-9 * (1.0 + vals[-1]):
            raise DegenerateSpectrum(
                "eigenvalues too close for a stable eigenbasis; use method='fd'"
            )
    gm, mdg = _grads_batch(params, m[None])
    return mdg[0].T, gm[0].T


# Monte Carlo amplitudes


@dataclass(frozen=True)
class AmplitudeEstimate:
    tree_id: str
    value: complex
    std_error: float
    n_samples: int
    seed: int
    w_node_check: float = 0.0


@dataclass(frozen=True)
class LvePartialSum:
    value: complex
    std_error: float
    n_max: int
    n_samples: int
    seed: int


def _amplitude_gate(params: ModelParams) -> None:
    if params.n_l != params.n_r:
        raise ValueError("tree amplitudes are defined for the square case")
    if not params.is_in_pacman():
        raise ValueError("lam outside the pacman domain")


def _worker_rng(seed: int, tag: int, worker: int) -> np.random.Generator:
    return np.random.Generator(np.random.Philox([seed, tag]).jumped(worker))


def _gaussian_chunk(rng: np.random.Generator, take: int, n: int, copies: int) -> np.ndarray:
    raw = rng.standard_normal((take, copies, n, n, 2))
    return (raw[..., 0] + 1j * raw[..., 1]) / np.sqrt(2 * n)


def amplitude_trivial(params: ModelParams, cfg: McConfig) -> AmplitudeEstimate:
    """Single-vertex amplitude: the Gaussian mean of the action over
    N^2, estimated by seeded Monte Carlo."""
    if params.lam == 0:
        return AmplitudeEstimate("empty", 0j, 1e-16, cfg.n_samples, cfg.seed)
    _amplitude_gate(params)
    n = params.n_l
    total = 0j
    total_sq = 0.0
    base, rem = divmod(cfg.n_samples, cfg.n_workers)
    for worker in range(cfg.n_workers):
        n_w = base + (1 if worker < rem else 0)
        rng = _worker_rng(cfg.seed, 0, worker)
        done = 0
        while done < n_w:
            take = min(MC_CHUNK, n_w - done)
            m = _gaussian_chunk(rng, take, n, 1)[:, 0]
            s = _s_of_matrices(params, m)
            total += s.sum()
            total_sq += float(np.sum(np.abs(s) ** 2))
            done += take
    mean = total / cfg.n_samples
    var = max(total_sq / cfg.n_samples - abs(mean) ** 2, 0.0)
    if not (math.isfinite(var) and math.isfinite(abs(mean))):
        raise QuadratureFailure("MC variance blew up for the vertex amplitude")
    err = max(math.sqrt(var / cfg.n_samples), 1e-16) / n**2
    return AmplitudeEstimate("empty", complex(mean) / n**2, err, cfg.n_samples, cfg.seed)


def _w_nodes(k: int):
    x, w = np.polynomial.legendre.leggauss(k)
    return 0.5 * (x + 1.0), 0.5 * w


def amplitude_tree2(params: ModelParams, cfg: McConfig) -> AmplitudeEstimate:
    """Two-vertex amplitude for one oriented edge.

    The two replicas share a Gaussian component so that their cross
    covariance is exactly w/N; the edge contracts the M^dag gradient of
    the first action against the M gradient of the second, and the w
    integral runs over Gauss-Legendre nodes with a doubled-node check
    stored on the estimate.
    """
    if params.lam == 0:
        return AmplitudeEstimate("tree2", 0j, 1e-16, cfg.n_samples, cfg.seed)
    _amplitude_gate(params)
    n = params.n_l
    if n > 3:
        raise SizeBound("tree amplitudes bounded at N = 3")
    w8, q8 = _w_nodes(8)
    w16, q16 = _w_nodes(16)
    total8 = 0j
    total16 = 0j
    total_sq = 0.0
    base, rem = divmod(cfg.n_samples, cfg.n_workers)
    for worker in range(cfg.n_workers):
        n_w = base + (1 if worker < rem else 0)
        rng = _worker_rng(cfg.seed, 1, worker)
        done = 0
        while done < n_w:
            take = min(MC_CHUNK, n_w - done)
            g = _gaussian_chunk(rng, take, n, 3)
            y8 = np.zeros(take, dtype=complex)
            y16 = np.zeros(take, dtype=complex)
            for nodes, weights, acc in ((w8, q8, y8), (w16, q16, y16)):
                for wv, qw in zip(nodes, weights):
                    m1 = math.sqrt(wv) * g[:, 0] + math.sqrt(1.0 - wv) * g[:, 1]
                    m2 = math.sqrt(wv) * g[:, 0] + math.sqrt(1.0 - wv) * g[:, 2]
                    gm1, _ = _grads_batch(params, m1)
                    _, mdg2 = _grads_batch(params, m2)
                    acc += qw * np.einsum("xij,xji->x", gm1, mdg2)
            total8 += y8.sum()
            total16 += y16.sum()
            total_sq += float(np.sum(np.abs(y16) ** 2))
            done += take
    norm = n ** (-3)
    mean = total16 / cfg.n_samples
    var = max(total_sq / cfg.n_samples - abs(mean) ** 2, 0.0)
    err = max(math.sqrt(var / cfg.n_samples), 1e-16) * norm
    check = abs(total16 - total8) / cfg.n_samples * norm
    return AmplitudeEstimate(
        "tree2", complex(mean) * norm, err, cfg.n_samples, cfg.seed, w_node_check=check
    )


def lve_partial_sum(params: ModelParams, cfg: McConfig, n_max: int = 2) -> LvePartialSum:
    """Partial tree expansion of the free energy: the single vertex plus,
    at n_max = 2, the two oriented one-edge trees (equal by symmetry, so
    the amplitude is computed once and doubled)."""
    if n_max < 1:
        raise ValueError("n_max must be at least 1")
    if n_max > 2:
        raise SizeBound("partial sums implemented through n_max = 2")
    a0 = amplitude_trivial(params, cfg)
    if n_max == 1:
        return LvePartialSum(a0.value, a0.std_error, 1, cfg.n_samples, cfg.seed)
    t2 = amplitude_tree2(params, cfg)
    n_trees = len(enumerate_trees(2, oriented=True))
    value = a0.value + 0.5 * n_trees * t2.value
    err = math.hypot(a0.std_error, 0.5 * n_trees * t2.std_error)
    return LvePartialSum(complex(value), err, 2, cfg.n_samples, cfg.seed)


def amplitude_to_json_dict(est: AmplitudeEstimate) -> dict:
    return {
        "tree_id": est.tree_id,
        "value_re": est.value.real,
        "value_im": est.value.imag,
        "std_error": est.std_error,
        "n_samples": est.n_samples,
        "seed": est.seed,
        "w_node_check": est.w_node_check,
    }


def trees_to_csv(trees) -> str:
    """Edge-list CSV: one row per tree, edges as tail->head pairs."""
    lines = ["tree_index,edges,decorations"]
    for k, t in enumerate(trees):
        if isinstance(t, Forest):
            edges = ";".join(f"{a}-{b}" for a, b in sorted(t.edges))
            deco = ""
        else:
            edges = ";".join(f"{a}>{b}" for a, b in t.edges)
            deco = (
                ";".join(f"{s}{u}" for s, u in t.decorations)
                if t.decorations is not None
                else ""
            )
        lines.append(f"{k},{edges},{deco}")
    return "\n".join(lines) + "\n"
