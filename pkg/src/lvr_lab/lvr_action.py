"""Loop vertex action for the complex matrix model with Tr (M M^dag)^p.

Everything is driven by the scalar map a(lambda, u) applied to the
spectrum s_1..s_{N_l} of X = M M^dag.  The action splits into

    s_mat = - sum_{i,j} log[1 + lambda * sum_{k=0}^{p-1} a_i^k a_j^(p-1-k)]
    s_vec = - (N_r - N_l) * sum_i log[1 + lambda * a_i^(p-1)]

with a_i = a(lambda, s_i).  Logs are principal-branch, protected by a
winding guard along the homotopy t |-> t*lambda from 0: a crossing of the
negative real axis is an error, never silently unwound into the answer.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np

from .errors import (
    DegenerateSpectrum,
    LogBranchAmbiguity,
    LvrLabError,
    SingularMatrix,
    ToleranceNotMet,
)
from .fuss_catalan import FcEvaluator

__all__ = [
    "PacmanDomain",
    "ModelParams",
    "Spectrum",
    "LoopVertexAction",
    "evaluator",
    "matrix_a",
    "action_s",
    "d_action_dlam",
    "grad_spectral",
    "resolvent_derivative_check",
    "selective_integration_check",
]


@lru_cache(maxsize=None)
def evaluator(p: int) -> FcEvaluator:
    return FcEvaluator(p)


@dataclass(frozen=True)
class PacmanDomain:
    """Coupling domain 0 < |lam| < eta, |arg lam| < pi - epsilon."""

    epsilon: float = 0.5
    eta: float = 1.0

    def __post_init__(self) -> None:
        if not 0 < self.epsilon < np.pi:
            raise ValueError("epsilon must lie in (0, pi)")
        if self.eta <= 0:
            raise ValueError("eta must be positive")

    def contains(self, lam: complex) -> bool:
        lam = complex(lam)
        if lam == 0 or abs(lam) >= self.eta:
            return False
        return abs(np.angle(lam)) < np.pi - self.epsilon


@dataclass(frozen=True)
class ModelParams:
    """Model data: interaction order p, coupling lam, matrix shape N_l x N_r."""

    p: int
    lam: complex
    n_l: int
    n_r: int
    pacman: PacmanDomain = field(default_factory=PacmanDomain)

    def __post_init__(self) -> None:
        if not (isinstance(self.p, int) and self.p >= 2):
            raise ValueError(f"p must be an integer >= 2, got {self.p!r}")
        if not (isinstance(self.n_l, int) and self.n_l >= 1):
            raise ValueError("n_l must be a positive integer")
        if not (isinstance(self.n_r, int) and self.n_r >= 1):
            raise ValueError("n_r must be a positive integer")
        if self.n_l > self.n_r:
            raise ValueError("shape convention requires n_l <= n_r")

    def is_in_pacman(self, lam: complex | None = None) -> bool:
        return self.pacman.contains(self.lam if lam is None else lam)


@dataclass(frozen=True)
class Spectrum:
    """Eigenvalues of X = M M^dag: nonnegative reals, sorted ascending."""

    values: tuple

    def __post_init__(self) -> None:
        vals = tuple(float(v) for v in self.values)
        if any(v < 0 for v in vals):
            raise ValueError("spectrum entries must be >= 0")
        if any(vals[i] > vals[i + 1] for i in range(len(vals) - 1)):
            raise ValueError("spectrum must be sorted ascending")
        if len(vals) == 0:
            raise ValueError("spectrum must be nonempty")
        object.__setattr__(self, "values", vals)

    @classmethod
    def from_matrix(cls, m: np.ndarray) -> "Spectrum":
        m = np.asarray(m, dtype=complex)
        if m.ndim != 2:
            raise ValueError("expected a 2-d matrix")
        gram = m @ m.conj().T
        vals = np.linalg.eigvalsh(gram)
        # eigvalsh can return -1e-17 noise for exact zero modes
        vals = np.where(np.abs(vals) < 1e-12, 0.0, vals)
        if np.any(vals < 0):
            raise ValueError("Gram matrix produced a negative eigenvalue")
        return cls(tuple(float(v) for v in np.sort(vals)))

    @property
    def array(self) -> np.ndarray:
        return np.asarray(self.values, dtype=float)

    def __len__(self) -> int:
        return len(self.values)


@dataclass(frozen=True)
class LoopVertexAction:
    s_mat: complex
    s_vec: complex
    total: complex


def _as_spectrum(spec) -> Spectrum:
    if isinstance(spec, Spectrum):
        return spec
    return Spectrum(tuple(float(v) for v in np.sort(np.atleast_1d(spec))))


def matrix_a(spec, params: ModelParams) -> np.ndarray:
    """a(lam, s_i) for each eigenvalue s_i; the spectrum of the new field.

    Each returned a_i satisfies s_i = a_i + lam * a_i^p to 1e-10.  Errors
    from the underlying T_p evaluation are re-raised with the offending
    eigenvalue index attached.
    """
    spec = _as_spectrum(spec)
    ev = evaluator(params.p)
    s = spec.array.astype(complex)
    try:
        a = ev.a_eval_many(params.lam, s)
    except LvrLabError as exc:
        for i, si in enumerate(s):
            try:
                ev.a_eval(params.lam, complex(si))
            except LvrLabError as inner:
                raise type(inner)(
                    f"eigenvalue index {i} (s={si.real:g}): {inner}"
                ) from inner
        raise exc
    res = np.abs(a + params.lam * a**params.p - s)
    if np.max(res) > 1e-10:
        i = int(np.argmax(res))
        raise ToleranceNotMet(
            f"a-map residual {res[i]:.3e} at eigenvalue index {i}"
        )
    return a


def _log_homotopy(w_path: np.ndarray, min_modulus: float = 1e-12) -> np.ndarray:
    """Principal-style log of w(t=1) tracked along a homotopy from w(t=0)=1.

    w_path has the homotopy on axis 0.  The phase is unwrapped along the
    path; if any entry winds past the negative real axis (|accumulated
    arg| >= pi) or the modulus collapses, the branch is ambiguous and we
    refuse to pick one.
    """
    if np.min(np.abs(w_path)) < min_modulus:
        raise LogBranchAmbiguity("log argument vanished along the homotopy")
    theta = np.unwrap(np.angle(w_path), axis=0)
    theta = theta - theta[0]  # path starts at w=1, arg 0
    if np.max(np.abs(np.diff(theta, axis=0))) > 0.5 * np.pi:
        raise LogBranchAmbiguity(
            "homotopy too coarse to track the log branch; refine failed"
        )
    if np.max(np.abs(theta)) >= np.pi - 1e-9:
        raise LogBranchAmbiguity("log argument crossed the negative real axis")
    return np.log(np.abs(w_path[-1])) + 1j * theta[-1]


def _pair_sum(a_i: np.ndarray, a_j: np.ndarray, p: int) -> np.ndarray:
    """sum_{k=0}^{p-1} a_i^k * a_j^(p-1-k), broadcast over leading axes."""
    out = np.zeros(np.broadcast_shapes(a_i.shape, a_j.shape), dtype=complex)
    for k in range(p):
        out = out + a_i**k * a_j ** (p - 1 - k)
    return out


def _a_on_homotopy(spec: Spectrum, params: ModelParams, n_t: int) -> tuple:
    ts = np.linspace(0.0, 1.0, n_t)
    s = spec.array.astype(complex)
    z = -(ts[:, None] * params.lam) * s[None, :] ** (params.p - 1)
    ev = evaluator(params.p)
    t_vals = ev.tp_eval_many(z.ravel()).reshape(z.shape)
    return ts, s[None, :] * t_vals


def action_s(spec, params: ModelParams, n_t: int = 96) -> LoopVertexAction:
    """Loop vertex action in spectral form; exactly 0 at lam = 0."""
    spec = _as_spectrum(spec)
    if len(spec) != params.n_l:
        raise ValueError(f"spectrum has {len(spec)} entries, expected n_l={params.n_l}")
    if params.lam == 0:
        return LoopVertexAction(0j, 0j, 0j)
    p, lam = params.p, params.lam
    attempt = n_t
    while True:
        ts, a = _a_on_homotopy(spec, params, attempt)
        tl = (ts * lam)[:, None, None]
        w_mat = 1 + tl * _pair_sum(a[:, :, None], a[:, None, :], p)
        w_vec = 1 + (ts * lam)[:, None] * a ** (p - 1)
        try:
            log_mat = _log_homotopy(w_mat)
            log_vec = _log_homotopy(w_vec)
            break
        except LogBranchAmbiguity as exc:
            if "too coarse" in str(exc) and attempt < 1536:
                attempt *= 2
                continue
            raise
    s_mat = -np.sum(log_mat)
    s_vec = -(params.n_r - params.n_l) * np.sum(log_vec)
    return LoopVertexAction(complex(s_mat), complex(s_vec), complex(s_mat + s_vec))


def _weighted_pair_sum(a_i: np.ndarray, a_j: np.ndarray, p: int) -> np.ndarray:
    """sum_{k=1}^{p-1} k * a_i^(k-1) * a_j^(p-1-k)."""
    out = np.zeros(np.broadcast_shapes(a_i.shape, a_j.shape), dtype=complex)
    for k in range(1, p):
        out = out + k * a_i ** (k - 1) * a_j ** (p - 1 - k)
    return out


def d_action_dlam(spec, params: ModelParams) -> complex:
    """Analytic d(total)/d(lam) at fixed spectrum.

    With W_ij = 1 + lam * P_ij and P_ij the symmetric pair sum, the
    derivative is -sum_ij (P_ij + lam * dP_ij)/W_ij plus the vector piece;
    dP uses da/dlam = -a^p / (1 + p lam a^(p-1)).
    """
    spec = _as_spectrum(spec)
    p, lam = params.p, params.lam
    ev = evaluator(p)
    s = spec.array.astype(complex)
    a = matrix_a(spec, params)
    adot = ev.a_dt_many(lam, s)
    ai, aj = a[:, None], a[None, :]
    w = 1 + lam * _pair_sum(ai, aj, p)
    q = adot[:, None] * _weighted_pair_sum(ai, aj, p)
    dw = _pair_sum(ai, aj, p) + lam * (q + q.T)
    d_mat = -np.sum(dw / w)
    wv = 1 + lam * a ** (p - 1)
    dwv = a ** (p - 1) + lam * (p - 1) * a ** (p - 2) * adot
    d_vec = -(params.n_r - params.n_l) * np.sum(dwv / wv)
    return complex(d_mat + d_vec)


def grad_spectral(spec, params: ModelParams) -> np.ndarray:
    """h_m = d(total)/d(s_m): gradient of the action in the eigenvalues.

    Uses the symmetry of the pair sum to fold the i- and j-derivatives
    into one weighted sum, then the chain rule da/ds = 1/(1 + p lam a^(p-1)).
    """
    spec = _as_spectrum(spec)
    p, lam = params.p, params.lam
    a = matrix_a(spec, params)
    a_du = 1.0 / (1.0 + p * lam * a ** (p - 1))
    ai, aj = a[:, None], a[None, :]
    w = 1 + lam * _pair_sum(ai, aj, p)
    d1 = _weighted_pair_sum(ai, aj, p)
    h = -2.0 * lam * a_du * np.sum(d1 / w, axis=1)
    wv = 1 + lam * a ** (p - 1)
    h = h - (params.n_r - params.n_l) * lam * (p - 1) * a ** (p - 2) * a_du / wv
    return h


def resolvent_derivative_check(spec, params: ModelParams) -> float:
    """Max deviation between the divided-difference matrix of a(lam, .)
    on the spectrum and the entrywise reciprocal pair-sum matrix.

    Off-diagonal: (a_i - a_j)/(s_i - s_j) vs 1/(1 + lam * P_ij);
    diagonal: da/ds = 1/(1 + p lam a^(p-1)), which is the P_ii case.
    """
    spec = _as_spectrum(spec)
    s = spec.array
    n = len(s)
    for i in range(n):
        for j in range(i + 1, n):
            if abs(s[i] - s[j]) < 1e-10:
                raise DegenerateSpectrum(
                    f"eigenvalues {i} and {j} coincide to 1e-10; perturb inputs"
                )
    p, lam = params.p, params.lam
    a = matrix_a(spec, params)
    ds = s[:, None] - s[None, :]
    np.fill_diagonal(ds, 1.0)  # placeholder; diagonal overwritten below
    dd = (a[:, None] - a[None, :]) / ds
    diag = 1.0 / (1.0 + p * lam * a ** (p - 1))
    dd[np.diag_indices(n)] = diag
    rhs = 1.0 / (1 + lam * _pair_sum(a[:, None], a[None, :], p))
    return float(np.max(np.abs(dd - rhs)))


def selective_integration_check(m: np.ndarray, params: ModelParams) -> float:
    """Residual of the stationarity equation for the shift C0.

    C0 = A_h * pinv(M^dag) - M with A_h = (M M^dag) T_p(-lam (M M^dag)^(p-1))
    built by Hermitian functional calculus; the returned residual is
    max | C0 + lam * ((M + C0) M^dag)^(p-1) (M + C0) |, which vanishes
    identically when C0 solves the equation.
    """
    m = np.asarray(m, dtype=complex)
    if m.shape != (params.n_l, params.n_r):
        raise ValueError(f"matrix shape {m.shape} != ({params.n_l}, {params.n_r})")
    svals = np.linalg.svd(m, compute_uv=False)
    if svals.min() < 1e-10 * max(1.0, svals.max()):
        raise SingularMatrix("M^dag has no right inverse to working tolerance")
    gram = m @ m.conj().T
    evals, u = np.linalg.eigh(gram)
    evals = np.clip(evals, 0.0, None)
    a_vals = evaluator(params.p).a_eval_many(params.lam, evals.astype(complex))
    a_h = (u * a_vals[None, :]) @ u.conj().T
    c0 = a_h @ np.linalg.pinv(m.conj().T) - m
    shifted = m + c0
    b = shifted @ m.conj().T
    residual = c0 + params.lam * np.linalg.matrix_power(b, params.p - 1) @ shifted
    return float(np.max(np.abs(residual)))
