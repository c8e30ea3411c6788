"""Small-N ground truth for the partition function, both representations.

Z is always normalized by its lambda = 0 Gaussian value.  Two independent
routes are provided:

  * eigen_quadrature: tensor Gauss-Legendre integration of the Wishart
    eigenvalue density Delta(s)^2 * prod exp(-N s_i) on [0, s_max]^N,
    reweighted by exp(-N lam sum s_i^p) (original) or exp(S) (loop
    vertex), square case, N <= 4;
  * monte_carlo: direct sampling of complex Gaussian matrices with
    entry variance 1/N_r, reweighted the same way; deterministic for a
    fixed (seed, n_workers, n_samples) triple via counter-based
    per-worker streams.

The oracle restricts itself to Re(lam) >= 0: beyond that the original
integrand is not absolutely integrable on the real spectrum and the
comparison would be meaningless.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction

import mpmath
import numpy as np

from .errors import DivergentIntegrand
from .lvr_action import ModelParams, _log_homotopy, evaluator

__all__ = [
    "ZResult",
    "McConfig",
    "z_original",
    "z_lvr",
    "free_energy",
    "JacobianReport",
    "jacobian_positivity_check",
    "z0_closed_form",
    "measure_self_test",
    "z_series_fd",
    "zresult_to_json_dict",
]

DEFAULT_NODES = {1: 384, 2: 128, 3: 72, 4: 40}
MC_CHUNK = 8192


@dataclass(frozen=True)
class ZResult:
    value: complex
    method: str
    error_estimate: float
    n_samples_or_nodes: int
    seed: int | None = None


@dataclass(frozen=True)
class McConfig:
    n_samples: int
    seed: int
    n_workers: int = 1

    def __post_init__(self) -> None:
        if self.n_samples < 1 or self.n_workers < 1:
            raise ValueError("n_samples and n_workers must be positive")


def _stability_gate(lam: complex) -> None:
    if complex(lam).real < 0:
        raise DivergentIntegrand(
            "Re(lam) < 0 makes exp(-N lam Tr X^p) non-integrable on the "
            "real spectrum; the oracle covers |arg lam| <= pi/2 only"
        )


def _s_max(params: ModelParams) -> float:
    # Re(lam) >= 0 means the interaction only suppresses the integrand,
    # so the window is set by the Gaussian factor e^{-n s} alone; the
    # extra margin absorbs the polynomial Vandermonde growth.
    return (40.0 + 6.0 * params.n_l) / params.n_l


def _pair_log_table(params: ModelParams, nodes: np.ndarray, n_t: int = 48) -> np.ndarray:
    """Winding-guarded log[1 + lam * pair sum] over all node pairs.

    Returns L[g, h] for 1-d node values; tensor grids gather from it.
    """
    p, lam = params.p, params.lam
    ev = evaluator(p)
    if lam.imag == 0.0 and lam.real >= 0.0:
        # real coupling keeps 1 + lam * pair on [1, inf) (T_p > 0 on the
        # negative axis), so the principal log is already the homotopy log
        z = -lam * nodes.astype(complex) ** (p - 1)
        a = nodes * ev.tp_eval_many(z)
        pair = np.zeros((nodes.size, nodes.size), dtype=complex)
        for k in range(p):
            pair += a[:, None] ** k * a[None, :] ** (p - 1 - k)
        return np.log(1 + lam * pair)
    ts = np.linspace(0.0, 1.0, n_t)
    z = -(ts[:, None] * lam) * nodes[None, :].astype(complex) ** (p - 1)
    a = nodes[None, :] * ev.tp_eval_many(z.ravel()).reshape(z.shape)
    pair = np.zeros((n_t, nodes.size, nodes.size), dtype=complex)
    for k in range(p):
        pair += a[:, :, None] ** k * a[:, None, :] ** (p - 1 - k)
    w = 1 + (ts * lam)[:, None, None] * pair
    return _log_homotopy(w)


def _quadrature_ratio(params: ModelParams, mode: str, n_nodes: int) -> complex:
    n, p, lam = params.n_l, params.p, params.lam
    x, w = np.polynomial.legendre.leggauss(n_nodes)
    s_max = _s_max(params)
    s = 0.5 * s_max * (x + 1.0)
    wq = 0.5 * s_max * w
    # log-domain 1-d weights: quadrature weight times e^{-N s}
    log_base = np.log(wq) - n * s
    if mode == "original":
        log_re = -(n * lam) * s.astype(complex) ** p
    else:
        log_table = _pair_log_table(params, s)
    idx = np.indices((n_nodes,) * n)
    log_den = np.zeros((n_nodes,) * n)
    for i in range(n):
        log_den = log_den + log_base[idx[i]]
    # Vandermonde^2 over distinct coordinates of the tensor grid
    for i in range(n):
        for j in range(i + 1, n):
            with np.errstate(divide="ignore"):
                log_den = log_den + 2.0 * np.log(np.abs(s[idx[i]] - s[idx[j]]))
    log_num = log_den.astype(complex)
    if mode == "original":
        for i in range(n):
            log_num = log_num + log_re[idx[i]]
    else:
        for i in range(n):
            for j in range(n):
                log_num = log_num - log_table[idx[i], idx[j]]
    shift = np.max(log_den)
    den = np.exp(log_den - shift).sum()
    num = np.exp(log_num - shift).sum()
    return complex(num / den)


def _quadrature_z(params: ModelParams, mode: str, n_nodes: int | None) -> ZResult:
    if params.n_l != params.n_r:
        raise ValueError("the eigenvalue quadrature covers the square case only")
    if params.n_l > 4:
        raise ValueError("quadrature supported for N <= 4; use Monte Carlo")
    _stability_gate(params.lam)
    n_nodes = DEFAULT_NODES[params.n_l] if n_nodes is None else n_nodes
    if params.lam == 0:
        return ZResult(1.0 + 0j, "eigen_quadrature", 1e-16, n_nodes**params.n_l)
    value = _quadrature_ratio(params, mode, n_nodes)
    coarse = _quadrature_ratio(params, mode, max(8, (3 * n_nodes) // 4))
    err = max(abs(value - coarse), 1e-16)
    return ZResult(value, "eigen_quadrature", err, n_nodes**params.n_l)


def _principal_log_action(params: ModelParams, s_batch: np.ndarray) -> np.ndarray:
    """S per sample for a (batch, N_l) spectrum array, vectorized.

    For real lam >= 0 every log argument is a real number >= 1, so the
    principal branch is the true branch for every sample.  For complex
    lam the principal branch is safe only for samples whose pair sums
    satisfy |lam| * max |pair| < 1 (the argument then stays inside the
    unit disk around 1); the others are recomputed with the
    homotopy-guarded action.
    """
    p, lam = params.p, params.lam
    ev = evaluator(p)
    a = ev.a_eval_many(lam, s_batch.ravel().astype(complex)).reshape(s_batch.shape)
    pair = np.zeros(s_batch.shape + (s_batch.shape[1],), dtype=complex)
    for k in range(p):
        pair += a[:, :, None] ** k * a[:, None, :] ** (p - 1 - k)
    s_mat = -np.sum(np.log(1 + lam * pair), axis=(1, 2))
    vec = 1 + lam * a ** (p - 1)
    s_vec = -(params.n_r - params.n_l) * np.sum(np.log(vec), axis=1)
    s_val = s_mat + s_vec
    if lam.imag == 0.0 and lam.real >= 0.0:
        return s_val
    risky = np.abs(lam) * np.max(np.abs(pair), axis=(1, 2)) >= 0.99
    if np.any(risky):
        from .lvr_action import Spectrum, action_s

        for i in np.nonzero(risky)[0]:
            s_val[i] = action_s(Spectrum(tuple(np.sort(s_batch[i]))), params).total
    return s_val


def _mc_weights_chunk(params: ModelParams, m: np.ndarray, mode: str) -> np.ndarray:
    p, lam = params.p, params.lam
    x = m @ m.conj().transpose(0, 2, 1)
    if mode == "original":
        xp = x
        for _ in range(p - 1):
            xp = xp @ x
        tr = np.trace(xp, axis1=1, axis2=2)
        return np.exp(-params.n_r * lam * tr)
    s_batch = np.linalg.eigvalsh(x)
    s_batch = np.clip(s_batch, 0.0, None)
    return np.exp(_principal_log_action(params, s_batch))


def _mc_z(params: ModelParams, cfg: McConfig, mode: str) -> ZResult:
    _stability_gate(params.lam)
    total = 0j
    total_sq = 0.0
    base, rem = divmod(cfg.n_samples, cfg.n_workers)
    for worker in range(cfg.n_workers):
        n_w = base + (1 if worker < rem else 0)
        rng = np.random.Generator(np.random.Philox(cfg.seed).jumped(worker))
        done = 0
        while done < n_w:
            take = min(MC_CHUNK, n_w - done)
            raw = rng.standard_normal((take, params.n_l, params.n_r, 2))
            m = (raw[..., 0] + 1j * raw[..., 1]) / np.sqrt(2 * params.n_r)
            w = _mc_weights_chunk(params, m, mode)
            total += w.sum()
            total_sq += float(np.abs(w) ** 2 @ np.ones(take))
            done += take
    mean = total / cfg.n_samples
    var = max(total_sq / cfg.n_samples - abs(mean) ** 2, 0.0)
    err = max(math.sqrt(var / cfg.n_samples), 1e-16)
    return ZResult(complex(mean), "monte_carlo", err, cfg.n_samples, cfg.seed)


def z_original(
    params: ModelParams, cfg: McConfig | None = None, *, n_nodes: int | None = None
) -> ZResult:
    """Normalized Z of the defining action exp(-N_r Tr[X + lam X^p]).

    cfg=None selects the eigenvalue quadrature (square, N <= 4); passing
    an McConfig switches to Monte Carlo (any shape).
    """
    if cfg is None:
        return _quadrature_z(params, "original", n_nodes)
    return _mc_z(params, cfg, "original")


def z_lvr(
    params: ModelParams, cfg: McConfig | None = None, *, n_nodes: int | None = None
) -> ZResult:
    """Normalized Z in the loop vertex representation: E[exp(S)].

    Must agree with z_original; the agreement is the numerical statement
    of the change-of-variables identity.
    """
    if cfg is None:
        return _quadrature_z(params, "lvr", n_nodes)
    return _mc_z(params, cfg, "lvr")


def free_energy(
    params: ModelParams,
    cfg: McConfig | None = None,
    representation: str = "original",
    *,
    n_nodes: int | None = None,
) -> complex:
    """log(Z_normalized) / (N_l N_r), principal branch (Z near 1)."""
    if representation == "original":
        z = z_original(params, cfg, n_nodes=n_nodes)
    elif representation == "lvr":
        z = z_lvr(params, cfg, n_nodes=n_nodes)
    else:
        raise ValueError("representation must be 'original' or 'lvr'")
    if z.value == 0:
        raise DivergentIntegrand("Z evaluated to zero; log undefined")
    return complex(np.log(z.value) / (params.n_l * params.n_r))


@dataclass(frozen=True)
class JacobianReport:
    passed: bool
    min_factor: float
    n_spectra: int
    n_factors: int


def jacobian_positivity_check(params: ModelParams, spectra) -> JacobianReport:
    """Verify 1 + lam * sum_k a_i^k a_j^(p-1-k) > 0 on sampled spectra.

    Positivity of every factor for real lam > 0 is what lets the Jacobian
    of the change of variables drop its absolute value.
    """
    lam = complex(params.lam)
    if lam.imag != 0 or lam.real <= 0:
        raise ValueError("positivity check is defined for real lam > 0")
    from .lvr_action import _pair_sum, matrix_a

    min_factor = math.inf
    n_factors = 0
    n_spectra = 0
    for spec in spectra:
        a = matrix_a(spec, params)
        w = 1 + lam.real * _pair_sum(a[:, None], a[None, :], params.p)
        assert np.max(np.abs(w.imag)) < 1e-10
        min_factor = min(min_factor, float(np.min(w.real)))
        n_factors += w.size
        n_spectra += 1
    return JacobianReport(min_factor > 0, min_factor, n_spectra, n_factors)


def z0_closed_form(n: int) -> Fraction:
    """Exact value of the Gaussian eigenvalue integral
    int Delta(s)^2 prod exp(-n s_i) d^n s = n^(-n^2) prod_{j=1}^n j!(j-1)!."""
    num = 1
    for j in range(1, n + 1):
        num *= math.factorial(j) * math.factorial(j - 1)
    return Fraction(num, n ** (n * n))


def measure_self_test(n: int, n_nodes: int | None = None) -> float:
    """Relative error of the quadrature against the closed-form Gaussian
    normalization; a self-test that the Vandermonde^2 measure is right."""
    if not 1 <= n <= 4:
        raise ValueError("self-test covers 1 <= N <= 4")
    n_nodes = DEFAULT_NODES[n] if n_nodes is None else n_nodes
    x, w = np.polynomial.legendre.leggauss(n_nodes)
    s_max = 40.0 / n
    s = 0.5 * s_max * (x + 1.0)
    wq = 0.5 * s_max * w
    log_base = np.log(wq) - n * s
    idx = np.indices((n_nodes,) * n)
    log_int = np.zeros((n_nodes,) * n)
    for i in range(n):
        log_int = log_int + log_base[idx[i]]
    for i in range(n):
        for j in range(i + 1, n):
            with np.errstate(divide="ignore"):
                log_int = log_int + 2.0 * np.log(np.abs(s[idx[i]] - s[idx[j]]))
    total = float(np.exp(log_int).sum())
    want = float(z0_closed_form(n))
    return abs(total - want) / want


def z_series_fd(p: int, order: int = 2, h: float | None = None, n_points: int = 8) -> list:
    """Estimate the first Taylor coefficients of Z(lam) at N = 1 by a
    polynomial fit on nodes lam = h, 2h, ..., n_points*h.

    The series is asymptotic (coefficients (pn)!/n!), so h must be small
    enough that the ignored orders stay below the target accuracy; the
    defaults are tuned for p = 2, 3.  High-precision quadrature avoids
    drowning the fit in roundoff.
    """
    if h is None:
        h = {2: 1e-3, 3: 2e-4}.get(p, 1e-4)
    if order >= n_points:
        raise ValueError("need more nodes than extracted orders")
    with mpmath.workdps(40):
        hs = mpmath.mpf(h)
        zs = []
        for k in range(1, n_points + 1):
            lam = k * hs
            val = mpmath.quad(
                lambda s: mpmath.exp(-s - lam * s**p), [0, mpmath.inf]
            )
            zs.append(val - 1)
        # solve the Vandermonde system in scaled variable x = lam/h
        rows = [[mpmath.mpf(k) ** j for j in range(1, n_points + 1)] for k in range(1, n_points + 1)]
        sol = mpmath.lu_solve(mpmath.matrix(rows), mpmath.matrix(zs))
        return [float(sol[j - 1] / hs**j) for j in range(1, order + 1)]


def zresult_to_json_dict(result: ZResult, params: ModelParams) -> dict:
    return {
        "value_re": float(np.real(result.value)),
        "value_im": float(np.imag(result.value)),
        "method": result.method,
        "error": result.error_estimate,
        "nodes_or_samples": result.n_samples_or_nodes,
        "seed": result.seed,
        "params": {
            "p": params.p,
            "lam_re": float(np.real(params.lam)),
            "lam_im": float(np.imag(params.lam)),
            "n_l": params.n_l,
            "n_r": params.n_r,
        },
    }
