"""Factor-covariance Gaussian variational approximation and the SGA loop.

The variational family is N(mu, B B^T + D^2) with B an s x p
lower-triangular factor loading matrix and D = diag(d). One reparameterised
draw theta = mu + B eta + d * eps per iteration yields unbiased ELBO
gradients, stepped through ADADELTA learning rates.
"""

from __future__ import annotations

import time
from dataclasses import dataclass

import numpy as np

from .errors import DimensionError, DomainError, NumericalError, SingularityError
from .gradients import grad_log_h_full, grad_log_q0
from .likelihoods import Dataset, layout_full, layout_missing, log_h_full
from .models import ModelKind, Priors, ThetaLayout
from .model_select import PosteriorSamples, phi_names_for
from .simulate import draw_inverse_gamma
from .spatial import SpatialWeights, apply_A, logdet_A
from .transforms import gamma_link
from .models import link_inverse

__all__ = [
    "VariationalParams", "AdadeltaState", "FitConfig", "FitResult",
    "sample_q", "log_q0", "reparam_grads", "adadelta_step",
    "init_lambda", "vb_fit", "draw_posterior",
]


@dataclass(frozen=True)
class VariationalParams:
    """mu, lower-triangular factor matrix B (s x p), and diagonal d."""

    mu: np.ndarray
    B: np.ndarray
    d: np.ndarray

    def __post_init__(self):
        mu = np.asarray(self.mu, dtype=float)
        B = np.asarray(self.B, dtype=float)
        d = np.asarray(self.d, dtype=float)
        object.__setattr__(self, "mu", mu)
        object.__setattr__(self, "B", B)
        object.__setattr__(self, "d", d)
        s = mu.shape[0]
        if B.ndim != 2 or B.shape[0] != s or d.shape != (s,):
            raise DimensionError("mu, B, d dimensions disagree")
        if not 1 <= B.shape[1] <= s:
            raise DimensionError("factor count must lie in 1..s")
        if not (np.all(np.isfinite(mu)) and np.all(np.isfinite(B))
                and np.all(np.isfinite(d))):
            raise DomainError("variational parameters must be finite")
        i, j = np.triu_indices(s, k=1, m=B.shape[1])
        if np.any(B[i, j] != 0.0):
            raise DomainError("B must have a zero strict upper triangle")

    @property
    def s(self) -> int:
        return self.mu.shape[0]

    @property
    def p(self) -> int:
        return self.B.shape[1]

    def covariance(self) -> np.ndarray:
        """Dense B B^T + D^2 (tests and summaries; O(s^2) memory)."""
        return self.B @ self.B.T + np.diag(self.d * self.d)

    def tril(self) -> tuple[np.ndarray, np.ndarray]:
        return np.tril_indices(self.s, 0, self.p)

    def flat(self) -> np.ndarray:
        """Stack (mu, vech(B), d) into the lambda vector ADADELTA steps."""
        i, j = self.tril()
        return np.concatenate([self.mu, self.B[i, j], self.d])

    def with_step(self, step: np.ndarray) -> "VariationalParams":
        """Apply an additive step on the flattened parameterization."""
        s = self.s
        i, j = self.tril()
        nv = i.size
        if step.shape != (2 * s + nv,):
            raise DimensionError("step length does not match lambda")
        B = self.B.copy()
        B[i, j] += step[s:s + nv]
        return VariationalParams(mu=self.mu + step[:s], B=B,
                                 d=self.d + step[s + nv:])


def sample_q(lam: VariationalParams, rng: np.random.Generator
             ) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """One reparameterised draw: theta = mu + B eta + d * eps."""
    eta = rng.standard_normal(lam.p)
    eps = rng.standard_normal(lam.s)
    theta = lam.mu + lam.B @ eta + lam.d * eps
    return theta, eta, eps


def log_q0(lam: VariationalParams, theta: np.ndarray) -> float:
    """Log density of the variational Gaussian at theta."""
    g_q = grad_log_q0(lam, theta)
    diff = theta - lam.mu
    quad = float(-diff @ g_q)
    d2 = lam.d * lam.d
    core = np.eye(lam.p) + lam.B.T @ (lam.B / d2[:, None])
    sign, logdet_core = np.linalg.slogdet(core)
    if sign <= 0:
        raise SingularityError("variational covariance is not positive definite")
    logdet = float(np.sum(np.log(d2)) + logdet_core)
    return -0.5 * (lam.s * np.log(2.0 * np.pi) + logdet + quad)


def reparam_grads(lam: VariationalParams, eta: np.ndarray, eps: np.ndarray,
                  g: np.ndarray) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """ELBO gradients wrt (mu, vech(B), d) from a composed g.

    g must be the draw's total gradient grad log h(theta) - grad log
    q(theta); the chain rule through theta = mu + B eta + d * eps gives
    d_mu = g, d_vechB = lower triangle of g eta^T, d_d = g * eps.
    """
    if g.shape != (lam.s,) or eps.shape != (lam.s,) or eta.shape != (lam.p,):
        raise DimensionError("gradient or noise dimensions disagree")
    i, j = lam.tril()
    d_vech = (np.outer(g, eta))[i, j]
    return g.copy(), d_vech, g * eps


@dataclass(frozen=True)
class AdadeltaState:
    """Decayed accumulators of squared gradients and squared steps."""

    e_grad2: np.ndarray
    e_dx2: np.ndarray
    alpha: float = 1e-6
    upsilon: float = 0.95

    @classmethod
    def zeros(cls, size: int, alpha: float = 1e-6,
              upsilon: float = 0.95) -> "AdadeltaState":
        return cls(e_grad2=np.zeros(size), e_dx2=np.zeros(size),
                   alpha=alpha, upsilon=upsilon)


def adadelta_step(state: AdadeltaState, grad: np.ndarray
                  ) -> tuple[np.ndarray, AdadeltaState]:
    """One ADADELTA update; returns (step, new state) for an ascent move."""
    if grad.shape != state.e_grad2.shape:
        raise DimensionError("gradient length does not match the state")
    up, al = state.upsilon, state.alpha
    e_g2 = up * state.e_grad2 + (1.0 - up) * grad * grad
    a = np.sqrt((state.e_dx2 + al) / (e_g2 + al))
    step = a * grad
    e_dx2 = up * state.e_dx2 + (1.0 - up) * step * step
    return step, AdadeltaState(e_grad2=e_g2, e_dx2=e_dx2, alpha=al, upsilon=up)


@dataclass(frozen=True)
class FitConfig:
    """Knobs of the SGA loop; defaults match the reference experiments."""

    n_factors: int = 4
    max_iters: int = 10000
    seed: int = 0
    trace_every: int = 100
    stop_window: int = 0      # 0 disables the plateau rule
    stop_tol: float = 0.0
    gamma_init_offset: float = 1e-3

    def __post_init__(self):
        if self.n_factors < 1:
            raise DomainError("n_factors must be at least 1")
        if self.max_iters < 0:
            raise DomainError("max_iters must be nonnegative")
        if self.trace_every < 1:
            raise DomainError("trace_every must be at least 1")


@dataclass(frozen=True)
class FitResult:
    """Fitted variational parameters plus optimization telemetry."""

    lam: VariationalParams
    layout: ThetaLayout
    mu_trace: np.ndarray
    trace_iters: np.ndarray
    elbo_trace: np.ndarray
    n_iters: int
    wall_time: float
    seed: int
    # rows (iteration, block, accepts, proposals); None for full-data fits
    acceptance: np.ndarray | None = None


def _submatrix_weights(W: SpatialWeights, keep: np.ndarray) -> SpatialWeights:
    """Restriction of W to the kept sites (raw weights, re-indexed)."""
    sub = W.csr[keep][:, keep].tocoo()
    return SpatialWeights(n=keep.size, rows=sub.row, cols=sub.col,
                          weights=sub.data, row_standardized=False)


def _ml_init(data: Dataset) -> tuple[np.ndarray, float, float]:
    """Profile-likelihood fit of the Gaussian identity kind on a rho grid.

    Missing responses are handled by restricting the system to observed
    sites. Returns (beta_hat, sigma2_hat, rho_hat).
    """
    obs = ~data.missing
    if obs.all():
        W, y, X = data.W, data.y, data.X
    else:
        keep = np.flatnonzero(obs)
        W = _submatrix_weights(data.W, keep)
        y, X = data.y[keep], data.X[keep]
    n = y.size
    if n <= X.shape[1]:
        raise DomainError("too few observed responses to initialize")
    best = None
    for rho in np.linspace(-0.99, 0.99, 199):
        try:
            ld = logdet_A(W, rho)
        except SingularityError:
            continue
        ay = apply_A(W, rho, y)
        ax = X - rho * (W.csr @ X)
        beta, *_ = np.linalg.lstsq(ax, ay, rcond=None)
        resid = ay - ax @ beta
        sigma2 = max(float(resid @ resid) / n, 1e-12)
        score = ld - 0.5 * n * np.log(sigma2)
        if best is None or score > best[0]:
            best = (score, beta, sigma2, rho)
    if best is None:
        raise NumericalError("profile likelihood failed on the whole rho grid")
    return best[1], best[2], best[3]


def init_lambda(kind: ModelKind, data: Dataset, config: FitConfig,
                rng: np.random.Generator | None = None,
                with_psi: bool = False) -> VariationalParams:
    """Initial variational parameters.

    mu's beta, omega', rho' blocks come from the profile-likelihood fit;
    nu starts at 4, gamma just off 1, tau' at log of inverse-gamma(2, 2)
    draws, psi entries at 0.1. All of B's lower triangle and all of d start
    at 0.01.
    """
    if np.linalg.matrix_rank(data.X) < data.n_beta:
        raise DomainError("design matrix is rank-deficient")
    rng = np.random.default_rng(config.seed) if rng is None else rng
    layout = (layout_missing(kind, data) if with_psi
              else layout_full(kind, data))
    beta, sigma2, rho = _ml_init(data)
    mu = np.zeros(layout.size)
    mu[layout.beta] = beta
    mu[layout.omega] = np.log(sigma2)
    mu[layout.rho] = np.log1p(rho) - np.log1p(-rho)
    if kind.student_t:
        mu[layout.nu] = 0.0   # nu = 4
        mu[layout.tau] = np.log(draw_inverse_gamma(2.0, 2.0, rng,
                                                   size=layout.n_sites))
    if kind.yeo_johnson:
        mu[layout.gamma] = gamma_link(1.0 + config.gamma_init_offset)
    if with_psi:
        mu[layout.psi] = 0.1
    s, p = layout.size, config.n_factors
    if p > s:
        raise DomainError(f"n_factors = {p} exceeds parameter count {s}")
    B = np.zeros((s, p))
    i, j = np.tril_indices(s, 0, p)
    B[i, j] = 0.01
    return VariationalParams(mu=mu, B=B, d=np.full(s, 0.01))


def _check_finite_grad(g: np.ndarray, iteration: int,
                       layout: ThetaLayout) -> None:
    bad = ~np.isfinite(g)
    if bad.any():
        idx = int(np.flatnonzero(bad)[0])
        raise NumericalError(
            f"non-finite gradient in coordinate {layout.names()[idx]}",
            iteration=iteration, coordinate=idx)


def vb_fit(kind: ModelKind, data: Dataset, priors: Priors, config: FitConfig,
           rng: np.random.Generator | None = None) -> FitResult:
    """Stochastic-gradient VB on complete data.

    Per iteration: one reparameterised draw, analytic gradients of log h and
    log q, ELBO gradient assembly, ADADELTA step. Runs to max_iters or until
    the optional plateau rule fires.
    """
    t_start = time.perf_counter()
    data.require_complete()
    layout = layout_full(kind, data)
    rng = np.random.default_rng(config.seed) if rng is None else rng
    lam = init_lambda(kind, data, config, rng=rng)

    state = AdadeltaState.zeros(lam.flat().size)
    trace_rows, trace_iters = [], []
    elbo = np.empty(config.max_iters)
    recent_moves: list[float] = []
    t = 0
    for t in range(1, config.max_iters + 1):
        theta, eta, eps = sample_q(lam, rng)
        try:
            g_h = grad_log_h_full(kind, data, theta, priors)
            elbo[t - 1] = log_h_full(kind, data, theta, priors) \
                - log_q0(lam, theta)
        except (DomainError, SingularityError) as exc:
            raise NumericalError(f"target evaluation failed: {exc}",
                                 iteration=t) from exc
        g = g_h - grad_log_q0(lam, theta)
        _check_finite_grad(g, t, layout)
        d_mu, d_vech, d_d = reparam_grads(lam, eta, eps, g)
        step, state = adadelta_step(state, np.concatenate([d_mu, d_vech, d_d]))
        lam = lam.with_step(step)
        if t % config.trace_every == 0:
            trace_rows.append(lam.mu.copy())
            trace_iters.append(t)
        if config.stop_window > 0:
            recent_moves.append(float(np.max(np.abs(step[:lam.s]))))
            if len(recent_moves) > config.stop_window:
                recent_moves.pop(0)
            if (len(recent_moves) == config.stop_window
                    and max(recent_moves) < config.stop_tol):
                break
    if t and (not trace_iters or trace_iters[-1] != t):
        trace_rows.append(lam.mu.copy())
        trace_iters.append(t)
    return FitResult(
        lam=lam, layout=layout,
        mu_trace=(np.asarray(trace_rows) if trace_rows
                  else np.empty((0, lam.s))),
        trace_iters=np.asarray(trace_iters, dtype=int),
        elbo_trace=elbo[:t], n_iters=t,
        wall_time=time.perf_counter() - t_start, seed=config.seed)


def draw_posterior(lam: VariationalParams, layout: ThetaLayout, n_draws: int,
                   rng: np.random.Generator) -> PosteriorSamples:
    """n_draws from q_lambda mapped to the constrained scale.

    Returns phi rows (beta, sigma2, rho[, nu][, gamma]) and, when the layout
    carries a missingness block, psi rows.
    """
    kind = layout.kind
    names = phi_names_for(kind, layout.n_beta)
    phi = np.empty((n_draws, len(names)))
    psi = (np.empty((n_draws, layout.n_psi_x + 1))
           if layout.with_psi else None)
    for i in range(n_draws):
        theta, _, _ = sample_q(lam, rng)
        params, _, psi_i = link_inverse(kind, layout, theta)
        row = list(params.beta) + [params.sigma2, params.rho]
        if kind.student_t:
            row.append(params.nu)
        if kind.yeo_johnson:
            row.append(params.gamma)
        phi[i] = row
        if psi is not None:
            psi[i] = psi_i.stacked
    if n_draws == 0:
        phi = np.empty((0, len(names)))
        psi = np.empty((0, layout.n_psi_x + 1)) if layout.with_psi else None
    return PosteriorSamples(phi=phi, phi_names=names, psi=psi)
