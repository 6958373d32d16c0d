"""Technology-augmented present-value economies.

Time runs over integers t = 1..T with d_0 = 0. All prices are logs.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Callable

import numpy as np
from scipy import stats
from scipy.integrate import cumulative_simpson, simpson

from .errors import (ConfigError, DegenerateInputError, NonconvergentSeriesError,
                     NormalizationError)
from .timeseries import Frame, RngStream, TimeSeries, detrend_linear

SHAPES = ("triangular", "gaussian", "beta", "gammalike")


@dataclass(frozen=True)
class TechShockProfile:
    """Hump-shaped technology contribution to dividend growth.

    ``delta_max`` is attained on the integer support ``[T1, T2]``; the shock
    is zero elsewhere. Gaussian width defaults to ``(T2 - T1) / 4``.
    """

    shape: str = "triangular"
    delta_max: float = 0.15
    T1: int = 80
    T2: int = 200
    tau: int = 30
    gaussian_sigma: float | None = None
    beta_a: float = 2.0
    beta_b: float = 5.0

    def __post_init__(self):
        shape = self.shape.lower().replace("-", "").replace("_", "")
        if shape not in SHAPES:
            raise ConfigError(f"unknown shape {self.shape!r}; choose from {SHAPES}")
        object.__setattr__(self, "shape", shape)
        if self.delta_max < 0:
            raise ConfigError("delta_max must be non-negative")
        if not self.T2 > self.T1:
            raise ConfigError(f"need T2 > T1, got [{self.T1}, {self.T2}]")
        if shape == "triangular" and not 0 < self.tau < self.T2 - self.T1:
            raise ConfigError(f"tau must lie in (0, {self.T2 - self.T1}), got {self.tau}")
        if shape == "gammalike" and self.tau <= 0:
            raise ConfigError("tau must be positive")

    @property
    def sigma_g(self) -> float:
        return (self.T2 - self.T1) / 4.0 if self.gaussian_sigma is None else float(self.gaussian_sigma)

    def _raw(self, t: np.ndarray) -> np.ndarray:
        t = t.astype(np.float64)
        T1, T2, tau = self.T1, self.T2, self.tau
        if self.shape == "triangular":
            return np.where(t <= T1 + tau, (t - T1) / tau, (T2 - t) / (T2 - T1 - tau))
        if self.shape == "gaussian":
            return np.exp(-0.5 * ((t - (T1 + tau)) / self.sigma_g) ** 2)
        if self.shape == "beta":
            return stats.beta.pdf((t - T1) / (T2 - T1), self.beta_a, self.beta_b)
        s = t - T1
        return s * np.exp(-0.5 * (s / tau) ** 2)

    @property
    def unit_shape(self) -> np.ndarray:
        """Peak-one profile on the support ``T1..T2``."""
        raw = self._raw(np.arange(self.T1, self.T2 + 1))
        peak = raw.max()
        return raw / peak if peak > 0 else raw

    def scaled(self, delta_max: float) -> "TechShockProfile":
        return replace(self, delta_max=float(delta_max))


def delta_path(profile: TechShockProfile, t) -> np.ndarray:
    """Shock values at integer times ``t`` (vectorised)."""
    t = np.asarray(t, dtype=np.int64)
    out = np.zeros(t.shape)
    inside = (t >= profile.T1) & (t <= profile.T2)
    out[inside] = profile.delta_max * profile.unit_shape[t[inside] - profile.T1]
    return out


def delta_at(profile: TechShockProfile, t: int) -> float:
    return float(delta_path(profile, np.array([t]))[0])


def pv_from_increments(delta: np.ndarray, rho: float) -> np.ndarray:
    """T_s = sum_j rho^j delta[s+1+j] on the index range of ``delta`` (zero beyond)."""
    out = np.zeros_like(delta)
    for s in range(len(delta) - 2, -1, -1):
        out[s] = delta[s + 1] + rho * out[s + 1]
    return out


def pv_term(profile: TechShockProfile, rho: float, t: int, horizon: int | None = None) -> float:
    """Direct sum ``sum_{j=0}^{H} rho^j delta_{t+1+j}``.

    The default horizon runs to the end of the support, which is exact.
    """
    if horizon is None:
        horizon = max(profile.T2 - t - 1, 0)
    j = np.arange(horizon + 1)
    return float(np.sum(rho ** j * delta_path(profile, t + 1 + j)))


def pv_path(profile: TechShockProfile, rho: float, t0: int, t1: int) -> np.ndarray:
    """T_t for t = t0..t1 by backward recursion from the end of the support."""
    hi = max(t1, profile.T2) + 1
    lo = min(t0, profile.T1) - 1
    times = np.arange(lo, hi + 1)
    pv = pv_from_increments(delta_path(profile, times), rho)
    return pv[t0 - lo:t1 - lo + 1]


def second_difference_pv(profile: TechShockProfile, rho: float, t: int) -> float:
    """T_t - 2 T_{t-1} + T_{t-2}."""
    p = pv_path(profile, rho, t - 2, t)
    return float(p[2] - 2.0 * p[1] + p[0])


def campbell_shiller_kappa(rho: float) -> float:
    """Linearisation constant implied by ``rho`` through the mean log dividend-price ratio."""
    dp = math.log(1.0 / rho - 1.0)
    return math.log(1.0 + math.exp(dp)) - (1.0 - rho) * dp


@dataclass(frozen=True)
class PresentValueModel:
    rho: float = 0.95
    c: float = 0.02
    r_bar: float = 0.06
    kappa: float | None = None
    phi: float = 0.0

    def __post_init__(self):
        if not 0.0 < self.rho < 1.0:
            raise ConfigError(f"rho must lie in (0, 1), got {self.rho}")
        if self.phi >= 1.0:
            raise ConfigError(f"phi must be below 1, got {self.phi}")
        if self.kappa is None:
            object.__setattr__(self, "kappa", campbell_shiller_kappa(self.rho))

    @property
    def C(self) -> float:
        return self.kappa / (1.0 - self.rho) + (self.c - self.r_bar) / (1.0 - self.rho)


@dataclass(frozen=True)
class BubbleSpec:
    """Explosive AR(1) bubble on ``[start, end]`` with AR collapse afterwards."""

    start: int = 100
    end: int = 200
    b_init: float = 0.3
    rho_bubble: float = 1.035
    innovation_sd: float = 0.1
    collapse_factor: float = 0.5

    def __post_init__(self):
        if self.end < self.start:
            raise ConfigError("bubble end precedes start")
        if self.rho_bubble <= 1.0:
            raise ConfigError("rho_bubble must exceed 1")
        if not 0.0 < self.collapse_factor < 1.0:
            raise ConfigError("collapse_factor must lie in (0, 1)")

    def path(self, times: np.ndarray, eta: np.ndarray) -> np.ndarray:
        """Bubble at ``times`` given standard normal ``eta`` of the same length."""
        b = np.zeros(len(times))
        prev = 0.0
        for i, t in enumerate(times):
            if t < self.start:
                cur = 0.0
            elif t == self.start:
                cur = self.b_init
            elif t <= self.end:
                cur = self.rho_bubble * prev + self.innovation_sd * eta[i]
            else:
                cur = self.collapse_factor * prev + self.innovation_sd * eta[i]
            b[i] = prev = cur
        return b


@dataclass(frozen=True)
class SimulatedEconomy:
    delta: TimeSeries
    pv_term: TimeSeries
    dividends: TimeSeries
    fundamental: TimeSeries
    bubble: TimeSeries
    price: TimeSeries
    drift: TimeSeries
    innovations: TimeSeries
    innovations_sd: float
    obs_noise_sd: float
    model: PresentValueModel

    @property
    def T(self) -> int:
        return len(self.price)

    def to_frame(self) -> Frame:
        cols = {"delta": self.delta, "pv_term": self.pv_term, "d": self.dividends,
                "f": self.fundamental, "b": self.bubble, "p": self.price, "drift": self.drift}
        return Frame({k: v.values for k, v in cols.items()}, self.price.start_index)

    def oracle_adjusted_log_price(self) -> TimeSeries:
        """Log price minus the true cumulated shock and present-value term."""
        return adjusted_log_price(self.price, self.delta, self.pv_term, self.model.phi)


def adjusted_log_price(price: TimeSeries, delta: TimeSeries, pv: TimeSeries, phi: float = 0.0) -> TimeSeries:
    return price.with_values(price.values - np.cumsum(delta.values) - (1.0 - phi) * pv.values)


def _assemble(times, delta, pv, pv_prev, eps, model, bubble_path, obs_noise) -> SimulatedEconomy:
    s = int(times[0])
    d = np.cumsum(model.c + delta + eps)
    f = d + model.C + (1.0 - model.phi) * pv
    p = f + bubble_path + obs_noise
    mu = model.c + delta + (1.0 - model.phi) * (pv - pv_prev)
    ts = lambda v, name: TimeSeries(v, s, name)
    return (ts(delta, "delta"), ts(pv, "pv_term"), ts(d, "d"), ts(f, "f"), ts(bubble_path, "b"),
            ts(p, "p"), ts(mu, "drift"), ts(eps, "eps"))


def simulate_economy(profile: TechShockProfile, model: PresentValueModel, T: int,
                     sigma_eps: float = 0.1, bubble: BubbleSpec | None = None,
                     obs_noise_sd: float = 0.0, stream: RngStream = RngStream(0)) -> SimulatedEconomy:
    """One draw of the economy on t = 1..T.

    The stream always supplies T dividend shocks, then T bubble shocks, then T
    observation-noise shocks, so the dividend path is shared across designs
    that differ only in bubble or noise settings.
    """
    if T < 3:
        raise DegenerateInputError("need T >= 3")
    if sigma_eps < 0 or obs_noise_sd < 0:
        raise ConfigError("standard deviations must be non-negative")
    gen = stream.generator()
    z_eps = gen.standard_normal(T)
    z_eta = gen.standard_normal(T)
    z_e = gen.standard_normal(T)
    times = np.arange(1, T + 1)
    delta = delta_path(profile, times)
    pv_all = pv_path(profile, model.rho, 0, T)
    b = bubble.path(times, z_eta) if bubble is not None else np.zeros(T)
    parts = _assemble(times, delta, pv_all[1:], pv_all[:-1], sigma_eps * z_eps, model, b,
                      obs_noise_sd * z_e)
    return SimulatedEconomy(*parts, float(sigma_eps), float(obs_noise_sd), model)


# -- stochastic technology with learning -------------------------------------

@dataclass(frozen=True)
class KalmanState:
    delta_hat: float
    P: float


def kalman_step(state: KalmanState, g: float, obs: float, sigma_xi: float):
    """One update for observation ``obs = dbar * g + sigma_xi * xi``.

    Returns the new state, the gain and the innovation.
    """
    nu = obs - state.delta_hat * g
    denom = g * g * state.P + sigma_xi * sigma_xi
    gain = state.P * g / denom if denom > 0 else 0.0
    return KalmanState(state.delta_hat + gain * nu, state.P - gain * g * state.P), gain, nu


def posterior_variance_closed_form(P: float, g: float, sigma_xi: float) -> float:
    return P * sigma_xi ** 2 / (g * g * P + sigma_xi ** 2)


@dataclass(frozen=True)
class ArNoise:
    """Stationary AR(1) with innovation sd ``scale * sqrt(1 - phi^2)`` (marginal sd ``scale``)."""

    phi: float = 0.95
    scale: float = 0.15

    def __post_init__(self):
        if not -1.0 < self.phi < 1.0:
            raise ConfigError("AR coefficient must lie in (-1, 1)")

    def path(self, z: np.ndarray) -> np.ndarray:
        sd = self.scale * math.sqrt(1.0 - self.phi ** 2)
        u = np.empty(len(z))
        u[0] = sd * z[0] / math.sqrt(1.0 - self.phi ** 2)
        for i in range(1, len(z)):
            u[i] = self.phi * u[i - 1] + sd * z[i]
        return u


def ar_noise_path(noise: ArNoise, stream: RngStream, T: int) -> np.ndarray:
    return noise.path(stream.generator().standard_normal(T))


@dataclass(frozen=True)
class StochasticTechSpec:
    """Uncertain cumulative impact ``dbar ~ N(mu_delta, sigma_delta^2)`` spread by ``g_star``.

    ``g_star`` covers times ``T1..T2`` and sums to one.
    """

    mu_delta: float
    sigma_delta: float
    sigma_xi: float
    g_star: np.ndarray
    T1: int

    def __post_init__(self):
        g = np.asarray(self.g_star, dtype=np.float64)
        if self.sigma_xi <= 0:
            raise ConfigError("sigma_xi must be positive")
        if self.sigma_delta < 0:
            raise ConfigError("sigma_delta must be non-negative")
        if abs(g.sum() - 1.0) > 1e-12 or np.any(g < 0):
            raise NormalizationError(f"g_star must be non-negative and sum to 1, sums to {g.sum()}")
        g.setflags(write=False)
        object.__setattr__(self, "g_star", g)

    @property
    def T2(self) -> int:
        return self.T1 + len(self.g_star) - 1

    @classmethod
    def from_profile(cls, profile: TechShockProfile, cv: float, sigma_xi: float = 0.005,
                     mu_delta: float | None = None) -> "StochasticTechSpec":
        """Spec whose prior mean reproduces ``profile`` and whose prior sd is ``cv * mu_delta``."""
        h = profile.unit_shape
        mu = profile.delta_max * h.sum() if mu_delta is None else float(mu_delta)
        g = h / h.sum()
        g = g / g.sum()
        return cls(mu, cv * mu, sigma_xi, g, profile.T1)

    def g_at(self, t: np.ndarray) -> np.ndarray:
        t = np.asarray(t)
        out = np.zeros(t.shape)
        inside = (t >= self.T1) & (t <= self.T2)
        out[inside] = self.g_star[t[inside] - self.T1]
        return out

    def G_rho(self, rho: float, t: np.ndarray) -> np.ndarray:
        """Present value of future ``g_star`` weights."""
        t = np.asarray(t)
        lo, hi = min(int(t.min()), self.T1) - 1, max(int(t.max()), self.T2) + 1
        times = np.arange(lo, hi + 1)
        pv = pv_from_increments(self.g_at(times), rho)
        return pv[t - lo]


@dataclass(frozen=True)
class StochasticShocks:
    """Standard normal draws of one replication, reused across prior settings."""

    z: float
    eps: np.ndarray
    xi: np.ndarray
    u: np.ndarray

    @classmethod
    def draw(cls, stream: RngStream, T: int, n_support: int) -> "StochasticShocks":
        gen = stream.generator()
        return cls(float(gen.standard_normal()), gen.standard_normal(T),
                   gen.standard_normal(n_support), gen.standard_normal(T))


@dataclass(frozen=True)
class StochasticEconomy:
    economy: SimulatedEconomy
    delta_bar: float
    delta_obs: TimeSeries
    delta_hat: TimeSeries
    P: TimeSeries
    pv_hat: TimeSeries
    pd_ratio: TimeSeries
    pd_noise: TimeSeries

    @property
    def log_price(self) -> TimeSeries:
        return self.economy.price

    def kalman_path(self) -> list[KalmanState]:
        return [KalmanState(float(a), float(b)) for a, b in zip(self.delta_hat.values, self.P.values)]

    def oracle_adjusted_pd(self) -> TimeSeries:
        return self.pd_ratio.with_values(self.pd_ratio.values - self.pv_hat.values)

    def oracle_adjusted_log_price(self) -> TimeSeries:
        return adjusted_log_price(self.economy.price, self.delta_obs, self.pv_hat)


def simulate_stochastic_economy(spec: StochasticTechSpec, model: PresentValueModel, T: int,
                                sigma_eps: float = 0.1, pd_noise: ArNoise | None = ArNoise(),
                                stream: RngStream | None = None,
                                shocks: StochasticShocks | None = None) -> StochasticEconomy:
    """Economy with Bayesian learning about the cumulative technology impact.

    Dividends use the observed noisy increments while the present-value term
    uses the filtered estimate ``delta_hat_t * G_rho(t)``. Pass ``shocks`` to
    reuse one replication's draws across prior settings.
    """
    n_sup = len(spec.g_star)
    if shocks is None:
        if stream is None:
            raise ConfigError("either stream or shocks is required")
        shocks = StochasticShocks.draw(stream, T, n_sup)
    times = np.arange(1, T + 1)
    dbar = spec.mu_delta + spec.sigma_delta * shocks.z
    obs_sup = dbar * spec.g_star + spec.sigma_xi * shocks.xi

    dh = np.empty(T)
    P = np.empty(T)
    state = KalmanState(spec.mu_delta, spec.sigma_delta ** 2)
    for i, t in enumerate(times):
        if spec.T1 <= t <= spec.T2:
            k = t - spec.T1
            state, _, _ = kalman_step(state, spec.g_star[k], obs_sup[k], spec.sigma_xi)
        dh[i], P[i] = state.delta_hat, state.P

    obs = np.zeros(T)
    inside = (times >= spec.T1) & (times <= spec.T2)
    obs[inside] = obs_sup[times[inside] - spec.T1]
    G_all = spec.G_rho(model.rho, np.arange(0, T + 1))
    pv_hat = dh * G_all[1:]
    # prior mean before any news arrives at t = 0
    dh_prev = np.concatenate([[spec.mu_delta], dh[:-1]])
    pv_prev = dh_prev * G_all[:-1]
    parts = _assemble(times, obs, pv_hat, pv_prev, sigma_eps * shocks.eps, model, np.zeros(T),
                      np.zeros(T))
    econ = SimulatedEconomy(*parts, float(sigma_eps), 0.0, model)
    u = pd_noise.path(shocks.u) if pd_noise is not None else np.zeros(T)
    pd = model.C + pv_hat + u
    s = TimeSeries
    return StochasticEconomy(econ, float(dbar), s(obs, 1, "delta_obs"), s(dh, 1, "delta_hat"),
                             s(P, 1, "P"), s(pv_hat, 1, "pv_hat"), s(pd, 1, "pd_ratio"),
                             s(u, 1, "u"))


# -- VAR loading, heterogeneity, shape analytics -----------------------------

def var_technology_loading(Phi, gamma, rho: float) -> np.ndarray:
    """Loading ``beta`` with ``T_t = beta' X_t`` when ``X`` follows a VAR(1) with matrix ``Phi``.

    Solves ``(I - rho Phi)' beta = Phi' gamma``.
    """
    Phi = np.atleast_2d(np.asarray(Phi, dtype=np.float64))
    gamma = np.asarray(gamma, dtype=np.float64).reshape(-1)
    k = Phi.shape[0]
    if Phi.shape != (k, k) or gamma.shape[0] != k:
        raise ConfigError("Phi must be square and match gamma")
    radius = float(np.max(np.abs(np.linalg.eigvals(rho * Phi))))
    if radius >= 1.0 - 1e-8:
        raise NonconvergentSeriesError(f"spectral radius of rho*Phi is {radius:.6g}; the sum diverges")
    return np.linalg.solve((np.eye(k) - rho * Phi).T, Phi.T @ gamma)


def aggregate_heterogeneous(lambdas, weights, profile: TechShockProfile) -> TechShockProfile:
    """Market-level profile when firm ``i`` loads ``lambda_i`` on the common shock."""
    lam = np.asarray(lambdas, dtype=np.float64)
    w = np.asarray(weights, dtype=np.float64)
    if lam.shape != w.shape:
        raise NormalizationError("lambdas and weights differ in length")
    if np.any(w < 0) or abs(w.sum() - 1.0) > 1e-9:
        raise NormalizationError(f"weights must be non-negative and sum to 1, sum is {w.sum()}")
    scale = float(w @ lam)
    if scale < 0:
        raise NormalizationError("aggregate loading is negative")
    return profile.scaled(profile.delta_max * scale)


@dataclass(frozen=True)
class ShapeAnalytics:
    r: np.ndarray
    G: np.ndarray
    g: np.ndarray
    alpha: tuple
    B: float


def _window_drift_ratio(q: Callable, r1: float, r2: float, n: int, q_prime: Callable | None) -> float:
    r = np.linspace(r1, r2, n)
    qv = np.asarray(q(r), dtype=np.float64)
    dq = np.asarray(q_prime(r), dtype=np.float64) if q_prime is not None else np.gradient(qv, r, edge_order=2)
    qt = qv - simpson(qv, x=r) / (r2 - r1)
    den = simpson(qt * qt, x=r)
    num = simpson(qt * dq, x=r)
    if den <= 1e-300:
        return 0.0
    return float(num / den)


def shape_analytics(h: Callable, r1: float, r2: float, q: Callable | None = None,
                    n_grid: int = 2001, q_prime: Callable | None = None) -> ShapeAnalytics:
    """Integrated hump, its L2 linear detrend on [0, 1] and the window drift ratio.

    Parameters
    ----------
    h : callable
        Shock shape on [0, 1], zero outside its support.
    r1, r2 : float
        Window for the drift ratio, ``0 <= r1 < r2 <= 1``.
    q : callable, optional
        Shape entering the drift ratio; defaults to ``h``.
    """
    if not 0.0 <= r1 < r2 <= 1.0:
        raise DegenerateInputError(f"need 0 <= r1 < r2 <= 1, got ({r1}, {r2})")
    n = max(int(n_grid), 2001) | 1
    r = np.linspace(0.0, 1.0, n)
    hv = np.asarray(h(r), dtype=np.float64)
    G = cumulative_simpson(hv, x=r, initial=0.0)
    m = np.array([[1.0, 0.5], [0.5, 1.0 / 3.0]])
    rhs = np.array([simpson(G, x=r), simpson(r * G, x=r)])
    a0, a1 = np.linalg.solve(m, rhs)
    g = G - a0 - a1 * r
    B = _window_drift_ratio(q if q is not None else h, r1, r2, n, q_prime)
    return ShapeAnalytics(r, G, g, (float(a0), float(a1)), B)


def economy_to_csv(econ: SimulatedEconomy, path) -> None:
    from .timeseries import frame_to_csv
    frame_to_csv(econ.to_frame(), path)
