"""Binary-response GLMs with independent normal priors.

Two links: the logistic sigmoid and the standard-normal CDF. All
likelihood and gradient code works in log space with the usual stable
forms, so etas of magnitude several hundred stay finite. Priors apply
verbatim on whatever scale the design is in (the default pipeline
standardizes, and the hyperparameters below are stated for that scale).
"""

import math
from dataclasses import dataclass

import numpy as np
from scipy import special

from .data import DesignMatrix
from .errors import DimensionMismatch

LOGIT = "logit"
PROBIT = "probit"
LINKS = (LOGIT, PROBIT)

_HALF_LOG_2PI = 0.5 * math.log(2.0 * math.pi)
_TINY = np.finfo(np.float64).tiny
_ONE_MINUS_EPS = 1.0 - np.finfo(np.float64).epsneg


@dataclass(frozen=True)
class PriorSpec:
    """Independent normals: one for the intercept, one shared by all slopes."""

    intercept_mean: float
    intercept_sd: float
    slope_mean: float
    slope_sd: float

    def __post_init__(self):
        if not (self.intercept_sd > 0 and self.slope_sd > 0):
            raise ValueError("prior standard deviations must be positive")

    def means(self, n_params):
        out = np.full(n_params, self.slope_mean, dtype=np.float64)
        out[0] = self.intercept_mean
        return out

    def sds(self, n_params):
        out = np.full(n_params, self.slope_sd, dtype=np.float64)
        out[0] = self.intercept_sd
        return out

    def to_dict(self):
        return {
            "intercept_mean": self.intercept_mean,
            "intercept_sd": self.intercept_sd,
            "slope_mean": self.slope_mean,
            "slope_sd": self.slope_sd,
        }

    @classmethod
    def from_dict(cls, d):
        return cls(**{k: float(d[k]) for k in (
            "intercept_mean", "intercept_sd", "slope_mean", "slope_sd")})


def default_priors(link):
    """Hyperparameters used for the standardized marketing fits."""
    if link == LOGIT:
        return PriorSpec(3.5, 1.0, 0.0, 0.5)
    if link == PROBIT:
        return PriorSpec(0.0, 5.0, 0.0, 2.0)
    raise ValueError(f"unknown link {link!r}")


@dataclass(frozen=True)
class Coefficients:
    """Intercept plus one slope per design column; always finite."""

    intercept: float
    slopes: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "slopes", np.asarray(self.slopes, dtype=np.float64))
        if not (np.isfinite(self.intercept) and np.all(np.isfinite(self.slopes))):
            raise ValueError("coefficients must be finite")

    def as_array(self):
        return np.concatenate(([self.intercept], self.slopes))

    @classmethod
    def from_array(cls, values):
        values = np.asarray(values, dtype=np.float64)
        return cls(intercept=float(values[0]), slopes=values[1:].copy())


@dataclass
class ModelSpec:
    """Link + prior + encoded design + 0/1 target; the sampler's input."""

    link: str
    prior: PriorSpec
    design: DesignMatrix
    target: np.ndarray

    def __post_init__(self):
        if self.link not in LINKS:
            raise ValueError(f"unknown link {self.link!r}")
        self.target = np.asarray(self.target, dtype=np.float64).ravel()
        if len(self.target) != self.design.n_rows:
            raise DimensionMismatch(
                f"target length {len(self.target)} differs from design rows "
                f"{self.design.n_rows}"
            )
        bad = ~np.isin(self.target, (0.0, 1.0))
        if bad.any():
            raise ValueError("target entries must be 0 or 1")

    @property
    def n_params(self):
        return self.design.n_columns + 1

    @property
    def param_names(self):
        return ("Intercept",) + tuple(self.design.column_names)


def logit_link(eta):
    """Logistic sigmoid, two-branch stable form, output inside (0, 1)."""
    eta_arr = np.asarray(eta, dtype=np.float64)
    z = np.exp(-np.abs(eta_arr))
    out = np.where(eta_arr >= 0, 1.0 / (1.0 + z), z / (1.0 + z))
    out = np.clip(out, _TINY, _ONE_MINUS_EPS)
    return float(out) if np.isscalar(eta) or eta_arr.ndim == 0 else out


def probit_link(eta):
    """Standard-normal CDF, clamped off exact 0/1 at the float boundary."""
    eta_arr = np.asarray(eta, dtype=np.float64)
    out = np.clip(special.ndtr(eta_arr), _TINY, _ONE_MINUS_EPS)
    return float(out) if np.isscalar(eta) or eta_arr.ndim == 0 else out


def link_function(link):
    if link == LOGIT:
        return logit_link
    if link == PROBIT:
        return probit_link
    raise ValueError(f"unknown link {link!r}")


def linear_predictor(beta, design_values):
    """eta = intercept + X @ slopes for a packed coefficient vector."""
    beta = np.asarray(beta, dtype=np.float64)
    if beta.shape[-1] != design_values.shape[1] + 1:
        raise DimensionMismatch(
            f"{beta.shape[-1]} coefficients for {design_values.shape[1]} columns"
        )
    return beta[..., 0, None] + beta[..., 1:] @ design_values.T


def bernoulli_loglik_terms(link, eta, y):
    """Per-observation log p(y | eta); stable in both tails."""
    eta = np.asarray(eta, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if link == LOGIT:
        # y*log(sigma(eta)) + (1-y)*log(sigma(-eta)) = y*eta - log(1+e^eta)
        return y * eta - np.logaddexp(0.0, eta)
    if link == PROBIT:
        return y * special.log_ndtr(eta) + (1.0 - y) * special.log_ndtr(-eta)
    raise ValueError(f"unknown link {link!r}")


def log_likelihood(beta, model):
    """Sum of per-observation Bernoulli log-likelihood terms."""
    eta = linear_predictor(np.asarray(beta, dtype=np.float64), model.design.values)
    return float(np.sum(bernoulli_loglik_terms(model.link, eta, model.target)))


def log_prior(beta, prior):
    """Normal log-density of the packed coefficients, constants included."""
    beta = np.asarray(beta, dtype=np.float64).ravel()
    means = prior.means(len(beta))
    sds = prior.sds(len(beta))
    z = (beta - means) / sds
    return float(-0.5 * np.dot(z, z) - np.sum(np.log(sds)) - len(beta) * _HALF_LOG_2PI)


def log_posterior(beta, model):
    return log_likelihood(beta, model) + log_prior(beta, model.prior)


def log_posterior_and_gradient(beta, model):
    """(log posterior, gradient) sharing one linear-predictor evaluation."""
    beta = np.asarray(beta, dtype=np.float64).ravel()
    x = model.design.values
    y = model.target
    if len(beta) != x.shape[1] + 1:
        raise DimensionMismatch(
            f"{len(beta)} coefficients for {x.shape[1]} design columns"
        )
    eta = beta[0] + x @ beta[1:]

    if model.link == LOGIT:
        value = float(np.dot(y, eta) - np.sum(np.logaddexp(0.0, eta)))
        score = y - logit_link(eta)
    else:
        log_cdf = special.log_ndtr(eta)
        log_cdf_neg = special.log_ndtr(-eta)
        value = float(np.dot(y, log_cdf) + np.dot(1.0 - y, log_cdf_neg))
        log_pdf = -0.5 * eta * eta - _HALF_LOG_2PI
        # Inverse Mills ratio in log space keeps both tails finite.
        score = np.where(
            y > 0.5,
            np.exp(log_pdf - log_cdf),
            -np.exp(log_pdf - log_cdf_neg),
        )

    means = model.prior.means(len(beta))
    sds = model.prior.sds(len(beta))
    z = (beta - means) / sds
    value += float(-0.5 * np.dot(z, z) - np.sum(np.log(sds)) - len(beta) * _HALF_LOG_2PI)

    grad = np.empty_like(beta)
    grad[0] = np.sum(score)
    grad[1:] = x.T @ score
    grad -= z / sds
    return value, grad
