"""Posterior-predictive scoring of new rows.

Probability scale summarizes the success probability draws directly;
outcome scale draws one 0/1 outcome per posterior draw with a per-row
seed substream, so rows can be scored concurrently and any row's result
is independent of how many rows are scored. Row statistics are weighted-
mixture statistics over draws (population sd, inverse-ECDF quantiles),
which makes probability-scale output exactly invariant to duplicating
the posterior draws and keeps outcome-scale est_error at
sqrt(p * (1 - p)), inside the binomial bound checked on every row.
"""

import math
from dataclasses import dataclass

import numpy as np

from .data import DesignMatrix
from .errors import DimensionMismatch, EncodingMismatch, NumericalError
from .model import link_function
from .rngutil import substream_rng

SCALES = ("outcome", "probability")


@dataclass
class PredictionRow:
    """One scored input row."""

    index: int
    estimate: float
    est_error: float
    ci_lower: float
    ci_upper: float
    scale: str

    def to_dict(self):
        return {
            "index": self.index,
            "estimate": self.estimate,
            "est_error": self.est_error,
            "ci_lower": self.ci_lower,
            "ci_upper": self.ci_upper,
            "scale": self.scale,
        }


def _ecdf_quantile(ordered, p):
    """Smallest order statistic whose ECDF reaches p (duplication-proof)."""
    h = max(1, math.ceil(len(ordered) * p))
    return float(ordered[min(h, len(ordered)) - 1])


def posterior_predict(draws, new_rows, link, *, scale="outcome", seed=0,
                      training_metadata=None):
    """PredictionRows for each new design row, in input order.

    `new_rows` is a DesignMatrix already encoded like the training data;
    when `training_metadata` is supplied the encodings are compared and a
    mismatch is an error rather than a silent misprediction.
    """
    if scale not in SCALES:
        raise ValueError(f"scale must be one of {SCALES}, got {scale!r}")
    if isinstance(new_rows, DesignMatrix):
        if training_metadata is not None and new_rows.metadata() != training_metadata:
            raise EncodingMismatch(
                "new rows were encoded with different metadata than the training design"
            )
        values = new_rows.values
    else:
        values = np.atleast_2d(np.asarray(new_rows, dtype=np.float64))

    beta = draws.pooled()
    if values.shape[1] != beta.shape[1] - 1:
        raise DimensionMismatch(
            f"new rows have {values.shape[1]} columns, fit has "
            f"{beta.shape[1] - 1} slopes"
        )
    link_fn = link_function(link)
    n_draws = beta.shape[0]
    bound_slack = 1e-12

    rows = []
    for i in range(values.shape[0]):
        eta = beta[:, 0] + beta[:, 1:] @ values[i]
        pi = link_fn(eta)
        if scale == "probability":
            sample = pi
        else:
            rng = substream_rng(seed, i)
            sample = (rng.random(n_draws) < pi).astype(np.float64)
        estimate = float(sample.mean())
        est_error = float(sample.std(ddof=0))
        if est_error**2 > estimate * (1.0 - estimate) + 1.0 / n_draws + bound_slack:
            raise NumericalError(
                f"row {i}: est_error squared exceeds the binomial bound"
            )
        ordered = np.sort(sample)
        rows.append(
            PredictionRow(
                index=i,
                estimate=estimate,
                est_error=est_error,
                ci_lower=_ecdf_quantile(ordered, 0.025),
                ci_upper=_ecdf_quantile(ordered, 0.975),
                scale=scale,
            )
        )
    return rows
