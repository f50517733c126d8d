"""Least-squares power-law fits."""

from dataclasses import asdict, dataclass

import numpy as np
from scipy import stats


@dataclass(frozen=True)
class PowerFit:
    slope: float
    intercept: float
    stderr: float
    ci_low: float
    ci_high: float
    n_points: int

    def as_dict(self):
        return asdict(self)


def loglog_fit(x, y, level: float = 0.95) -> PowerFit:
    """Fit log y = slope * log x + intercept with a t-based confidence interval."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    ok = (x > 0) & (y > 0) & np.isfinite(x) & np.isfinite(y)
    if ok.sum() < 3:
        raise ValueError("need at least three positive points for a fit")
    res = stats.linregress(np.log(x[ok]), np.log(y[ok]))
    dof = int(ok.sum()) - 2
    q = stats.t.ppf(0.5 + level / 2, dof) if dof > 0 else np.inf
    return PowerFit(
        slope=float(res.slope),
        intercept=float(res.intercept),
        stderr=float(res.stderr),
        ci_low=float(res.slope - q * res.stderr),
        ci_high=float(res.slope + q * res.stderr),
        n_points=int(ok.sum()),
    )
