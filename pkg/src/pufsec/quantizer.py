"""Input quantizers, zero-leakage helper data, and helper-data-dependent
output quantizers with dominated-level merging.

Helper data for a point x in quantization interval A_t is the fraction of
the interval's probability mass to the left of x.  That makes W uniform on
[0,1) and independent of the secret level S.  Tail arithmetic is done on
whichever side of the distribution is numerically safe (CDF left of zero,
survival function right of zero) so that quantizers with borders deep in
the tails stay usable.
"""

from __future__ import annotations

import dataclasses
import json
import math

import numpy as np
from scipy import special

from .stats import DomainError, PufModel


@dataclasses.dataclass(frozen=True, eq=False)
class InputQuantizer:
    """Partition of the real line into N intervals with per-interval mass.

    borders has length N+1 and starts/ends with -inf/+inf; cdf/sf hold
    F_X and 1-F_X evaluated at each border (kept separately for tail
    accuracy); probs has length N and sums to one.
    """

    model: PufModel
    borders: np.ndarray
    cdf: np.ndarray
    sf: np.ndarray
    probs: np.ndarray
    kind: str = "custom"
    step: float | None = None

    def __post_init__(self):
        b = self.borders
        if b[0] != -np.inf or b[-1] != np.inf:
            raise DomainError("outer borders must be -inf/+inf")
        if not np.all(np.diff(b) > 0):
            raise DomainError("borders must be strictly increasing")
        if np.any(self.probs <= 0.0):
            raise DomainError("every quantization interval needs positive mass")
        if abs(self.probs.sum() - 1.0) > 1e-12:
            raise DomainError("interval probabilities must sum to 1")

    @property
    def levels(self) -> int:
        return len(self.probs)

    @property
    def inner_borders(self) -> np.ndarray:
        return self.borders[1:-1]

    @classmethod
    def from_borders(cls, model: PufModel, inner_borders, kind="custom", step=None):
        inner = np.sort(np.asarray(inner_borders, dtype=float))
        if inner.size and not np.all(np.isfinite(inner)):
            raise DomainError("inner borders must be finite")
        b = np.concatenate(([-np.inf], inner, [np.inf]))
        z = b / model.sigma_p
        cdf = special.ndtr(z)
        sf = special.ndtr(-z)
        probs = _interval_probs(b, cdf, sf)
        return cls(model, b, cdf, sf, probs, kind=kind, step=step)

    def to_dict(self) -> dict:
        d = {
            "type": self.kind,
            "levels": self.levels,
            "borders": [float(x) for x in self.inner_borders],
            "probs": [float(p) for p in self.probs],
            "sigma_p": self.model.sigma_p,
            "sigma_n": self.model.sigma_n,
        }
        if self.step is not None:
            d["step"] = float(self.step)
        return d

    def to_json(self) -> str:
        return json.dumps(self.to_dict())

    @classmethod
    def from_dict(cls, d: dict, model: PufModel | None = None):
        if model is None:
            model = PufModel(d["sigma_p"], d["sigma_n"])
        return cls.from_borders(model, d["borders"], kind=d.get("type", "custom"),
                                step=d.get("step"))

    @classmethod
    def from_json(cls, s: str, model: PufModel | None = None):
        return cls.from_dict(json.loads(s), model=model)


def _interval_probs(borders, cdf, sf):
    # Difference on whichever side keeps both endpoints small.
    n = len(borders) - 1
    probs = np.empty(n)
    for t in range(n):
        if borders[t + 1] <= 0:
            probs[t] = cdf[t + 1] - cdf[t]
        elif borders[t] >= 0:
            probs[t] = sf[t] - sf[t + 1]
        else:
            probs[t] = cdf[t + 1] - cdf[t]
    return probs


def make_equiprobable(model: PufModel, levels: int) -> InputQuantizer:
    """N intervals of mass 1/N each; borders at Gaussian quantiles."""
    if levels < 2:
        raise DomainError(f"levels must be >= 2, got {levels}")
    u = np.arange(1, levels) / levels
    inner = model.sigma_p * special.ndtri(u)
    q = InputQuantizer.from_borders(model, inner, kind="equiprobable")
    # Snap the stored CDF grid to the exact rationals t/N.
    cdf = np.concatenate(([0.0], u, [1.0]))
    sf = np.concatenate(([1.0], (levels - np.arange(1, levels)) / levels, [0.0]))
    probs = np.full(levels, 1.0 / levels)
    return InputQuantizer(model, q.borders, cdf, sf, probs, kind="equiprobable")


def make_equidistant(model: PufModel, levels: int, step: float) -> InputQuantizer:
    """N-1 finite borders spaced by `step`, centered symmetrically about 0.

    Even N puts a border at 0 (borders 0, +-step, ...); odd N uses
    +-step/2, +-3*step/2, ...
    """
    if levels < 2:
        raise DomainError(f"levels must be >= 2, got {levels}")
    if not (math.isfinite(step) and step > 0):
        raise DomainError(f"step must be positive, got {step!r}")
    k = np.arange(1, levels)
    inner = step * (k - levels / 2.0)
    try:
        return InputQuantizer.from_borders(model, inner, kind="equidistant", step=step)
    except DomainError as e:
        raise DomainError(
            f"step={step} with {levels} levels leaves empty tail intervals"
        ) from e


def helper_data(q: InputQuantizer, x: float):
    """Quantize x and compute its zero-leakage helper value.

    Returns (t, w) with t the interval index and w in [0,1) the fraction
    of interval mass left of x.  A point exactly on a border belongs to
    the upper interval (w = 0 there).
    """
    x = float(x)
    if not math.isfinite(x):
        raise DomainError(f"x must be finite, got {x!r}")
    t = int(np.searchsorted(q.inner_borders, x, side="right"))
    z = x / q.model.sigma_p
    if x <= 0:
        w = (special.ndtr(z) - q.cdf[t]) / q.probs[t]
    else:
        w = (q.sf[t] - special.ndtr(-z)) / q.probs[t]
    w = min(max(float(w), 0.0), np.nextafter(1.0, 0.0))
    return t, w


def sibling_point(q: InputQuantizer, t: int, w: float) -> float:
    """Point in interval t whose helper value is w, i.e. g_t^{-1}(w)."""
    if not 0 <= t < q.levels:
        raise DomainError(f"level index {t} out of range")
    if not 0.0 <= w < 1.0:
        raise DomainError(f"helper value must lie in [0,1), got {w!r}")
    return float(sibling_points(q, w)[t])


def sibling_points(q: InputQuantizer, w) -> np.ndarray:
    """g_t^{-1}(w) for every level t; w may be a scalar or an array
    (result shape (..., N))."""
    w = np.asarray(w, dtype=float)
    u = q.cdf[:-1] + np.multiply.outer(w, q.probs)       # mass from the left
    v = q.sf[:-1] - np.multiply.outer(w, q.probs)        # mass from the right
    lower = u <= 0.5
    x = np.where(lower,
                 special.ndtri(np.where(lower, u, 0.5)),
                 -special.ndtri(np.where(lower, 0.5, np.clip(v, 0.0, 1.0))))
    return q.model.sigma_p * x


@dataclasses.dataclass(frozen=True, eq=False)
class OutputQuantizer:
    """Decision intervals on the reconstruction axis for one helper value.

    labels is the strictly increasing subsequence of input levels that
    survive merging; borders has length len(labels)+1 with +-inf ends.
    """

    borders: np.ndarray
    labels: tuple
    helper_w: float

    @property
    def inner_borders(self) -> np.ndarray:
        return self.borders[1:-1]


def _map_border(x_lo, x_hi, p_lo, p_hi, sigma_n):
    # Crossing point of p_lo * phi(y - x_lo) and p_hi * phi(y - x_hi).
    return (math.log(p_lo / p_hi) * sigma_n ** 2 / (x_hi - x_lo)
            + (x_lo + x_hi) / 2.0)


def output_quantizer(q: InputQuantizer, w: float,
                     model: PufModel | None = None) -> OutputQuantizer:
    """MAP decision intervals for reconstructing S from Y given W = w.

    Candidate borders between adjacent sibling points are the equal-
    posterior crossings; a level whose candidate border does not exceed
    the previous one is dominated and removed, with the border recomputed
    between the surviving neighbours until borders are increasing.
    """
    model = model or q.model
    if not 0.0 <= w < 1.0:
        raise DomainError(f"helper value must lie in [0,1), got {w!r}")
    x = sibling_points(q, w)
    p = q.probs
    # at w exactly 0 the left tail's sibling point degenerates to -inf and
    # that level can never win the MAP comparison for finite y; drop it
    finite = [t for t in range(q.levels) if math.isfinite(x[t])]
    if not finite:
        raise DomainError("no level has a finite sibling point")
    labels = [finite[0]]
    borders: list[float] = []
    for t in finite[1:]:
        while True:
            tau = _map_border(x[labels[-1]], x[t], p[labels[-1]], p[t],
                              model.sigma_n)
            if borders and tau <= borders[-1]:
                labels.pop()
                borders.pop()
                continue
            break
        labels.append(t)
        borders.append(tau)
    full = np.concatenate(([-np.inf], borders, [np.inf]))
    return OutputQuantizer(full, tuple(labels), float(w))


def reconstruct(oq: OutputQuantizer, y: float) -> int:
    """Label of the decision interval containing y (border goes up)."""
    y = float(y)
    if not math.isfinite(y):
        raise DomainError(f"y must be finite, got {y!r}")
    return oq.labels[int(np.searchsorted(oq.inner_borders, y, side="right"))]
