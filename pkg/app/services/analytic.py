"""Closed-form and semi-closed-form coverage, mean-covered and throughput expressions.

Everything here is a pure function of `SystemParams`; quadrature runs through
`app.services.integrals.integrate` so tolerance failures surface as `QuadratureError`.
"""
import logging
import math
from typing import Callable, Dict, Iterable, List, Literal, Optional, Sequence, Tuple

import mpmath
import numpy as np
from scipy.optimize import brentq, minimize_scalar
from scipy.special import comb, erfcx

from app.core.config import settings
from app.core.errors import SignificanceLossError
from app.core.units import db_to_linear
from app.models.params import QuadratureConfig, SystemParams
from app.models.results import (
    CoverageEstimate,
    MobilityComparison,
    NullClusterFraction,
    RateOptimum,
    Throughput,
)
from app.services.channel import path_loss, path_loss_inverse
from app.services.integrals import (
    h_closed_form_alpha4,
    h_integral,
    integrate,
    k_closed_form_mp,
    k_integral,
    scaled_q,
)

logger = logging.getLogger(__name__)

# Beyond this many repetitions double precision cannot hold the binomial cancellation
MAX_FLOAT_TAU = 32

# Gauss-Legendre radial x uniform angular nodes for the exclusion-disc integral
DISC_RADIAL_NODES = 64
DISC_ANGULAR_NODES = 96
DISC_CHUNK = 256

# nested quadrature: the inner angular pass must be tighter than the outer radial one
ANGULAR_QUADRATURE = QuadratureConfig(epsabs=1e-12, epsrel=1e-10, limit=200)
RADIAL_QUADRATURE = QuadratureConfig(epsabs=1e-9, epsrel=1e-7, limit=200)


# ---------------------------------------------------------------------------
# single-transmission success and the alternating sum
# ---------------------------------------------------------------------------

def _k(alpha: float, n: int, mobile: bool) -> float:
    # High mobility decorrelates the interferer fading across slots: K(α,n) -> n·K(α,1)
    if mobile:
        return n * k_integral(alpha, 1)
    return k_integral(alpha, n)


def _exponent(y_dist: float, n: int, params: SystemParams, k_value: float) -> float:
    noise = n * params.detection_threshold * params.snr_inv() * path_loss(y_dist, params.path_loss_model())
    interference = params.lambda_m * k_value * params.detection_threshold ** (2.0 / params.alpha) * y_dist ** 2
    return noise + interference


def p_n_single(y_dist: float, n: int, params: SystemParams, mobile: bool = False) -> float:
    """Probability that n given slots all succeed at distance `y_dist` from the transmitter."""
    if y_dist <= 0:
        raise ValueError(f"y_dist must be positive, got {y_dist}")
    if n < 1:
        raise ValueError(f"n must be at least 1, got {n}")
    return math.exp(-_exponent(y_dist, n, params, _k(params.alpha, n, mobile)))


def p_n_single_generic(
    y_dist: float,
    n: int,
    params: SystemParams,
    loss: Callable[[float], float],
) -> float:
    """p_n for an arbitrary path-loss function, by direct quadrature of the Laplace functional."""
    if y_dist <= 0:
        raise ValueError(f"y_dist must be positive, got {y_dist}")
    if n < 1:
        raise ValueError(f"n must be at least 1, got {n}")
    threshold = params.detection_threshold
    signal_loss = loss(y_dist)

    def integrand(r: float) -> float:
        if r == 0.0:
            return 0.0
        ratio = threshold * signal_loss / loss(r)
        return -math.expm1(-n * math.log1p(ratio)) * r

    near = integrate(integrand, 0.0, y_dist, label="generic p_n near field")
    far = integrate(integrand, y_dist, math.inf, label="generic p_n far field")
    exponent = n * signal_loss * threshold * params.snr_inv() + 2.0 * math.pi * params.lambda_m * (near + far)
    return math.exp(-exponent)


def _binomial_terms(tau: int, term: Callable[[int], float], count: Optional[int] = None) -> List[float]:
    count = tau if count is None else count
    return [(-1) ** (n + 1) * float(comb(tau, n, exact=True)) * term(n) for n in range(1, count + 1)]


def _significant(terms: Sequence[float], total: float, tau: int) -> bool:
    if tau > MAX_FLOAT_TAU:
        return False
    largest = max(abs(t) for t in terms)
    return largest <= settings.SIGNIFICANCE_RATIO * abs(total)


def _working_digits(tau: int) -> int:
    return 20 + int(math.ceil(tau * math.log10(2.0)))


def _alternating_sum(
    tau: int,
    term: Callable[[int], float],
    exact_term: Optional[Callable[[int], "mpmath.mpf"]] = None,
    label: str = "alternating sum",
) -> float:
    """Σ(-1)^(n+1)·C(τ,n)·term(n), recomputed in mpmath when the float sum has cancelled away."""
    terms = _binomial_terms(tau, term)
    total = math.fsum(terms)
    if _significant(terms, total, tau):
        return total
    if exact_term is None:
        raise SignificanceLossError(
            f"{label}: cancellation across {tau} terms exceeds {settings.SIGNIFICANCE_RATIO:g} x result "
            f"and no exact path exists"
        )
    digits = _working_digits(tau)
    logger.debug(f"{label}: float sum lost significance at tau={tau}, retrying with {digits} digits")
    with mpmath.workdps(digits):
        exact = mpmath.fsum((-1) ** (n + 1) * mpmath.binomial(tau, n) * exact_term(n) for n in range(1, tau + 1))
        return float(exact)


def _exact_p_n(y_dist: float, params: SystemParams, mobile: bool) -> Callable[[int], "mpmath.mpf"]:
    alpha = mpmath.mpf(params.alpha)
    threshold = mpmath.mpf(params.detection_threshold)
    noise = threshold * mpmath.mpf(params.snr_inv()) * mpmath.mpf(params.pathloss_intercept) * mpmath.mpf(y_dist) ** alpha
    spatial = mpmath.mpf(params.lambda_m) * threshold ** (2 / alpha) * mpmath.mpf(y_dist) ** 2

    def term(n: int):
        k_value = n * k_closed_form_mp(params.alpha, 1) if mobile else k_closed_form_mp(params.alpha, n)
        return mpmath.exp(-n * noise - spatial * k_value)

    return term


def coverage_probability(y_dist: float, params: SystemParams, mobile: bool = False) -> float:
    """p(y): probability that at least one of the τ_m slots reaches the receiver."""
    tau = params.tau_m
    single = p_n_single(y_dist, 1, params, mobile)
    if tau == 1:
        return single
    value = _alternating_sum(
        tau,
        lambda n: p_n_single(y_dist, n, params, mobile),
        _exact_p_n(y_dist, params, mobile),
        label=f"p(y) at {y_dist:g} m",
    )
    # rounding can push the sum a few ulps outside its bracket
    return min(1.0, max(single, value))


def coverage_probability_generic(y_dist: float, params: SystemParams, loss: Callable[[float], float]) -> float:
    return _alternating_sum(
        params.tau_m,
        lambda n: p_n_single_generic(y_dist, n, params, loss),
        label=f"generic p(y) at {y_dist:g} m",
    )


def bonferroni_bounds(y_dist: float, params: SystemParams, k: int) -> Tuple[float, float]:
    """Inclusion-exclusion truncations bracketing p(y): (first k+1 summands, first k summands)."""
    tau = params.tau_m
    if k % 2 == 0:
        raise ValueError(f"Bonferroni order k must be odd, got {k}")
    if not 1 <= k <= tau:
        raise ValueError(f"Bonferroni order k must lie in [1, {tau}], got {k}")
    terms = _binomial_terms(tau, lambda n: p_n_single(y_dist, n, params), count=min(k + 1, tau))
    upper = math.fsum(terms[:k])
    lower = math.fsum(terms[: k + 1]) if k + 1 <= tau else coverage_probability(y_dist, params)
    logger.debug(f"Bonferroni k={k} at {y_dist:g} m: [{lower:.6g}, {upper:.6g}] width {upper - lower:.3g}")
    return lower, upper


# ---------------------------------------------------------------------------
# spatial correlation between two receivers of the same cluster
# ---------------------------------------------------------------------------

def _check_triangle(y1_dist: float, y2_dist: float, separation: float) -> None:
    if y1_dist <= 0 or y2_dist <= 0:
        raise ValueError("receiver distances must be positive")
    if separation < 0:
        raise ValueError("separation must be nonnegative")
    slack = 1e-9 * max(y1_dist, y2_dist)
    if separation + slack < abs(y1_dist - y2_dist) or separation > y1_dist + y2_dist + slack:
        raise ValueError(
            f"no triangle has sides {y1_dist:g}, {y2_dist:g} and separation {separation:g}"
        )


def correlation_ratio(y1_dist: float, y2_dist: float, separation: float, n: int, params: SystemParams) -> float:
    """p_n(y₁,y₂) / (p_n(y₁)·p_n(y₂)) = exp(λ_m ∫(1-a₁)(1-a₂) dx).

    a_i(x) is the probability that an interferer at x leaves all n slots at y_i successful.
    Only the receiver separation and the two link lengths enter, so the receivers sit at
    (∓s/2, 0) and the plane is covered in polar coordinates about their midpoint, upper half doubled.
    Lengths are scaled by max(d₁, d₂).
    """
    _check_triangle(y1_dist, y2_dist, separation)
    if n < 1:
        raise ValueError(f"n must be at least 1, got {n}")
    scale = max(y1_dist, y2_dist)
    d1, d2, half = y1_dist / scale, y2_dist / scale, 0.5 * separation / scale
    alpha, threshold = params.alpha, params.detection_threshold

    def blocked(d: float, distance: float) -> float:
        # 1 - (1 + T(d/|x-y|)^α)^-n
        if distance == 0.0:
            return 1.0
        return -math.expm1(-n * math.log1p(threshold * (d / distance) ** alpha))

    def over_angle(rho: float) -> float:
        def integrand(theta: float) -> float:
            x, y = rho * math.cos(theta), rho * math.sin(theta)
            return blocked(d1, math.hypot(x + half, y)) * blocked(d2, math.hypot(x - half, y))

        return rho * integrate(integrand, 0.0, math.pi, ANGULAR_QUADRATURE, label="correlation angular")

    if half > 0:
        inner = integrate(over_angle, 0.0, half, RADIAL_QUADRATURE, label="correlation inner radius")
        outer = integrate(over_angle, half, math.inf, RADIAL_QUADRATURE, label="correlation outer radius")
    else:
        inner, outer = 0.0, integrate(over_angle, 0.0, math.inf, RADIAL_QUADRATURE, label="correlation radius")
    overlap = 2.0 * (inner + outer) * scale ** 2
    return math.exp(params.lambda_m * overlap)


def conditional_coverage(
    y1_dist: float, y2_dist: float, separation: float, n: int, params: SystemParams
) -> float:
    """p_n(y₁ | y₂): n-slot success at y₁ given the same at y₂."""
    return p_n_single(y1_dist, n, params) * correlation_ratio(y1_dist, y2_dist, separation, n, params)


# ---------------------------------------------------------------------------
# mean number of covered receivers
# ---------------------------------------------------------------------------

def _radial_average(func: Callable[[float], float], radius: float, label: str) -> float:
    # ∫₀¹ f(R√v) dv, the uniform-in-disc average of f
    return integrate(lambda v: func(radius * math.sqrt(v)) if v > 0 else 1.0, 0.0, 1.0, label=label)


def mean_covered(params: SystemParams, mobile: bool = False) -> float:
    """E°[N] = λ_r·π·R²·Σ(-1)^(n+1)C(τ,n)·avg_disc p_n."""
    radius = params.cluster_radius
    tau = params.tau_m

    def averaged(n: int) -> float:
        return _radial_average(lambda r: p_n_single(r, n, params, mobile), radius, f"disc average of p_{n}")

    terms = _binomial_terms(tau, averaged)
    total = math.fsum(terms)
    if not _significant(terms, total, tau):
        logger.debug(f"E[N] at tau={tau}: averaging the exact p(y) instead of per-slot terms")
        total = _radial_average(lambda r: coverage_probability(r, params, mobile), radius, "disc average of p(y)")
    return min(params.n_max, max(0.0, params.n_max * total))


def _no_noise_term(n: int, params: SystemParams) -> float:
    # π·λ_r·∫₀^{R²} e^{-c t} dt with c = λ_m K(α,n) T^{2/α}
    c = params.lambda_m * k_integral(params.alpha, n) * params.detection_threshold ** (2.0 / params.alpha)
    return math.pi * params.lambda_r * -math.expm1(-c * params.cluster_radius ** 2) / c


def _alpha4_term(n: int, params: SystemParams) -> float:
    c1 = n * params.pathloss_intercept * params.detection_threshold * params.snr_inv()
    if c1 == 0.0:
        return _no_noise_term(n, params)
    c2 = params.lambda_m * k_integral(4.0, n) * math.sqrt(params.detection_threshold)
    span = params.cluster_radius ** 2
    root = math.sqrt(c1)
    start = c2 / (2.0 * root)
    bracket = erfcx(start) - math.exp(-c1 * span ** 2 - c2 * span) * erfcx(root * span + start)
    return math.pi ** 1.5 * params.lambda_r / root * 0.5 * bracket


def mean_covered_closed_form(params: SystemParams, form: Literal["no-noise", "alpha4"]) -> float:
    """E°[N] from the noise-free exponential form or the α = 4 error-function form."""
    if form == "no-noise":
        if params.noise_power != 0:
            raise ValueError("the no-noise form needs noise_power = 0")
        term = _no_noise_term
    elif form == "alpha4":
        if params.alpha != 4:
            raise ValueError("the alpha4 form needs alpha = 4")
        term = _alpha4_term
    else:
        raise ValueError(f"unknown closed form {form!r}")
    return _alternating_sum(params.tau_m, lambda n: term(n, params), label=f"E[N] {form} form")


def k_tilde(alpha: float, tau: int) -> float:
    """K̃(α,τ) = Σ(-1)^(n+1) C(τ,n) / K(α,n)."""
    return _alternating_sum(tau, lambda n: 1.0 / k_integral(alpha, n), label="K tilde")


def mean_covered_asymptotic(params: SystemParams, regime: Literal["dense", "sparse"]) -> float:
    """Limits of E°[N]: noise-free dense transmitters (λ_m → ∞) or isolated transmitters (λ_m → 0)."""
    if regime == "dense":
        scale = params.detection_threshold ** (2.0 / params.alpha) * params.lambda_m
        return math.pi * k_tilde(params.alpha, params.tau_m) * params.lambda_r / scale
    if regime != "sparse":
        raise ValueError(f"unknown regime {regime!r}")
    tau = params.tau_m
    noise = params.detection_threshold * params.snr_inv() * params.pathloss_intercept
    half_alpha = params.alpha / 2.0

    def covered(t: float) -> float:
        # 1 - (1 - e^{-x})^τ
        x = noise * t ** half_alpha
        if x == 0.0:
            return 1.0
        return -math.expm1(tau * math.log(-math.expm1(-x)))

    span = params.cluster_radius ** 2
    return math.pi * params.lambda_r * span * integrate(lambda v: covered(v * span), 0.0, 1.0, label="sparse E[N]")


# ---------------------------------------------------------------------------
# noise-limited range, empty clusters, throughput
# ---------------------------------------------------------------------------

def threshold_distance(params: SystemParams) -> float:
    """R_th: the link length at which the noise-only SNR falls to T."""
    denominator = params.snr_inv() * params.detection_threshold
    if denominator == 0.0:
        return math.inf
    return path_loss_inverse(1.0 / denominator, params.path_loss_model())


def null_cluster_fraction(params: SystemParams) -> NullClusterFraction:
    """Fraction of clusters whose receivers all lie beyond the noise-limited range."""
    r_th = threshold_distance(params)
    effective = min(params.cluster_radius, r_th)
    return NullClusterFraction(
        value=math.exp(-params.lambda_r * math.pi * effective ** 2),
        threshold_distance=r_th,
        effective_radius=effective,
    )


def _rate(threshold: float, unit: str) -> float:
    if unit == "bits":
        return math.log2(1.0 + threshold)
    if unit == "nats":
        return math.log1p(threshold)
    raise ValueError(f"unknown rate unit {unit!r}")


def throughput(params: SystemParams, unit: Literal["nats", "bits"] = "nats", mobile: bool = False) -> Throughput:
    covered = mean_covered(params, mobile)
    value = covered * _rate(params.detection_threshold, unit) / params.tau_m
    return Throughput(value=value, unit=unit, mean_covered=covered)


def optimal_rate_asymptotic(alpha: float) -> float:
    """T* of the dense noise-free regime: the root of x/(1+x) = (2/α)·log(1+x) above α/2 - 1."""
    if not alpha > 2:
        raise ValueError("alpha must exceed 2")

    def gap(x: float) -> float:
        return x / (1.0 + x) - 2.0 / alpha * math.log1p(x)

    # gap peaks at α/2 - 1 and decreases without bound afterwards
    low = alpha / 2.0 - 1.0
    high = max(2.0 * low, 1.0)
    for _ in range(200):
        if gap(high) < 0:
            break
        low, high = high, 2.0 * high
    else:
        raise ArithmeticError(f"could not bracket the optimal rate for alpha={alpha}")
    return brentq(gap, low, high, xtol=1e-14, rtol=4 * np.finfo(float).eps, maxiter=500)


def optimal_rate_general(
    params: SystemParams,
    grid_db: Optional[Sequence[float]] = None,
    bounds_db: Tuple[float, float] = (-10.0, 25.0),
    flat_tolerance: float = 1e-6,
) -> RateOptimum:
    """Maximize E°[N]·log(1+T)/τ_m over T: coarse dB grid, then golden-section refinement."""
    grid = np.asarray(grid_db if grid_db is not None else np.arange(bounds_db[0], bounds_db[1] + 0.25, 0.5), dtype=float)
    if grid.size < 3:
        raise ValueError("the threshold grid needs at least three points")

    def objective(threshold_db: float) -> float:
        return throughput(params.replace(detection_threshold=db_to_linear(threshold_db))).value

    values = np.array([objective(t) for t in grid])
    best = int(np.argmax(values))
    if 0 < best < grid.size - 1:
        result = minimize_scalar(
            lambda t: -objective(t),
            bracket=(grid[best - 1], grid[best], grid[best + 1]),
            method="golden",
            options={"xtol": 1e-6},
        )
    else:
        logger.warning(f"throughput maximum sits on the grid edge at {grid[best]:g} dB")
        lo, hi = grid[max(best - 1, 0)], grid[min(best + 1, grid.size - 1)]
        result = minimize_scalar(lambda t: -objective(t), bounds=(lo, hi), method="bounded")
    optimum_db = float(result.x)
    peak = -float(result.fun)

    # curvature check: a half-dB step either side should cost something
    step = 0.5
    drop = peak - max(objective(optimum_db - step), objective(optimum_db + step))
    flat = drop < flat_tolerance * max(abs(peak), 1e-300)
    if flat:
        logger.warning(f"throughput is flat near {optimum_db:.3f} dB (drop {drop:.3g}); optimum is ill-conditioned")
    return RateOptimum(threshold=db_to_linear(optimum_db), threshold_db=optimum_db, throughput=peak, flat=flat)


# ---------------------------------------------------------------------------
# comparisons
# ---------------------------------------------------------------------------

def unicast_baseline(params: SystemParams, condition_nonempty: bool = False) -> float:
    """Expected sum rate when the τ_m slots are split across receivers one at a time.

    With Poisson receivers the per-receiver coverage averages to E°[N]/N̄_max, and an empty
    cluster (probability e^{-N̄_max}) contributes nothing unless `condition_nonempty`.
    """
    n_max = params.n_max
    per_receiver = mean_covered(params) / n_max
    value = params.tau_m * math.log1p(params.detection_threshold) * per_receiver
    if not condition_nonempty:
        value *= -math.expm1(-n_max)
    return value


def multicast_superior(params: SystemParams) -> bool:
    return throughput(params).value >= unicast_baseline(params)


def tradeoff_locus(params: SystemParams, taus: Iterable[int]) -> List[Tuple[int, float, float]]:
    """(τ_m, E°[N], ξ) for each repetition count: reliability against efficiency."""
    rows = []
    for tau in taus:
        result = throughput(params.replace(tau_m=tau))
        rows.append((tau, result.mean_covered, result.value))
    return rows


_MOBILITY_OPS: Dict[str, Callable] = {
    "p_n_single": p_n_single,
    "coverage_probability": coverage_probability,
    "mean_covered": mean_covered,
}


def mobility_variant(op: str, *args, **kwargs) -> MobilityComparison:
    """Evaluate `op` for static and for high-mobility interferers."""
    try:
        func = _MOBILITY_OPS[op]
    except KeyError:
        raise ValueError(f"no mobility variant for {op!r}; choose from {sorted(_MOBILITY_OPS)}") from None
    return MobilityComparison(static=func(*args, mobile=False, **kwargs), mobile=func(*args, mobile=True, **kwargs))


# ---------------------------------------------------------------------------
# base-station assistance
# ---------------------------------------------------------------------------

def _bs_noise(params: SystemParams) -> float:
    return params.detection_threshold * params.snr_c_inv() * params.pathloss_intercept


def q_factor(r: float, params: SystemParams) -> float:
    """Probability that a BS at distance r covers the transmitter's position."""
    if r < 0:
        raise ValueError(f"distance must be nonnegative, got {r}")
    h = h_integral(params.detection_threshold, params.alpha)
    return math.exp(-_bs_noise(params) * r ** params.alpha - 2.0 * math.pi * params.lambda_b * h * r ** 2)


def bs_coverage_pc(params: SystemParams) -> float:
    """p_c, the nearest-BS coverage probability at the transmitter's position.

    Integrated in u = λ_b·π·r², which turns the Rayleigh nearest-BS density into e^{-u}.
    """
    h = h_integral(params.detection_threshold, params.alpha)
    noise = _bs_noise(params)
    density = math.pi * params.lambda_b
    half_alpha = params.alpha / 2.0
    decay = 2.0 * h + 1.0

    def integrand(u: float) -> float:
        return math.exp(-noise * (u / density) ** half_alpha - decay * u)

    return integrate(integrand, 0.0, math.inf, label="p_c")


def bs_coverage_pc_closed_form(params: SystemParams, form: Literal["no-noise", "alpha4"]) -> float:
    if form == "no-noise":
        if params.noise_power != 0:
            raise ValueError("the no-noise form needs noise_power = 0")
        return 1.0 / (1.0 + 2.0 * h_integral(params.detection_threshold, params.alpha))
    if form != "alpha4":
        raise ValueError(f"unknown closed form {form!r}")
    if params.alpha != 4:
        raise ValueError("the alpha4 form needs alpha = 4")
    h = h_closed_form_alpha4(params.detection_threshold)
    c3 = _bs_noise(params)
    c4 = math.pi * params.lambda_b * (2.0 * h + 1.0)
    if c3 == 0.0:
        return 1.0 / (1.0 + 2.0 * h)
    return math.pi ** 1.5 * params.lambda_b / math.sqrt(c3) * scaled_q(c4 / math.sqrt(2.0 * c3))


def _disc_nodes() -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    nodes, weights = np.polynomial.legendre.leggauss(DISC_RADIAL_NODES)
    angles = 2.0 * math.pi * np.arange(DISC_ANGULAR_NODES) / DISC_ANGULAR_NODES
    return 0.5 * (nodes + 1.0), 0.5 * weights, angles


def bs_coverage_exact(
    y_offset: Tuple[float, float],
    params: SystemParams,
    samples: int = 4096,
    seed: Optional[int] = None,
) -> CoverageEstimate:
    """p_c(y) without the same-position approximation, by Monte Carlo over the serving BS.

    The serving BS is the nearest one to the transmitter, at x with ‖x‖ Rayleigh and a uniform
    bearing; the other BSs form a PPP outside B(0, ‖x‖). The interference integral over that
    exterior is the full-plane value minus a Gauss-Legendre/uniform-angle disc integral.
    The same seed yields the same serving-BS draws for every y, so sweeps over y share noise.
    """
    if samples < 2:
        raise ValueError("bs_coverage_exact needs at least two samples")
    rng = np.random.default_rng(settings.SEED if seed is None else seed)
    y = np.asarray(y_offset, dtype=float)
    alpha, threshold = params.alpha, params.detection_threshold
    plane = k_integral(alpha, 1) * threshold ** (2.0 / alpha)
    noise = _bs_noise(params)
    radial, radial_weights, angles = _disc_nodes()
    angle_weight = 2.0 * math.pi / DISC_ANGULAR_NODES
    cos_a, sin_a = np.cos(angles), np.sin(angles)

    rho = np.sqrt(rng.exponential(size=samples) / (math.pi * params.lambda_b))
    bearing = rng.uniform(0.0, 2.0 * math.pi, size=samples)
    values = np.empty(samples)
    for start in range(0, samples, DISC_CHUNK):
        chunk = slice(start, min(start + DISC_CHUNK, samples))
        r = rho[chunk]
        bs = np.stack([r * np.cos(bearing[chunk]), r * np.sin(bearing[chunk])], axis=1)
        link = np.maximum(np.linalg.norm(bs - y, axis=1), 1e-12)
        # disc points z = ρ·t·(cos ψ, sin ψ), shape (chunk, radial, angular)
        zr = r[:, None, None] * radial[None, :, None]
        zx = zr * cos_a[None, None, :] - y[0]
        zy = zr * sin_a[None, None, :] - y[1]
        scaled = np.hypot(zx, zy) / link[:, None, None]
        kernel = 1.0 / (1.0 + scaled ** alpha / threshold)
        disc = np.einsum("cra,r->c", kernel * zr, radial_weights) * angle_weight * r
        exterior = plane * link ** 2 - disc
        values[chunk] = np.exp(-noise * link ** alpha - params.lambda_b * exterior)
    return CoverageEstimate.from_samples(values)


def assisted_coverage(y_dist: float, params: SystemParams, pc: Optional[float] = None) -> float:
    """p̃(y) = 1 - (1 - p_c)(1 - p(y))."""
    pc = bs_coverage_pc(params) if pc is None else pc
    return 1.0 - (1.0 - pc) * (1.0 - coverage_probability(y_dist, params))


def assisted_mean_covered(params: SystemParams) -> float:
    covered = mean_covered(params)
    return covered + bs_coverage_pc(params) * (params.n_max - covered)


def assisted_mean_covered_given_distance(r: float, params: SystemParams) -> float:
    """E°[Ñ] given the transmitter sits at distance r from its nearest BS."""
    covered = mean_covered(params)
    return covered + q_factor(r, params) * (params.n_max - covered)
