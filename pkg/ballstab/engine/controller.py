"""PD feedback law, proportional-gain ramp and the ramp hypotheses."""

import numpy as np

from ..core.config import ControllerParams
from ..core.exceptions import DomainError
from ..core.logger import get_logger
from ..models.enums import RampProfile
from ..models.schemas import Violation

logger = get_logger("controller")

# Width of each quadratic cap of the linear-capped ramp, as a fraction of T_I
CAP_FRACTION = 0.25

# Ratio sup k_p' / bound above which the slope clause is reported as binding
BINDING_RATIO = 0.75


def kp(t: float, params: ControllerParams) -> float:
    """Proportional gain k_p(t) in [0, 1].

    Args:
        t: Absolute time (>= 0)
        params: Controller constants

    Returns:
        Gain value; identically 1 from T_I on (0 for the ``off`` profile)

    Raises:
        DomainError: for negative time

    Example:
        >>> kp(0.5, ControllerParams(T_I=1.0))
        0.5
    """
    if t < 0:
        raise DomainError(f"k_p is defined for t >= 0, got t={t}")
    T_I = params.T_I
    if params.ramp is RampProfile.OFF:
        return 0.0
    if t >= T_I:
        return 1.0
    if params.ramp is RampProfile.SMOOTHSTEP:
        s = t / T_I
        return s * s * (3.0 - 2.0 * s)
    # linear-capped
    w = CAP_FRACTION * T_I
    slope = 1.0 / (T_I - w)
    if t < w:
        return slope * t * t / (2.0 * w)
    if t <= T_I - w:
        return slope * w / 2.0 + slope * (t - w)
    return 1.0 - slope * (T_I - t) ** 2 / (2.0 * w)


def kp_slope(t: float, params: ControllerParams) -> float:
    """Time derivative k_p'(t)."""
    if t < 0:
        raise DomainError(f"k_p is defined for t >= 0, got t={t}")
    T_I = params.T_I
    if params.ramp is RampProfile.OFF or t >= T_I:
        return 0.0
    if params.ramp is RampProfile.SMOOTHSTEP:
        s = t / T_I
        return 6.0 * s * (1.0 - s) / T_I
    w = CAP_FRACTION * T_I
    slope = 1.0 / (T_I - w)
    if t < w:
        return slope * t / w
    if t <= T_I - w:
        return slope
    return slope * (T_I - t) / w


def sup_kp_slope(params: ControllerParams) -> float:
    """Closed-form supremum of k_p' over t >= 0."""
    if params.ramp is RampProfile.OFF:
        return 0.0
    if params.ramp is RampProfile.SMOOTHSTEP:
        return 3.0 / (2.0 * params.T_I)
    return 1.0 / ((1.0 - CAP_FRACTION) * params.T_I)


def slope_bound(params: ControllerParams) -> float:
    """Upper bound k_d / (2 T_I^2) that sup k_p' must stay strictly below."""
    return params.k_d / (2.0 * params.T_I**2)


def validate_controller(params: ControllerParams) -> list[Violation]:
    """Check every ramp clause and return all violations.

    Clauses: T_I > 0, k_d >= 0, k_p(0) = 0, k_p(T_I) = 1 with values in [0, 1],
    k_p non-decreasing, and sup k_p' < k_d / (2 T_I^2) (strict, closed form).
    """
    out: list[Violation] = []
    if not params.T_I > 0:
        out.append(_violation("controller.T_I", "ramp-time", "T_I must be positive", T_I=params.T_I))
        return out
    if not params.k_d >= 0:
        out.append(_violation("controller.k_d", "damper-gain", "k_d must be non-negative", k_d=params.k_d))

    start = kp(0.0, params)
    if start != 0.0:
        out.append(_violation("controller.ramp", "ramp-start", "k_p(0) must be 0", kp0=start))
    end = kp(params.T_I, params)
    if end != 1.0:
        out.append(
            _violation("controller.ramp", "ramp-end", "k_p must equal 1 on [T_I, inf)", kp_T_I=end)
        )

    samples = np.linspace(0.0, params.T_I, 1001)
    values = np.array([kp(float(t), params) for t in samples])
    if values.min() < 0.0 or values.max() > 1.0:
        out.append(
            _violation(
                "controller.ramp",
                "ramp-range",
                "k_p must stay in [0, 1]",
                min=float(values.min()),
                max=float(values.max()),
            )
        )
    if np.any(np.diff(values) < 0.0):
        out.append(_violation("controller.ramp", "ramp-monotone", "k_p must be non-decreasing"))

    sup = sup_kp_slope(params)
    bound = slope_bound(params)
    if not sup < bound:
        out.append(
            _violation(
                "controller.k_d",
                "ramp-slope",
                f"sup k_p' = {sup:g} must be strictly below k_d/(2 T_I^2) = {bound:g}",
                sup_kp_slope=sup,
                bound=bound,
                k_d=params.k_d,
                T_I=params.T_I,
            )
        )
    return out


def validate(params: ControllerParams) -> Violation | None:
    """Return the first violated ramp clause, or None when all hold."""
    violations = validate_controller(params)
    return violations[0] if violations else None


def ramp_slope_is_binding(params: ControllerParams) -> bool:
    """True (and logged) when sup k_p' is within BINDING_RATIO of its bound."""
    bound = slope_bound(params)
    if bound <= 0:
        return True
    ratio = sup_kp_slope(params) / bound
    if ratio >= BINDING_RATIO:
        logger.warning(
            f"Ramp slope is the binding constraint: sup k_p'/bound = {ratio:.3f} "
            f"(k_d={params.k_d}, T_I={params.T_I})"
        )
        return True
    return False


def feedback_force(
    t: float, h: np.ndarray, h1: np.ndarray, ell: np.ndarray, params: ControllerParams
) -> np.ndarray:
    """Physical-frame PD force w = k_p(t)(h1 - h) - k_d ell."""
    h = np.asarray(h, dtype=float)
    h1 = np.asarray(h1, dtype=float)
    ell = np.asarray(ell, dtype=float)
    return kp(t, params) * (h1 - h) - params.k_d * ell


def feedback_lagrangian(
    t: float, h_tilde: np.ndarray, ell_tilde: np.ndarray, Q: np.ndarray, params: ControllerParams
) -> np.ndarray:
    """Body-frame controller force -k_p(t) Q^T h_tilde - k_d ell_tilde."""
    h_tilde = np.asarray(h_tilde, dtype=float)
    ell_tilde = np.asarray(ell_tilde, dtype=float)
    return -kp(t, params) * (np.asarray(Q).T @ h_tilde) - params.k_d * ell_tilde


def _violation(field: str, hypothesis: str, message: str, **values: float) -> Violation:
    return Violation.of(field, hypothesis, message, **values)
