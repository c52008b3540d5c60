"""Closed-loop transfer functions, characteristic roots and plant stability.

The closed loop of the delayed cruise controller has the characteristic
function D(s) = s^2 e^(s sigma) + (alpha + sum beta_i) s + alpha kappa. Plant
stability (all roots in the open left half plane) holds exactly when the gain
sum lies in a half-open interval whose endpoints come from the roots of
alpha kappa = w^2 cos(w sigma) on (0, pi/(2 sigma)); the intentional
per-leader delays do not enter.
"""

import cmath
import math
from dataclasses import dataclass

import numpy as np
from scipy.optimize import bisect, minimize_scalar

from .vehicles import ControllerParams, PlantParams

__all__ = [
    "LinkTransfer",
    "StabilityRegion",
    "InfeasibleRegionError",
    "PoleError",
    "char_fn",
    "link_tf",
    "stability_region",
    "find_characteristic_roots",
    "rightmost_root_oracle",
]


class InfeasibleRegionError(ValueError):
    """No plant-stable gain interval exists for these (alpha, kappa, sigma)."""


class PoleError(ZeroDivisionError):
    """Transfer function evaluated at (numerically) a characteristic root."""


@dataclass(frozen=True)
class LinkTransfer:
    """Per-leader transfer functions from input speed perturbations to the truck's."""

    alpha: float
    kappa: float
    sigma: float
    betas: dict[int, float]
    sigmas: dict[int, float]

    def __post_init__(self):
        object.__setattr__(self, "betas", dict(self.betas))
        sig = {i: float(self.sigmas.get(i, 0.0)) for i in self.betas}
        if 1 in sig and sig[1] != 0.0:
            raise ValueError("vehicle 1 carries no intentional delay")
        object.__setattr__(self, "sigmas", sig)

    @classmethod
    def from_controller(cls, ctrl: ControllerParams, plant: PlantParams):
        return cls(alpha=ctrl.alpha, kappa=ctrl.policy.kappa,
                   sigma=plant.actuation_delay, betas=dict(ctrl.betas),
                   sigmas=dict(ctrl.info_delays))

    @property
    def indices(self) -> list[int]:
        return sorted(self.betas)

    @property
    def beta_sum(self) -> float:
        return float(sum(self.betas.values()))


def char_fn(lt: LinkTransfer, s):
    """D(s) = s^2 exp(s sigma) + (alpha + sum beta) s + alpha kappa."""
    s = np.asarray(s, dtype=complex)
    out = s**2 * np.exp(s * lt.sigma) + (lt.alpha + lt.beta_sum) * s + lt.alpha * lt.kappa
    return complex(out) if out.ndim == 0 else out


def _char_scale(lt: LinkTransfer, s):
    s = np.asarray(s, dtype=complex)
    return (np.abs(s) ** 2 * np.exp(np.clip(s.real, None, 50.0) * lt.sigma)
            + (lt.alpha + lt.beta_sum) * np.abs(s) + lt.alpha * lt.kappa)


def link_tf(lt: LinkTransfer, vehicle: int, s):
    """T_1(s) = (beta_1 s + alpha kappa)/D(s); T_i(s) = beta_i s e^(-s sigma_i)/D(s)."""
    if vehicle not in lt.betas:
        raise KeyError(f"vehicle {vehicle} not in connected set {lt.indices}")
    s = np.asarray(s, dtype=complex)
    d = char_fn(lt, s)
    bad = np.abs(d) <= 1e-12 * _char_scale(lt, s)
    if np.any(bad):
        where = s[bad] if s.ndim else s
        raise PoleError(f"characteristic function vanishes at s = {where}")
    if vehicle == 1:
        num = lt.betas[1] * s + lt.alpha * lt.kappa
    else:
        num = lt.betas[vehicle] * s * np.exp(-s * lt.sigmas[vehicle])
    out = num / d
    return complex(out) if out.ndim == 0 else out


@dataclass(frozen=True)
class StabilityRegion:
    """Half-open admissible interval for the gain sum at fixed alpha, kappa, sigma."""

    alpha: float
    kappa: float
    sigma: float
    omega_lower: float
    omega_upper: float
    beta_sum_lower: float  # inclusive
    beta_sum_upper: float  # exclusive

    def contains(self, beta_sum: float) -> bool:
        return self.beta_sum_lower <= beta_sum < self.beta_sum_upper

    def margin(self, beta_sum: float) -> float:
        """Distance to the nearest bound; negative outside the region."""
        return min(beta_sum - self.beta_sum_lower, self.beta_sum_upper - beta_sum)


def stability_region(alpha: float, kappa: float, sigma: float) -> StabilityRegion:
    """Solve alpha kappa = w^2 cos(w sigma) on (0, pi/(2 sigma)) by bisection.

    Raises InfeasibleRegionError when alpha kappa exceeds the maximum of the
    left-hand side, in which case no gain sum stabilizes the plant.
    """
    if alpha <= 0 or kappa <= 0 or sigma <= 0:
        raise ValueError(f"need alpha, kappa, sigma > 0, got {alpha}, {kappa}, {sigma}")
    w_hi = math.pi / (2.0 * sigma)
    target = alpha * kappa

    def g(w):
        return w * w * math.cos(w * sigma) - target

    peak = minimize_scalar(lambda w: -(w * w) * math.cos(w * sigma),
                           bounds=(1e-12, w_hi), method="bounded",
                           options={"xatol": 1e-12})
    w_peak = float(peak.x)
    g_max = w_peak * w_peak * math.cos(w_peak * sigma)
    if g_max <= target:
        raise InfeasibleRegionError(
            f"alpha*kappa = {target:.6g} exceeds max of w^2 cos(w sigma) = "
            f"{g_max:.6g} on (0, pi/(2 sigma)); no stabilizing gain interval"
        )
    w_lo_root = bisect(g, 1e-12, w_peak, xtol=1e-10)
    w_hi_root = bisect(g, w_peak, w_hi - 1e-12, xtol=1e-10)
    lower = w_lo_root * math.sin(w_lo_root * sigma) - alpha
    upper = w_hi_root * math.sin(w_hi_root * sigma) - alpha
    return StabilityRegion(alpha=alpha, kappa=kappa, sigma=sigma,
                           omega_lower=w_lo_root, omega_upper=w_hi_root,
                           beta_sum_lower=lower, beta_sum_upper=upper)


def _winding_number(lt, corners, samples_per_edge=64, depth=0):
    """Total argument change of D(s)/(2 pi) along a rectangle, refined until
    each increment stays below pi/2."""
    total = 0.0
    for a, b in zip(corners, corners[1:] + corners[:1]):
        total += _edge_arg_change(lt, a, b, samples_per_edge, depth)
    return total / (2.0 * math.pi)


def _edge_arg_change(lt, a, b, n, depth):
    t = np.linspace(0.0, 1.0, n + 1)
    pts = a + (b - a) * t
    vals = char_fn(lt, pts)
    mags = np.abs(vals)
    scale = _char_scale(lt, pts)
    if np.any(mags < 1e-9 * scale):
        if depth > 40:
            raise RuntimeError("characteristic root sits on the search contour")
        # nudge the contour: recurse on a slightly shifted edge
        shift = 1e-6 * (1 + abs(a) + abs(b)) * (1 + depth)
        return _edge_arg_change(lt, a + shift, b + shift, n, depth + 1)
    args = np.angle(vals)
    darg = np.diff(args)
    darg = (darg + math.pi) % (2.0 * math.pi) - math.pi
    if np.max(np.abs(darg)) > math.pi / 2 and depth < 24:
        mid = a + (b - a) * 0.5
        return (_edge_arg_change(lt, a, mid, n, depth + 1)
                + _edge_arg_change(lt, mid, b, n, depth + 1))
    return float(np.sum(darg))


def _char_deriv(lt: LinkTransfer, s: complex) -> complex:
    return ((2.0 * s + lt.sigma * s * s) * cmath.exp(s * lt.sigma)
            + lt.alpha + lt.beta_sum)


def _polish_root(lt, s0, tol=1e-12, max_iter=60):
    s = complex(s0)
    for _ in range(max_iter):
        f = char_fn(lt, s)
        fp = _char_deriv(lt, s)
        if abs(fp) == 0.0:
            break
        step = f / fp
        s -= step
        if abs(step) < tol * (1.0 + abs(s)):
            break
    return s


def find_characteristic_roots(lt: LinkTransfer,
                              re_range=(-5.0, 2.0),
                              im_range=(-0.6, 20.0),
                              min_box=1e-3) -> list[complex]:
    """Locate all zeros of D inside a rectangle by winding-number subdivision.

    Each subdivided box is counted with the argument principle; boxes holding
    roots are split until smaller than ``min_box``, then the roots are
    polished with Newton's method. Roots come in conjugate pairs, so an upper
    half-plane box (with a small overlap below the real axis) covers the
    spectrum.
    """
    roots: list[complex] = []

    def recurse(re_lo, re_hi, im_lo, im_hi, depth):
        corners = [complex(re_lo, im_lo), complex(re_hi, im_lo),
                   complex(re_hi, im_hi), complex(re_lo, im_hi)]
        wind = _winding_number(lt, corners)
        count = int(round(wind))
        if abs(wind - count) > 0.25:
            if depth > 48:
                raise RuntimeError(
                    f"winding number {wind:.3f} did not resolve to an integer")
            # avoid a root near the contour by nudging the split instead
            count = max(count, 1)
        if count == 0:
            return
        if (re_hi - re_lo) < min_box and (im_hi - im_lo) < min_box:
            s = _polish_root(lt, complex(0.5 * (re_lo + re_hi), 0.5 * (im_lo + im_hi)))
            for r in roots:
                if abs(r - s) < 1e-6 * (1.0 + abs(s)):
                    return
            roots.append(s)
            return
        # split the longer side; offset the cut slightly to dodge roots on it
        if (re_hi - re_lo) >= (im_hi - im_lo):
            cut = re_lo + (re_hi - re_lo) * 0.5137
            recurse(re_lo, cut, im_lo, im_hi, depth + 1)
            recurse(cut, re_hi, im_lo, im_hi, depth + 1)
        else:
            cut = im_lo + (im_hi - im_lo) * 0.5137
            recurse(re_lo, re_hi, im_lo, cut, depth + 1)
            recurse(re_lo, re_hi, cut, im_hi, depth + 1)

    recurse(re_range[0], re_range[1], im_range[0], im_range[1], 0)
    polished = []
    for r in roots:
        if abs(char_fn(lt, r)) > 1e-6 * _char_scale(lt, r):
            continue
        if not (re_range[0] - 1e-6 <= r.real <= re_range[1] + 1e-6):
            continue
        polished.append(r)
    return polished


def rightmost_root_oracle(lt: LinkTransfer,
                          re_range=(-5.0, 2.0),
                          im_range=(-0.6, 20.0)) -> float:
    """Largest real part among characteristic roots found in the search box.

    Returns -inf when the box holds no root (every root then lies further
    left, so the loop is stable as far as this box is concerned).
    """
    roots = find_characteristic_roots(lt, re_range=re_range, im_range=im_range)
    if not roots:
        return float("-inf")
    return max(r.real for r in roots)
