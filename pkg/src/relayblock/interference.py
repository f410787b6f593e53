"""Interference-to-signal ratio (ISR) statistics on the three links.

The ISR of a target is ``I = sum_i B_i C_i`` with a purely geometric factor
``B_i = (d / d_i) ** beta`` and a shadowing factor
``C_i = 10 ** ((xi_i - xi) / 10)``.  Transmit powers cancel because the
network is interference limited.  The first two moments of ``I`` are matched
to a lognormal distribution, whose CDF then drives the class model.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass

import numpy as np
from scipy.special import ndtr

from .errors import InvalidMomentsError, InvalidParameterError, SingularGeometryError
from .geometry import CellLayout, Hexagon, Point2D, QuadratureRule, make_quadrature, sample_uniform

DB_TO_NEPER = math.log(10.0) / 10.0


class LinkKind(enum.Enum):
    BS_MS = "bs_ms"
    BS_RS = "bs_rs"
    RS_MS = "rs_ms"


@dataclass(frozen=True)
class ShadowingSpec:
    """Shadowing standard deviations in dB for the serving and interfering paths."""

    sigma_serving: float
    sigma_interferer: float

    def __post_init__(self):
        if self.sigma_serving < 0 or self.sigma_interferer < 0:
            raise InvalidParameterError("shadowing sigmas must be >= 0 dB")


@dataclass(frozen=True)
class LinkGeometry:
    """Serving node, interferers and target (a region or a fixed point)."""

    kind: LinkKind
    serving_node: Point2D
    interferer_positions: np.ndarray
    path_loss_exponent: float
    shadowing: ShadowingSpec
    target_region: Hexagon | None = None
    target_point: Point2D | None = None

    def __post_init__(self):
        pos = np.atleast_2d(np.asarray(self.interferer_positions, dtype=float))
        object.__setattr__(self, "interferer_positions", pos)
        if pos.shape[0] < 1 or pos.shape[1] != 2:
            raise InvalidParameterError("need at least one interferer position (x, y)")
        if not self.path_loss_exponent > 2:
            raise InvalidParameterError(f"path loss exponent must exceed 2, got {self.path_loss_exponent}")
        if (self.target_region is None) == (self.target_point is None):
            raise InvalidParameterError("give exactly one of target_region or target_point")
        if self.target_region is not None:
            if np.any(self.target_region.contains_points(pos, rtol=0.0)):
                raise SingularGeometryError("an interferer lies inside or on the target region")
        else:
            d = np.hypot(*(pos - np.asarray(self.target_point)).T)
            if np.any(d == 0):
                raise SingularGeometryError("target point coincides with an interferer")

    @property
    def is_fixed(self) -> bool:
        return self.target_point is not None

    def path_loss_ratios(self, targets) -> np.ndarray:
        """``B_i`` for each target point: an (n, N) array."""
        t = np.atleast_2d(np.asarray(targets, dtype=float))
        s = np.asarray(self.serving_node)
        d2 = np.sum((t - s) ** 2, axis=1)[:, None]
        di2 = np.sum((t[:, None, :] - self.interferer_positions[None, :, :]) ** 2, axis=2)
        if np.any(di2 == 0):
            raise SingularGeometryError("target point coincides with an interferer")
        return (d2 / di2) ** (0.5 * self.path_loss_exponent)


@dataclass(frozen=True)
class SpatialMoments:
    mean_sum_b: float  # E[sum B_i]
    mean_sum_b_sq: float  # E[(sum B_i)^2]
    mean_sum_bsq: float  # E[sum B_i^2]


@dataclass(frozen=True)
class ShadowRatioMoments:
    e_c: float
    e_c2: float
    e_cc: float


@dataclass(frozen=True)
class IsrModel:
    """Lognormal ISR model in natural-log units."""

    mu_i: float
    sigma_i: float
    m1: float
    m2: float

    @property
    def source_moments(self) -> tuple[float, float]:
        return (self.m1, self.m2)


def shadow_ratio_moments(spec: ShadowingSpec) -> ShadowRatioMoments:
    a2 = DB_TO_NEPER**2
    s2, si2 = spec.sigma_serving**2, spec.sigma_interferer**2
    return ShadowRatioMoments(
        e_c=math.exp(a2 * (si2 + s2) / 2),
        e_c2=math.exp(2 * a2 * (si2 + s2)),
        # C_i C_j carries -2*xi, hence the 4*sigma^2 term
        e_cc=math.exp(a2 * (2 * si2 + 4 * s2) / 2),
    )


def spatial_moments(geom: LinkGeometry, quad: QuadratureRule | None = None) -> SpatialMoments:
    """Moments of ``sum B_i`` under a uniformly placed target.

    For a fixed target they collapse to deterministic sums.  For a moving
    target a quadrature rule over ``geom.target_region`` is used (the default
    rule is built when ``quad`` is omitted).
    """
    if geom.is_fixed:
        b = geom.path_loss_ratios([geom.target_point])[0]
        s = float(b.sum())
        return SpatialMoments(s, s * s, float(np.sum(b * b)))
    if quad is None:
        quad = make_quadrature(geom.target_region)
    elif quad.target_region != geom.target_region:
        raise InvalidParameterError("quadrature rule targets a different region")
    b = geom.path_loss_ratios(quad.nodes)
    sb = b.sum(axis=1)
    return SpatialMoments(
        float(quad.mean(sb)),
        float(quad.mean(sb * sb)),
        float(quad.mean(np.sum(b * b, axis=1))),
    )


def isr_moments(sm: SpatialMoments, cm: ShadowRatioMoments) -> tuple[float, float]:
    m1 = cm.e_c * sm.mean_sum_b
    m2 = cm.e_c2 * sm.mean_sum_bsq + cm.e_cc * (sm.mean_sum_b_sq - sm.mean_sum_bsq)
    return m1, m2


def lognormal_fit(m1: float, m2: float) -> IsrModel:
    """Match a lognormal to its first two raw moments."""
    if not (m1 > 0 and m2 > 0):
        raise InvalidMomentsError(f"moments must be positive, got m1={m1}, m2={m2}")
    log_m1, log_m2 = math.log(m1), math.log(m2)
    var = log_m2 - 2 * log_m1
    if var < 0:
        # allow round-off on degenerate (deterministic) inputs
        if var < -1e-12 * max(1.0, abs(log_m2)):
            raise InvalidMomentsError(f"m2 < m1**2 ({m2} < {m1 * m1})")
        var = 0.0
    return IsrModel(mu_i=2 * log_m1 - 0.5 * log_m2, sigma_i=math.sqrt(var), m1=m1, m2=m2)


def isr_cdf(model: IsrModel, x):
    """Lognormal CDF of the ISR; with ``sigma_i == 0`` a right-continuous step."""
    arr = np.asarray(x, dtype=float)
    if np.any(arr <= 0):
        raise InvalidParameterError("ISR CDF is defined for x > 0 only")
    if model.sigma_i == 0:
        out = (np.log(arr) >= model.mu_i).astype(float)
    else:
        out = ndtr((np.log(arr) - model.mu_i) / model.sigma_i)
    return float(out) if np.ndim(out) == 0 else out


def isr_sf(model: IsrModel, x):
    """Survival function ``1 - isr_cdf``, accurate in the upper tail."""
    arr = np.asarray(x, dtype=float)
    if model.sigma_i == 0:
        out = (np.log(arr) < model.mu_i).astype(float)
    else:
        out = ndtr(-(np.log(arr) - model.mu_i) / model.sigma_i)
    return float(out) if np.ndim(out) == 0 else out


def sample_isr_exact(geom: LinkGeometry, seed, size: int | None = None):
    """Draw ISR samples straight from the sum-of-products definition.

    Positions are uniform over the target region (or the fixed target), the
    serving shadow is shared by all interferers of a draw.  Returns a float
    when ``size`` is None, otherwise an array.
    """
    rng = np.random.default_rng(seed)
    n = 1 if size is None else int(size)
    if geom.is_fixed:
        b = np.broadcast_to(geom.path_loss_ratios([geom.target_point]), (n, len(geom.interferer_positions)))
    else:
        b = geom.path_loss_ratios(sample_uniform(geom.target_region, rng, n))
    xi = rng.normal(0.0, geom.shadowing.sigma_serving, size=(n, 1))
    xi_i = rng.normal(0.0, geom.shadowing.sigma_interferer, size=b.shape)
    out = np.sum(b * 10.0 ** ((xi_i - xi) / 10.0), axis=1)
    return float(out[0]) if size is None else out


def fit_link(geom: LinkGeometry, quad: QuadratureRule | None = None) -> IsrModel:
    """Full chain for one link: spatial and shadow moments, then the fit."""
    m1, m2 = isr_moments(spatial_moments(geom, quad), shadow_ratio_moments(geom.shadowing))
    return lognormal_fit(m1, m2)


def link_geometries(
    layout: CellLayout,
    path_loss_exponent: float,
    shadowing: dict[LinkKind, ShadowingSpec],
    n_interferers: int = 6,
    rsms_interferers: str = "same-offset",
    relay_index: int = 0,
) -> dict[LinkKind, LinkGeometry]:
    """Geometries of the three links for the reference cell.

    The RS-MS link is built for relay ``relay_index``; by symmetry of the
    layout all six relays give the same model.  ``rsms_interferers`` selects
    which RS of each neighbour cell interferes: ``"same-offset"`` (the RS at
    the same position within its cell) or ``"nearest"`` (the RS of that cell
    closest to the serving RS).
    """
    if not 1 <= n_interferers <= len(layout.neighbor_bs_positions):
        raise InvalidParameterError("n_interferers must be between 1 and 6")
    nbs = np.asarray(layout.neighbor_bs_positions[:n_interferers])
    rs = layout.rs_positions[relay_index]
    if rsms_interferers == "same-offset":
        nrs = np.asarray([cell[relay_index] for cell in layout.neighbor_rs_positions[:n_interferers]])
    elif rsms_interferers == "nearest":
        rows = []
        for cell in layout.neighbor_rs_positions[:n_interferers]:
            c = np.asarray(cell)
            rows.append(c[np.argmin(np.hypot(*(c - np.asarray(rs)).T))])
        nrs = np.asarray(rows)
    else:
        raise InvalidParameterError(f"unknown rsms_interferers mode {rsms_interferers!r}")
    origin = Point2D(0.0, 0.0)
    return {
        LinkKind.BS_MS: LinkGeometry(
            LinkKind.BS_MS, origin, nbs, path_loss_exponent, shadowing[LinkKind.BS_MS],
            target_region=layout.base_region,
        ),
        LinkKind.BS_RS: LinkGeometry(
            LinkKind.BS_RS, origin, nbs, path_loss_exponent, shadowing[LinkKind.BS_RS],
            target_point=rs,
        ),
        LinkKind.RS_MS: LinkGeometry(
            LinkKind.RS_MS, rs, nrs, path_loss_exponent, shadowing[LinkKind.RS_MS],
            target_region=layout.relay_regions[relay_index],
        ),
    }
