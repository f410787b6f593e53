"""From a scenario config to link models, class distributions and reports."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import stats

from .classes import (
    ClassDistribution,
    HoppedDemand,
    RateSpec,
    class_distribution,
    scheme_for,
)
from .config import ScenarioConfig
from .erlang import AnalysisInputs, BlockingReport, TrafficSpec, analyze
from .geometry import CellLayout, build_layout, make_quadrature
from .interference import (
    IsrModel,
    LinkGeometry,
    LinkKind,
    ShadowingSpec,
    fit_link,
    isr_cdf,
    link_geometries,
    sample_isr_exact,
)


def layout_for(cfg: ScenarioConfig) -> CellLayout:
    return build_layout(cfg.inter_bs_distance, cfg.subcell_circumradius or None, cfg.rotation)


def geometries_for(cfg: ScenarioConfig, layout: CellLayout | None = None) -> dict[LinkKind, LinkGeometry]:
    shadowing = {
        LinkKind.BS_MS: ShadowingSpec(cfg.sigma_bs_ms, cfg.sigma_ibs_ms),
        LinkKind.BS_RS: ShadowingSpec(cfg.sigma_bs_rs, cfg.sigma_ibs_rs),
        LinkKind.RS_MS: ShadowingSpec(cfg.sigma_rs_ms, cfg.sigma_irs_ms),
    }
    return link_geometries(
        layout or layout_for(cfg),
        cfg.path_loss_exponent,
        shadowing,
        n_interferers=cfg.interferers,
        rsms_interferers=cfg.rsms_interferers,
    )


def link_models(cfg: ScenarioConfig) -> dict[LinkKind, IsrModel]:
    """Lognormal ISR model of each link."""
    out = {}
    for kind, geom in geometries_for(cfg).items():
        quad = None if geom.is_fixed else make_quadrature(geom.target_region, cfg.points_per_triangle)
        out[kind] = fit_link(geom, quad)
    return out


_PMF_ATTR = {LinkKind.BS_MS: "bs_ms_pmf", LinkKind.BS_RS: "bs_rs_pmf", LinkKind.RS_MS: "rs_ms_pmf"}


def class_distributions(
    cfg: ScenarioConfig, models: dict[LinkKind, IsrModel] | None = None
) -> dict[LinkKind, ClassDistribution]:
    """Per-link class distributions after the tail policy.

    Explicit pmfs in the config replace the ISR-derived distribution of that
    link; hopped pairs, when given, fix the BS-RS and RS-MS marginals.
    """
    rate = RateSpec(cfg.rate, cfg.subcarrier_bandwidth)
    pairs = hopped_pairs(cfg)
    override = {k: dict(getattr(cfg, a)) for k, a in _PMF_ATTR.items() if getattr(cfg, a)}
    if pairs is not None:
        override.setdefault(LinkKind.BS_RS, pairs.marginal_bs_rs())
        override.setdefault(LinkKind.RS_MS, pairs.marginal_rs_ms())
    out = {}
    for kind in LinkKind:
        if kind in override:
            out[kind] = ClassDistribution.from_pmf(override[kind], link=kind)
            continue
        if models is None:
            models = link_models(cfg)
        model = models[kind]
        scheme = scheme_for(model, rate, cfg.class_epsilon, cfg.max_classes or None)
        out[kind] = class_distribution(model, rate, scheme, link=kind).with_policy(cfg.tail_policy)
    return out


def hopped_pairs(cfg: ScenarioConfig) -> HoppedDemand | None:
    if not cfg.hopped_pairs:
        return None
    pairs: dict[tuple[int, int], float] = {}
    for a, b, p in cfg.hopped_pairs:
        pairs[(a, b)] = pairs.get((a, b), 0.0) + p
    return HoppedDemand(pairs)


def traffic_for(cfg: ScenarioConfig, lam: float) -> TrafficSpec:
    return TrafficSpec(
        lam=lam,
        mu=cfg.mu,
        direct_fraction=cfg.direct_fraction,
        per_rs_split=cfg.per_rs_split,
        relay_count=cfg.relay_count,
    )


def analysis_inputs(
    cfg: ScenarioConfig, lam: float, dists: dict[LinkKind, ClassDistribution] | None = None
) -> AnalysisInputs:
    dists = dists or class_distributions(cfg)
    return AnalysisInputs(
        traffic=traffic_for(cfg, lam),
        K_BS=cfg.k_bs,
        K_RS=cfg.k_rs,
        p_bsms=dists[LinkKind.BS_MS],
        p_bsrs=dists[LinkKind.BS_RS],
        p_rsms=dists[LinkKind.RS_MS],
        joint=hopped_pairs(cfg),
        discount_mode=cfg.discount_mode,
    )


@dataclass
class SweepResult:
    config: ScenarioConfig
    distributions: dict[LinkKind, ClassDistribution]
    reports: list[BlockingReport]

    @property
    def lambdas(self) -> tuple[float, ...]:
        return self.config.lambdas


def sweep(cfg: ScenarioConfig) -> SweepResult:
    """Analytical blocking at every arrival rate of the config."""
    dists = class_distributions(cfg)
    tag = cfg.digest()
    reports = [analyze(analysis_inputs(cfg, lam, dists), scenario=tag) for lam in cfg.lambdas]
    return SweepResult(cfg, dists, reports)


@dataclass(frozen=True)
class InterferenceFit:
    link: LinkKind
    model: IsrModel
    ks_distance: float  # sup |F_lognormal - F_empirical| over exact samples


def fit_interference(cfg: ScenarioConfig, samples: int | None = None, seed: int | None = None) -> list[InterferenceFit]:
    """Fit each link and measure the KS distance to exact-definition samples."""
    n = samples or cfg.exact_samples
    base = cfg.validation_seed if seed is None else seed
    models = link_models(cfg)
    out = []
    for k, (kind, geom) in enumerate(geometries_for(cfg).items()):
        model = models[kind]
        x = sample_isr_exact(geom, np.random.SeedSequence([base, k]), n)
        ks = stats.kstest(x, lambda t, m=model: isr_cdf(m, t)).statistic
        out.append(InterferenceFit(kind, model, float(ks)))
    return out
