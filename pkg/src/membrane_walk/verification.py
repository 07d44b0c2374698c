"""Monte Carlo checks of the scaling limit against the exact pipeline values.

Every check compares an ensemble statistic with its limit value. Mean-type
checks pass when the estimate lies within three standard errors estimated
from the same ensemble; distribution checks use the one-sample
Kolmogorov-Smirnov test at the 1% level with the asymptotic Kolmogorov law.

Endpoints of lattice walks are integers, so before a KS test each endpoint
``k`` is replaced by ``k + U`` with ``U`` uniform on ``(-1/2, 1/2)`` drawn from
a dedicated stream of the run seed. The smoothing shifts the variance by
``1/12`` lattice units and removes the staircase of the empirical CDF.
"""
from __future__ import annotations

import math
import re
from dataclasses import asdict, dataclass, field

import numpy as np
from scipy import stats

from .chain import fig1a_closed_forms
from .errors import NoVisits, PipelineMissing, TooFewSamples
from .excursion import sample_excursions
from .reference import (SQRT_2_OVER_PI, cauchy_cdf, half_normal_cdf, skew_marginal_cdf,
                        stable_scale)
from .walk import by_class, compile_model, run_ensemble, visit_frequencies
from .membrane import transparent

Z_CI = 3.0
KS_LEVEL = 0.01
MIN_SHAPE_STEPS = 10_000
MIN_KS_SAMPLES = 10
DRIFT_CONTROL = 0.05
_JITTER_TAG = 0x6A6974746572  # keeps the smoothing stream apart from path streams


def ks_statistic(samples, cdf) -> tuple:
    """One-sample KS distance ``D`` and its asymptotic p-value."""
    x = np.sort(np.asarray(samples, dtype=float).ravel())
    n = x.size
    if n < MIN_KS_SAMPLES:
        raise TooFewSamples(f"KS test needs at least {MIN_KS_SAMPLES} samples, got {n}")
    F = np.asarray(cdf(x), dtype=float)
    i = np.arange(1, n + 1)
    D = float(max(np.max(i / n - F), np.max(F - (i - 1) / n)))
    return D, float(stats.kstwobign.sf(math.sqrt(n) * D))


def ks_critical(n: int, level: float = KS_LEVEL) -> float:
    return float(stats.kstwobign.isf(level) / math.sqrt(n))


def smoothing_rng(seed: int) -> np.random.Generator:
    return np.random.Generator(np.random.Philox(np.random.SeedSequence([int(seed), _JITTER_TAG])))


@dataclass
class Check:
    name: str
    statistic: float
    threshold: float
    passed: bool
    kind: str
    n_samples: int
    detail: dict = field(default_factory=dict)
    diagnostic: bool = False

    def row(self) -> str:
        flag = "PASS" if self.passed else "FAIL"
        if self.diagnostic:
            flag = "info"
        return f"{self.name:<28} {self.statistic:>12.5g} {self.threshold:>10.4g}  {flag}"


def ci_check(name, estimate, expected, stderr, n, **detail) -> Check:
    """|estimate - expected| <= 3 stderr, reported as a z-score."""
    diff = float(estimate - expected)
    if stderr > 0:
        z = abs(diff) / stderr
    else:
        z = 0.0 if diff == 0 else math.inf
    return Check(name=name, statistic=z, threshold=Z_CI, passed=bool(z <= Z_CI), kind="ci",
                 n_samples=int(n),
                 detail={"estimate": float(estimate), "expected": float(expected),
                         "stderr": float(stderr), **detail})


def ks_check(name, samples, cdf, **detail) -> Check:
    D, p = ks_statistic(samples, cdf)
    n = int(np.size(samples))
    crit = ks_critical(n)
    return Check(name=name, statistic=D, threshold=crit, passed=bool(D <= crit), kind="ks",
                 n_samples=n, detail={"p_value": p, "level": KS_LEVEL, **detail})


@dataclass
class VerificationReport:
    suite: str
    checks: list
    config: dict
    pipeline: dict = field(default_factory=dict)
    skipped: list = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.checks if not c.diagnostic)

    def check(self, name: str) -> Check:
        for c in self.checks:
            if c.name == name:
                return c
        raise KeyError(name)

    def failures(self) -> list:
        return [c for c in self.checks if not c.passed and not c.diagnostic]

    def to_dict(self) -> dict:
        return {"suite": self.suite, "passed": self.passed, "config": self.config,
                "pipeline": self.pipeline, "skipped": self.skipped,
                "checks": [asdict(c) for c in self.checks]}

    def table(self) -> str:
        head = f"{'check':<28} {'statistic':>12} {'threshold':>10}  result"
        lines = [f"[{self.suite}] {self.config.get('model', '')}", head]
        lines += [c.row() for c in self.checks]
        lines += [f"{s:<28} {'':>12} {'':>10}  skipped" for s in self.skipped]
        return "\n".join(lines)


def combine(reports, suite: str = "all") -> VerificationReport:
    reports = list(reports)
    checks, skipped, pipeline = [], [], {}
    for r in reports:
        checks += [Check(**{**asdict(c), "name": f"{r.suite}.{c.name}"}) for c in r.checks]
        skipped += [f"{r.suite}.{s}" for s in r.skipped]
        pipeline.update(r.pipeline)
    config = dict(reports[0].config) if reports else {}
    config["suites"] = [r.suite for r in reports]
    return VerificationReport(suite=suite, checks=checks, config=config, pipeline=pipeline,
                              skipped=skipped)


def _pipeline(cm) -> dict:
    if cm.membrane is None:
        raise PipelineMissing(f"model {cm.name!r} has no periodic embedded chain")
    ch = cm.chain
    out = {"gamma": ch.gamma, "c": ch.slide.tolist(), "pi": ch.pi.tolist(),
           "ray_weights": ch.ray_weights.tolist()}
    hit = re.fullmatch(r"fig1a\((.+)\)", cm.name)
    if hit:
        out["closed_form_c"] = fig1a_closed_forms(float(hit.group(1)))["c"].tolist()
    return out


def _ensemble(cm, n, paths, seed, ensemble, workers, drift=0.0):
    if ensemble is not None:
        if ensemble.steps != n or ensemble.paths != paths or ensemble.config["seed"] != seed:
            raise ValueError("supplied ensemble does not match (n, paths, seed)")
        return ensemble
    return run_ensemble(cm, n, paths, seed, workers=workers, drift=drift)


def _config(cm, n, paths, seed, **extra) -> dict:
    return {"model": cm.name, "m": cm.m, "periods": [int(k) for k in cm.periods],
            "n": int(n), "paths": int(paths), "seed": int(seed), **extra}


def sign_check(x, target: float, name: str = "sign") -> Check:
    """Share of positive endpoints among nonzero endpoints, binomial CI."""
    nz = int(np.count_nonzero(x))
    if nz == 0:
        raise TooFewSamples("all endpoints sit on the membrane")
    p_hat = float(np.count_nonzero(x > 0)) / nz
    se = math.sqrt(max(target * (1 - target), 0.0) / nz)
    return ci_check(name, p_hat, target, se, nz, on_membrane=int(x.size - nz))


def smoothed(values: np.ndarray, rng: np.random.Generator) -> np.ndarray:
    return np.asarray(values, dtype=float) + rng.random(np.shape(values)) - 0.5


def verify_invariance(model, n: int, paths: int, seed: int, *, ensemble=None, workers=1,
                      min_shape_steps: int = MIN_SHAPE_STEPS) -> VerificationReport:
    """Endpoint law of ``X([n]) / sqrt(n)`` against skew Brownian motion at time 1/m."""
    cm = compile_model(model)
    pipe = _pipeline(cm)
    gamma = pipe["gamma"]
    ens = _ensemble(cm, n, paths, seed, ensemble, workers)
    checks = [sign_check(ens.x, (1 + gamma) / 2)]
    skipped = []
    if n >= min_shape_steps:
        rng = smoothing_rng(seed)
        scale = math.sqrt(cm.m / n)
        checks.append(ks_check("shape_ks", smoothed(ens.x, rng) * scale,
                               lambda v: skew_marginal_cdf(gamma, 1.0, v), gamma=gamma))
        checks.append(ks_check("radial_ks", np.abs(smoothed(ens.x, rng)) * scale, half_normal_cdf))
    else:
        skipped += ["shape_ks", "radial_ks"]
    return VerificationReport("invariance", checks, _config(cm, n, paths, seed), pipe, skipped)


def verify_slide(model, n: int, paths: int, seed: int, *, ensemble=None, workers=1,
                 min_shape_steps: int = MIN_SHAPE_STEPS) -> VerificationReport:
    """Tangential drift from membrane slides: ``Y = c L + W_Y``."""
    cm = compile_model(model)
    pipe = _pipeline(cm)
    c = np.asarray(pipe["c"])
    ens = _ensemble(cm, n, paths, seed, ensemble, workers)
    rt = math.sqrt(n)
    P = ens.paths
    disp = (ens.y - ens.y0) / rt
    L = ens.L_total / rt
    D = ens.DY / rt
    resid = ens.MY / rt  # = displacement - D
    checks, skipped = [], []
    limit_mean = c * SQRT_2_OVER_PI / math.sqrt(cm.m)
    for l in range(cm.m - 1):
        checks.append(ci_check(f"mean_y[{l}]", disp[:, l].mean(), limit_mean[l],
                               disp[:, l].std(ddof=1) / math.sqrt(P), P, c=float(c[l])))
        r = D[:, l] - c[l] * L
        checks.append(ci_check(f"decomposition[{l}]", D[:, l].mean(), c[l] * L.mean(),
                               r.std(ddof=1) / math.sqrt(P), P,
                               mean_local_time=float(L.mean())))
        sgn = np.sign(ens.x).astype(float)
        if sgn.std() > 0 and resid[:, l].std() > 0:
            rho = float(np.corrcoef(sgn, resid[:, l])[0, 1])
        else:
            rho = 0.0
        checks.append(ci_check(f"independence[{l}]", rho, 0.0, 1.0 / math.sqrt(P), P))
    if n >= min_shape_steps:
        rng = smoothing_rng(seed + 1)
        for l in range(cm.m - 1):
            checks.append(ks_check(f"residual_ks[{l}]", smoothed(ens.MY[:, l], rng) * math.sqrt(cm.m / n),
                                   stats.norm.cdf))
    else:
        skipped += [f"residual_ks[{l}]" for l in range(cm.m - 1)]
    return VerificationReport("slide", checks, _config(cm, n, paths, seed), pipe, skipped)


def _ratio_stderr(counts: np.ndarray, totals: np.ndarray, f: np.ndarray) -> np.ndarray:
    """Delta-method standard error of ``sum(counts) / sum(totals)`` over independent paths."""
    T = totals.sum()
    dev = counts - f[None, :] * totals[:, None]
    return np.sqrt((dev * dev).sum(axis=0)) / T


def verify_visit_stationarity(model, visits: int, seed: int, *, n: int = 10_000, workers=1,
                              tolerance: float | None = None) -> VerificationReport:
    """Arrival frequencies over many paths against the stationary law ``pi``.

    Paths of ``n`` steps start from ``pi`` and are added until ``visits``
    arrivals have been recorded. A second check compares the type of the
    running excursion at time ``n`` with the stationary excursion weights.
    """
    cm = compile_model(model)
    pipe = _pipeline(cm)
    pi = np.asarray(pipe["pi"])
    ray = np.asarray(pipe["ray_weights"]).ravel()
    per_path = math.sqrt(2 * n / (math.pi * cm.m)) + 1
    paths = max(1, math.ceil(visits / per_path))
    ens = run_ensemble(cm, n, paths, seed, workers=workers)
    while ens.visit_counts.sum() < visits:
        extra = max(1, math.ceil((visits - ens.visit_counts.sum()) / per_path))
        ens = ens.merge(run_ensemble(cm, n, extra, seed, workers=workers, path_offset=ens.paths))
    counts = ens.visit_counts.astype(float)
    totals = counts.sum(axis=1)
    if totals.sum() == 0:
        raise NoVisits("no membrane visits recorded")
    f = visit_frequencies(ens).ravel()
    se = _ratio_stderr(counts, totals, f)
    z = np.where(se > 0, np.abs(f - pi) / np.where(se > 0, se, 1), np.where(f == pi, 0.0, np.inf))
    linf = float(np.abs(f - pi).max())
    total = int(totals.sum())
    detail = {"empirical": f.tolist(), "pi": pi.tolist(), "stderr": se.tolist(), "linf": linf,
              "visits": total, "paths_used": ens.paths}
    checks = [Check("frequencies", float(z.max()), Z_CI, bool(z.max() <= Z_CI), "ci", total, detail)]
    if tolerance is not None:
        checks.append(Check("linf", linf, float(tolerance), bool(linf <= tolerance), "abs", total,
                            {"pi": pi.tolist()}))
    off = ens.current_type >= 0
    if off.any():
        types = np.zeros((int(off.sum()), cm.n_types))
        types[np.arange(types.shape[0]), ens.current_type[off]] = 1.0
        share = by_class(types).reshape(types.shape[0], -1).mean(axis=0)
        k = types.shape[0]
        se_r = np.sqrt(ray * (1 - ray) / k)
        zr = np.where(se_r > 0, np.abs(share - ray) / np.where(se_r > 0, se_r, 1),
                      np.where(np.isclose(share, ray), 0.0, np.inf))
        checks.append(Check("excursion_rays", float(zr.max()), Z_CI, bool(zr.max() <= Z_CI), "ci", k,
                            {"empirical": share.tolist(), "expected": ray.tolist(),
                             "stderr": se_r.tolist(), "time": n}))
    config = _config(cm, n, ens.paths, seed, visits=int(visits))
    return VerificationReport("stationarity", checks, config, pipe)


def verify_one_sided(env, n: int, paths: int, seed: int, *, ensemble=None, workers=1,
                     min_shape_steps: int = MIN_SHAPE_STEPS) -> VerificationReport:
    """Ergodic one-sided membrane: ``gamma = 2 p_bar - 1`` and no tangential drift."""
    cm = compile_model(env)
    p_bar = float(getattr(env, "mean"))
    gamma = 2 * p_bar - 1
    ens = _ensemble(cm, n, paths, seed, ensemble, workers)
    P = ens.paths
    chk = sign_check(ens.x, p_bar)
    chk.detail["gamma_hat"] = 2 * chk.detail["estimate"] - 1
    chk.detail["gamma"] = gamma
    checks = [chk]
    disp = (ens.y - ens.y0) / math.sqrt(n)
    for l in range(cm.m - 1):
        checks.append(ci_check(f"mean_y[{l}]", disp[:, l].mean(), 0.0,
                               disp[:, l].std(ddof=1) / math.sqrt(P), P))
    skipped = []
    if n >= min_shape_steps:
        rng = smoothing_rng(seed)
        checks.append(ks_check("shape_ks", smoothed(ens.x, rng) * math.sqrt(cm.m / n),
                               lambda v: skew_marginal_cdf(gamma, 1.0, v), gamma=gamma))
    else:
        skipped.append("shape_ks")
    pipe = {"gamma": gamma, "c": [0.0] * (cm.m - 1), "p_bar": p_bar}
    return VerificationReport("one_sided", checks, _config(cm, n, paths, seed), pipe, skipped)


def hitting_sums(m: int, n_visits: int, reps: int, seed: int) -> np.ndarray:
    """``Y(tau_n) / n`` for ``reps`` independent walks started on the membrane."""
    rng = np.random.Generator(np.random.Philox(np.random.SeedSequence(int(seed))))
    out = np.empty((reps, m - 1))
    rows = max(1, (1 << 21) // n_visits)
    for a in range(0, reps, rows):
        b = min(a + rows, reps)
        _, dy = sample_excursions(m, (b - a) * n_visits, rng)
        out[a:b] = dy.reshape(b - a, n_visits, m - 1).sum(axis=1) / n_visits
    return out


def verify_stable_hitting(m: int, n_visits: int, reps: int, seed: int, *,
                          scale: float | None = None) -> VerificationReport:
    """Tangential position after ``n`` membrane visits, scaled by ``1/n``, against a Cauchy law.

    The tested scale defaults to ``1 / sqrt(m)``. A diagnostic KS test
    against unit scale is reported alongside without affecting the verdict.
    For ``m > 2`` the first coordinate is tested (projections of an
    isotropic Cauchy law are Cauchy with the same scale).
    """
    s = stable_scale(m) if scale is None else float(scale)
    v = hitting_sums(m, n_visits, reps, seed)[:, 0]
    checks = [ks_check("cauchy_ks", v, lambda x: cauchy_cdf(x, s), scale=s)]
    q1, q3 = np.quantile(v, [0.25, 0.75])
    checks.append(ci_check("iqr", q3 - q1, 2 * s, math.pi * s / math.sqrt(reps), reps, scale=s))
    pos = float(np.mean(v > 0)) + 0.5 * float(np.mean(v == 0))
    checks.append(ci_check("sign_symmetry", pos, 0.5, 0.5 / math.sqrt(reps), reps))
    unit = ks_check("unit_scale_ks", v, lambda x: cauchy_cdf(x, 1.0), scale=1.0)
    unit.diagnostic = True
    checks.append(unit)
    config = {"model": "free walk", "m": int(m), "n_visits": int(n_visits), "reps": int(reps),
              "seed": int(seed)}
    return VerificationReport("stable", checks, config, {"scale": s})


def verify_martingales(model, n: int, paths: int, seed: int, *, ensemble=None, workers=1,
                       drift: float = 0.0) -> VerificationReport:
    """Per excursion type: ``E M = 0`` and ``E M^2 = E occupation / m``.

    ``drift`` biases the free normal steps (debug hook for a negative control).
    """
    cm = compile_model(model)
    ens = _ensemble(cm, n, paths, seed, ensemble if drift == 0.0 else None, workers, drift=drift)
    P = ens.paths
    M = ens.M_type.astype(float)
    occ = ens.occupation.astype(float)
    checks = []
    for t in range(cm.n_types):
        side, rest = divmod(t, 2 * cm.n_cls)
        cls, sign = divmod(rest, 2)
        label = f"{'LR'[side]},{cls},{'-+'[sign]}"
        mt = M[:, t]
        checks.append(ci_check(f"mean[{label}]", mt.mean(), 0.0, mt.std(ddof=1) / math.sqrt(P), P))
        r = mt * mt - occ[:, t] / cm.m
        checks.append(ci_check(f"bracket[{label}]", (mt * mt).mean(), occ[:, t].mean() / cm.m,
                               r.std(ddof=1) / math.sqrt(P), P))
    return VerificationReport("martingale", checks, _config(cm, n, paths, seed, drift=float(drift)))


CALIBRATION_SUITES = ("invariance", "slide", "martingale")


def calibrate(model=None, n: int = 10_000, paths: int = 2000, seeds=range(1, 201), *,
              workers=1, max_rate: float = 0.02) -> VerificationReport:
    """Rejection frequency of every check on a null model over independent seeds.

    Each check passes when it rejects in at most ``max_rate`` of the
    repetitions (nominal 1% allowed to fluctuate by 1%).
    """
    model = transparent() if model is None else model
    cm = compile_model(model)
    seeds = list(seeds)
    rejections: dict = {}
    for s in seeds:
        ens = run_ensemble(cm, n, paths, s, workers=workers)
        reps = [verify_invariance(cm, n, paths, s, ensemble=ens),
                verify_slide(cm, n, paths, s, ensemble=ens),
                verify_martingales(cm, n, paths, s, ensemble=ens)]
        for c in combine(reps).checks:
            rejections.setdefault(c.name, []).append(not c.passed)
    R = len(seeds)
    checks = []
    for name, rej in rejections.items():
        rate = sum(rej) / R
        checks.append(Check(name, rate, max_rate, bool(rate <= max_rate), "rate", R,
                            {"rejections": int(sum(rej)), "rejecting_seeds":
                             [s for s, r in zip(seeds, rej) if r]}))
    config = _config(cm, n, paths, seeds[0], seeds=[seeds[0], seeds[-1]], repetitions=R)
    return VerificationReport("calibration", checks, config, _pipeline(cm))
