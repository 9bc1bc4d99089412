"""Experiment scoring and orchestration.

* :func:`mu_score` -- mean Frobenius difference between a reference pair of
  similarity matrices and a pair recovered from a permuted input.
* :func:`permutation_recovery`, :func:`noise_sweep` -- the permutation
  recovery experiment, with and without noise.
* :func:`precision_at_rank`, :func:`null_model_curve` -- ranking evaluation
  against class labels.
* :func:`scaling_benchmark` -- iterations and time per iteration against n.

All randomness is derived from integer seeds through
``numpy.random.SeedSequence`` so every table is reproducible.
"""
from __future__ import annotations

import math
import time
from dataclasses import dataclass, field

import numpy as np

from .baselines import METRICS, Mode
from .engine import RunConfig, SimilarityPair, initialize_similarity, reflexive_similarity
from .matrix import (
    NormKind,
    apply_permutation,
    frobenius_norm,
    invert_permutation,
    permute_symmetric,
)
from .synthgen import (
    BlockSpec,
    add_gaussian_noise,
    diagonal_spec,
    generate_blocks,
    permute_randomly,
)

BASELINES = tuple(METRICS)
DEFAULT_SIGMA_GRID = (0.1, 0.2, 0.4, 0.6, 0.8, 1.0)
DEFAULT_ALPHA_GRID = (0.0, 0.5, 1.0)
ALL_NORMS = (NormKind.L1, NormKind.L2, NormKind.LINF)
# Bernoulli fill rate inside blocks for the synthetic experiments
DEFAULT_FILL_DENSITY = 0.5


def derive_seed(*keys: int) -> int:
    """A 32-bit seed determined by the integer ``keys``."""
    return int(np.random.SeedSequence([int(k) for k in keys]).generate_state(1)[0])


def mean_and_spread(values) -> tuple[float, float]:
    """Mean and two standard errors of the mean."""
    v = np.asarray(values, dtype=float)
    if v.size == 0:
        return math.nan, math.nan
    if v.size == 1:
        return float(v[0]), 0.0
    return float(v.mean()), float(2.0 * v.std(ddof=1) / math.sqrt(v.size))


@dataclass
class EvalCurve:
    name: str
    axis: str
    x: np.ndarray
    y: np.ndarray
    spread: np.ndarray = None
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        self.x = np.asarray(self.x, dtype=float)
        self.y = np.asarray(self.y, dtype=float)
        self.spread = np.zeros_like(self.y) if self.spread is None else np.asarray(self.spread, dtype=float)
        if not (self.x.shape == self.y.shape == self.spread.shape) or self.x.ndim != 1:
            raise ValueError("x, y and spread must be 1-D arrays of equal length")
        if np.any(np.diff(self.x) <= 0):
            raise ValueError("x must be strictly increasing")
        if np.any(self.spread < 0):
            raise ValueError("spread must be nonnegative")

    def at(self, x: float) -> float:
        idx = np.flatnonzero(self.x == x)
        if idx.size == 0:
            raise KeyError(x)
        return float(self.y[idx[0]])

    def to_dict(self) -> dict:
        return {
            "name": self.name,
            "axis": self.axis,
            "x": self.x.tolist(),
            "y": self.y.tolist(),
            "spread": self.spread.tolist(),
            "meta": self.meta,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "EvalCurve":
        return cls(d["name"], d["axis"], d["x"], d["y"], d["spread"], dict(d.get("meta", {})))


# --- scoring ------------------------------------------------------------------

def mu_score(S, S_hat, S_prime, S_prime_hat, size: str = "entries") -> float:
    """``0.5 ||S - S_hat||_F / |S| + 0.5 ||S' - S'_hat||_F / |S'|``.

    ``size="entries"`` divides by the number of entries (n^2), ``"dim"`` by the
    dimension n. The estimates must already be in the reference ordering.
    """
    S, S_hat = np.asarray(S, dtype=float), np.asarray(S_hat, dtype=float)
    P, P_hat = np.asarray(S_prime, dtype=float), np.asarray(S_prime_hat, dtype=float)
    if S.shape != S_hat.shape or P.shape != P_hat.shape:
        raise ValueError(f"shape mismatch: {S.shape} vs {S_hat.shape}, {P.shape} vs {P_hat.shape}")
    if size == "entries":
        s1, s2 = S.size, P.size
    elif size == "dim":
        s1, s2 = S.shape[0], P.shape[0]
    else:
        raise ValueError(f"size must be 'entries' or 'dim', got {size!r}")
    return 0.5 * frobenius_norm(S - S_hat) / s1 + 0.5 * frobenius_norm(P - P_hat) / s2


def method_name(method: str, cfg: RunConfig) -> str:
    if method == "reflexive":
        return f"reflexive-{cfg.norm_kind.value}-a{cfg.alpha:g}"
    return method


def compute_similarity(method: str, A, cfg: RunConfig, init=None) -> SimilarityPair:
    """Row and column similarity of ``A`` by the reflexive method or a baseline."""
    if method == "reflexive":
        return reflexive_similarity(A, cfg, init=init)
    if method not in METRICS:
        raise ValueError(f"unknown method {method!r}")
    fn = METRICS[method]
    return SimilarityPair(fn(A, Mode.ROWS), fn(A, Mode.COLS), trace=None)


def tail_delta(trace, k: int = 3) -> float:
    """Largest of the last ``k`` changes in ``||S||_F`` and ``||S'||_F``.

    ``nan`` for a missing trace or a single-iteration run.
    """
    if trace is None or trace.iterations_used < 2:
        return float("nan")
    ds, dp = trace.norm_deltas()
    return float(max(ds[-k:].max(), dp[-k:].max()))


@dataclass
class RecoveryOutcome:
    mu: float
    reference: SimilarityPair
    estimate: SimilarityPair
    row_perm: np.ndarray
    col_perm: np.ndarray

    @property
    def converged(self) -> bool:
        runs = [r.trace for r in (self.reference, self.estimate) if r.trace is not None]
        return all(t.converged for t in runs)

    @property
    def iterations(self) -> int:
        return self.estimate.trace.iterations_used if self.estimate.trace is not None else 0

    @property
    def tail_delta(self) -> float:
        vals = [tail_delta(self.reference.trace), tail_delta(self.estimate.trace)]
        vals = [v for v in vals if not math.isnan(v)]
        return max(vals) if vals else float("nan")


def recovery_run(A, cfg: RunConfig, seed: int, *, method: str = "reflexive", noisy=None,
                 init: str = "independent", perm=None, reference: SimilarityPair | None = None,
                 mu_size: str = "entries") -> RecoveryOutcome:
    """Reference on ``A``; estimate on a permuted copy of ``noisy`` (or ``A``).

    The reference uses ``cfg.seed`` for its initial ``S``. ``seed`` drives the
    permutation and the estimate's initialization. ``init="consistent"``
    starts the estimate from the reference start permuted like the rows;
    ``"same"`` reuses ``cfg.seed`` unpermuted. ``perm`` overrides the random
    ``(row_perm, col_perm)``.
    """
    if reference is None:
        reference = compute_similarity(method, A, cfg)
    source = A if noisy is None else noisy
    if perm is None:
        source_hat, gt = permute_randomly(source, seed=derive_seed(seed, 1))
        p, q = gt.row_perm, gt.col_perm
    else:
        p, q = (np.asarray(x, dtype=np.intp) for x in perm)
        source_hat = apply_permutation(source, p, q)

    est_init = None
    if method == "reflexive":
        n = A.shape[0]
        if init == "independent":
            est_init = initialize_similarity(n, derive_seed(seed, 2))
        elif init == "consistent":
            est_init = permute_symmetric(initialize_similarity(n, cfg.seed), p)
        elif init == "same":
            est_init = initialize_similarity(n, cfg.seed)
        else:
            raise ValueError(f"unknown init policy {init!r}")
    estimate = compute_similarity(method, source_hat, cfg, init=est_init)

    ip, iq = invert_permutation(p), invert_permutation(q)
    S_back = permute_symmetric(estimate.S, ip)
    P_back = permute_symmetric(estimate.S_prime, iq)
    mu = mu_score(reference.S, S_back, reference.S_prime, P_back, size=mu_size)
    return RecoveryOutcome(mu, reference, estimate, p, q)


def permutation_recovery(A, gt=None, cfg: RunConfig | None = None, seed: int = 0, **kw) -> float:
    """μ between the similarity of ``A`` and that of a random permutation of it.

    ``gt`` is accepted for symmetry with the generators and is not needed for
    scoring. Keyword arguments go to :func:`recovery_run`.
    """
    return recovery_run(A, cfg or RunConfig(), seed, **kw).mu


# --- sweeps -------------------------------------------------------------------

@dataclass
class SweepResult:
    curves: dict
    records: list
    meta: dict = field(default_factory=dict)

    def curve(self, name: str) -> EvalCurve:
        return self.curves[name]

    def mean_mu(self, name: str, sigma: float) -> float:
        return self.curves[name].at(sigma)

    def mus(self, name: str, sigma: float) -> np.ndarray:
        """Per-repetition μ values, ordered by repetition."""
        rows = [r for r in self.records if r["method"] == name and r["sigma"] == sigma]
        rows.sort(key=lambda r: r["rep"])
        return np.array([r["mu"] for r in rows])


def noise_sweep(spec: BlockSpec, sigma_grid=DEFAULT_SIGMA_GRID, alpha_grid=DEFAULT_ALPHA_GRID,
                norm_kinds=ALL_NORMS, repetitions: int = 10, seed: int = 0,
                cfg: RunConfig | None = None, baselines=BASELINES, init: str = "independent",
                clamp: bool = True, mu_size: str = "entries") -> SweepResult:
    """Permutation recovery of the clean similarity from noisy, permuted copies.

    For each repetition one base matrix is drawn from ``spec`` and its
    reference similarities are computed once. Each sigma adds fresh noise,
    shuffles and scores every method against those references, so methods
    are paired within a repetition. Emits one μ-vs-sigma curve per method.
    """
    cfg = cfg or RunConfig(diagonal_rescale=False)
    sigma_grid = [float(s) for s in sigma_grid]
    alpha_grid = [float(a) for a in alpha_grid]
    norm_kinds = [NormKind.parse(k) for k in norm_kinds]
    if not sigma_grid or (not alpha_grid and not baselines):
        raise ValueError("grids must be nonempty")
    n, m = spec.shape

    configs = [cfg.replace(alpha=a, norm_kind=k) for k in norm_kinds for a in alpha_grid]
    methods = [("reflexive", c) for c in configs] + [(b, cfg) for b in baselines]

    records = []
    for rep in range(repetitions):
        A, _ = generate_blocks(spec, n, m, seed=derive_seed(seed, rep, 0))
        rep_cfg_seed = derive_seed(seed, rep, 1)
        references = {}
        for si, sigma in enumerate(sigma_grid):
            noisy = None
            if sigma > 0:
                noisy = add_gaussian_noise(A, sigma, seed=derive_seed(seed, rep, 2, si), clamp=clamp)
            for method, mcfg in methods:
                mcfg = mcfg.replace(seed=rep_cfg_seed)
                name = method_name(method, mcfg)
                t0 = time.perf_counter()
                out = recovery_run(A, mcfg, derive_seed(seed, rep, 3), method=method, noisy=noisy,
                                   init=init, reference=references.get(name), mu_size=mu_size)
                references[name] = out.reference
                records.append({
                    "method": name,
                    "norm": mcfg.norm_kind.value if method == "reflexive" else None,
                    "alpha": mcfg.alpha if method == "reflexive" else None,
                    "sigma": sigma,
                    "rep": rep,
                    "mu": out.mu,
                    "iterations": out.iterations,
                    "reference_iterations": (out.reference.trace.iterations_used
                                             if out.reference.trace is not None else 0),
                    "converged": out.converged,
                    "tail_delta": out.tail_delta if method == "reflexive" else None,
                    "seconds": time.perf_counter() - t0,
                })

    curves = {}
    names = list(dict.fromkeys(r["method"] for r in records))
    order = np.argsort(sigma_grid, kind="stable")
    for name in names:
        ys, spreads = [], []
        for sigma in np.asarray(sigma_grid)[order]:
            vals = [r["mu"] for r in sorted(records, key=lambda r: r["rep"])
                    if r["method"] == name and r["sigma"] == sigma]
            mu, sp2 = mean_and_spread(vals)
            ys.append(mu)
            spreads.append(sp2)
        curves[name] = EvalCurve(name, "sigma", np.asarray(sigma_grid)[order], ys, spreads)
    meta = {
        "spec": spec.to_dict(),
        "sigma_grid": sigma_grid,
        "alpha_grid": alpha_grid,
        "norm_kinds": [k.value for k in norm_kinds],
        "repetitions": repetitions,
        "seed": seed,
        "init": init,
        "clamp": clamp,
        "mu_size": mu_size,
        "config": cfg.to_dict(),
    }
    return SweepResult(curves, records, meta)


# --- ranking ------------------------------------------------------------------

@dataclass
class RankedPairList:
    i: np.ndarray
    j: np.ndarray
    similarity: np.ndarray

    def __len__(self) -> int:
        return self.i.size


def ranked_pairs(S, include_self: bool = True) -> RankedPairList:
    """Unordered pairs ``i <= j`` by descending similarity, ties by ``(i, j)``."""
    S = np.asarray(S, dtype=float)
    if S.ndim != 2 or S.shape[0] != S.shape[1]:
        raise ValueError("similarity matrix must be square")
    i, j = np.triu_indices(S.shape[0], k=0 if include_self else 1)
    sim = S[i, j]
    order = np.lexsort((j, i, -sim))
    return RankedPairList(i[order], j[order], sim[order])


def precision_at_rank(S, labels, max_rank: int | None = None, include_self: bool = True,
                      name: str = "precision") -> EvalCurve:
    """Fraction of the top-r pairs whose endpoints share a class, for r = 1, 2, ...

    The curve stops before the first pair with similarity <= 0.
    """
    labels = np.asarray(labels)
    if labels.size == 0:
        raise ValueError("labels are empty")
    S = np.asarray(S, dtype=float)
    if labels.size != S.shape[0]:
        raise ValueError(f"{labels.size} labels for a {S.shape[0]}-dimensional similarity")
    pairs = ranked_pairs(S, include_self=include_self)
    positive = np.flatnonzero(pairs.similarity <= 0)
    stop = positive[0] if positive.size else len(pairs)
    if max_rank is not None:
        stop = min(stop, int(max_rank))
    hits = labels[pairs.i[:stop]] == labels[pairs.j[:stop]]
    ranks = np.arange(1, stop + 1)
    y = np.cumsum(hits) / ranks
    return EvalCurve(name, "rank", ranks, y, meta={
        "include_self": include_self, "pairs_total": len(pairs), "terminated_at": int(stop)})


def same_class_fraction(labels, include_self: bool = False) -> float:
    """Fraction of unordered pairs (by enumeration) that share a class."""
    labels = np.asarray(labels)
    i, j = np.triu_indices(labels.size, k=0 if include_self else 1)
    if i.size == 0:
        return math.nan
    return float(np.mean(labels[i] == labels[j]))


def null_model_curve(labels, n_classes: int, repetitions: int = 100, seed: int = 0,
                     max_rank: int | None = None) -> EvalCurve:
    """Precision of random-chance guesses.

    Each repetition assigns every item a uniformly random class out of
    ``n_classes``; a pair counts as a hit when its two guesses agree. With
    pairs visited in random order the expected precision is the same at
    every rank, so the curve is flat at the per-repetition mean.
    """
    if int(n_classes) < 1:
        raise ValueError("n_classes must be >= 1")
    n = len(labels)
    if n < 2:
        raise ValueError("need at least two items")
    rng = np.random.default_rng(seed)
    fractions = [same_class_fraction(rng.integers(0, n_classes, size=n)) for _ in range(repetitions)]
    mean, spread = mean_and_spread(fractions)
    total = n * (n + 1) // 2
    stop = total if max_rank is None else min(total, int(max_rank))
    x = np.arange(1, stop + 1)
    return EvalCurve("null", "rank", x, np.full(x.size, mean), np.full(x.size, spread),
                     meta={"n_classes": int(n_classes), "repetitions": repetitions, "seed": seed})


# --- runtime ------------------------------------------------------------------

@dataclass
class BenchmarkResult:
    curves: dict
    fits: dict
    records: list
    meta: dict = field(default_factory=dict)


def _poly_fit(x, y, degree: int) -> dict:
    coef = np.polyfit(np.asarray(x, float), np.asarray(y, float), degree)
    pred = np.polyval(coef, x)
    ss_res = float(np.sum((np.asarray(y) - pred) ** 2))
    ss_tot = float(np.sum((np.asarray(y) - np.mean(y)) ** 2))
    r2 = 1.0 - ss_res / ss_tot if ss_tot > 0 else 1.0
    return {"coefficients": coef.tolist(), "r2": r2}


def scaling_benchmark(n_grid, alpha_grid=DEFAULT_ALPHA_GRID, cfg: RunConfig | None = None,
                      repetitions: int = 10, seed: int = 0, n_blocks: int = 4,
                      fill_density: float = DEFAULT_FILL_DENSITY) -> BenchmarkResult:
    """Iterations to convergence and seconds per iteration on n x n block matrices.

    Each matrix has ``n_blocks`` diagonal blocks of random sizes and is
    randomly permuted. Fits a line to iterations vs n and a quadratic to time
    per iteration vs n, per alpha.
    """
    cfg = cfg or RunConfig()
    n_grid = [int(n) for n in n_grid]
    if np.any(np.diff(n_grid) <= 0):
        raise ValueError("n_grid must be strictly increasing")
    records = []
    for ai, alpha in enumerate(alpha_grid):
        for n in n_grid:
            for rep in range(repetitions):
                k = min(n_blocks, max(1, n // 2))
                spec = diagonal_spec(n, n, k, fill_density, seed=derive_seed(seed, n, rep, 0))
                A, gt = generate_blocks(spec, n, n, seed=derive_seed(seed, n, rep, 1))
                A, gt = permute_randomly(A, gt, seed=derive_seed(seed, n, rep, 2))
                run_cfg = cfg.replace(alpha=float(alpha), seed=derive_seed(seed, n, rep, 3))
                result = reflexive_similarity(A, run_cfg)
                its = result.trace.iterations_used
                secs = float(np.sum(result.trace.column("seconds")))
                records.append({"alpha": float(alpha), "n": n, "rep": rep, "iterations": its,
                                "converged": result.trace.converged,
                                "tail_delta": tail_delta(result.trace),
                                "seconds_per_iteration": secs / its})

    curves, fits = {}, {}
    for alpha in alpha_grid:
        rows = [r for r in records if r["alpha"] == float(alpha)]
        it_y, it_s, t_y, t_s = [], [], [], []
        for n in n_grid:
            sel = sorted((r for r in rows if r["n"] == n), key=lambda r: r["rep"])
            a, b = mean_and_spread([r["iterations"] for r in sel])
            c, d = mean_and_spread([r["seconds_per_iteration"] for r in sel])
            it_y.append(a), it_s.append(b), t_y.append(c), t_s.append(d)
        key = f"a{float(alpha):g}"
        curves[f"iterations-{key}"] = EvalCurve(f"iterations-{key}", "n", n_grid, it_y, it_s)
        curves[f"seconds-{key}"] = EvalCurve(f"seconds-{key}", "n", n_grid, t_y, t_s)
        fits[f"iterations-{key}"] = _poly_fit(n_grid, it_y, 1)
        fits[f"seconds-{key}"] = _poly_fit(n_grid, t_y, 2) if len(n_grid) > 2 else None
    meta = {"n_grid": n_grid, "alpha_grid": [float(a) for a in alpha_grid],
            "repetitions": repetitions, "seed": seed, "n_blocks": n_blocks,
            "fill_density": fill_density, "config": cfg.to_dict()}
    return BenchmarkResult(curves, fits, records, meta)
