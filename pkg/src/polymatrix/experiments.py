"""Recovery experiments: sample-size sweeps and learned-game evaluation.

``phase_transition_sweep`` estimates, over many seeded trials, how often
the learner recovers the exact equilibrium set of a random game as the
sample budget grows through a control exponent ``c``. Trials derive their
seeds from the base seed and trial index, so they can run in any order
(or in parallel) without changing the report.

``evaluate_theorem1`` compares a learned model against the game the data
came from: parameter error per player, worst payoff discrepancy, and the
equilibrium containments those errors imply.
"""

from __future__ import annotations

import math
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .errors import InvalidInputError
from .games import (
    DEFAULT_ENUMERATION_CAP,
    PolymatrixGame,
    PsneSet,
    _profile_blocks,
    check_separability,
    enumerate_eps_ne,
    enumerate_psne,
    pack_parameters,
    profile_count,
)
from .learner import LearnedModel, LearnerConfig, fit_game, lambda_schedule
from .observation import LocalNoise, GlobalNoise, sample_dataset, sample_profile_counts
from .ensembles import RandomGameSpec, random_game

_SEED_MIX = 0x9E3779B97F4A7C15
_MASK = (1 << 64) - 1


def derive_seed(base: int, *parts: int) -> int:
    """Deterministic 64-bit seed derived from a base seed and index parts."""
    h = base & _MASK
    for part in parts:
        h ^= (part & _MASK) * _SEED_MIX & _MASK
        h = (h ^ (h >> 29)) * 0xBF58476D1CE4E5B9 & _MASK
        h ^= h >> 32
    return h


def sample_count(c: float, p: int, d: int, delta: float) -> int:
    """Sample budget ``round(10^c (d+1)^2 log(2 p (d+1) / delta))``, at least 1."""
    if not 0 < delta < 1:
        raise InvalidInputError(f"delta must lie in (0, 1), got {delta}")
    if p < 1 or d < 0:
        raise InvalidInputError("p must be positive and d nonnegative")
    value = (10.0**c) * (d + 1) ** 2 * math.log(2.0 * p * (d + 1) / delta)
    return max(1, round(value))


@dataclass(frozen=True)
class ExperimentSpec:
    """Configuration for a recovery-probability sweep."""

    p_values: tuple
    d_values: tuple
    c_grid: tuple
    m: int = 3
    noise_kind: str = "local"
    q: float = 0.6
    trials: int = 40
    delta: float = 0.01
    seed: int = 0
    lambda_mode: object = "theory"
    learner: LearnerConfig = field(default_factory=LearnerConfig)
    trial_timeout: float = None
    max_game_retries: int = 1000
    aggregate_threshold: int = 10

    def __post_init__(self):
        object.__setattr__(self, "p_values", tuple(int(v) for v in self.p_values))
        object.__setattr__(self, "d_values", tuple(int(v) for v in self.d_values))
        object.__setattr__(self, "c_grid", tuple(float(v) for v in self.c_grid))
        if not self.p_values or not self.d_values or not self.c_grid:
            raise InvalidInputError("p_values, d_values and c_grid must be nonempty")
        if self.trials < 1:
            raise InvalidInputError("trials must be at least 1")
        if not 0 < self.delta < 1:
            raise InvalidInputError(f"delta must lie in (0, 1), got {self.delta}")
        if self.noise_kind not in ("local", "global"):
            raise InvalidInputError(f"unknown noise kind {self.noise_kind!r}")
        for d in self.d_values:
            for p in self.p_values:
                if d >= p:
                    raise InvalidInputError(f"degree {d} infeasible for p={p}")
        if self.lambda_mode != "theory" and not isinstance(self.lambda_mode, (int, float)):
            raise InvalidInputError("lambda_mode is 'theory' or a number")


@dataclass(frozen=True)
class TrialRecord:
    p: int
    d: int
    c: float
    n: int
    seed: int
    lam: float
    game_retries: int
    ne_true_size: int
    ne_learned_size: int
    ne_equal: bool
    containment_ok: bool
    max_payoff_error: float
    epsilon: float
    fit_seconds: float
    trial_seconds: float
    converged: bool
    timed_out: bool

    @property
    def recovered(self) -> bool:
        """Equilibria matched and nothing flagged the trial as failed."""
        return self.ne_equal and self.converged and not self.timed_out


@dataclass(frozen=True)
class SweepRow:
    p: int
    d: int
    c: float
    n: int
    trials: int
    recovered: int
    probability: float
    mean_fit_seconds: float


@dataclass
class ExperimentReport:
    spec: ExperimentSpec
    rows: tuple
    trial_records: tuple


def _noise_for(spec_kind: str, q: float, p: int):
    if spec_kind == "local":
        return LocalNoise.uniform(p, q)
    return GlobalNoise(q)


def _generate_nonempty_ne_game(p, d, m, seed, max_retries, cap):
    """Random game with at least one equilibrium (the noise models need one)."""
    for attempt in range(max_retries):
        game = random_game(RandomGameSpec(p=p, d=d, m=m, seed=derive_seed(seed, attempt)))
        ne = enumerate_psne(game, cap=cap)
        if len(ne) > 0:
            return game, ne, attempt
    raise InvalidInputError(
        f"no game with a nonempty equilibrium set in {max_retries} draws"
    )


def recovery_trial(
    p: int,
    d: int,
    c: float,
    spec: ExperimentSpec,
    seed: int,
    cap: int = DEFAULT_ENUMERATION_CAP,
) -> TrialRecord:
    """One seeded end-to-end trial: generate, sample, fit, compare equilibria."""
    start = time.perf_counter()
    game, ne_true, retries = _generate_nonempty_ne_game(
        p, d, spec.m, derive_seed(seed, 1), spec.max_game_retries, cap
    )
    n = sample_count(c, p, d, spec.delta)
    noise = _noise_for(spec.noise_kind, spec.q, p)
    data_seed = derive_seed(seed, 2)
    if n >= spec.aggregate_threshold * profile_count(game.strategy_counts):
        data = sample_profile_counts(game, noise, n, data_seed, psne=ne_true, cap=cap)
    else:
        data = sample_dataset(game, noise, n, data_seed, psne=ne_true, cap=cap)

    if spec.lambda_mode == "theory":
        lam = lambda_schedule(n, p, d, spec.learner)
    else:
        lam = float(spec.lambda_mode)
    fit_start = time.perf_counter()
    model = fit_game(data, spec.learner.resolved(lam))
    fit_seconds = time.perf_counter() - fit_start

    evaluation = evaluate_theorem1(game, model, cap=cap, ne_true=ne_true)
    trial_seconds = time.perf_counter() - start
    timed_out = spec.trial_timeout is not None and trial_seconds > spec.trial_timeout
    return TrialRecord(
        p=p,
        d=d,
        c=c,
        n=n,
        seed=seed,
        lam=lam,
        game_retries=retries,
        ne_true_size=len(ne_true),
        ne_learned_size=evaluation.ne_learned_size,
        ne_equal=evaluation.ne_equal,
        containment_ok=evaluation.containment_ok,
        max_payoff_error=evaluation.payoff_discrepancy,
        epsilon=evaluation.epsilon,
        fit_seconds=fit_seconds,
        trial_seconds=trial_seconds,
        converged=all(dg.converged for dg in model.diagnostics),
        timed_out=timed_out,
    )


def phase_transition_sweep(
    spec: ExperimentSpec, threads: int = 1, cap: int = DEFAULT_ENUMERATION_CAP
) -> ExperimentReport:
    """Run every (p, d, c) configuration for the configured number of trials.

    Trials are aggregated by key, not completion order, so the report is
    identical whatever the thread count.
    """
    keys = [
        (p, d, c)
        for p in spec.p_values
        for d in spec.d_values
        for c in spec.c_grid
    ]
    jobs = [
        (p, d, c, derive_seed(spec.seed, t))
        for (p, d, c) in keys
        for t in range(spec.trials)
    ]

    def run(job):
        p, d, c, seed = job
        return recovery_trial(p, d, c, spec, seed, cap=cap)

    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            records = list(pool.map(run, jobs))
    else:
        records = [run(job) for job in jobs]

    rows = []
    for (p, d, c) in keys:
        group = [r for r in records if (r.p, r.d, r.c) == (p, d, c)]
        recovered = sum(r.recovered for r in group)
        rows.append(
            SweepRow(
                p=p,
                d=d,
                c=c,
                n=group[0].n,
                trials=len(group),
                recovered=recovered,
                probability=recovered / len(group),
                mean_fit_seconds=sum(r.fit_seconds for r in group) / len(group),
            )
        )
    return ExperimentReport(spec=spec, rows=tuple(rows), trial_records=tuple(records))


# ---------------------------------------------------------------------------
# Learned-model evaluation.
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Theorem1Evaluation:
    """How a learned game relates to the true game it was fitted from."""

    param_errors: tuple
    max_param_error: float
    payoff_discrepancy: float
    epsilon: float
    discrepancy_bounded: bool
    ne_true_size: int
    ne_learned_size: int
    learned_in_eps_true: bool
    true_in_eps_learned: bool
    containment_ok: bool
    separable_at_epsilon: bool
    ne_equal: bool


def _as_params(true_game: PolymatrixGame, learned) -> tuple:
    if isinstance(learned, LearnedModel):
        if learned.strategy_counts != true_game.strategy_counts:
            raise InvalidInputError("learned model and game disagree on strategy counts")
        return learned.params, learned.game
    if isinstance(learned, PolymatrixGame):
        if learned.strategy_counts != true_game.strategy_counts:
            raise InvalidInputError("games disagree on strategy counts")
        params = tuple(
            pack_parameters(learned, i) for i in range(learned.num_players)
        )
        return params, learned
    raise InvalidInputError("learned must be a LearnedModel or a PolymatrixGame")


def _max_payoff_gap(true_game: PolymatrixGame, params) -> float:
    """Max over players and profiles of |estimated payoff - true payoff|."""
    worst = 0.0
    counts = true_game.strategy_counts
    for block in _profile_blocks(counts):
        for i in range(true_game.num_players):
            vals = np.zeros(block.shape[0])
            vals += true_game.individual[i][block[:, i]]
            for j in true_game.neighbors[i]:
                vals += true_game.pair_matrix(i, j)[block[:, i], block[:, j]]
            theta = params[i]
            lay = theta.layout
            est = theta.values[block[:, i]].astype(float)
            for g, j in enumerate(lay.others, start=1):
                mat = theta.values[lay.group_slice(g)].reshape(
                    counts[i], counts[j]
                )
                est += mat[block[:, i], block[:, j]]
            worst = max(worst, float(np.abs(est - vals).max()))
    return worst


def evaluate_theorem1(
    true_game: PolymatrixGame,
    learned,
    cap: int = DEFAULT_ENUMERATION_CAP,
    ne_true: PsneSet = None,
) -> Theorem1Evaluation:
    """Compare a learned model (or game) against the true game.

    Computes per-player parameter errors in the sum-of-group-norms sense,
    the worst payoff discrepancy over the whole profile space, and checks
    that each game's equilibria sit inside the other's epsilon-equilibria
    at twice the worst parameter error. When the true game separates
    equilibria from deviations by more than that slack, the equilibrium
    sets must coincide.
    """
    params, learned_game = _as_params(true_game, learned)
    true_params = tuple(
        pack_parameters(true_game, i) for i in range(true_game.num_players)
    )
    errors = tuple(
        float(
            sum(
                np.linalg.norm((est.values - tru.values)[est.layout.group_slice(g)])
                for g in range(est.layout.num_groups)
            )
        )
        for est, tru in zip(params, true_params)
    )
    max_err = max(errors)
    discrepancy = _max_payoff_gap(true_game, params)
    epsilon = 2.0 * max_err

    if ne_true is None:
        ne_true = enumerate_psne(true_game, cap=cap)
    ne_learned = enumerate_psne(learned_game, cap=cap)
    eps_true = enumerate_eps_ne(true_game, epsilon, cap=cap)
    eps_learned = enumerate_eps_ne(learned_game, epsilon, cap=cap)

    learned_in_eps_true = ne_learned.issubset(eps_true)
    true_in_eps_learned = ne_true.issubset(eps_learned)
    return Theorem1Evaluation(
        param_errors=errors,
        max_param_error=max_err,
        payoff_discrepancy=discrepancy,
        epsilon=epsilon,
        discrepancy_bounded=discrepancy <= max_err + 1e-9,
        ne_true_size=len(ne_true),
        ne_learned_size=len(ne_learned),
        learned_in_eps_true=learned_in_eps_true,
        true_in_eps_learned=true_in_eps_learned,
        containment_ok=learned_in_eps_true and true_in_eps_learned,
        separable_at_epsilon=check_separability(true_game, epsilon, cap=cap),
        ne_equal=ne_true.same_profiles(ne_learned),
    )
