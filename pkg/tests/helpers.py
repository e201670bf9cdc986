"""Independent oracle implementations used to cross-check the library.

These deliberately re-derive results with straightforward loops over the
raw payoff dictionaries, so they share no code path with the functions
under test.
"""

import itertools

import numpy as np

from polymatrix import PolymatrixGame


def oracle_payoff(game, i, x):
    """Direct summation over the stored payoff matrices."""
    total = game.individual[i][x[i]]
    for (a, b), mat in game.pairs.items():
        if a == i:
            total += mat[x[i], x[b]]
    return float(total)


def oracle_payoff_vector(game, i, x):
    return [
        oracle_payoff(game, i, x[:i] + (a,) + x[i + 1:])
        for a in range(game.strategy_counts[i])
    ]


def oracle_best_responses(game, i, x):
    vals = oracle_payoff_vector(game, i, x)
    best = max(vals)
    return tuple(a for a, v in enumerate(vals) if v == best)


def oracle_is_eps_ne(game, x, eps):
    for i in range(game.num_players):
        vals = oracle_payoff_vector(game, i, x)
        if vals[x[i]] < max(vals) - eps:
            return False
    return True


def oracle_enumerate(game, eps):
    counts = game.strategy_counts
    return tuple(
        x
        for x in itertools.product(*(range(m) for m in counts))
        if oracle_is_eps_ne(game, x, eps)
    )


def oracle_welfare(game, x, shift):
    return sum(
        oracle_payoff(game, i, x) + shift * (1 + game.degree(i))
        for i in range(game.num_players)
    )


def random_game_dense(rng, p, m_choices=(2, 3), edge_prob=0.5, scale=1.0):
    """Random game with mixed strategy counts and Bernoulli edges."""
    counts = tuple(int(rng.choice(m_choices)) for _ in range(p))
    individual = [rng.normal(0, scale, size=m) for m in counts]
    pairs = {}
    for i in range(p):
        for j in range(p):
            if i != j and rng.random() < edge_prob:
                mat = rng.normal(0, scale, size=(counts[i], counts[j]))
                pairs[(i, j)] = mat
    return PolymatrixGame(counts, individual, pairs)


def finite_diff_gradient(func, values, h=1e-5):
    """Central finite differences of a scalar function of a flat vector."""
    grad = np.zeros_like(values)
    for k in range(values.size):
        e = np.zeros_like(values)
        e[k] = h
        grad[k] = (func(values + e) - func(values - e)) / (2 * h)
    return grad


def permute_players(game, perm):
    """Game with player i renamed perm[i]."""
    p = game.num_players
    counts = [None] * p
    individual = [None] * p
    for i in range(p):
        counts[perm[i]] = game.strategy_counts[i]
        individual[perm[i]] = game.individual[i]
    pairs = {
        (perm[i], perm[j]): mat for (i, j), mat in game.pairs.items()
    }
    return PolymatrixGame(counts, individual, pairs)


def relabel_strategies(game, k, sigma):
    """Game with player k's strategy s renamed sigma[s]."""
    counts = game.strategy_counts
    inv = [0] * counts[k]
    for s, t in enumerate(sigma):
        inv[t] = s
    individual = [v.copy() for v in game.individual]
    individual[k] = individual[k][inv]
    pairs = {}
    for (i, j), mat in game.pairs.items():
        mat = mat.copy()
        if i == k:
            mat = mat[inv, :]
        if j == k:
            mat = mat[:, inv]
        pairs[(i, j)] = mat
    return PolymatrixGame(counts, individual, pairs)
