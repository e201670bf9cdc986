"""Text formats for games, datasets, learned models, and reports.

All files are plain text. Lines starting with ``#`` are comments; every
artifact written by the CLI starts with a comment header echoing the tool
version, the resolved configuration, and the seed, so identical inputs
produce byte-identical files. Floats are written with shortest
round-trip decimal formatting, so reading a file back recovers values
exactly. Players and strategies are 1-indexed on disk and converted at
this boundary.
"""

from __future__ import annotations

import io
from dataclasses import dataclass

import numpy as np

from . import __version__
from .errors import InvalidInputError, ParseError
from .games import PolymatrixGame, PsneSet
from .learner import LearnedModel
from .observation import Dataset


def format_float(x: float) -> str:
    """Shortest decimal string that round-trips to the same float."""
    return repr(float(x))


def artifact_header(command: str, config: dict, seed=None) -> str:
    """Standard comment header for generated files; byte-stable per inputs."""
    items = " ".join(f"{k}={v}" for k, v in sorted(config.items()))
    lines = [f"# polymatrix {__version__}", f"# command: {command}"]
    if items:
        lines.append(f"# config: {items}")
    if seed is not None:
        lines.append(f"# seed: {seed}")
    return "\n".join(lines) + "\n"


def _content_lines(text: str):
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if line and not line.startswith("#"):
            yield lineno, line


# ---------------------------------------------------------------------------
# Game files.
# ---------------------------------------------------------------------------


def write_game(game: PolymatrixGame, header: str = "") -> str:
    """Serialize a game to its text form (1-indexed players)."""
    out = io.StringIO()
    out.write(header)
    p = game.num_players
    out.write(f"players {p}\n")
    out.write("strategies " + " ".join(str(m) for m in game.strategy_counts) + "\n")
    for i in range(p):
        vals = " ".join(format_float(v) for v in game.individual[i])
        out.write(f"individual {i + 1} {vals}\n")
    for (i, j) in sorted(game.edges):
        out.write(f"edge {i + 1} {j + 1}\n")
        for row in game.pair_matrix(i, j):
            out.write(" ".join(format_float(v) for v in row) + "\n")
    return out.getvalue()


def read_game(text: str) -> PolymatrixGame:
    """Parse the text form produced by :func:`write_game`."""
    lines = list(_content_lines(text))
    pos = 0

    def take(expect: str):
        nonlocal pos
        if pos >= len(lines):
            raise ParseError(f"unexpected end of game file, expected {expect!r}")
        lineno, line = lines[pos]
        pos += 1
        return lineno, line.split()

    lineno, tok = take("players")
    if tok[0] != "players" or len(tok) != 2:
        raise ParseError(f"line {lineno}: expected 'players <p>'")
    try:
        p = int(tok[1])
    except ValueError:
        raise ParseError(f"line {lineno}: bad player count {tok[1]!r}") from None
    lineno, tok = take("strategies")
    if tok[0] != "strategies" or len(tok) != p + 1:
        raise ParseError(f"line {lineno}: expected 'strategies' with {p} counts")
    try:
        counts = tuple(int(v) for v in tok[1:])
    except ValueError:
        raise ParseError(f"line {lineno}: bad strategy count") from None

    individual = [None] * p
    pairs = {}
    while pos < len(lines):
        lineno, tok = take("individual or edge")
        if tok[0] == "individual":
            try:
                i = int(tok[1]) - 1
                vals = [float(v) for v in tok[2:]]
            except (ValueError, IndexError):
                raise ParseError(f"line {lineno}: bad individual block") from None
            if not 0 <= i < p or len(vals) != counts[i]:
                raise ParseError(f"line {lineno}: individual block mismatch")
            individual[i] = vals
        elif tok[0] == "edge":
            try:
                i, j = int(tok[1]) - 1, int(tok[2]) - 1
            except (ValueError, IndexError):
                raise ParseError(f"line {lineno}: bad edge header") from None
            if not (0 <= i < p and 0 <= j < p) or i == j:
                raise ParseError(f"line {lineno}: edge ({tok[1]}, {tok[2]}) out of range")
            rows = []
            for _ in range(counts[i]):
                lineno2, tok2 = take("payoff row")
                try:
                    row = [float(v) for v in tok2]
                except ValueError:
                    raise ParseError(f"line {lineno2}: bad payoff row") from None
                if len(row) != counts[j]:
                    raise ParseError(
                        f"line {lineno2}: payoff row has {len(row)} entries, "
                        f"expected {counts[j]}"
                    )
                rows.append(row)
            pairs[(i, j)] = rows
        else:
            raise ParseError(f"line {lineno}: unexpected keyword {tok[0]!r}")

    missing = [i + 1 for i, v in enumerate(individual) if v is None]
    if missing:
        raise ParseError(f"missing individual payoff blocks for players {missing}")
    try:
        return PolymatrixGame(counts, individual, pairs)
    except InvalidInputError as exc:
        raise ParseError(f"invalid game: {exc}") from exc


# ---------------------------------------------------------------------------
# Dataset CSV.
# ---------------------------------------------------------------------------


def write_dataset(data: Dataset, header: str = "") -> str:
    """Dataset CSV: strategy-count comment, column header, one 1-indexed row per draw."""
    if not data.is_expanded():
        raise InvalidInputError(
            "aggregated datasets (weights > 1) have no per-draw CSV form"
        )
    out = io.StringIO()
    out.write(header)
    out.write("# strategies " + " ".join(str(m) for m in data.strategy_counts) + "\n")
    out.write(",".join(f"player_{i + 1}" for i in range(data.num_players)) + "\n")
    for row in data.profiles:
        out.write(",".join(str(int(v) + 1) for v in row) + "\n")
    return out.getvalue()


def read_dataset(text: str) -> Dataset:
    """Parse the CSV form produced by :func:`write_dataset`."""
    counts = None
    header = None
    rows = []
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line:
            continue
        if line.startswith("#"):
            tok = line[1:].split()
            if tok and tok[0] == "strategies":
                try:
                    counts = tuple(int(v) for v in tok[1:])
                except ValueError:
                    raise ParseError(f"line {lineno}: bad strategies comment") from None
            continue
        cells = [c.strip() for c in line.split(",")]
        if header is None:
            header = cells
            continue
        if len(cells) != len(header):
            raise ParseError(
                f"line {lineno}: row has {len(cells)} cells, expected {len(header)}"
            )
        try:
            rows.append([int(c) - 1 for c in cells])
        except ValueError:
            raise ParseError(f"line {lineno}: non-integer strategy") from None
    if header is None or not rows:
        raise ParseError("dataset has no rows")
    if counts is None:
        raise ParseError("dataset is missing the '# strategies ...' comment")
    if len(counts) != len(header):
        raise ParseError("strategies comment and column header disagree")
    try:
        return Dataset(counts, np.asarray(rows, dtype=np.int64))
    except InvalidInputError as exc:
        raise ParseError(f"invalid dataset: {exc}") from exc


# ---------------------------------------------------------------------------
# Learned models: a game file plus diagnostic comments, so any game reader
# can load one directly.
# ---------------------------------------------------------------------------


def write_learned_model(model: LearnedModel, header: str = "") -> str:
    out = io.StringIO()
    out.write(header)
    for i, diag in enumerate(model.diagnostics):
        out.write(
            f"# diag player={i + 1} objective={format_float(diag.objective)} "
            f"iterations={diag.iterations} "
            f"grad_map_norm={format_float(diag.grad_map_norm)} "
            f"converged={int(diag.converged)}\n"
        )
        norms = " ".join(format_float(v) for v in diag.group_norms)
        out.write(f"# groupnorms player={i + 1} {norms}\n")
    out.write(write_game(model.game))
    return out.getvalue()


def read_learned_model(text: str):
    """Parse a learned-model file into (game, per-player diagnostics dict)."""
    game = read_game(text)
    diags = {}
    norms = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if line.startswith("# diag "):
            fields = dict(part.split("=", 1) for part in line[7:].split())
            try:
                player = int(fields["player"]) - 1
                diags[player] = {
                    "objective": float(fields["objective"]),
                    "iterations": int(fields["iterations"]),
                    "grad_map_norm": float(fields["grad_map_norm"]),
                    "converged": bool(int(fields["converged"])),
                }
            except (KeyError, ValueError):
                raise ParseError(f"line {lineno}: bad diagnostics comment") from None
        elif line.startswith("# groupnorms "):
            tok = line[13:].split()
            try:
                player = int(tok[0].split("=", 1)[1]) - 1
                norms[player] = tuple(float(v) for v in tok[1:])
            except (IndexError, ValueError):
                raise ParseError(f"line {lineno}: bad groupnorms comment") from None
    for player, vals in norms.items():
        if player in diags:
            diags[player]["group_norms"] = vals
    return game, diags


# ---------------------------------------------------------------------------
# Equilibrium sets and reports.
# ---------------------------------------------------------------------------


def write_psne(psne: PsneSet, header: str = "") -> str:
    out = io.StringIO()
    out.write(header)
    out.write(f"# epsilon: {format_float(psne.epsilon)}\n")
    out.write(f"# count: {len(psne)}\n")
    if psne.profiles:
        p = len(psne.profiles[0])
        out.write(",".join(f"player_{i + 1}" for i in range(p)) + "\n")
    for x in psne:
        out.write(",".join(str(v + 1) for v in x) + "\n")
    return out.getvalue()


def write_sweep_csv(report, header: str = "") -> str:
    out = io.StringIO()
    out.write(header)
    out.write("p,d,c,n,trials,recovered,probability,mean_fit_seconds\n")
    for row in report.rows:
        out.write(
            f"{row.p},{row.d},{format_float(row.c)},{row.n},{row.trials},"
            f"{row.recovered},{format_float(row.probability)},"
            f"{format_float(row.mean_fit_seconds)}\n"
        )
    return out.getvalue()


def write_trials_csv(report, header: str = "") -> str:
    out = io.StringIO()
    out.write(header)
    out.write(
        "p,d,c,n,seed,lambda,game_retries,ne_true,ne_learned,ne_equal,"
        "containment_ok,max_payoff_error,epsilon,fit_seconds,converged,timed_out\n"
    )
    for r in report.trial_records:
        out.write(
            f"{r.p},{r.d},{format_float(r.c)},{r.n},{r.seed},{format_float(r.lam)},"
            f"{r.game_retries},{r.ne_true_size},{r.ne_learned_size},"
            f"{int(r.ne_equal)},{int(r.containment_ok)},"
            f"{format_float(r.max_payoff_error)},{format_float(r.epsilon)},"
            f"{format_float(r.fit_seconds)},{int(r.converged)},{int(r.timed_out)}\n"
        )
    return out.getvalue()


# ---------------------------------------------------------------------------
# Vote ingestion.
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class VoteMappingRule:
    """Total map from source vote codes to strategies in {1, 2, 3} (file-level)."""

    name: str
    mapping: dict

    def __post_init__(self):
        if not self.mapping:
            raise InvalidInputError("vote mapping must not be empty")
        if any(v not in (1, 2, 3) for v in self.mapping.values()):
            raise InvalidInputError("vote mapping image must lie in {1, 2, 3}")


# Source codes follow the supreme-court code book: 1/3/4/5 vote with the
# majority, 6/7/8 do not participate, 2 dissents.
SUPREME_COURT_RULE = VoteMappingRule(
    name="supreme-court",
    mapping={"1": 1, "3": 1, "4": 1, "5": 1, "6": 2, "7": 2, "8": 2, "2": 3},
)

# Senate and UN corpora arrive already coded as 1=yes, 2=abstain, 3=no.
IDENTITY_RULE = VoteMappingRule(name="identity", mapping={"1": 1, "2": 2, "3": 3})

VOTE_RULES = {rule.name: rule for rule in (SUPREME_COURT_RULE, IDENTITY_RULE)}


def ingest_votes(text: str, rule: VoteMappingRule, fill_abstain: bool = False) -> Dataset:
    """Map a rectangular vote CSV to a dataset with three strategies per player.

    Each row is one observed profile, each column one player. Unmapped codes
    and ragged rows raise :class:`ParseError` naming the row and column.
    Empty cells are rejected unless ``fill_abstain`` maps them to abstention.
    """
    rows = []
    width = None
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        cells = [c.strip() for c in line.split(",")]
        if width is None:
            width = len(cells)
        elif len(cells) != width:
            raise ParseError(
                f"row {lineno}: has {len(cells)} cells, expected {width}"
            )
        out = []
        for col, cell in enumerate(cells, start=1):
            if cell == "":
                if fill_abstain:
                    out.append(2 - 1)
                    continue
                raise ParseError(f"row {lineno}, column {col}: empty cell")
            if cell not in rule.mapping:
                raise ParseError(
                    f"row {lineno}, column {col}: unmapped vote code {cell!r}"
                )
            out.append(rule.mapping[cell] - 1)
        rows.append(out)
    if not rows:
        raise ParseError("vote file has no rows")
    return Dataset((3,) * width, np.asarray(rows, dtype=np.int64))


# ---------------------------------------------------------------------------
# Path helpers.
# ---------------------------------------------------------------------------


def save_text(path, text: str) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(text)


def load_text(path) -> str:
    try:
        with open(path, "r", encoding="utf-8") as fh:
            return fh.read()
    except OSError as exc:
        raise ParseError(f"cannot read {path}: {exc}") from exc
