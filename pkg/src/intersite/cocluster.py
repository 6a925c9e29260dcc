"""Crossed clustering of contingency tables under the chi-squared criterion.

Rows are partitioned into ``k`` classes and columns into ``l`` classes so
that the chi-squared statistic of the collapsed ``k x l`` table of block
sums is as large as possible. Merging categories can only lose
association, so the collapsed statistic is bounded by that of the full
table; the search keeps as much of it as ``k`` and ``l`` allow.

The optimizer alternates row and column relocation sweeps. Within a row
sweep the column classes are fixed, so the statistic can be written

    chi2 = N * (sum_k sum_l m_kl**2 / (m_k. * m_.l) - 1)

and moving one row only touches two of the ``k`` terms. Objects move only
on strict improvement, which makes every sweep non-decreasing and the
search finite.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path
from typing import IO, Iterator, Sequence, Union

import numpy as np

from .aggregate import ContingencyTable

PathLike = Union[str, Path]

EMPTY_CLUSTER_POLICIES = ("reseed_farthest", "allow_empty")


class CoclusterError(Exception):
    pass


class EmptyTable(CoclusterError):
    pass


class DimensionMismatch(CoclusterError):
    pass


class InfeasiblePartition(CoclusterError):
    pass


class SearchSpaceTooLarge(CoclusterError):
    pass


class MonotonicityError(AssertionError):
    pass


def _cells(table) -> np.ndarray:
    if isinstance(table, ContingencyTable):
        return table.cells
    cells = np.asarray(table)
    if cells.ndim != 2:
        raise ValueError("table must be 2-d")
    if (cells < 0).any():
        raise ValueError("table must be non-negative")
    return cells


def chi2_of(table) -> float:
    """Pearson chi-squared statistic of a contingency table.

    Rows or columns with zero margin contribute nothing.
    """
    n = _cells(table).astype(np.float64)
    total = n.sum()
    if total <= 0:
        raise EmptyTable("chi-squared of a table with zero total")
    expected = np.outer(n.sum(axis=1), n.sum(axis=0)) / total
    mask = expected > 0
    resid = n[mask] - expected[mask]
    return float((resid * resid / expected[mask]).sum())


@dataclass(frozen=True, eq=False)
class Partition:
    assignment: np.ndarray
    k: int

    def __post_init__(self):
        a = np.asarray(self.assignment, dtype=np.int64)
        if a.ndim != 1:
            raise ValueError("assignment must be 1-d")
        if self.k < 1:
            raise ValueError("k must be >= 1")
        if a.size and (a.min() < 0 or a.max() >= self.k):
            raise ValueError(f"cluster indices must lie in [0, {self.k})")
        object.__setattr__(self, "assignment", a)

    def __len__(self):
        return len(self.assignment)

    def __eq__(self, other):
        if not isinstance(other, Partition):
            return NotImplemented
        return self.k == other.k and np.array_equal(self.assignment, other.assignment)

    def __repr__(self):
        return f"Partition({self.assignment.tolist()}, k={self.k})"

    @classmethod
    def identity(cls, n: int) -> "Partition":
        return cls(np.arange(n), n)

    @classmethod
    def single(cls, n: int) -> "Partition":
        return cls(np.zeros(n, dtype=np.int64), 1)

    def canonical(self) -> "Partition":
        """Relabel clusters in order of first appearance; unused labels come last."""
        mapping: dict[int, int] = {}
        for c in self.assignment.tolist():
            if c not in mapping:
                mapping[c] = len(mapping)
        for c in range(self.k):
            if c not in mapping:
                mapping[c] = len(mapping)
        lut = np.array([mapping[c] for c in range(self.k)], dtype=np.int64)
        return Partition(lut[self.assignment], self.k)

    def classes(self) -> list[np.ndarray]:
        return [np.flatnonzero(self.assignment == c) for c in range(self.k)]

    def as_sets(self) -> set[frozenset[int]]:
        return {frozenset(m.tolist()) for m in self.classes() if m.size}

    def same_clusters(self, other: "Partition") -> bool:
        """Equality as set partitions, ignoring labels."""
        return self.as_sets() == other.as_sets()


def _labels(p, n: int) -> tuple[np.ndarray, int]:
    if isinstance(p, Partition):
        a, k = p.assignment, p.k
    else:
        a = np.asarray(p, dtype=np.int64)
        k = int(a.max()) + 1 if a.size else 1
    if len(a) != n:
        raise DimensionMismatch(f"partition of {len(a)} objects for an axis of length {n}")
    return a, k


def collapse(table, rows, cols) -> np.ndarray:
    """Block sums of ``table`` over a row partition and a column partition."""
    cells = _cells(table)
    r, k = _labels(rows, cells.shape[0])
    c, l = _labels(cols, cells.shape[1])
    by_row = np.zeros((k, cells.shape[1]), dtype=cells.dtype)
    np.add.at(by_row, r, cells)
    out = np.zeros((k, l), dtype=cells.dtype)
    np.add.at(out.T, c, by_row.T)
    return out


@dataclass
class FitConfig:
    k: int
    l: int
    restarts: int = 20
    max_iters: int = 200
    seed: int = 0
    empty_cluster_policy: str = "reseed_farthest"
    rel_tol: float = 1e-9
    check_monotone: bool = True

    def __post_init__(self):
        if self.k < 1 or self.l < 1:
            raise ValueError("k and l must be >= 1")
        if self.restarts < 1:
            raise ValueError("restarts must be >= 1")
        if self.max_iters < 1:
            raise ValueError("max_iters must be >= 1")
        if self.empty_cluster_policy not in EMPTY_CLUSTER_POLICIES:
            raise ValueError(f"empty_cluster_policy must be one of {EMPTY_CLUSTER_POLICIES}")


@dataclass
class BlockModel:
    row_partition: Partition
    col_partition: Partition
    collapsed: np.ndarray
    chi2: float
    iterations: int = 0
    restarts_used: int = 0
    converged: bool = True
    best_restart: int = 0
    history: tuple[float, ...] = ()
    restart_chi2: tuple[float, ...] = ()
    restart_iterations: tuple[int, ...] = ()
    row_labels: list[str] | None = None
    col_labels: list[str] | None = None

    @property
    def k(self) -> int:
        return self.row_partition.k

    @property
    def l(self) -> int:
        return self.col_partition.k

    @classmethod
    def from_partitions(cls, table, rows, cols, **kwargs) -> "BlockModel":
        cells = _cells(table)
        r, k = _labels(rows, cells.shape[0])
        c, l = _labels(cols, cells.shape[1])
        rows, cols = Partition(r, k), Partition(c, l)
        collapsed = collapse(cells, rows, cols)
        if isinstance(table, ContingencyTable):
            kwargs.setdefault("row_labels", list(table.row_labels))
            kwargs.setdefault("col_labels", list(table.col_labels))
        return cls(rows, cols, collapsed, chi2_of(collapsed), **kwargs)


# -- relocation -----------------------------------------------------------------

def _inv(v: np.ndarray) -> np.ndarray:
    out = np.zeros_like(v, dtype=np.float64)
    np.divide(1.0, v, out=out, where=v > 0)
    return out


def _fit_terms(M: np.ndarray, R: np.ndarray, inv_c: np.ndarray) -> np.ndarray:
    """Per-cluster sum_l m_l**2 / (r * c_l); zero for empty clusters."""
    return (M * M) @ inv_c * _inv(R)


def _relocate(A: np.ndarray, labels: np.ndarray, k: int, total: float, rel_tol: float) -> int:
    """One sweep over the objects (rows of ``A``), moving each to its best cluster.

    ``A`` holds every object's counts aggregated over the fixed classes of
    the other axis. ``labels`` is updated in place; returns the move count.
    """
    M = np.zeros((k, A.shape[1]))
    np.add.at(M, labels, A)
    R = M.sum(axis=1)
    inv_c = _inv(A.sum(axis=0))
    F = _fit_terms(M, R, inv_c)
    moves = 0
    for i in range(A.shape[0]):
        x = A[i]
        xr = x.sum()
        if xr == 0:
            continue
        a = labels[i]
        chi = total * (F.sum() - 1.0)
        tol = rel_tol * max(chi, 1.0)
        Ma = M[a] - x
        Ra = R[a] - xr
        fa = (Ma * Ma) @ inv_c / Ra if Ra > 0 else 0.0
        P = M + x
        fp = (P * P) @ inv_c / (R + xr)
        delta = (fa - F[a]) + (fp - F)
        delta[a] = 0.0
        b = int(np.argmax(delta))
        if total * delta[b] > tol:
            M[a] = Ma
            R[a] = Ra
            F[a] = fa
            M[b] += x
            R[b] += xr
            F[b] = fp[b]
            labels[i] = b
            moves += 1
    return moves


def _reseed(A: np.ndarray, labels: np.ndarray, k: int) -> int:
    """Fill clusters with no mass by splitting off one object of the most populous cluster.

    The object chosen is the one whose move gives the largest statistic;
    a split never lowers it. Returns the number of objects moved.
    """
    moved = 0
    mass = A.sum(axis=1)
    live = mass > 0
    inv_c = _inv(A.sum(axis=0))
    while True:
        M = np.zeros((k, A.shape[1]))
        np.add.at(M, labels, A)
        R = M.sum(axis=1)
        empty = np.flatnonzero(R == 0)
        if empty.size == 0:
            return moved
        counts = np.bincount(labels[live], minlength=k)
        donor = int(np.argmax(counts))
        if counts[donor] < 2:
            return moved
        e = int(empty[0])
        members = np.flatnonzero((labels == donor) & live)
        base = _fit_terms(M, R, inv_c)
        best, best_gain = members[0], -np.inf
        for i in members:
            x = A[i]
            Md, Rd = M[donor] - x, R[donor] - mass[i]
            gain = (Md * Md) @ inv_c / Rd + (x * x) @ inv_c / mass[i] - base[donor]
            if gain > best_gain:
                best, best_gain = i, gain
        labels[best] = e
        moved += 1


def _axis_view(cells: np.ndarray, other: np.ndarray, n_other: int, axis: int) -> np.ndarray:
    """Objects of ``axis`` against the classes of the other axis."""
    if axis == 0:
        return collapse(cells, np.arange(cells.shape[0]), Partition(other, n_other)).astype(np.float64)
    return collapse(cells.T, np.arange(cells.shape[1]), Partition(other, n_other)).astype(np.float64)


@dataclass
class _Run:
    rows: np.ndarray
    cols: np.ndarray
    chi2: float
    iterations: int
    converged: bool
    history: list[float] = field(default_factory=list)


def _single_run(cells: np.ndarray, config: FitConfig, rng: np.random.Generator) -> _Run:
    n, m = cells.shape
    total = float(cells.sum())
    rows = rng.integers(0, config.k, n)
    cols = rng.integers(0, config.l, m)
    reseed = config.empty_cluster_policy == "reseed_farthest"
    if reseed:
        _reseed(_axis_view(cells, cols, config.l, 0), rows, config.k)
        _reseed(_axis_view(cells, rows, config.k, 1), cols, config.l)

    chi = chi2_of(collapse(cells, Partition(rows, config.k), Partition(cols, config.l)))
    history = [chi]

    def check(new: float) -> None:
        if config.check_monotone and new < chi - config.rel_tol * max(chi, 1.0):
            raise MonotonicityError(f"chi2 decreased from {chi!r} to {new!r}")

    for it in range(1, config.max_iters + 1):
        moved = 0
        A = _axis_view(cells, cols, config.l, 0)
        moved += _relocate(A, rows, config.k, total, config.rel_tol)
        if reseed:
            moved += _reseed(A, rows, config.k)
        new = chi2_of(collapse(cells, Partition(rows, config.k), Partition(cols, config.l)))
        check(new)
        chi = new

        B = _axis_view(cells, rows, config.k, 1)
        moved += _relocate(B, cols, config.l, total, config.rel_tol)
        if reseed:
            moved += _reseed(B, cols, config.l)
        new = chi2_of(collapse(cells, Partition(rows, config.k), Partition(cols, config.l)))
        check(new)
        chi = new
        history.append(chi)
        if moved == 0:
            return _Run(rows, cols, chi, it, True, history)
    return _Run(rows, cols, chi, config.max_iters, False, history)


def _check_feasible(cells: np.ndarray, k: int, l: int) -> None:
    live_rows = int((cells.sum(axis=1) > 0).sum())
    live_cols = int((cells.sum(axis=0) > 0).sum())
    if cells.sum() <= 0:
        raise EmptyTable("cannot cluster a table with zero total")
    if k > live_rows:
        raise InfeasiblePartition(f"k={k} but only {live_rows} rows have a non-zero margin")
    if l > live_cols:
        raise InfeasiblePartition(f"l={l} but only {live_cols} columns have a non-zero margin")


def fit(table, config: FitConfig) -> BlockModel:
    """Crossed clustering by alternating relocation with random restarts.

    Restart ``i`` draws from child ``i`` of the seed's sequence, so the
    first restarts do not depend on how many are requested. The best
    restart wins; a later one must beat it by more than the tolerance.
    """
    cells = _cells(table)
    _check_feasible(cells, config.k, config.l)
    children = np.random.SeedSequence(config.seed).spawn(config.restarts)
    runs = [_single_run(cells, config, np.random.default_rng(ss)) for ss in children]
    best = 0
    for i, run in enumerate(runs[1:], start=1):
        if run.chi2 > runs[best].chi2 + config.rel_tol * max(runs[best].chi2, 1.0):
            best = i
    win = runs[best]
    rows = Partition(win.rows, config.k).canonical()
    cols = Partition(win.cols, config.l).canonical()
    extra = {}
    if isinstance(table, ContingencyTable):
        extra = {"row_labels": list(table.row_labels), "col_labels": list(table.col_labels)}
    collapsed = collapse(cells, rows, cols)
    return BlockModel(
        row_partition=rows,
        col_partition=cols,
        collapsed=collapsed,
        chi2=chi2_of(collapsed),
        iterations=win.iterations,
        restarts_used=config.restarts,
        converged=win.converged,
        best_restart=best,
        history=tuple(win.history),
        restart_chi2=tuple(r.chi2 for r in runs),
        restart_iterations=tuple(r.iterations for r in runs),
        **extra,
    )


# -- exhaustive search ----------------------------------------------------------

def stirling2(n: int, k: int) -> int:
    """Number of ways to partition n objects into exactly k non-empty classes."""
    if n == k:
        return 1
    if k == 0 or k > n:
        return 0
    row = [1] + [0] * k
    for i in range(1, n + 1):
        for j in range(min(i, k), 0, -1):
            row[j] = j * row[j] + row[j - 1]
        row[0] = 0
    return row[k]


def count_partitions(n: int, k: int) -> int:
    """Set partitions of n objects into at most k non-empty classes."""
    return sum(stirling2(n, j) for j in range(1, min(n, k) + 1))


def set_partitions(n: int, k: int) -> Iterator[tuple[int, ...]]:
    """Restricted growth strings of length n using at most k labels."""
    if n == 0:
        yield ()
        return
    a = [0] * n

    def rec(i: int, used: int):
        if i == n:
            yield tuple(a)
            return
        for c in range(min(used + 1, k)):
            a[i] = c
            yield from rec(i + 1, max(used, c + 1))

    a[0] = 0
    yield from rec(1, 1)


def _batch_chi2(blocks: np.ndarray) -> np.ndarray:
    total = blocks.sum(axis=(1, 2))
    r = blocks.sum(axis=2)
    c = blocks.sum(axis=1)
    expected = r[:, :, None] * c[:, None, :] / total[:, None, None]
    resid = blocks - expected
    terms = np.zeros_like(expected)
    np.divide(resid * resid, expected, out=terms, where=expected > 0)
    return terms.sum(axis=(1, 2))


def brute_force(table, k: int, l: int, max_space: int = 10**7, chunk: int = 4096) -> BlockModel:
    """Global chi-squared maximum over all partitions into at most k and l classes."""
    cells = _cells(table)
    if cells.sum() <= 0:
        raise EmptyTable("cannot cluster a table with zero total")
    n, m = cells.shape
    space = count_partitions(n, k) * count_partitions(m, l)
    if space > max_space:
        raise SearchSpaceTooLarge(f"{space} partition pairs exceed the limit of {max_space}")
    row_parts = np.array(list(set_partitions(n, k)), dtype=np.int64).reshape(-1, n)
    kk = min(k, n)
    onehot = np.zeros((len(row_parts), kk, n))
    idx = np.arange(n)
    for p, labels in enumerate(row_parts):
        onehot[p, labels, idx] = 1.0
    best = (-np.inf, None, None)
    for cols in set_partitions(m, l):
        by_col = collapse(cells, np.arange(n), Partition(np.array(cols), min(l, m))).astype(np.float64)
        for start in range(0, len(row_parts), chunk):
            blocks = onehot[start:start + chunk] @ by_col
            values = _batch_chi2(blocks)
            j = int(np.argmax(values))
            if values[j] > best[0]:
                best = (float(values[j]), start + j, cols)
    _, p, cols = best
    return BlockModel.from_partitions(
        table,
        Partition(row_parts[p], k),
        Partition(np.array(cols, dtype=np.int64), l),
        restarts_used=space,
    )


# -- reporting ------------------------------------------------------------------

@dataclass
class BlockReport:
    """Collapsed table with margins and the shares read off it.

    ``row_share[k, l]`` is the part of row class k's mass falling in
    column class l, ``col_share[k, l]`` the part of column class l's mass
    in row class k, and ``total_share[l]`` column class l's part of the
    grand total.
    """

    confusion: np.ndarray
    row_share: np.ndarray
    col_share: np.ndarray
    total_share: np.ndarray
    row_total_share: np.ndarray
    row_names: list[str]
    col_names: list[str]
    row_members: list[list[str]]
    col_members: list[list[str]]
    chi2: float

    @property
    def row_totals(self) -> np.ndarray:
        return self.confusion.sum(axis=1)

    @property
    def col_totals(self) -> np.ndarray:
        return self.confusion.sum(axis=0)

    @property
    def total(self) -> int:
        return int(self.confusion.sum())

    def to_text(self) -> str:
        lines = [f"chi2\t{self.chi2!r}", "", "# confusion table"]
        lines.append("\t".join(["", *self.col_names, "Total"]))
        for name, row, tot in zip(self.row_names, self.confusion, self.row_totals):
            lines.append("\t".join([name, *map(str, row), str(tot)]))
        lines.append("\t".join(["Total", *map(str, self.col_totals), str(self.total)]))
        lines += ["", "# share of each row class (row %)"]
        lines.append("\t".join(["", *self.col_names]))
        for name, row in zip(self.row_names, self.row_share):
            lines.append("\t".join([name, *(f"{100 * v:.1f}" for v in row)]))
        lines += ["", "# share of each column class (column %)"]
        lines.append("\t".join(["", *self.col_names]))
        for name, row in zip(self.row_names, self.col_share):
            lines.append("\t".join([name, *(f"{100 * v:.1f}" for v in row)]))
        lines += ["", "# share of the grand total"]
        for name, v in zip(self.col_names, self.total_share):
            lines.append(f"{name}\t{100 * v:.1f}")
        for name, v in zip(self.row_names, self.row_total_share):
            lines.append(f"{name}\t{100 * v:.1f}")
        lines += ["", "# members"]
        for name, members in zip(self.row_names, self.row_members):
            lines.append(f"{name}\t{', '.join(members)}")
        for name, members in zip(self.col_names, self.col_members):
            lines.append(f"{name}\t{', '.join(members)}")
        return "\n".join(lines) + "\n"


def _share(num: np.ndarray, den: np.ndarray) -> np.ndarray:
    out = np.zeros(np.broadcast(num, den).shape)
    np.divide(num, den, out=out, where=np.broadcast_to(den, out.shape) > 0)
    return out


def block_report(
    model: BlockModel,
    table=None,
    row_prefix: str = "Period",
    col_prefix: str = "Product",
) -> BlockReport:
    m = np.asarray(model.collapsed, dtype=np.int64)
    if table is not None:
        check = collapse(table, model.row_partition, model.col_partition)
        if not np.array_equal(check, m):
            raise ValueError("model does not match the table")
    rows, cols = m.sum(axis=1), m.sum(axis=0)
    total = m.sum()
    row_labels = model.row_labels
    col_labels = model.col_labels
    if isinstance(table, ContingencyTable):
        row_labels, col_labels = table.row_labels, table.col_labels
    n_rows, n_cols = len(model.row_partition), len(model.col_partition)
    row_labels = row_labels or [str(i) for i in range(n_rows)]
    col_labels = col_labels or [str(j) for j in range(n_cols)]
    return BlockReport(
        confusion=m,
        row_share=_share(m, rows[:, None]),
        col_share=_share(m, cols[None, :]),
        total_share=_share(cols, np.asarray(total)),
        row_total_share=_share(rows, np.asarray(total)),
        row_names=[f"{row_prefix}_{i + 1}" for i in range(model.k)],
        col_names=[f"{col_prefix}_{j + 1}" for j in range(model.l)],
        row_members=[[row_labels[i] for i in c] for c in model.row_partition.classes()],
        col_members=[[col_labels[j] for j in c] for c in model.col_partition.classes()],
        chi2=float(model.chi2),
    )


# -- model file -----------------------------------------------------------------

def format_model(model: BlockModel) -> str:
    n_rows, n_cols = len(model.row_partition), len(model.col_partition)
    row_labels = model.row_labels or [str(i) for i in range(n_rows)]
    col_labels = model.col_labels or [str(j) for j in range(n_cols)]
    lines = [
        f"chi2\t{model.chi2!r}",
        f"k\t{model.k}",
        f"l\t{model.l}",
        f"iterations\t{model.iterations}",
        f"restarts\t{model.restarts_used}",
        f"best_restart\t{model.best_restart}",
        f"converged\t{int(model.converged)}",
        "[rows]",
    ]
    lines += [f"{lab}\t{c}" for lab, c in zip(row_labels, model.row_partition.assignment.tolist())]
    lines.append("[cols]")
    lines += [f"{lab}\t{c}" for lab, c in zip(col_labels, model.col_partition.assignment.tolist())]
    lines.append("[collapsed]")
    lines += ["\t".join(map(str, row)) for row in np.asarray(model.collapsed).tolist()]
    return "\n".join(lines) + "\n"


def write_model(model: BlockModel, dest: PathLike | IO[str]) -> None:
    text = format_model(model)
    if isinstance(dest, (str, Path)):
        with open(dest, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(text)
    else:
        dest.write(text)


def read_model(source: PathLike | IO[str]) -> BlockModel:
    if isinstance(source, (str, Path)):
        with open(source, encoding="utf-8") as fh:
            text = fh.read()
    else:
        text = source.read()
    lines = [ln for ln in text.split("\n") if ln]
    try:
        head = dict(ln.split("\t", 1) for ln in lines[: lines.index("[rows]")])
        i_rows, i_cols, i_coll = lines.index("[rows]"), lines.index("[cols]"), lines.index("[collapsed]")
        rows = [ln.rsplit("\t", 1) for ln in lines[i_rows + 1:i_cols]]
        cols = [ln.rsplit("\t", 1) for ln in lines[i_cols + 1:i_coll]]
        collapsed = np.array(
            [[int(x) for x in ln.split("\t")] for ln in lines[i_coll + 1:]], dtype=np.int64
        ).reshape(int(head["k"]), int(head["l"]))
        return BlockModel(
            row_partition=Partition(np.array([int(c) for _, c in rows], dtype=np.int64), int(head["k"])),
            col_partition=Partition(np.array([int(c) for _, c in cols], dtype=np.int64), int(head["l"])),
            collapsed=collapsed,
            chi2=float(head["chi2"]),
            iterations=int(head["iterations"]),
            restarts_used=int(head["restarts"]),
            best_restart=int(head.get("best_restart", 0)),
            converged=bool(int(head.get("converged", 1))),
            row_labels=[lab for lab, _ in rows],
            col_labels=[lab for lab, _ in cols],
        )
    except (KeyError, ValueError) as exc:
        raise ValueError(f"malformed model file: {exc}") from None


def random_partition(n: int, k: int, rng: np.random.Generator) -> Partition:
    return Partition(rng.integers(0, k, n), k)
