"""
Comparison Matrix Operations
Validation, empirical probabilities, thresholding, pair records, histograms
and the CSV matrix format.

File format (one row per unordered pair):

    # format: picniq-matrix/1
    # items: id1,id2,...
    id_a,id_b,wins_a,wins_b
"""

import csv
import io
import logging
from pathlib import Path
from typing import Optional, Union

import numpy as np
from scipy.sparse import csr_matrix
from scipy.sparse.csgraph import connected_components as _csgraph_components

from picniq.errors import DuplicatePairError, MatrixFormatError, UnknownItemError
from picniq.models.matrix import ComparisonMatrix, MatrixSummary, PairRecord
from picniq.seeding import substream


logger = logging.getLogger(__name__)

MATRIX_FORMAT = "picniq-matrix/1"
ITEMS_PREFIX = "# items:"
FORMAT_PREFIX = "# format:"


def validate(matrix: ComparisonMatrix) -> list[str]:
    """
    List every invariant violation of a comparison matrix.

    Args:
        matrix: The matrix to check

    Returns:
        Violation messages; an empty list means the matrix is valid
    """
    violations: list[str] = []
    counts = matrix.counts
    n = matrix.n

    if counts.shape != (n, n):
        violations.append(
            f"dimension mismatch: counts shape {counts.shape} for {n} item ids"
        )
        return violations

    if len(set(matrix.item_ids)) != n:
        violations.append("duplicate item ids")
    for item_id in matrix.item_ids:
        if not item_id or "," in item_id:
            violations.append(f"invalid item id {item_id!r}")

    if not np.all(np.isfinite(counts)):
        for i, j in zip(*np.nonzero(~np.isfinite(counts))):
            violations.append(f"non-finite count at ({i},{j})")

    for i in np.nonzero(np.diag(counts) != 0)[0]:
        violations.append(
            f"nonzero diagonal at ({i},{i}) [{matrix.item_ids[i]}]: {counts[i, i]}"
        )
    for i, j in zip(*np.nonzero(counts < 0)):
        violations.append(
            f"negative count at ({i},{j}) [{matrix.item_ids[i]},{matrix.item_ids[j]}]: {counts[i, j]}"
        )
    return violations


def empirical_probability(matrix: ComparisonMatrix, i: int, j: int) -> Optional[float]:
    """
    Empirical probability that item i is preferred over item j.

    The canonical (lower index first) orientation is computed and the reverse
    is its complement, so p_ij + p_ji == 1 exactly.

    Returns:
        c_ij / n_ij, or None when the pair was never compared

    Raises:
        IndexError: If i or j is out of range
        ValueError: If i == j
    """
    n = matrix.n
    if not (0 <= i < n and 0 <= j < n):
        raise IndexError(f"pair ({i}, {j}) out of range for {n} items")
    if i == j:
        raise ValueError("empirical probability needs two distinct items")

    lo, hi = min(i, j), max(i, j)
    total = matrix.counts[lo, hi] + matrix.counts[hi, lo]
    if total <= 0:
        return None
    p_lo = float(matrix.counts[lo, hi] / total)
    return p_lo if i == lo else 1.0 - p_lo


def threshold_filter(matrix: ComparisonMatrix, min_n: float) -> ComparisonMatrix:
    """
    Zero every pair compared fewer than min_n times.

    Pairs with n_ij == min_n are kept.
    """
    if min_n < 0:
        raise ValueError(f"min_n must be non-negative, got {min_n}")
    totals = matrix.totals()
    counts = np.where(totals < min_n, 0.0, matrix.counts)
    removed = int(np.count_nonzero(np.triu((totals > 0) & (totals < min_n), k=1)))
    if removed:
        logger.debug(f"threshold {min_n} removed {removed} pairs")
    return matrix.with_counts(counts)


def with_prior(matrix: ComparisonMatrix, pseudocount: float) -> ComparisonMatrix:
    """Add a pseudocount to both directions of every observed pair."""
    if pseudocount < 0:
        raise ValueError(f"pseudocount must be non-negative, got {pseudocount}")
    observed = matrix.totals() > 0
    return matrix.with_counts(matrix.counts + pseudocount * observed)


def to_pair_records(matrix: ComparisonMatrix, order_seed: int) -> list[PairRecord]:
    """
    One record per observed unordered pair, orientation drawn from the seed.

    Exactly one random draw is consumed per observed pair, in canonical order,
    so the set of unordered pairs never depends on the seed.
    """
    rng = substream(order_seed, "pair-orientation")
    records: list[PairRecord] = []
    for i, j in matrix.observed_pairs():
        record = PairRecord.from_wins(
            i, j, matrix.counts[i, j], matrix.counts[j, i],
            matrix.item_ids[i], matrix.item_ids[j]
        )
        if rng.random() < 0.5:
            record = record.flipped()
        records.append(record)
    return records


def probability_histogram(matrix: ComparisonMatrix, bins: int) -> np.ndarray:
    """
    Histogram of canonical p_ij (i < j) over observed pairs.

    Bins are equal-width on [0, 1], half-open [k/B, (k+1)/B) with the last
    bin closed so that p = 1 is counted.
    """
    if bins < 1:
        raise ValueError(f"bins must be >= 1, got {bins}")
    probabilities = [
        empirical_probability(matrix, i, j) for i, j in matrix.observed_pairs()
    ]
    counts, _ = np.histogram(np.asarray(probabilities, dtype=np.float64), bins=bins, range=(0.0, 1.0))
    return counts


def connected_components(matrix: ComparisonMatrix) -> list[list[str]]:
    """
    Components of the comparison graph (edges are pairs with n_ij > 0).

    Components are ordered by their first item index; items inside a
    component keep matrix order.
    """
    if matrix.n == 0:
        return []
    graph = csr_matrix(matrix.totals() > 0)
    _, labels = _csgraph_components(graph, directed=False)
    grouped: dict[int, list[str]] = {}
    for index, label in enumerate(labels):
        grouped.setdefault(int(label), []).append(matrix.item_ids[index])
    return list(grouped.values())


def summarize(matrix: ComparisonMatrix) -> MatrixSummary:
    """Sparsity profile: density, forced-choice share, neighbor share, components."""
    pairs = matrix.observed_pairs()
    n = matrix.n
    possible = n * (n - 1) // 2
    forced = sum(
        1 for i, j in pairs if empirical_probability(matrix, i, j) in (0.0, 1.0)
    )
    neighbors = sum(1 for i, j in pairs if j - i == 1)
    observed = len(pairs)
    return MatrixSummary(
        n_items=n,
        observed_pairs=observed,
        density=observed / possible if possible else 0.0,
        total_comparisons=matrix.total_comparisons(),
        forced_choice_fraction=forced / observed if observed else 0.0,
        neighbor_fraction=neighbors / observed if observed else 0.0,
        components=len(connected_components(matrix)),
    )


def _format_count(value: float) -> str:
    value = float(value)
    if value.is_integer():
        return str(int(value))
    # repr is the shortest string that round-trips the float exactly
    return repr(value)


def dumps_matrix(matrix: ComparisonMatrix) -> str:
    """Serialize a matrix to the CSV text format."""
    buffer = io.StringIO()
    buffer.write(f"{FORMAT_PREFIX} {MATRIX_FORMAT}\n")
    buffer.write(f"{ITEMS_PREFIX} {','.join(matrix.item_ids)}\n")
    writer = csv.writer(buffer, lineterminator="\n")
    for i, j in matrix.observed_pairs():
        writer.writerow([
            matrix.item_ids[i], matrix.item_ids[j],
            _format_count(matrix.counts[i, j]), _format_count(matrix.counts[j, i])
        ])
    return buffer.getvalue()


def save_matrix(matrix: ComparisonMatrix, path: Union[str, Path]) -> None:
    """
    Write a matrix in the CSV format.

    Raises:
        MatrixFormatError: If the matrix is invalid and cannot be written faithfully
    """
    violations = validate(matrix)
    if violations:
        raise MatrixFormatError(f"refusing to save invalid matrix: {violations[:3]}")
    Path(path).write_text(dumps_matrix(matrix), encoding="utf-8")
    logger.debug(f"saved {matrix.n}-item matrix to {path}")


def _parse_count(text: str, line_number: int) -> float:
    try:
        value = float(text)
    except ValueError:
        raise MatrixFormatError(f"count {text!r} is not a number", line_number)
    if not np.isfinite(value) or value < 0:
        raise MatrixFormatError(f"count {text!r} must be finite and non-negative", line_number)
    return value


def loads_matrix(text: str) -> ComparisonMatrix:
    """
    Parse the CSV text format.

    Raises:
        MatrixFormatError: Malformed header or row (with line number)
        UnknownItemError: Row referencing an undeclared id
        DuplicatePairError: Same unordered pair listed twice
    """
    item_ids: Optional[list[str]] = None
    index: dict[str, int] = {}
    counts: Optional[np.ndarray] = None
    seen: set[tuple[int, int]] = set()

    for line_number, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line:
            continue
        if line.startswith(ITEMS_PREFIX):
            if item_ids is not None:
                raise MatrixFormatError("second items header", line_number)
            item_ids = [token.strip() for token in line[len(ITEMS_PREFIX):].split(",")]
            if any(not token for token in item_ids):
                raise MatrixFormatError("empty id in items header", line_number)
            if len(set(item_ids)) != len(item_ids):
                raise MatrixFormatError("duplicate id in items header", line_number)
            index = {item_id: k for k, item_id in enumerate(item_ids)}
            counts = np.zeros((len(item_ids), len(item_ids)))
            continue
        if line.startswith("#"):
            continue
        if item_ids is None or counts is None:
            raise MatrixFormatError("data row before '# items:' header", line_number)

        fields = next(csv.reader([line]))
        if len(fields) != 4:
            raise MatrixFormatError(f"expected 4 fields, got {len(fields)}", line_number)
        id_a, id_b = fields[0].strip(), fields[1].strip()
        for item_id in (id_a, id_b):
            if item_id not in index:
                raise UnknownItemError(f"unknown id {item_id!r}", line_number)
        a, b = index[id_a], index[id_b]
        if a == b:
            raise MatrixFormatError(f"self-comparison row for {id_a!r}", line_number)
        key = (min(a, b), max(a, b))
        if key in seen:
            raise DuplicatePairError(f"duplicate pair entry ({id_a}, {id_b})", line_number)
        seen.add(key)
        counts[a, b] = _parse_count(fields[2].strip(), line_number)
        counts[b, a] = _parse_count(fields[3].strip(), line_number)

    if item_ids is None or counts is None:
        raise MatrixFormatError("missing '# items:' header")
    return ComparisonMatrix(item_ids=tuple(item_ids), counts=counts)


def load_matrix(path: Union[str, Path]) -> ComparisonMatrix:
    """Read a matrix file; see loads_matrix for errors."""
    matrix = loads_matrix(Path(path).read_text(encoding="utf-8"))
    logger.debug(f"loaded {matrix.n}-item matrix from {path}")
    return matrix
