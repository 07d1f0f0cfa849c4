"""Post-clustering refinement: split clusters that hide several message
types behind one structure, and merge clusters that describe the same type.

Splitting looks for an alignment column whose few distinct values are all
frequent; such a column acts as a type discriminator and the cluster is
partitioned by its value.  Merging abstracts each cluster's alignment into
a sequence of field classes (static value, dynamic, gap), aligns the class
sequences of cluster pairs, and merges transitively whenever every aligned
column pair is compatible.
"""

from __future__ import annotations

import json
import math
from collections import Counter
from dataclasses import dataclass, field
from enum import Enum

import numpy as np

from .align import AlignmentTable, _traceback, progressive_align_cluster
from .cluster import NOISE, ClusterSet
from .dissim import SegmentDissimilarityMatrix
from .model import AnalysisConfig
from .segmenter import Segmentation


class FieldClassKind(Enum):
    STATIC = "STATIC"
    DYNAMIC = "DYNAMIC"
    GAP = "GAP"


@dataclass(frozen=True)
class FieldClass:
    """Abstracted class of one alignment column.

    STATIC columns hold one identical value in every row and carry it in
    ``value``; GAP columns contain at least one gap cell; everything else
    is DYNAMIC.  ``observed`` lists the distinct non-gap values, which the
    merge rules inspect.
    """

    kind: FieldClassKind
    value: bytes | None = None
    observed: tuple[bytes, ...] = field(default=())

    @property
    def zero_only(self) -> bool:
        """True when every observed value consists solely of zero bytes."""
        return bool(self.observed) and all(set(v) == {0} for v in self.observed)


def abstract_structure(table: AlignmentTable) -> list[FieldClass]:
    """One field class per alignment column."""
    structure = []
    for col in range(table.n_columns):
        cells = table.column(col)
        values = [cell.data for cell in cells if cell is not None]
        distinct = tuple(sorted(set(values)))
        if len(values) < len(cells):
            structure.append(FieldClass(FieldClassKind.GAP, observed=distinct))
        elif len(distinct) == 1:
            structure.append(FieldClass(FieldClassKind.STATIC, value=distinct[0], observed=distinct))
        else:
            structure.append(FieldClass(FieldClassKind.DYNAMIC, observed=distinct))
    return structure


def find_distinguishing_field(table: AlignmentTable) -> int | None:
    """Leftmost column that discriminates message types, if any.

    A column qualifies when it has no gaps, at least two distinct values,
    and all value counts exceed the frequency threshold floor(ln(cluster
    size)) which in turn is at least the number of distinct values.
    """
    size = len(table.rows)
    if size < 2:
        return None
    threshold = math.floor(math.log(size))
    for col in range(table.n_columns):
        cells = table.column(col)
        if any(cell is None for cell in cells):
            continue
        counts = Counter(cell.data for cell in cells)
        if len(counts) < 2:
            continue
        if min(counts.values()) > threshold >= len(counts):
            return col
    return None


def split_cluster(table: AlignmentTable) -> list[AlignmentTable]:
    """Partition a cluster by the value of its distinguishing column.

    Sub-clusters inherit the parent alignment restricted to their rows and
    appear in first-occurrence order of the column value.  Without a
    distinguishing column the cluster is returned unchanged.
    """
    col = find_distinguishing_field(table)
    if col is None:
        return [table]
    groups: dict[bytes, list[int]] = {}
    for mid, row in zip(table.message_ids, table.rows):
        groups.setdefault(row[col].data, []).append(mid)
    return [table.restricted_to(ids) for ids in groups.values()]


def _compatible(a: FieldClass | None, b: FieldClass | None) -> bool:
    """Merge compatibility of one aligned column pair; None is an alignment
    gap introduced while aligning the two structures."""
    if a is None or b is None:
        return True
    if a.kind is FieldClassKind.GAP or b.kind is FieldClassKind.GAP:
        return True
    if a.kind is FieldClassKind.STATIC and b.kind is FieldClassKind.STATIC:
        if a.value == b.value:
            return True
    if a.kind is FieldClassKind.DYNAMIC and b.kind is FieldClassKind.DYNAMIC:
        return True
    if a.zero_only or b.zero_only:
        return True
    if a.kind is FieldClassKind.STATIC and b.kind is FieldClassKind.DYNAMIC:
        return a.value in b.observed
    if b.kind is FieldClassKind.STATIC and a.kind is FieldClassKind.DYNAMIC:
        return b.value in a.observed
    return False


def _structure_key(structure: list[FieldClass]):
    return (
        len(structure),
        tuple((c.kind.value, c.value or b"", c.observed) for c in structure),
    )


def mergeable(a: AlignmentTable, b: AlignmentTable, cfg: AnalysisConfig) -> bool:
    """Whether two clusters exhibit a compatible structure.

    The abstracted structures are aligned (compatible column pairs score 1,
    incompatible 0, gaps -1); the clusters merge when every aligned column
    pair is compatible.  Arguments are ordered canonically so the decision
    is symmetric.
    """
    sa = abstract_structure(a)
    sb = abstract_structure(b)
    if _structure_key(sb) < _structure_key(sa):
        sa, sb = sb, sa
    sim_rows = [[1.0 if _compatible(ca, cb) else 0.0 for cb in sb] for ca in sa]
    pairs = _traceback(sim_rows, -1.0)
    return all(
        _compatible(sa[i] if i is not None else None, sb[j] if j is not None else None)
        for i, j in pairs
    )


def merge_clusters(
    tables: list[AlignmentTable],
    segmentation: Segmentation,
    matrix: SegmentDissimilarityMatrix,
    message_matrix: np.ndarray,
    cfg: AnalysisConfig,
) -> list[AlignmentTable]:
    """Merge all transitively compatible clusters.

    Merged groups are re-aligned around the medoid of the union; clusters
    without a merge partner keep their alignment.
    """
    n = len(tables)
    parent = list(range(n))

    def find(x: int) -> int:
        while parent[x] != x:
            parent[x] = parent[parent[x]]
            x = parent[x]
        return x

    for i in range(n):
        for j in range(i + 1, n):
            if find(i) != find(j) and mergeable(tables[i], tables[j], cfg):
                parent[find(j)] = find(i)

    groups: dict[int, list[int]] = {}
    for i in range(n):
        groups.setdefault(find(i), []).append(i)

    merged = []
    for root in sorted(groups):
        members = groups[root]
        if len(members) == 1:
            merged.append(tables[members[0]])
            continue
        ids = sorted(mid for t in members for mid in tables[t].message_ids)
        merged.append(
            progressive_align_cluster(
                ids, segmentation, matrix, message_matrix, cfg, cluster_label=tables[root].cluster_label
            )
        )
    return merged


def refine(
    clusterset: ClusterSet,
    tables: list[AlignmentTable],
    segmentation: Segmentation,
    matrix: SegmentDissimilarityMatrix,
    message_matrix: np.ndarray,
    cfg: AnalysisConfig,
) -> tuple[ClusterSet, list[AlignmentTable]]:
    """Split every cluster once, then merge compatible clusters.

    Noise assignments are untouched.  Final clusters are relabelled 0..K-1
    in order of their smallest message id.
    """
    split: list[AlignmentTable] = []
    for table in tables:
        split.extend(split_cluster(table))
    merged = merge_clusters(split, segmentation, matrix, message_matrix, cfg)

    merged.sort(key=lambda t: min(t.message_ids))
    labels = np.full(len(clusterset.labels), NOISE, dtype=np.int64)
    relabelled = []
    for new_label, table in enumerate(merged):
        for mid in table.message_ids:
            labels[mid] = new_label
        relabelled.append(
            AlignmentTable(cluster_label=new_label, message_ids=table.message_ids, rows=table.rows)
        )
    refined = ClusterSet(
        labels=labels,
        epsilon_used=clusterset.epsilon_used,
        k_chosen=clusterset.k_chosen,
        noise_count=int(np.sum(labels == NOISE)),
    )
    return refined, relabelled


def structure_as_json(structure: list[FieldClass]) -> list[dict]:
    out = []
    for c in structure:
        entry = {"class": c.kind.value}
        if c.kind is FieldClassKind.STATIC and c.value is not None:
            entry["value"] = c.value.hex()
        out.append(entry)
    return out


def write_structures_json(tables: list[AlignmentTable], path) -> None:
    """Per-cluster abstracted structures as JSON."""
    doc = [
        {"label": t.cluster_label, "structure": structure_as_json(abstract_structure(t))}
        for t in tables
    ]
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(doc, fh, indent=1)
        fh.write("\n")
