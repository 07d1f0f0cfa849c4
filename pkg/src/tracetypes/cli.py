"""Command-line frontend running the inference pipeline end to end or one
stage at a time from serialized intermediates.

Artifacts written into the output directory:

    trace.json          preprocessed trace (canonical JSON format)
    segments.json       per-message segmentation
    segment_matrix.csv  dissimilarity of distinct segment values
    message_matrix.csv  pairwise message dissimilarity
    clusters.csv        raw cluster label per message (-1 = noise)
    cluster_meta.json   chosen epsilon and k
    refined_clusters.csv  final labels after split/merge refinement
    alignment_<L>.csv   per-cluster alignment tables (hex cells or GAP)
    structures.json     per-cluster abstracted field classes
    report.json/.csv    quality report

Exit codes: 0 ok, 2 input error, 3 configuration or degenerate trace,
4 I/O error.
"""

from __future__ import annotations

import argparse
import glob
import json
import os
import sys
from dataclasses import dataclass

import numpy as np

from . import align, cluster, dissim, evaluation, ingest, refinement, segmenter
from .errors import (
    ConfigurationError,
    DegenerateTraceError,
    EmptyTraceError,
    MissingGroundTruthError,
    StageDependencyError,
    TraceFormatError,
    UnsupportedInputError,
)
from .model import AnalysisConfig

EXIT_OK = 0
EXIT_INPUT = 2
EXIT_CONFIG = 3
EXIT_IO = 4

STAGES = ("ingest", "segment", "dissim", "align", "cluster", "refine", "report")


@dataclass
class RunSpec:
    """Everything one pipeline run needs."""

    input_path: str | None
    input_format: str | None  # "pcap" | "json"
    segmenter: str  # "fixed4" | "boundaries" | "refined"
    out_dir: str
    config: AnalysisConfig
    chunk_len: int = 4
    port: int | None = None
    epsilon: float | None = None  # manual override; skips autoconfiguration
    workers: int = 1


def _artifact(spec: RunSpec, name: str) -> str:
    return os.path.join(spec.out_dir, name)


def _require(spec: RunSpec, name: str) -> str:
    path = _artifact(spec, name)
    if not os.path.exists(path):
        raise StageDependencyError(f"missing artifact {path}; run the earlier stages first")
    return path


def _load_trace(spec: RunSpec) -> ingest.Trace:
    return ingest.read_trace_json(_require(spec, "trace.json"))


def _load_segmentation(spec: RunSpec, trace: ingest.Trace) -> segmenter.Segmentation:
    with open(_require(spec, "segments.json"), "r", encoding="utf-8") as fh:
        doc = json.load(fh)
    segmentation = []
    for entry, message in zip(doc["messages"], trace.messages):
        segs = [
            segmenter.Segment(message.id, off, message.data[off : off + length], bool(is_char))
            for off, length, is_char in entry["segments"]
        ]
        segmentation.append(segs)
    return segmentation


def stage_ingest(spec: RunSpec) -> ingest.Trace:
    if spec.input_path is None:
        raise StageDependencyError("the ingest stage needs --input")
    fmt = spec.input_format or _guess_format(spec.input_path)
    if fmt == "pcap":
        if spec.port is None:
            raise ConfigurationError("pcap input requires --port")
        trace = ingest.read_pcap(spec.input_path, spec.port)
    elif fmt == "json":
        trace = ingest.read_trace_json(spec.input_path)
    else:
        raise ConfigurationError(f"unknown input format {fmt!r}")
    trace = ingest.preprocess(trace, spec.config.trace_limit)
    ingest.write_trace_json(trace, _artifact(spec, "trace.json"))
    return trace


def _guess_format(path: str) -> str:
    if path.endswith(".json"):
        return "json"
    if path.endswith((".pcap", ".cap")):
        return "pcap"
    raise ConfigurationError(f"cannot guess format of {path!r}; pass --format")


def stage_segment(spec: RunSpec) -> segmenter.Segmentation:
    trace = _load_trace(spec)
    if spec.segmenter == "boundaries" and any(m.true_boundaries is None for m in trace.messages):
        raise TraceFormatError("the boundaries segmenter needs 'fields' on every message")
    segmentation = segmenter.segment_trace(trace, spec.segmenter, spec.config, spec.chunk_len)
    segmenter.check_coverage(trace, segmentation)
    doc = {
        "messages": [
            {
                "id": segs[0].message_id,
                "segments": [[s.offset, len(s.data), s.is_char] for s in segs],
            }
            for segs in segmentation
        ]
    }
    with open(_artifact(spec, "segments.json"), "w", encoding="utf-8") as fh:
        json.dump(doc, fh, indent=1)
        fh.write("\n")
    return segmentation


def stage_dissim(spec: RunSpec) -> dissim.SegmentDissimilarityMatrix:
    trace = _load_trace(spec)
    segmentation = _load_segmentation(spec, trace)
    matrix = dissim.build_segment_matrix(segmentation, spec.config)
    dissim.write_segment_matrix_csv(matrix, _artifact(spec, "segment_matrix.csv"))
    return matrix


def stage_align(spec: RunSpec):
    trace = _load_trace(spec)
    segmentation = _load_segmentation(spec, trace)
    matrix = dissim.read_segment_matrix_csv(_require(spec, "segment_matrix.csv"))
    message_matrix = align.build_message_matrix(segmentation, matrix, spec.config, spec.workers)
    align.write_message_matrix_csv(message_matrix, _artifact(spec, "message_matrix.csv"))
    return message_matrix


def stage_cluster(spec: RunSpec) -> cluster.ClusterSet:
    message_matrix = align.read_message_matrix_csv(_require(spec, "message_matrix.csv"))
    if spec.epsilon is not None:
        epsilon, k = spec.epsilon, None
    else:
        epsilon, k, _index = cluster.autoconfigure_epsilon(message_matrix, spec.config)
    clusterset = cluster.dbscan(message_matrix, epsilon, spec.config.min_samples)
    clusterset.k_chosen = k
    cluster.write_clusters_csv(clusterset, _artifact(spec, "clusters.csv"))
    with open(_artifact(spec, "cluster_meta.json"), "w", encoding="utf-8") as fh:
        json.dump({"epsilon": epsilon, "k": k, "segmenter": spec.segmenter}, fh, indent=1)
        fh.write("\n")
    return clusterset


def stage_refine(spec: RunSpec):
    trace = _load_trace(spec)
    segmentation = _load_segmentation(spec, trace)
    matrix = dissim.read_segment_matrix_csv(_require(spec, "segment_matrix.csv"))
    message_matrix = align.read_message_matrix_csv(_require(spec, "message_matrix.csv"))
    labels = cluster.read_clusters_csv(_require(spec, "clusters.csv"))
    with open(_require(spec, "cluster_meta.json"), "r", encoding="utf-8") as fh:
        meta = json.load(fh)
    clusterset = cluster.ClusterSet(
        labels=np.asarray(labels, dtype=np.int64),
        epsilon_used=meta["epsilon"],
        k_chosen=meta["k"],
        noise_count=sum(1 for x in labels if x == cluster.NOISE),
    )

    tables = [
        align.progressive_align_cluster(
            members, segmentation, matrix, message_matrix, spec.config, cluster_label=label
        )
        for label, members in enumerate(clusterset.clusters())
    ]
    refined_set, refined_tables = refinement.refine(
        clusterset, tables, segmentation, matrix, message_matrix, spec.config
    )

    cluster.write_clusters_csv(refined_set, _artifact(spec, "refined_clusters.csv"))
    for stale in glob.glob(_artifact(spec, "alignment_*.csv")):
        os.remove(stale)
    for table in refined_tables:
        align.write_alignment_csv(table, _artifact(spec, f"alignment_{table.cluster_label}.csv"))
    refinement.write_structures_json(refined_tables, _artifact(spec, "structures.json"))
    return refined_set, refined_tables


def stage_report(spec: RunSpec) -> evaluation.QualityReport:
    trace = _load_trace(spec)
    labels = cluster.read_clusters_csv(_require(spec, "refined_clusters.csv"))
    with open(_require(spec, "cluster_meta.json"), "r", encoding="utf-8") as fh:
        meta = json.load(fh)

    clusters: dict[int, list[int]] = {}
    noise = 0
    for mid, label in enumerate(labels):
        if label == cluster.NOISE:
            noise += 1
        else:
            clusters.setdefault(label, []).append(mid)
    members = [clusters[label] for label in sorted(clusters)]

    truth = None
    if all(m.true_type is not None for m in trace.messages):
        truth = {m.id: m.true_type for m in trace.messages}

    report = evaluation.build_report(
        protocol=trace.protocol_name,
        segmenter=meta["segmenter"],
        cfg=spec.config,
        epsilon=meta["epsilon"],
        k=meta["k"],
        clusters=members,
        noise=noise,
        labels=truth,
    )
    evaluation.write_report_json(report, _artifact(spec, "report.json"))
    evaluation.write_report_csv(report, _artifact(spec, "report.csv"))
    return report


def run_pipeline(spec: RunSpec) -> evaluation.QualityReport:
    """All stages in order; each stage persists its artifact, so a full run
    and a stage-by-stage run produce identical files."""
    os.makedirs(spec.out_dir, exist_ok=True)
    stage_ingest(spec)
    stage_segment(spec)
    stage_dissim(spec)
    stage_align(spec)
    stage_cluster(spec)
    stage_refine(spec)
    return stage_report(spec)


def run_stage(name: str, spec: RunSpec):
    os.makedirs(spec.out_dir, exist_ok=True)
    runner = {
        "ingest": stage_ingest,
        "segment": stage_segment,
        "dissim": stage_dissim,
        "align": stage_align,
        "cluster": stage_cluster,
        "refine": stage_refine,
        "report": stage_report,
    }.get(name)
    if runner is None:
        raise ConfigurationError(f"unknown stage {name!r}; expected one of {', '.join(STAGES)}")
    return runner(spec)


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="tracetypes",
        description="Infer message types of an unknown binary protocol from a traffic trace.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def add_common(p: argparse.ArgumentParser):
        p.add_argument("--input", help="pcap or JSON trace file")
        p.add_argument("--format", choices=["pcap", "json"], help="input format (guessed from the extension if omitted)")
        p.add_argument("--segmenter", choices=["fixed4", "boundaries", "refined"], default="fixed4")
        p.add_argument("--chunk-len", type=int, default=4, help="chunk size of the fixed segmenter")
        p.add_argument("--port", type=int, help="UDP port filter for pcap input")
        p.add_argument("--limit", type=int, default=1000, help="max messages kept after dedup")
        p.add_argument("--penalty-f", type=float, default=0.33, help="length-difference penalty steepness")
        p.add_argument("--gap-penalty", type=float, default=-1.0)
        p.add_argument("--min-samples", type=int, default=3)
        p.add_argument("--epsilon", type=float, help="manual DBSCAN epsilon (skips autoconfiguration)")
        p.add_argument("--epsilon-factor", type=float, help="scale on the auto-configured epsilon (default 0.8 for the refined segmenter, else 1.0)")
        p.add_argument("--workers", type=int, default=1, help="worker processes for the message matrix")
        p.add_argument("--out", required=True, help="output directory for artifacts")

    run_p = sub.add_parser("run", help="run the full pipeline")
    add_common(run_p)

    stage_p = sub.add_parser("stage", help="run one pipeline stage from existing artifacts")
    stage_p.add_argument("name", choices=STAGES)
    add_common(stage_p)
    return parser


def _spec_from_args(args: argparse.Namespace) -> RunSpec:
    epsilon_factor = args.epsilon_factor
    if epsilon_factor is None:
        epsilon_factor = 0.8 if args.segmenter == "refined" else 1.0
    config = AnalysisConfig(
        penalty_f=args.penalty_f,
        gap_penalty=args.gap_penalty,
        min_samples=args.min_samples,
        epsilon_factor=epsilon_factor,
        trace_limit=args.limit,
    )
    return RunSpec(
        input_path=args.input,
        input_format=args.format,
        segmenter=args.segmenter,
        out_dir=args.out,
        config=config,
        chunk_len=args.chunk_len,
        port=args.port,
        epsilon=args.epsilon,
        workers=args.workers,
    )


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    try:
        spec = _spec_from_args(args)
        if args.command == "run":
            report = run_pipeline(spec)
            print(
                f"{report.cluster_count} clusters, {report.noise} noise, "
                f"epsilon={report.epsilon:.4f}"
                + (
                    f", precision={report.precision:.3f}, recall={report.recall:.3f}"
                    if report.precision is not None
                    else ""
                )
            )
        else:
            run_stage(args.name, spec)
            print(f"stage {args.name} done")
    except (
        TraceFormatError,
        UnsupportedInputError,
        EmptyTraceError,
        MissingGroundTruthError,
        StageDependencyError,
        FileNotFoundError,
    ) as exc:
        print(f"input error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except (ConfigurationError, DegenerateTraceError) as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except OSError as exc:
        print(f"i/o error: {exc}", file=sys.stderr)
        return EXIT_IO
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
