#!/usr/bin/env python3
"""
Experiment orchestration for spectra: chunked parallel runs, checkpoints,
resumption, the seed ledger and report rendering.

This is the only module that touches the filesystem. Trials are split into
fixed-size chunks that are evaluated in a process pool and merged in chunk
order, so a result never depends on the number of workers.
"""

import csv
import hashlib
import io
import json
import os
import struct
import time
from concurrent.futures import ProcessPoolExecutor, as_completed
from dataclasses import dataclass, replace
from pathlib import Path
from typing import Any, Dict, List, Optional, Tuple

from tqdm import tqdm

from config import ConfigError, ExperimentConfig, changed_keys
from experiments import CSV_FIELDS, Chunk, StatRecord, Tally, calibration_id, get_experiment, plan_chunks
from logging_config import get_logger


CHECKPOINT_MAGIC = b"SPCK"
CHECKPOINT_VERSION = 1
RESULT_VERSION = 1
REPORT_FORMATS = ("csv", "json", "plotdata")
TAIL_PREFIX = "smin_tail[t="


class HarnessError(RuntimeError):
    """Custom exception for failed runs and unreadable result files"""
    pass


class CheckpointError(HarnessError):
    """Custom exception for missing, truncated or corrupted checkpoints"""
    pass


class ConfigMismatchError(HarnessError):
    """Custom exception for resuming a checkpoint under a different configuration"""
    pass


class ReportFormatError(HarnessError):
    """Custom exception for a report format that does not exist or does not fit the result"""
    pass


def canonical_json(data: Any) -> str:
    """Sorted-key JSON with a trailing newline; equal data gives equal bytes."""
    return json.dumps(data, sort_keys=True, indent=2) + "\n"


@dataclass
class RunResult:
    """
    Outcome of a run. Wall-clock time and worker count are not part of it so
    that the file is identical for any worker count; they go to the
    ``<out>.timing.json`` sidecar.
    """

    config: Dict[str, Any]
    records: List[StatRecord]
    ledger: Dict[str, Any]
    status: str = "complete"
    completed_chunks: int = 0
    total_chunks: int = 0

    @property
    def passed(self) -> bool:
        return all(record.passed is not False for record in self.records)

    @property
    def failures(self) -> List[StatRecord]:
        return [record for record in self.records if record.passed is False]

    def to_dict(self) -> Dict[str, Any]:
        return {
            "version": RESULT_VERSION,
            "config": self.config,
            "status": self.status,
            "completed_chunks": self.completed_chunks,
            "total_chunks": self.total_chunks,
            "records": [record.to_dict() for record in self.records],
            "ledger": self.ledger,
        }

    def to_json(self) -> str:
        return canonical_json(self.to_dict())

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> "RunResult":
        try:
            return cls(
                config=data["config"],
                records=[StatRecord.from_dict(r) for r in data["records"]],
                ledger=data["ledger"],
                status=data.get("status", "complete"),
                completed_chunks=int(data.get("completed_chunks", 0)),
                total_chunks=int(data.get("total_chunks", 0)),
            )
        except (KeyError, TypeError, ValueError) as e:
            raise HarnessError(f"malformed result record: {e}")


# ---------------------------------------------------------------------------
# Checkpoints
# ---------------------------------------------------------------------------

def _frame(payload: Dict[str, Any]) -> bytes:
    body = json.dumps(payload, sort_keys=True, separators=(",", ":")).encode("utf-8")
    return struct.pack(">I", len(body)) + body


def write_checkpoint(path: str, config: ExperimentConfig, partials: Dict[int, Dict[str, Any]], total_chunks: int):
    """
    Write header and chunk partials atomically.

    Layout: magic ``SPCK``, one version byte, length-prefixed JSON records
    (header first, then chunk partials by index), SHA-256 of everything
    before it.
    """
    buffer = bytearray(CHECKPOINT_MAGIC)
    buffer += struct.pack(">B", CHECKPOINT_VERSION)
    buffer += _frame({"config": config.to_dict(), "total_chunks": total_chunks})
    for index in sorted(partials):
        buffer += _frame(partials[index])
    buffer += hashlib.sha256(bytes(buffer)).digest()

    target = Path(path)
    target.parent.mkdir(parents=True, exist_ok=True)
    temporary = target.with_name(target.name + ".tmp")
    with open(temporary, "wb") as f:
        f.write(bytes(buffer))
        f.flush()
        os.fsync(f.fileno())
    os.replace(temporary, target)


def read_checkpoint(path: str) -> Tuple[Dict[str, Any], Dict[int, Dict[str, Any]]]:
    """
    Read and verify a checkpoint.

    Returns:
        (header, partials by chunk index)

    Raises:
        CheckpointError: If the file is missing, truncated, of another
            version or fails its checksum
    """
    try:
        data = Path(path).read_bytes()
    except FileNotFoundError:
        raise CheckpointError(f"checkpoint '{path}' not found")
    if len(data) < len(CHECKPOINT_MAGIC) + 1 + 32 or data[:4] != CHECKPOINT_MAGIC:
        raise CheckpointError(f"'{path}' is not a spectra checkpoint")
    body, checksum = data[:-32], data[-32:]
    if hashlib.sha256(body).digest() != checksum:
        raise CheckpointError(f"checkpoint '{path}' failed its checksum")
    version = body[4]
    if version != CHECKPOINT_VERSION:
        raise CheckpointError(f"checkpoint '{path}' has version {version}, expected {CHECKPOINT_VERSION}")

    records = []
    offset = 5
    while offset < len(body):
        if offset + 4 > len(body):
            raise CheckpointError(f"checkpoint '{path}' ends inside a record header")
        (length,) = struct.unpack(">I", body[offset:offset + 4])
        offset += 4
        if offset + length > len(body):
            raise CheckpointError(f"checkpoint '{path}' ends inside a record")
        try:
            records.append(json.loads(body[offset:offset + length].decode("utf-8")))
        except (UnicodeDecodeError, json.JSONDecodeError) as e:
            raise CheckpointError(f"checkpoint '{path}' holds an unreadable record: {e}")
        offset += length
    if not records or "config" not in records[0]:
        raise CheckpointError(f"checkpoint '{path}' has no header record")
    return records[0], {int(r["index"]): r for r in records[1:]}


def checkpoint_path_for(config: ExperimentConfig) -> Optional[str]:
    return f"{config.output_path}.ckpt" if config.output_path else None


# ---------------------------------------------------------------------------
# Running
# ---------------------------------------------------------------------------

def _run_chunk(config: ExperimentConfig, chunk: Chunk) -> Dict[str, Any]:
    """Worker entry point; module-level so the pool can pickle it."""
    return get_experiment(config.experiment).run_chunk(config, chunk)


def _ledger(config: ExperimentConfig, partials: Dict[int, Dict[str, Any]], chunks: List[Chunk]) -> Dict[str, Any]:
    kernel = get_experiment(config.experiment)
    entries = []
    for chunk in chunks:
        if chunk.index not in partials:
            continue
        entries.append({
            "index": chunk.index,
            "trials": [chunk.start, chunk.stop],
            "streams": kernel.stream_ranges(chunk),
            "digest": partials[chunk.index]["digest"],
        })
    return {
        "seed": config.model.seed,
        "stream_unit": kernel.stream_unit,
        "chunk_size": config.chunk_size,
        "chunks": entries,
    }


def assemble(config: ExperimentConfig, partials: Dict[int, Dict[str, Any]]) -> RunResult:
    """Merge partials in chunk order and finalize the records."""
    kernel = get_experiment(config.experiment)
    chunks = plan_chunks(config.trials, config.chunk_size)
    complete = all(chunk.index in partials for chunk in chunks)
    tally = Tally()
    for chunk in chunks:
        if chunk.index in partials:
            tally = tally.merge(Tally.from_dict(partials[chunk.index]["tally"]))
    records = kernel.finalize(config, tally) if complete else []
    return RunResult(
        config=config.identity(),
        records=records,
        ledger=_ledger(config, partials, chunks),
        status="complete" if complete else "partial",
        completed_chunks=len(partials),
        total_chunks=len(chunks),
    )


def write_result(result: RunResult, path: str):
    target = Path(path)
    target.parent.mkdir(parents=True, exist_ok=True)
    target.write_text(result.to_json())


def write_timing(path: str, wall_clock: float, workers: int, chunks_run: int, trials_run: int):
    sidecar = Path(f"{path}.timing.json")
    sidecar.write_text(canonical_json({
        "wall_clock_seconds": round(wall_clock, 6),
        "workers": workers,
        "chunks_run": chunks_run,
        "trials_run": trials_run,
    }))


def _execute(
    config: ExperimentConfig,
    kernel: Any,
    chunks: List[Chunk],
    partials: Dict[int, Dict[str, Any]],
    pending: List[Chunk],
    checkpoint_path: Optional[str],
    progress: bool,
) -> RunResult:
    logger = get_logger("harness")
    logger.operation_start(
        f"{config.experiment}: n={config.model.n}, p={config.model.p:.6g}, beta={config.model.beta}",
        trials=config.trials, chunks=len(chunks), pending=len(pending), workers=config.workers,
    )
    started = time.perf_counter()
    since_checkpoint = 0

    def record(partial: Dict[str, Any]):
        nonlocal since_checkpoint
        partials[int(partial["index"])] = partial
        since_checkpoint += 1
        if checkpoint_path and since_checkpoint >= config.checkpoint_every:
            write_checkpoint(checkpoint_path, config, partials, len(chunks))
            since_checkpoint = 0

    try:
        with tqdm(total=len(pending), unit="chunk", desc=config.experiment, disable=not progress) as bar:
            if config.workers == 1 or len(pending) <= 1:
                for chunk in pending:
                    record(kernel.run_chunk(config, chunk))
                    bar.update(1)
            else:
                with ProcessPoolExecutor(max_workers=config.workers) as pool:
                    futures = [pool.submit(_run_chunk, config, chunk) for chunk in pending]
                    for future in as_completed(futures):
                        record(future.result())
                        bar.update(1)
    except BaseException:
        if checkpoint_path and partials:
            try:
                write_checkpoint(checkpoint_path, config, partials, len(chunks))
                logger.user_warning(f"Run interrupted; {len(partials)}/{len(chunks)} chunks saved to {checkpoint_path}")
            except OSError as e:
                logger.user_error(f"Could not save checkpoint: {e}")
        raise

    elapsed = time.perf_counter() - started
    if checkpoint_path:
        write_checkpoint(checkpoint_path, config, partials, len(chunks))

    result = assemble(config, partials)
    trials_run = sum(chunk.size for chunk in pending)
    logger.performance_log(
        f"run:{config.experiment}", elapsed, workers=config.workers, chunks_run=len(pending),
        trials_run=trials_run, trials_per_second=trials_run / elapsed if elapsed > 0 else None,
    )
    if config.output_path:
        write_result(result, config.output_path)
        write_timing(config.output_path, elapsed, config.workers, len(pending), trials_run)
    logger.operation_complete(
        f"{config.experiment}", records=len(result.records), failures=len(result.failures),
    )
    return result


def run(
    config: ExperimentConfig,
    resume_partials: Optional[Dict[int, Dict[str, Any]]] = None,
    checkpoint_path: Optional[str] = None,
    progress: bool = True,
) -> RunResult:
    """
    Run an experiment to completion.

    Args:
        config: Validated configuration
        resume_partials: Chunk partials recovered from a checkpoint
        checkpoint_path: Where to checkpoint; defaults to ``<out>.ckpt``
        progress: Show a tqdm bar over chunks

    Returns:
        RunResult; also written to ``config.output_path`` when set

    Raises:
        ConfigError: If the kernel cannot run this configuration
        OSError: If writing results or checkpoints fails (the checkpoint of
            the completed chunks is written first when possible)
    """
    logger = get_logger("harness")
    kernel = get_experiment(config.experiment)
    kernel.validate(config)
    checkpoint_path = checkpoint_path or checkpoint_path_for(config)

    chunks = plan_chunks(config.trials, config.chunk_size)
    partials: Dict[int, Dict[str, Any]] = dict(resume_partials or {})
    pending = [chunk for chunk in chunks if chunk.index not in partials]

    with logger.run_context(
        experiment=config.experiment, n=config.model.n, p=config.model.p,
        beta=config.model.beta, seed=config.model.seed,
    ):
        return _execute(config, kernel, chunks, partials, pending, checkpoint_path, progress)


def resume(
    checkpoint_path: str,
    invocation: Optional[ExperimentConfig] = None,
    workers: Optional[int] = None,
    progress: bool = True,
) -> RunResult:
    """
    Continue an interrupted run from its checkpoint.

    Args:
        checkpoint_path: Checkpoint written by ``run``
        invocation: Configuration of the resuming command, if any; it must
            agree with the checkpoint on every result-determining key
        workers: Worker count for the remaining chunks

    Raises:
        CheckpointError: If the checkpoint is unreadable
        ConfigMismatchError: If ``invocation`` differs from the checkpoint
    """
    logger = get_logger("harness")
    header, partials = read_checkpoint(checkpoint_path)
    try:
        stored = ExperimentConfig.from_dict(header["config"])
    except ConfigError as e:
        raise CheckpointError(f"checkpoint '{checkpoint_path}' holds an invalid configuration: {e}")

    if invocation is not None:
        differing = list(changed_keys(stored, invocation))
        if differing:
            raise ConfigMismatchError(
                f"configuration differs from checkpoint in: {', '.join(differing)}"
            )
    overrides = {}
    if workers is not None:
        overrides["workers"] = workers
    elif invocation is not None:
        overrides["workers"] = invocation.workers
    if overrides:
        data = stored.to_dict()
        data.update(overrides)
        stored = ExperimentConfig.from_dict(data)

    total = int(header.get("total_chunks", len(plan_chunks(stored.trials, stored.chunk_size))))
    if len(partials) >= total:
        logger.user_info(f"Checkpoint {checkpoint_path} is already complete ({total} chunks); nothing to run.")
        result = assemble(stored, partials)
        if stored.output_path:
            write_result(result, stored.output_path)
        return result

    logger.user_info(f"Resuming {stored.experiment}: {len(partials)}/{total} chunks already done")
    return run(stored, resume_partials=partials, checkpoint_path=checkpoint_path, progress=progress)


def replay_ledger(result: RunResult) -> List[int]:
    """
    Re-draw every chunk of a result and compare the sample digests.

    Returns:
        Indices of chunks whose digest does not match (empty when the ledger
        reproduces)
    """
    data = dict(result.config)
    data.setdefault("workers", 1)
    config = ExperimentConfig.from_dict(data)
    kernel = get_experiment(config.experiment)
    mismatches = []
    for entry in result.ledger.get("chunks", []):
        start, stop = entry["trials"]
        chunk = Chunk(int(entry["index"]), int(start), int(stop))
        if kernel.replay_digest(config, chunk) != entry["digest"]:
            mismatches.append(chunk.index)
    if mismatches:
        get_logger("harness").user_warning(f"Ledger replay mismatch in chunks {mismatches}")
    return mismatches


# ---------------------------------------------------------------------------
# Reports
# ---------------------------------------------------------------------------

def load_result(path: str) -> RunResult:
    """
    Read a result file.

    Raises:
        OSError: If the file cannot be read
        HarnessError: If it is not a result file
    """
    text = Path(path).read_text()
    try:
        data = json.loads(text)
    except json.JSONDecodeError as e:
        raise HarnessError(f"'{path}' is not valid JSON: {e}")
    if not isinstance(data, dict):
        raise HarnessError(f"'{path}' is not a result file")
    return RunResult.from_dict(data)


def calibrated_config(config: ExperimentConfig, calibration: RunResult) -> ExperimentConfig:
    """
    Take c_norm from a norm-calibration result, flagged ``calibrated:<run id>``.

    Raises:
        ConfigError: If the result is not a complete norm-calibration run
    """
    if calibration.config.get("experiment") != "norm-calibration" or calibration.status != "complete":
        raise ConfigError("--calibration needs the result of a complete norm-calibration run")
    values = [r.empirical for r in calibration.records if r.name == "c_norm_calibrated"]
    if not values:
        raise ConfigError("the calibration result has no c_norm_calibrated record")
    constants = config.constants.calibrated("c_norm", values[0], calibration_id(calibration.config))
    get_logger("harness").user_info(f"c_norm = {values[0]:.6g} ({constants.provenance['c_norm']})")
    return replace(config, constants=constants)


def _cell(value: Any) -> str:
    if value is None:
        return ""
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        return repr(value)
    return str(value)


def render_csv(result: RunResult) -> str:
    buffer = io.StringIO()
    writer = csv.writer(buffer, lineterminator="\n")
    writer.writerow(CSV_FIELDS)
    for record in result.records:
        row = record.to_dict()
        writer.writerow([_cell(row[name]) for name in CSV_FIELDS])
    return buffer.getvalue()


def render_plotdata(result: RunResult) -> str:
    """
    (x, y, yerr) rows of the t-grid tail statistics.

    Raises:
        ReportFormatError: If the result has no t-grid statistics
    """
    tail = [r for r in result.records if r.name.startswith(TAIL_PREFIX)]
    if not tail:
        raise ReportFormatError("plotdata needs a t-grid experiment (smin-tail) result")
    grid = result.config.get("t_grid") or [float(r.name[len(TAIL_PREFIX):-1]) for r in tail]
    lines = ["x,y,yerr"]
    for t, r in zip(grid, tail):
        lines.append(f"{_cell(float(t))},{_cell(r.empirical)},{_cell(r.stderr)}")
    return "\n".join(lines) + "\n"


def report(results_path: str, fmt: str) -> str:
    """
    Render a result file as csv, json or plotdata.

    Raises:
        ReportFormatError: If the format is unknown
        HarnessError: If the file is not a result
        OSError: If the file cannot be read
    """
    if fmt not in REPORT_FORMATS:
        raise ReportFormatError(f"unknown report format '{fmt}', expected one of {REPORT_FORMATS}")
    result = load_result(results_path)
    if fmt == "csv":
        return render_csv(result)
    if fmt == "json":
        return result.to_json()
    return render_plotdata(result)


def summarize(result: RunResult):
    """Print a verdict table of a result on the console."""
    logger = get_logger("harness")
    config = result.config
    model = config.get("model", {})
    logger.report_section(f"{config.get('experiment', '?')} (n={model.get('n')}, p={model.get('p')}, beta={model.get('beta')})")
    for record in result.records:
        verdict = {True: "PASS", False: "FAIL", None: "-"}[record.passed]
        details = f"{record.empirical:.6g} ± {record.stderr:.2g}"
        if record.prediction is not None:
            details += f"  prediction {record.prediction:.6g}"
        if record.bound is not None:
            details += f"  bound {record.bound:.6g}"
        logger.report_item(f"[{verdict}] {record.name}", details, prefix="  ")
    if result.status != "complete":
        logger.user_warning(f"Result is partial: {result.completed_chunks}/{result.total_chunks} chunks")
    elif result.passed:
        logger.user_success("All checked statistics pass")
    else:
        logger.user_error(f"{len(result.failures)} statistic(s) fail their tolerance")
