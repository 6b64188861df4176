#!/usr/bin/env python3
"""
Test the logging framework functionality.

Console output stays short while the dated file log keeps the detail and the
structured run records.
"""

import sys
import tempfile
import json
import time
from pathlib import Path

import pytest

# Add parent directory to path for imports
sys.path.insert(0, str(Path(__file__).parent.parent))

from logging_config import get_logger, configure_logging


def test_basic_logging():
    """Test basic logging functionality"""
    print("🧪 Testing basic logging functionality...")

    with tempfile.TemporaryDirectory() as temp_dir:
        logger = get_logger("test_basic_spectra", log_dir=temp_dir)

        logger.user_info("Chunk 3 of 8 done")
        logger.user_success("All checked statistics pass")
        logger.user_warning("Result is partial")
        logger.user_error("Checkpoint failed its checksum")

        log_files = list(Path(temp_dir).glob("*.log"))
        assert len(log_files) > 0, "Log file should be created"

        log_content = log_files[0].read_text()
        assert "test_basic_spectra" in log_content
        assert "Chunk 3 of 8 done" in log_content
        assert "All checked statistics pass" in log_content

        levels = [m["level"] for m in logger.user_messages]
        assert levels == ["info", "success", "warning", "error"]

        print("✅ Basic logging test passed")


def test_structured_logging():
    """Test structured and performance records in the file log"""
    print("🧪 Testing structured logging...")

    with tempfile.TemporaryDirectory() as temp_dir:
        logger = get_logger("test_structured_spectra", log_dir=temp_dir)

        logger.structured_log("chunk", {"experiment": "smin-tail", "index": 4, "trials": [1024, 1280]})
        logger.performance_log("run:smin-tail", 1.5, workers=4, trials_run=2000)
        logger.operation_start("smin-tail: n=100", trials=2000)
        logger.operation_complete("smin-tail", failures=0)

        log_content = next(Path(temp_dir).glob("*.log")).read_text()
        records = [json.loads(line.split("STRUCTURED_LOG: ", 1)[1])
                   for line in log_content.splitlines() if "STRUCTURED_LOG: " in line]
        assert records[0]["event_type"] == "chunk"
        assert records[0]["trials"] == [1024, 1280]
        assert records[1]["event_type"] == "performance"
        assert records[1]["duration_seconds"] == 1.5
        assert records[1]["workers"] == 4
        assert records[3]["event_type"] == "operation_complete"
        assert records[3]["failures"] == 0

        print("✅ Structured logging test passed")


def test_run_context():
    """Test that the run context tags structured records only inside its block"""
    print("🧪 Testing run context...")

    with tempfile.TemporaryDirectory() as temp_dir:
        logger = get_logger("test_context_spectra", log_dir=temp_dir)

        with logger.run_context(experiment="zero-prob", seed=7):
            logger.structured_log("chunk", {"index": 0})
        logger.structured_log("chunk", {"index": 1})

        log_content = next(Path(temp_dir).glob("*.log")).read_text()
        records = [json.loads(line.split("STRUCTURED_LOG: ", 1)[1])
                   for line in log_content.splitlines() if "STRUCTURED_LOG: " in line]
        assert records[0]["experiment"] == "zero-prob" and records[0]["seed"] == 7
        assert "experiment" not in records[1]

        print("✅ Run context test passed")


def test_console_is_separate_from_stdout():
    """Test that console messages avoid stdout and keep color codes out of the file"""
    print("🧪 Testing console stream...")

    with tempfile.TemporaryDirectory() as temp_dir:
        logger = get_logger("test_stream_spectra", log_dir=temp_dir)
        console = logger.logger.handlers[0]
        assert console.stream is not sys.stdout

        logger.user_warning("partial result")
        log_content = next(Path(temp_dir).glob("*.log")).read_text()
        assert "partial result" in log_content
        assert "\033[" not in log_content

        print("✅ Console stream test passed")


def test_report_formatting():
    """Test report formatting functionality"""
    print("🧪 Testing report formatting...")

    with tempfile.TemporaryDirectory() as temp_dir:
        logger = get_logger("test_report_spectra", log_dir=temp_dir)

        logger.report_section("zero-prob (n=30, p=0.1, beta=1)")
        logger.report_item("[PASS] zero_rowcol", "0.12 ± 0.01", prefix="  ")

        log_content = next(Path(temp_dir).glob("*.log")).read_text()
        assert "zero-prob (n=30, p=0.1, beta=1)" in log_content
        assert "  [PASS] zero_rowcol: 0.12 ± 0.01" in log_content

        print("✅ Report formatting test passed")


def test_configure_logging_moves_existing_loggers():
    """Test that configure_logging re-points loggers created earlier"""
    print("🧪 Testing logging configuration...")

    with tempfile.TemporaryDirectory() as first, tempfile.TemporaryDirectory() as second:
        logger = get_logger("test_configure_spectra", log_dir=first)
        try:
            configure_logging(console_level="WARNING", log_dir=second)
            logger.debug("after reconfigure")
            assert logger.log_dir == Path(second)
            assert "after reconfigure" in next(Path(second).glob("test_configure_spectra_*.log")).read_text()
        finally:
            configure_logging()

        print("✅ Logging configuration test passed")


def test_unknown_level_rejected():
    """Test that an unknown level name is refused"""
    with pytest.raises(ValueError, match="Unknown logging level"):
        configure_logging(console_level="LOUD")


def test_performance():
    """Test logging performance doesn't significantly impact operations"""
    print("🧪 Testing logging performance...")

    with tempfile.TemporaryDirectory() as temp_dir:
        logger = get_logger("test_performance_spectra", log_dir=temp_dir)

        start_time = time.time()
        for i in range(100):
            logger.user_info(f"Message {i}")
            logger.debug(f"Debug message {i}")
        duration = time.time() - start_time

        # Should complete 100 log messages in under 1 second
        assert duration < 1.0, f"Logging too slow: {duration:.2f}s for 100 messages"

        print(f"✅ Performance test passed ({duration:.3f}s for 100 messages)")


def main():
    """Run all logging framework tests"""
    print("🧪 Testing Logging Framework")
    print("=" * 50)

    try:
        test_basic_logging()
        test_structured_logging()
        test_run_context()
        test_console_is_separate_from_stdout()
        test_report_formatting()
        test_configure_logging_moves_existing_loggers()
        test_unknown_level_rejected()
        test_performance()

        print("\n" + "=" * 50)
        print("✅ All logging framework tests passed!")

    except Exception as e:
        print(f"\n❌ Test failed: {e}")
        import traceback
        traceback.print_exc()
        sys.exit(1)


if __name__ == "__main__":
    main()
