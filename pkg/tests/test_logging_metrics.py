import json
import logging
import sys
import time
from pathlib import Path

sys.path.insert(0, str(Path(__file__).resolve().parents[1]))

from reliable_rates.logging import JsonFormatter, configure_logging
from reliable_rates.metrics import Gauge, Timer, constraint_stalls_total


def test_json_logging_structure(monkeypatch, capsys):
    monkeypatch.setenv("LOG_FORMAT", "json")
    configure_logging()
    logging.getLogger(__name__).info(
        "sample",
        extra={
            "event_type": "chain_done",
            "chain": "restricted:white|2010",
            "stratum": "white",
            "year": 2010,
            "acceptance_rate": 0.41,
            "stall_count": 2,
            "elapsed_ms": 1.2,
        },
    )
    captured = capsys.readouterr().err.strip().splitlines()[-1]
    data = json.loads(captured)
    assert data["event_type"] == "chain_done"
    assert data["chain"] == "restricted:white|2010"
    for key in ["stratum", "year", "iteration", "acceptance_rate", "stall_count", "elapsed_ms"]:
        assert key in data
    assert data["iteration"] is None


def test_json_formatter_keeps_stall_fields():
    record = logging.makeLogRecord(
        {
            "msg": "constraint_stall",
            "levelname": "DEBUG",
            "event_type": "constraint_stall",
            "chain": "restricted:black|2012",
            "stratum": "black",
            "year": 2012,
            "parameter": "tau2",
            "stall_count": 3,
        }
    )
    data = json.loads(JsonFormatter().format(record))
    assert data["parameter"] == "tau2"
    assert (data["stratum"], data["year"], data["stall_count"]) == ("black", 2012, 3)


def test_plain_logging_is_the_default(monkeypatch, capsys):
    monkeypatch.delenv("LOG_FORMAT", raising=False)
    configure_logging("debug")
    logging.getLogger("reliable_rates.test").debug("plain_event")
    line = capsys.readouterr().err.strip().splitlines()[-1]
    assert "DEBUG" in line and "plain_event" in line
    assert not line.startswith("{")


def test_counter_gauge_and_timer_update():
    constraint_stalls_total.value = 0
    constraint_stalls_total.inc()
    constraint_stalls_total.inc(3)
    assert constraint_stalls_total.value == 4
    gauge = Gauge()
    gauge.set(2)
    assert gauge.value == 2
    timer = Timer()
    with timer.time():
        time.sleep(0.001)
    assert timer.last_ms is not None and timer.last_ms > 0
    assert Timer().stop() is None
