import json
import logging
from logging.handlers import RotatingFileHandler

import pytest

from robust_observer_hub.core import RunConfig
from robust_observer_hub.core.exceptions import ConfigError
from robust_observer_hub.decorators import log_action
from robust_observer_hub.logging_config import (
    JsonRecordFormatter,
    actions_logger,
    setup_logger,
)


class ListHandler(logging.Handler):
    def __init__(self):
        super().__init__()
        self.messages = []

    def emit(self, record):
        self.messages.append((record.levelname, record.getMessage()))


@pytest.fixture
def audit():
    handler = ListHandler()
    actions_logger.addHandler(handler)
    yield handler.messages
    actions_logger.removeHandler(handler)


def make_record(message: str) -> logging.LogRecord:
    return logging.LogRecord("solver", logging.WARNING, "", 0, message, None, None)


def test_json_formatter_wraps_plain_messages():
    line = JsonRecordFormatter().format(make_record("Решатель SCS не установлен"))
    entry = json.loads(line)
    assert entry["level"] == "WARNING"
    assert entry["logger"] == "solver"
    assert entry["message"] == "Решатель SCS не установлен"


def test_json_formatter_keeps_audit_entries():
    line = '{"action": "CMD_SYNTHESIZE", "status": "OK"}'
    assert JsonRecordFormatter().format(make_record(line)) == line


def test_setup_logger_adds_handler_once():
    logger = setup_logger("solver")
    assert setup_logger("solver") is logger
    file_handlers = [h for h in logger.handlers if isinstance(h, RotatingFileHandler)]
    assert len(file_handlers) == 1


def test_log_action_records_config_and_context(audit):
    @log_action(verbose=True)
    def cmd_demo(config, *, context=None):
        context["gamma_syn"] = 0.5
        return 1

    assert cmd_demo(RunConfig(plant="mck", formulation="nominal")) == 1
    level, message = audit[-1]
    assert level == "INFO"
    assert message.startswith("CMD_DEMO")
    assert "plant='mck'" in message
    assert "gamma_syn=" in message
    assert message.endswith("OK")


def test_log_action_reraises_errors(audit):
    @log_action()
    def cmd_broken(config):
        raise ConfigError("неверный ключ")

    with pytest.raises(ConfigError):
        cmd_broken(RunConfig())
    level, message = audit[-1]
    assert level == "ERROR"
    assert "error_type='ConfigError'" in message
    assert message.endswith("ERROR")
