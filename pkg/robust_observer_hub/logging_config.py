import json
import logging
import os
from datetime import datetime, timezone
from enum import StrEnum
from logging.handlers import RotatingFileHandler

from robust_observer_hub.infra import Settings


class LogFormat(StrEnum):
    JSON = "json"
    Text = "text"


LOG_LEVEL = logging.getLevelNamesMapping().get(
    Settings().LOG_LEVEL.upper(), logging.INFO
)
LOG_FORMAT = LogFormat(Settings().LOG_FORMAT)
LOG_BACKUP_COUNT = 5
# 2 MiB
LOG_MAX_SIZE = 2 * 1024 * 1024
TEXT_FORMAT = "%(levelname)s %(asctime)s %(message)s"
DATE_FORMAT = "%Y-%m-%dT%H:%M:%S%z"


class JsonRecordFormatter(logging.Formatter):
    """
    Форматирует запись как одну строку JSON. Записи аудита уже приходят
    в виде JSON и выводятся как есть, а сообщения решателей оборачиваются
    в объект с уровнем, временем и именем журнала.
    """

    def format(self, record: logging.LogRecord) -> str:
        message = record.getMessage()
        if message.startswith("{"):
            return message
        entry = {
            "level": record.levelname,
            "timestamp": datetime.fromtimestamp(record.created, timezone.utc)
            .isoformat(timespec="seconds"),
            "logger": record.name,
            "message": message,
        }
        return json.dumps(entry, ensure_ascii=False)


def make_formatter(log_format: LogFormat = LOG_FORMAT) -> logging.Formatter:
    if log_format == LogFormat.JSON:
        return JsonRecordFormatter()
    return logging.Formatter(TEXT_FORMAT, datefmt=DATE_FORMAT)


def setup_logger(name: str) -> logging.Logger:
    """
    Создаёт журнал `<log_path>/<name>.log` с ротацией файлов.

    Повторный вызов с тем же именем не добавляет второй обработчик.
    """
    settings = Settings()
    logger = logging.getLogger(f"robust_observer.{name}")
    logger.setLevel(LOG_LEVEL)
    logger.propagate = False
    if logger.handlers:
        return logger

    os.makedirs(settings.LOG_PATH, exist_ok=True)
    file_handler = RotatingFileHandler(
        os.path.join(settings.LOG_PATH, f"{name}.log"),
        maxBytes=LOG_MAX_SIZE,
        backupCount=LOG_BACKUP_COUNT,
        encoding="utf-8",
    )
    file_handler.setFormatter(make_formatter())
    logger.addHandler(file_handler)
    return logger


# вызовы SDP-решателей, бисекции и диагностика релаксации
solver_logger = setup_logger("solver")
# аудит команд (@log_action)
actions_logger = setup_logger("actions")
