from collections.abc import Callable, Iterable
from datetime import datetime
from importlib import metadata

import numpy as np

PACKAGE_NAME = "robust-observer-hub"


class MaxWidth:
    """
    Рассчитывает максимальную ширину отформатированного значения для вывода на экран
    с использованием указанной функции преобразования значения в строку.
    """

    def __init__(self, formatter: Callable = str, iterable: Iterable | None = None):
        self.max_width = 0
        self.formatter = formatter

        if iterable is not None:
            for value in iterable:
                self.update(value)

    def update(self, value):
        width = len(self.formatter(value))
        self.max_width = max(self.max_width, width)

    def __int__(self):
        return self.max_width


def format_gamma(gamma: float | None, width: int = 0) -> str:
    """
    Форматирует границу H∞ нормы. Значения порядка 1e-3 (пример с
    кватернионом) выводятся с четырьмя значащими цифрами.

    Args:
        gamma (float or None): Значение границы.
        width (int, optional): Общее количество символов.

    Returns:
        str: Отформатированная строка.
    """
    if gamma is None or not np.isfinite(gamma):
        return f"{'-':>{width}}"
    return f"{gamma:{width}.4g}"


def format_scalar(value: float, width: int = 0) -> str:
    """
    Форматирует вещественный параметр (α, невязки, числа обусловленности).
    """
    return f"{value:{width}.3e}"


def format_matrix(matrix: np.ndarray, indent: str = "   ") -> str:
    """
    Форматирует матрицу построчно для вывода на экран.
    """
    rows = np.atleast_2d(matrix)
    width = MaxWidth(lambda v: f"{v:.6g}", rows.ravel())
    return "\n".join(
        indent + " ".join(f"{v:>{int(width)}.6g}" for v in row) for row in rows
    )


def relative_deviation(value: float, reference: float) -> float:
    """
    Относительное отклонение значения от эталона.
    """
    if reference == 0:
        return abs(value)
    return abs(value - reference) / abs(reference)


def make_rng(seed: int, index: int | None = None) -> np.random.Generator:
    """
    Создаёт генератор случайных чисел. Для независимых прогонов генератор
    выводится из пары (seed, номер прогона), поэтому результат не зависит
    от порядка выполнения.
    """
    if index is None:
        return np.random.default_rng(seed)
    return np.random.default_rng([seed, index])


def artifact_version() -> str:
    """
    Возвращает версию установленного пакета.
    """
    try:
        return metadata.version(PACKAGE_NAME)
    except metadata.PackageNotFoundError:
        return "1.0.0"


def format_datetime_iso(datetime: datetime) -> str:
    """
    Форматирует значение `datetime` с точностью до секунды в формате ISO.

    Args:
        datetime (datetime): Объект `datetime`.

    Returns:
        str: Строковое представление объекта `datetime`.
    """
    return datetime.isoformat(timespec="seconds")
