import csv
import json
import os
from collections.abc import Iterable, Mapping, Sequence
from tempfile import NamedTemporaryFile
from typing import Any, Callable

import numpy as np

from .settings import Settings

# Формат чисел для плотных матриц: достаточно для точного восстановления double.
MATRIX_NUMBER_FORMAT = "%.17g"


def encode_numpy(obj: Any) -> Any:
    """
    Переводит объекты numpy в типы, которые понимает модуль json.
    """
    match obj:
        case np.ndarray():
            return obj.tolist()
        case np.integer():
            return int(obj)
        case np.floating():
            return float(obj)
        case np.bool_():
            return bool(obj)
        case _:
            raise TypeError(f"Объект типа {type(obj).__name__} не сериализуется.")


class ResultStore:
    """
    Класс для абстракции доступа к файлам с результатами одного запуска:
    JSON-сводкам, CSV-таблицам и матрицам в плотном текстовом формате.
    """

    def __init__(self, run_dir: str | None = None):
        """
        Создаёт объект ResultStore и директорию для результатов. Если путь не
        указан, используется корневая директория результатов из конфигурации.
        """
        self.run_dir = run_dir or Settings().RESULTS_PATH
        os.makedirs(self.run_dir, exist_ok=True)

    def path(self, file_name: str) -> str:
        return os.path.join(self.run_dir, file_name)

    def load(
        self,
        file_name: str,
        decode_func: Callable | None = None,
        default_func: Callable = dict,
    ) -> Any:
        """
        Загружает данные из указанного JSON файла. Для декодирования словарей в
        объекты используется функция `decode_func`. Если файл не найден, то
        возвращаемый объект создаётся переданной функцией.

        Args:
            file_name (str): Имя файла, из которого загружаются данные.
            decode_func (Callable, optional): Функция, которая преобразует
            словарь в определённый объект.
            default_func (Callable, optional): Функция, которая конструирует
            значение, возвращаемое если файл не найден.

        Returns:
            Объект, полученный в результате декодирования JSON файла.
        """
        try:
            with open(self.path(file_name), "r", encoding="utf-8") as json_file:
                return json.load(json_file, object_hook=decode_func)
        except FileNotFoundError:
            return default_func()

    def save(
        self,
        file_name: str,
        data,
        encode_func: Callable | None = None,
        use_temp_file: bool = True,
    ):
        """
        Сохраняет объект в JSON файл. Объекты numpy переводятся в списки и
        числа, остальные - функцией `encode_func`.

        Args:
            file_name (str): Имя файла, в который данные сохранятся.
            data: Объект, который требуется сохранить.
            encode_func (Callable, optional): Функция, которая преобразует
            объект в словарь.
            use_temp_file (bool, optional): Писать во временный файл и затем
            заменять им файл назначения.
        """

        def default(obj):
            if encode_func is not None:
                encoded = encode_func(obj)
                if encoded is not obj:
                    return encoded
            return encode_numpy(obj)

        args = {"default": default, "ensure_ascii": False, "indent": 4}
        self._write(file_name, lambda f: json.dump(data, f, **args), use_temp_file)

    def save_csv(
        self,
        file_name: str,
        columns: Sequence[str],
        rows: Iterable[Sequence[Any]],
        header: Mapping[str, Any] | None = None,
    ):
        """
        Сохраняет таблицу в CSV. Строки заголовка `header` записываются в начало
        файла как комментарии `# ключ=значение`.
        """

        def write(csv_file):
            for key, value in (header or {}).items():
                csv_file.write(f"# {key}={value}\n")
            writer = csv.writer(csv_file, lineterminator="\n")
            writer.writerow(columns)
            for row in rows:
                writer.writerow(_format_csv_cell(cell) for cell in row)

        self._write(file_name, write, use_temp_file=True)

    def save_matrices(self, file_name: str, matrices: Mapping[str, Any]):
        """
        Сохраняет набор матриц в плотном текстовом формате: для каждой матрицы
        строка `# имя строки столбцы`, затем по одной строке на строку матрицы.
        """

        def write(text_file):
            for name, matrix in matrices.items():
                if matrix is None:
                    continue
                data = np.atleast_2d(np.asarray(matrix, dtype=float))
                rows, cols = data.shape
                text_file.write(f"# {name} {rows} {cols}\n")
                for row in data:
                    text_file.write(
                        " ".join(MATRIX_NUMBER_FORMAT % value for value in row) + "\n"
                    )

        self._write(file_name, write, use_temp_file=True)

    def load_matrices(self, file_name: str) -> dict[str, np.ndarray]:
        """
        Загружает матрицы, сохранённые методом `save_matrices`.

        Raises:
            ValueError: Если файл повреждён.
        """
        result = {}
        with open(self.path(file_name), "r", encoding="utf-8") as text_file:
            lines = [line.strip() for line in text_file if line.strip()]

        i = 0
        while i < len(lines):
            match lines[i].split():
                case ["#", name, rows, cols]:
                    rows, cols = int(rows), int(cols)
                    body = lines[i + 1 : i + 1 + rows]
                    values = [[float(v) for v in line.split()] for line in body]
                    matrix = np.array(values, dtype=float).reshape(rows, cols)
                    result[name] = matrix
                    i += 1 + rows
                case _:
                    raise ValueError(f"Неверная строка в файле матриц: {lines[i]}")
        return result

    def _write(self, file_name: str, write: Callable, use_temp_file: bool):
        file_path = self.path(file_name)
        if use_temp_file:
            with NamedTemporaryFile(
                "w", encoding="utf-8", delete=False, dir=self.run_dir
            ) as temp_file:
                write(temp_file)
                temp_file_path = temp_file.name
            os.replace(temp_file_path, file_path)
        else:
            with open(file_path, "w", encoding="utf-8") as out_file:
                write(out_file)


def _format_csv_cell(cell: Any) -> Any:
    match cell:
        case float() | np.floating():
            return MATRIX_NUMBER_FORMAT % cell
        case _:
            return cell
