import tomllib
from dataclasses import dataclass
from typing import Any

PYPROJECT_FILE_PATH = "pyproject.toml"
TOOL = "tool"
SECTION = "robust_observer"


class SingletonMeta(type):
    """
    Метакласс для создания классов, которые могут иметь только один экземпляр.
    Реализация через метакласс удобна из-за простоты: класс описывается
    как обычно, нужно только указать metaclass в определении.
    """

    _instances = {}

    def __call__(cls, *args, **kwargs):
        """
        Создаёт только один экземпляр класса, который использует этот метакласс
        в определении.
        """
        if cls not in cls._instances:
            instance = super().__call__(*args, **kwargs)
            cls._instances[cls] = instance
        return cls._instances[cls]


class SettingsLoader(metaclass=SingletonMeta):
    """
    Класс для доступа к конфигурации. Создаётся только один раз (синглтон).

    Attributes:
        file_path (str): Путь к файлу конфигурации.
    """

    def __init__(self, file_path: str = PYPROJECT_FILE_PATH) -> None:
        self._settings = {}
        self.file_path = file_path
        self.reload()

    def reload(self):
        """
        Загружает конфигурацию из файла. Отсутствующий файл или секция
        означают, что используются значения по умолчанию.
        """
        try:
            with open(self.file_path, "rb") as settings_file:
                data = tomllib.load(settings_file)
            self._settings = data[TOOL][SECTION]
        except (FileNotFoundError, KeyError):
            self._settings = {}

    def get(self, key: str, default: Any = ...) -> Any:
        """
        Возвращает значение конфигурации по ключу.

        Args:
            key (str): Ключ конфигурации, значение для которого нужно получить.
            default (Any, optional): Значение по умолчанию, если ключ не найден.

        Returns:
            Any: Значение конфигурации.
        """
        if default is Ellipsis:
            return self._settings[key]
        return self._settings.get(key, default)


@dataclass
class Settings:
    RESULTS_PATH: str
    LOG_PATH: str
    LOG_FORMAT: str
    LOG_LEVEL: str
    SOLVER: str
    FALLBACK_SOLVERS: tuple[str, ...]
    SOLVER_TOLERANCE: float
    EPS_FEAS: float
    EPS_LAMBDA: float
    EPS_G: float
    GAMMA_SQ_CAP: float
    INFEASIBILITY_RESIDUAL: float
    VERIFICATION_TOLERANCE: float
    VALIDATION_SAMPLES: int
    SCREENING_SAMPLES: int
    SEED: int

    def __init__(self):
        settings = SettingsLoader()
        self.RESULTS_PATH = settings.get("results_path", "results/")
        self.LOG_PATH = settings.get("log_path", "logs/")
        self.LOG_FORMAT = settings.get("log_format", "text")
        self.LOG_LEVEL = settings.get("log_level", "INFO")
        self.SOLVER = settings.get("solver", "CLARABEL")
        self.FALLBACK_SOLVERS = tuple(settings.get("fallback_solvers", ["SCS"]))
        self.SOLVER_TOLERANCE = float(settings.get("solver_tolerance", 1e-8))
        self.EPS_FEAS = float(settings.get("eps_feas", 1e-7))
        self.EPS_LAMBDA = float(settings.get("eps_lambda", 1e-8))
        self.EPS_G = float(settings.get("eps_g", 1e-4))
        self.GAMMA_SQ_CAP = float(settings.get("gamma_sq_cap", 1e6))
        self.INFEASIBILITY_RESIDUAL = float(
            settings.get("infeasibility_residual", 1e-6)
        )
        self.VERIFICATION_TOLERANCE = float(
            settings.get("verification_tolerance", 0.01)
        )
        self.VALIDATION_SAMPLES = int(settings.get("validation_samples", 200))
        self.SCREENING_SAMPLES = int(settings.get("screening_samples", 64))
        self.SEED = int(settings.get("seed", 0))
