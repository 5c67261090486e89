import os
import tomllib
from collections.abc import Mapping
from dataclasses import asdict, dataclass, field
from typing import Any

from robust_observer_hub.infra import Settings

from .damping import DampingObjective, DampingSearchConfig
from .exceptions import ConfigError
from .multipliers import MultiplierSpec
from .plants import MckConfig, PlantName, PlantSetup, QuatConfig, get_plant_setup
from .sim import SimConfig
from .synthesis import Formulation, SynthesisConfig

# Значение `alpha`, включающее поиск наименьшего совместного демпфирования
ALPHA_SEARCH = "search"

RUN_KEYS = {
    "plant": str,
    "formulation": str,
    "multiplier": str,
    "alpha": None,
    "eps_g": float,
    "samples": int,
    "seed": int,
    "output": str,
    "gain_from": str,
    "gamma": float,
    "shift": float,
}
SECTIONS = ("run", "quaternion", "mck", "sim", "damping")


def _convert(key: str, value: Any, converter) -> Any:
    try:
        return converter(value)
    except (TypeError, ValueError):
        raise ConfigError(f"неверное значение '{value}' для ключа '{key}'") from None


def _parse_alpha(value: Any) -> float | str | None:
    match value:
        case None:
            return None
        case str() if value.strip().lower() == ALPHA_SEARCH:
            return ALPHA_SEARCH
        case _:
            alpha = _convert("alpha", value, float)
            if alpha < 0:
                raise ConfigError("alpha должно быть неотрицательным")
            return alpha


@dataclass
class RunConfig:
    """
    Конфигурация запуска: секции [run], [quaternion], [mck], [sim],
    [damping] файла TOML с переопределением параметрами командной строки.
    """

    plant: str = PlantName.MCK
    formulation: Formulation = Formulation.FINSLER
    multiplier: str = "d-scalar"
    alpha: float | str | None = None
    eps_g: float = field(default_factory=lambda: Settings().EPS_G)
    samples: int = field(default_factory=lambda: Settings().VALIDATION_SAMPLES)
    seed: int = field(default_factory=lambda: Settings().SEED)
    output: str = field(default_factory=lambda: Settings().RESULTS_PATH)
    gain_from: str | None = None
    gamma: float | None = None
    shift: float | None = None
    quaternion: QuatConfig = field(default_factory=QuatConfig)
    mck: MckConfig = field(default_factory=MckConfig)
    sim: SimConfig = field(default_factory=SimConfig)
    damping: DampingSearchConfig = field(default_factory=DampingSearchConfig)

    def __post_init__(self):
        try:
            self.formulation = Formulation(self.formulation)
        except ValueError:
            raise ConfigError(
                f"неизвестная постановка '{self.formulation}', допустимы: "
                "nominal, blkdiag, finsler"
            ) from None
        self.alpha = _parse_alpha(self.alpha)
        if self.samples < 1:
            raise ConfigError("samples должно быть не меньше 1")
        if not self.eps_g > 0:
            raise ConfigError("eps_g должно быть положительным")

    @classmethod
    def load(
        cls, file_path: str | None = None, overrides: Mapping[str, Any] | None = None
    ) -> "RunConfig":
        """
        Загружает конфигурацию из файла TOML и применяет переопределения.

        Args:
            file_path (str, optional): Путь к файлу конфигурации.
            overrides (Mapping, optional): Значения из командной строки;
                ключи `runs`, `t_final`, `dt` относятся к секции [sim].

        Raises:
            ConfigError: Если файл не найден, некорректен или содержит
            неизвестные ключи и значения.
        """
        data = {}
        if file_path is not None:
            try:
                with open(file_path, "rb") as config_file:
                    data = tomllib.load(config_file)
            except FileNotFoundError:
                raise ConfigError(f"файл '{file_path}' не найден") from None
            except tomllib.TOMLDecodeError as e:
                raise ConfigError(f"файл '{file_path}' не является TOML: {e}") from None

        unknown = set(data) - set(SECTIONS)
        if unknown:
            raise ConfigError(f"неизвестные секции: {', '.join(sorted(unknown))}")

        run = dict(data.get("run", {}))
        sim = dict(data.get("sim", {}))
        for key, value in (overrides or {}).items():
            if key in ("runs", "t_final", "dt"):
                sim[key] = value
            else:
                run[key] = value

        unknown = set(run) - set(RUN_KEYS)
        if unknown:
            raise ConfigError(f"неизвестные ключи [run]: {', '.join(sorted(unknown))}")
        values = {}
        for key, value in run.items():
            converter = RUN_KEYS[key]
            if converter is not None:
                value = _convert(key, value, converter)
            values[key] = value

        seed = values.get("seed", Settings().SEED)
        try:
            return cls(
                **values,
                quaternion=QuatConfig.from_mapping(data.get("quaternion", {})),
                mck=MckConfig.from_mapping(data.get("mck", {})),
                sim=SimConfig.from_mapping(sim, seed=seed),
                damping=_damping_config(data.get("damping", {})),
            )
        except TypeError as e:
            raise ConfigError(str(e)) from None

    @property
    def plant_label(self) -> str:
        """Имя модели для директорий результатов."""
        return os.path.splitext(os.path.basename(self.plant))[0]

    def plant_setup(self) -> PlantSetup:
        return get_plant_setup(self.plant, self.quaternion, self.mck)

    def multiplier_spec(self, setup: PlantSetup) -> MultiplierSpec | None:
        if self.formulation == Formulation.NOMINAL:
            return None
        return MultiplierSpec.from_name(self.multiplier, setup.plant.unc)

    def synthesis_config(self, setup: PlantSetup, alpha: float) -> SynthesisConfig:
        return SynthesisConfig(
            self.formulation, self.multiplier_spec(setup), alpha, self.eps_g
        )

    def run_dir(self, command: str, with_design: bool = True) -> str:
        """
        Директория результатов
        `<output>/<команда>-<модель>[-<постановка>-<мультипликатор>]`.
        """
        parts = [command, self.plant_label]
        if with_design:
            parts.append(str(self.formulation))
            if self.formulation != Formulation.NOMINAL:
                parts.append(self.multiplier)
        return os.path.join(self.output, "-".join(parts))

    def to_dict(self) -> dict:
        data = asdict(self)
        data["formulation"] = str(self.formulation)
        data["damping"]["objective"] = str(self.damping.objective)
        return data


def _damping_config(data: Mapping) -> DampingSearchConfig:
    known = {"alpha_max", "tol_alpha", "objective"}
    unknown = set(data) - known
    if unknown:
        raise ConfigError(f"неизвестные ключи [damping]: {', '.join(sorted(unknown))}")
    try:
        return DampingSearchConfig(
            alpha_max=float(data.get("alpha_max", 1.0)),
            tol_alpha=float(data.get("tol_alpha", 1e-3)),
            objective=DampingObjective(data.get("objective", "gamma_actual")),
        )
    except ValueError as e:
        raise ConfigError(str(e)) from None
