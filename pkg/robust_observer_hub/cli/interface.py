import shlex
from enum import IntEnum, StrEnum

from robust_observer_hub.core import (
    ConfigError,
    DampingSearchError,
    InfeasibleError,
    RunConfig,
    SimulationError,
    SolverError,
    UserError,
    cmd_damping,
    cmd_montecarlo,
    cmd_synthesize,
    cmd_table,
    cmd_validate,
)


class Command(StrEnum):
    QUIT = "quit"
    SYNTHESIZE = "synthesize"
    VALIDATE = "validate"
    MONTECARLO = "montecarlo"
    DAMPING = "damping"
    TABLE = "table"
    HELP = "help"


class Argument(StrEnum):
    CONFIG = "--config"
    PLANT = "--plant"
    FORMULATION = "--formulation"
    MULTIPLIER = "--multiplier"
    ALPHA = "--alpha"
    EPS_G = "--eps-g"
    SAMPLES = "--samples"
    SEED = "--seed"
    OUTPUT = "--output"
    GAIN_FROM = "--gain-from"
    GAMMA = "--gamma"
    SHIFT = "--shift"
    RUNS = "--runs"
    T_FINAL = "--t-final"
    DT = "--dt"


class ExitCode(IntEnum):
    OK = 0
    FAILURE = 1
    CONFIG = 2
    SOLVER = 3
    INFEASIBLE = 4


# Ключи RunConfig.load, соответствующие параметрам командной строки
OVERRIDE_KEYS = {
    Argument.PLANT: "plant",
    Argument.FORMULATION: "formulation",
    Argument.MULTIPLIER: "multiplier",
    Argument.ALPHA: "alpha",
    Argument.EPS_G: "eps_g",
    Argument.SAMPLES: "samples",
    Argument.SEED: "seed",
    Argument.OUTPUT: "output",
    Argument.GAIN_FROM: "gain_from",
    Argument.GAMMA: "gamma",
    Argument.SHIFT: "shift",
    Argument.RUNS: "runs",
    Argument.T_FINAL: "t_final",
    Argument.DT: "dt",
}

DESIGN_ARGS = (
    "--plant       - mck, quaternion или путь к JSON файлу модели (по умолчанию mck)",
    "--formulation - nominal, blkdiag или finsler (по умолчанию finsler)",
    "--multiplier  - d-scalar, d-full, dg-scalar или dg-full (по умолчанию d-scalar)",
    "--alpha       - демпфирование α ≥ 0 или search (по умолчанию для модели)",
    "--eps-g       - запас обратимости G22 (по умолчанию 1e-4)",
    "--config      - файл конфигурации TOML",
    "--seed        - зерно генератора",
    "--output      - корневая директория результатов",
)

COMMANDS_REFERENCE = {
    Command.SYNTHESIZE: (
        "Синтез коэффициента наблюдателя с проверкой сертификата.",
        ("[параметры]",),
        DESIGN_ARGS,
        (
            "--plant mck --formulation finsler --multiplier d-scalar",
            "--plant quaternion --formulation blkdiag --multiplier dg-scalar "
            "--alpha 0.15",
            "--config run.toml --alpha search",
        ),
    ),
    Command.VALIDATE: (
        "Проверка коэффициента на замороженных значениях неопределённости.",
        ("--gain-from <файл> --gamma <число> [параметры]",),
        (
            "--gain-from - файл result.json синтеза (без него выполняется синтез)",
            "--gamma     - проверяемая граница (по умолчанию γ_ver из файла)",
            "--samples   - число точек, включая вершины (по умолчанию 200)",
            "--shift     - сдвиг системы A - αI (по умолчанию для модели)",
            *DESIGN_ARGS,
        ),
        (
            "--plant mck --gain-from results/synthesize-mck-blkdiag-d-full/"
            "result.json --gamma 0.897 --samples 200",
        ),
    ),
    Command.MONTECARLO: (
        "Моделирование наблюдателя методом Монте-Карло.",
        ("[параметры]",),
        (
            "--runs      - число прогонов (по умолчанию 50)",
            "--t-final   - горизонт моделирования, с",
            "--dt        - шаг интегрирования, с",
            "--gain-from - файл result.json синтеза",
            *DESIGN_ARGS,
        ),
        (
            "--plant quaternion --formulation blkdiag --multiplier dg-scalar "
            "--runs 50",
        ),
    ),
    Command.DAMPING: (
        "Поиск параметра демпфирования α.",
        ("[параметры]",),
        (
            "--shift - сдвиг системы при вычислении γ_actual (по умолчанию 0)",
            *DESIGN_ARGS,
        ),
        ("--plant quaternion --formulation blkdiag --multiplier dg-scalar",),
    ),
    Command.TABLE: (
        "Воспроизведение таблицы сравнения постановок.",
        ("<1|2> [--config <файл>] [--output <директория>]",),
        ("1 - кватернион (α = 0.15), 2 - система масса-пружина-демпфер (α = 0)",),
        ("1", "2 --output results/"),
    ),
    Command.HELP: ("Показывает справку о команде.", ("<команда>",), "", ""),
    Command.QUIT: ("Выход из программы.", "", "", ""),
}

ALL_COMMANDS = {c.value for c in Command}
ALL_ARGUMENTS = {a.value for a in Argument}


def print_help():
    print("\nДоступные команды:\n")
    for command, description in COMMANDS_REFERENCE.items():
        print(f"   {command:<12}   {description[0]}")

    print("\nДля получения информации о команде, введите:\n")
    print("   help <команда>")


def print_command_reference(command: str):
    if command not in ALL_COMMANDS:
        print(f"Неизвестная команда: {command}")
        return

    description, usage, args, examples = COMMANDS_REFERENCE[Command(command)]

    if description:
        print(f"\n{description}")

    if usage:
        print("\nИспользование:\n")
        for item in usage:
            print(f"   {command} {item}")

    if args:
        print("\nПараметры:\n")
        for arg in args:
            print(f"   {arg}")

    if examples:
        print("\nПример:\n")
        for example in examples:
            print(f"   {command} {example}")


def parse_options(args: list[str]) -> dict[Argument, str]:
    """
    Разбирает пары `--параметр значение`.

    Raises:
        ConfigError: Если параметр неизвестен, повторён или не имеет значения.
    """
    options = {}
    rest = list(args)
    while rest:
        match rest:
            case [flag, value, *tail] if flag in ALL_ARGUMENTS:
                if Argument(flag) in options:
                    raise ConfigError(f"параметр '{flag}' указан дважды")
                options[Argument(flag)] = value
                rest = tail
            case [flag] if flag in ALL_ARGUMENTS:
                raise ConfigError(f"не указано значение параметра '{flag}'")
            case [flag, *_]:
                raise ConfigError(f"неизвестный параметр '{flag}'")
    return options


def build_config(args: list[str]) -> RunConfig:
    """
    Создаёт конфигурацию запуска из файла `--config` и остальных параметров.
    """
    options = parse_options(args)
    config_path = options.pop(Argument.CONFIG, None)
    overrides = {OVERRIDE_KEYS[flag]: value for flag, value in options.items()}
    return RunConfig.load(config_path, overrides)


def handle_command(parts: list[str]):
    """
    Обрабатывает разобранную команду.

    Args:
        parts (list[str]): Команда и её параметры.

    Raises:
        ConfigError: Если команда или параметры некорректны.
    """
    match parts:
        case [Command.SYNTHESIZE, *args]:
            cmd_synthesize(build_config(args))
        case [Command.VALIDATE, *args]:
            cmd_validate(build_config(args))
        case [Command.MONTECARLO, *args]:
            cmd_montecarlo(build_config(args))
        case [Command.DAMPING, *args]:
            cmd_damping(build_config(args))
        case [Command.TABLE, ("1" | "2") as which, *args]:
            cmd_table(int(which), build_config(args))
        case [Command.TABLE, *_]:
            raise ConfigError("укажите номер таблицы: 1 или 2")
        case [Command.HELP]:
            print_help()
        case [Command.HELP, cmd]:
            print_command_reference(cmd)
        case [Command.QUIT]:
            pass
        case _:
            raise ConfigError("неизвестная команда, введите help для справки")


def execute(parts: list[str]) -> ExitCode:
    """
    Выполняет команду и переводит исключения в код завершения.

    Returns:
        ExitCode: 0 - успех, 2 - конфигурация, 3 - решатель,
        4 - несовместность, 1 - прочие ошибки.
    """
    try:
        handle_command(parts)
    except ConfigError as e:
        print(e)
        return ExitCode.CONFIG
    except (InfeasibleError, DampingSearchError) as e:
        print(e)
        return ExitCode.INFEASIBLE
    except SolverError as e:
        print(f"Ошибка решателя: {e}")
        return ExitCode.SOLVER
    except SimulationError as e:
        print(e)
        return ExitCode.FAILURE
    except UserError as e:
        print(e)
        return ExitCode.CONFIG
    except Exception as e:
        print(f"Произошла непредвиденная ошибка: {e}")
        return ExitCode.FAILURE
    return ExitCode.OK


def get_command() -> str:
    """
    Запрашивает команду у пользователя и возвращает её в виде строки.

    Returns:
        str: Пользовательская команда.
    """

    try:
        while not (user_input := input("\n> ")):
            pass
        return user_input
    except (KeyboardInterrupt, EOFError):
        return Command.QUIT


def run(argv: list[str] | None = None) -> int:
    """
    Выполняет команду из аргументов командной строки. Без аргументов
    запускает интерактивный цикл: запрашивает команды у пользователя и
    выполняет их.

    Returns:
        int: Код завершения.
    """
    if argv:
        return int(execute(list(argv)))

    print_help()

    while (command := get_command()) != Command.QUIT:
        try:
            parts = shlex.split(command)
        except ValueError:
            print("Не удаётся разобрать команду. Проверьте кавычки.")
            continue
        execute(parts)

    return int(ExitCode.OK)
