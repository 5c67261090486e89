class UserError(Exception):
    """
    Базовый класс для ошибок, которые происходят из-за неверных входных данных:
    конфигурации, размерностей матриц или постановки задачи.
    """

    pass


class ConfigError(UserError):
    """
    Ошибка возникает, если конфигурация запуска или параметры командной строки
    не соответствуют схеме. Выбрасывается при разборе `RunConfig` в модуле
    `core.usecases` и в интерфейсе командной строки.
    """

    def __init__(self, message: str):
        super().__init__(f"Ошибка конфигурации: {message}")


class DimensionError(UserError):
    """
    Ошибка возникает, если размеры матриц не согласованы. Выбрасывается при
    построении объектов `StateSpace`, `LftPlant`, выражений LMI и т.д.
    """

    def __init__(self, what: str, expected, actual):
        super().__init__(
            f"Несогласованная размерность '{what}': ожидается {expected}, "
            f"получено {actual}."
        )


class WellPosednessError(UserError):
    """
    Ошибка возникает, если матрица I - D_qp·Δ вырождена, то есть обратная
    связь по неопределённости некорректна. Выбрасывается в функциях
    `close_uncertainty` и `closed_error_system` модуля `core.ss_core`.
    """

    def __init__(self, condition: float):
        super().__init__(
            "Замыкание неопределённости некорректно: матрица I - D_qp·Δ вырождена "
            f"(число обусловленности {condition:.3e})."
        )


class UnboundedNormError(UserError):
    """
    Ошибка возникает при попытке вычислить H∞ норму системы, матрица динамики
    которой не гурвицева. Выбрасывается в функции `hinf_norm` модуля
    `core.analysis`.
    """

    def __init__(self, abscissa: float):
        super().__init__(
            "H∞ норма не ограничена: спектральная абсцисса "
            f"{abscissa:.3e} не отрицательна."
        )


class InfeasibleError(UserError):
    """
    Ошибка возникает, если задача LMI несовместна и сертификат не найден.
    Выбрасывается в функции `bisect_gamma_squared` модуля `core.lmi` и в
    сценариях модуля `core.usecases`.
    """

    def __init__(self, what: str):
        super().__init__(f"Задача несовместна: {what}.")


class DampingSearchError(UserError):
    """
    Ошибка возникает, если синтез несовместен на верхней границе интервала
    поиска искусственного демпфирования. Выбрасывается в функции
    `find_alpha_min` модуля `core.damping`.
    """

    def __init__(self, alpha_max: float, status: str):
        super().__init__(
            f"Синтез несовместен при α = {alpha_max:g} (статус: {status}). "
            "Увеличьте верхнюю границу поиска."
        )


class SimulationError(UserError):
    """
    Ошибка возникает при расхождении численного интегрирования: состояние
    стало неконечным или норма оценки кватерниона ушла от единицы.
    Выбрасывается в модуле `core.sim`.
    """

    def __init__(self, message: str, run_index: int | None = None):
        prefix = f"Прогон #{run_index}: " if run_index is not None else ""
        super().__init__(f"{prefix}{message}")
        self.run_index = run_index


class SolverError(Exception):
    """
    Ошибка возникает, если SDP-решатель завершился аварийно по причинам, не
    связанным с входными данными. Выбрасывается в слое `solver_service`.
    """
