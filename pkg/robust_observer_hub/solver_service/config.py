from dataclasses import dataclass, field

from robust_observer_hub.infra import Settings


def _settings_field(name: str):
    return field(default_factory=lambda: getattr(Settings(), name))


@dataclass
class SolverConfig:
    """
    Конфигурация слоя SDP-решателей.
    """

    SOLVER: str = _settings_field("SOLVER")
    FALLBACK_SOLVERS: tuple[str, ...] = _settings_field("FALLBACK_SOLVERS")
    TOLERANCE: float = _settings_field("SOLVER_TOLERANCE")

    # Лимит итераций для решателей первого порядка (SCS)
    MAX_ITERS: int = 100_000
    VERBOSE: bool = False

    @property
    def solvers(self) -> tuple[str, ...]:
        """Основной решатель и резервные без повторов, в порядке попыток."""
        ordered = [self.SOLVER, *self.FALLBACK_SOLVERS]
        return tuple(dict.fromkeys(name.upper() for name in ordered))
