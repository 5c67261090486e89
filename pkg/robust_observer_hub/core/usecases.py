import json
import math
import os
from dataclasses import dataclass, replace
from typing import Any

import numpy as np

from robust_observer_hub.decorators import log_action
from robust_observer_hub.infra import ResultStore, Settings
from robust_observer_hub.solver_service import SolverStatus

from .analysis import ValidationReport, validate_certificate
from .damping import (
    DampingResult,
    find_alpha_min,
    make_damping_evaluator,
    optimize_alpha,
)
from .exceptions import ConfigError, InfeasibleError, SolverError
from .models import ALPHA_SEARCH, RunConfig
from .multipliers import MultiplierSpec
from .plants import PlantName, PlantSetup
from .sim import TrajectoryStats, monte_carlo
from .synthesis import (
    Formulation,
    SynthesisConfig,
    SynthesisResult,
    VerificationResult,
    Verdict,
    certificate_verdict,
    synthesize,
    verify,
)
from .utils import (
    MaxWidth,
    artifact_version,
    format_gamma,
    format_matrix,
    format_scalar,
    relative_deviation,
)

# Допустимое относительное отклонение от опубликованных значений
TABLE_TOLERANCE = 0.05


def _finite_or_none(value: float | None) -> float | None:
    if value is None or not math.isfinite(value):
        return None
    return float(value)


def _header(config: RunConfig) -> dict[str, Any]:
    """Заголовок CSV: версия и итоговая конфигурация."""
    return {
        "version": artifact_version(),
        "config": json.dumps(config.to_dict(), ensure_ascii=False, sort_keys=True),
    }


def _resolve_alpha(config: RunConfig, setup: PlantSetup) -> float:
    """
    Демпфирование синтеза: из конфигурации, по умолчанию для модели или
    наименьшее совместное при `alpha = "search"`.
    """
    match config.alpha:
        case None:
            return setup.design_alpha
        case str() if config.alpha == ALPHA_SEARCH:
            alpha = find_alpha_min(
                lambda a: _synthesize(config, setup, a), config.damping
            )
            print(f"Найдено наименьшее совместное α = {alpha:.4g}.")
            return alpha
        case _:
            return float(config.alpha)


def _synthesize(
    config: RunConfig, setup: PlantSetup, alpha: float
) -> SynthesisResult:
    cfg = config.synthesis_config(setup, alpha)
    delta = setup.nominal_delta if cfg.formulation == Formulation.NOMINAL else None
    return synthesize(setup.plant, cfg, delta)


@dataclass
class SynthesisOutcome:
    """
    Итог шагов синтез → диагностика → проверка.
    """

    synthesis: SynthesisResult
    verification: VerificationResult | None
    verdict: Verdict

    @property
    def gamma_ver(self) -> float:
        if self.verification is None or not self.verification.is_optimal:
            return math.nan
        return self.verification.gamma_ver

    @property
    def gamma_ref(self) -> float:
        """Граница для валидации: γ_ver, если есть, иначе γ_syn."""
        gamma_ver = self.gamma_ver
        return gamma_ver if math.isfinite(gamma_ver) else self.synthesis.gamma_syn

    def summary(self) -> dict[str, Any]:
        synthesis, verification = self.synthesis, self.verification
        ratio = math.nan
        if synthesis.is_optimal and synthesis.gamma_syn > 0:
            ratio = self.gamma_ver / synthesis.gamma_syn
        diagnostics = synthesis.diagnostics
        return {
            "formulation": str(synthesis.formulation),
            "multiplier": synthesis.multiplier,
            "alpha": synthesis.alpha,
            "status": str(synthesis.status),
            "gamma_syn": _finite_or_none(synthesis.gamma_syn),
            "verification_status": (
                str(verification.status) if verification is not None else None
            ),
            "gamma_ver": _finite_or_none(self.gamma_ver),
            "ratio": _finite_or_none(ratio),
            "verdict": str(self.verdict),
            "gain": synthesis.gain,
            "diagnostics": (
                {
                    "r1": diagnostics.r1,
                    "r2": diagnostics.r2,
                    "r3": diagnostics.r3,
                    "cond_g22_bot": diagnostics.cond_g22_bot,
                }
                if diagnostics is not None
                else None
            ),
            "solver": synthesis.solution.solver if synthesis.solution else None,
            "message": synthesis.message,
            "wall_time": {
                "synthesis": synthesis.wall_time,
                "verification": (
                    verification.wall_time if verification is not None else None
                ),
            },
        }


def run_synthesis(
    config: RunConfig, setup: PlantSetup, alpha: float
) -> SynthesisOutcome:
    """
    Синтезирует L и проверяет его анализом с полной матрицей P. Номинальный
    коэффициент проверяется номинальным анализом в той же точке Δ.
    """
    synthesis = _synthesize(config, setup, alpha)
    if not synthesis.is_optimal:
        return SynthesisOutcome(synthesis, None, certificate_verdict(synthesis, None))

    multiplier = config.multiplier_spec(setup)
    delta = setup.nominal_delta if multiplier is None else None
    verification = verify(setup.plant, synthesis.gain, multiplier, alpha, delta)
    return SynthesisOutcome(
        synthesis, verification, certificate_verdict(synthesis, verification)
    )


def _print_outcome(outcome: SynthesisOutcome):
    synthesis = outcome.synthesis
    print(
        f"Синтез '{synthesis.formulation}' ({synthesis.multiplier or 'без IQC'}), "
        f"α = {synthesis.alpha:.4g}: {synthesis.status}."
    )
    if not synthesis.is_optimal:
        if synthesis.message:
            print(f"  {synthesis.message}")
        return

    print(f"  γ_syn = {format_gamma(synthesis.gamma_syn)}")
    print(f"  γ_ver = {format_gamma(outcome.gamma_ver)}")
    print(f"  Сертификат: {outcome.verdict}.")
    if synthesis.diagnostics is not None:
        d = synthesis.diagnostics
        print(
            f"  Невязки: r1 = {format_scalar(d.r1)}, r2 = {format_scalar(d.r2)}, "
            f"r3 = {format_scalar(d.r3)}; cond(G22) = {format_scalar(d.cond_g22_bot)}"
        )
    print("  L =")
    print(format_matrix(synthesis.gain, indent="    "))


def _save_outcome(store: ResultStore, config: RunConfig, outcome: SynthesisOutcome):
    store.save(
        "result.json",
        {
            "version": artifact_version(),
            "command": "synthesize",
            "config": config.to_dict(),
            "plant": config.plant_label,
        }
        | outcome.summary(),
    )

    synthesis = outcome.synthesis
    if synthesis.gain is None:
        return
    columns = [f"y_{i + 1}" for i in range(synthesis.gain.shape[1])]
    store.save_csv("gain.csv", columns, synthesis.gain.tolist(), _header(config))

    matrices = {"L": synthesis.gain} | synthesis.certificate
    if outcome.verification is not None:
        matrices |= {
            f"verify_{name}": value
            for name, value in outcome.verification.certificate.items()
        }
    store.save_matrices("certificate.txt", matrices)


@log_action(verbose=True)
def cmd_synthesize(
    config: RunConfig, *, context: dict | None = None
) -> SynthesisOutcome:
    """
    Синтезирует коэффициент наблюдателя, проверяет сертификат и сохраняет
    `result.json`, `gain.csv` и `certificate.txt`.

    Args:
        config (RunConfig): Конфигурация запуска.
        context (dict, optional): Контекст записи в журнал.

    Raises:
        InfeasibleError: Если синтез несовместен (диагностика сохраняется).
        SolverError: Если решатель не дал результата.

    Returns:
        SynthesisOutcome: Результаты синтеза и проверки.
    """
    setup = config.plant_setup()
    alpha = _resolve_alpha(config, setup)
    outcome = run_synthesis(config, setup, alpha)

    store = ResultStore(config.run_dir("synthesize"))
    _save_outcome(store, config, outcome)
    _print_outcome(outcome)
    print(f"Результаты сохранены в '{store.run_dir}'.")

    if context is not None:
        context |= dict(
            verdict=str(outcome.verdict),
            gamma_syn=outcome.synthesis.gamma_syn,
            gamma_ver=outcome.gamma_ver,
        )

    match outcome.synthesis.status:
        case SolverStatus.INFEASIBLE:
            raise InfeasibleError("синтез")
        case SolverStatus.UNKNOWN:
            raise SolverError(outcome.synthesis.message or "решатель не сошёлся")

    return outcome


@dataclass(frozen=True)
class TableRow:
    """
    Строка таблицы сравнения: постановка и опубликованные значения.
    `None` в эталоне означает несовместность, `invalid` в `ref_verdict` -
    ожидаемый отказ проверки.
    """

    label: str
    formulation: Formulation
    multiplier: str | None
    ref_gamma_syn: float | None
    ref_gamma_ver: float | None
    ref_verdict: Verdict


TABLES: dict[int, tuple[PlantName, tuple[TableRow, ...]]] = {
    1: (
        PlantName.QUATERNION,
        (
            TableRow(
                "Nominal", Formulation.NOMINAL, None, 0.0033, 0.0033, Verdict.VALID
            ),
            TableRow(
                "Blkdiag D",
                Formulation.BLKDIAG,
                "d-scalar",
                None,
                None,
                Verdict.INFEASIBLE,
            ),
            TableRow(
                "Blkdiag D-G",
                Formulation.BLKDIAG,
                "dg-scalar",
                0.0070,
                0.0070,
                Verdict.VALID,
            ),
        ),
    ),
    2: (
        PlantName.MCK,
        (
            TableRow("Nominal", Formulation.NOMINAL, None, 0.500, 0.500, Verdict.VALID),
            TableRow(
                "Blkdiag scalar",
                Formulation.BLKDIAG,
                "d-scalar",
                None,
                None,
                Verdict.INFEASIBLE,
            ),
            TableRow(
                "Blkdiag full",
                Formulation.BLKDIAG,
                "d-full",
                0.897,
                0.897,
                Verdict.VALID,
            ),
            TableRow(
                "Finsler scalar",
                Formulation.FINSLER,
                "d-scalar",
                0.836,
                0.836,
                Verdict.VALID,
            ),
            TableRow(
                "Finsler full",
                Formulation.FINSLER,
                "d-full",
                0.667,
                None,
                Verdict.INVALID,
            ),
        ),
    ),
}


def _deviates(value: float, reference: float | None) -> bool:
    if reference is None:
        return False
    if not math.isfinite(value):
        return True
    return relative_deviation(value, reference) > TABLE_TOLERANCE


def _table_entry(row: TableRow, outcome: SynthesisOutcome | None, error: str) -> dict:
    if outcome is None:
        return {
            "row": row.label,
            "status": "error",
            "gamma_syn": math.nan,
            "gamma_ver": math.nan,
            "verdict": str(Verdict.UNKNOWN),
            "flag": "ERROR",
            "error": error,
        }

    gamma_syn, gamma_ver = outcome.synthesis.gamma_syn, outcome.gamma_ver
    flags = []
    if outcome.verdict != row.ref_verdict:
        flags.append("PATTERN")
    if _deviates(gamma_syn, row.ref_gamma_syn) or _deviates(
        gamma_ver, row.ref_gamma_ver
    ):
        flags.append("DEVIATION")
    return {
        "row": row.label,
        "status": str(outcome.synthesis.status),
        "gamma_syn": gamma_syn,
        "gamma_ver": gamma_ver,
        "verdict": str(outcome.verdict),
        "flag": "+".join(flags),
        "error": error,
    }


def _print_table(title: str, entries: list[dict], rows: tuple[TableRow, ...]):
    label_width = int(MaxWidth(iterable=(row.label for row in rows)))
    print(title)
    print(
        f"{'':<{label_width}}  {'γ_syn':>8}  {'γ_ver':>8}  {'статус':<10}  "
        f"{'вердикт':<10}  {'эталон':<18}"
    )
    for row, entry in zip(rows, entries):
        if row.ref_gamma_syn is None:
            reference = "infeasible"
        else:
            ref_ver = (
                format_gamma(row.ref_gamma_ver)
                if row.ref_gamma_ver is not None
                else str(row.ref_verdict)
            )
            reference = f"{format_gamma(row.ref_gamma_syn)}/{ref_ver}"
        flag = f"  <- {entry['flag']}" if entry["flag"] else ""
        print(
            f"{row.label:<{label_width}}  {format_gamma(entry['gamma_syn'], 8)}  "
            f"{format_gamma(entry['gamma_ver'], 8)}  {entry['status']:<10}  "
            f"{entry['verdict']:<10}  {reference:<18}{flag}"
        )


@log_action(verbose=True)
def cmd_table(
    which: int, config: RunConfig | None = None, *, context: dict | None = None
) -> list[dict]:
    """
    Воспроизводит таблицу сравнения постановок: для каждой строки выполняет
    синтез и проверку, печатает таблицу и сохраняет `table<N>.csv`. Ошибки
    отдельных строк попадают в таблицу.

    Args:
        which (int): Номер таблицы (1 - кватернион, 2 - MCK).
        config (RunConfig, optional): Конфигурация (выходная директория,
            параметры моделей).

    Raises:
        ConfigError: Если номер таблицы неизвестен.

    Returns:
        list[dict]: Строки таблицы.
    """
    if which not in TABLES:
        raise ConfigError(f"неизвестная таблица '{which}', допустимы: 1, 2")
    plant_name, rows = TABLES[which]
    config = replace(config or RunConfig(), plant=plant_name, alpha=None)
    setup = config.plant_setup()
    alpha = setup.design_alpha

    entries = []
    for row in rows:
        row_config = replace(
            config,
            formulation=row.formulation,
            multiplier=row.multiplier or config.multiplier,
        )
        outcome, error = None, ""
        try:
            outcome = run_synthesis(row_config, setup, alpha)
        except Exception as e:
            error = f"{type(e).__name__}: {e}"
        entry = _table_entry(row, outcome, error)
        entry |= {
            "formulation": str(row.formulation),
            "multiplier": row.multiplier or "",
            "alpha": alpha,
            "ref_gamma_syn": row.ref_gamma_syn,
            "ref_gamma_ver": row.ref_gamma_ver,
            "ref_verdict": str(row.ref_verdict),
        }
        entries.append(entry)

    columns = [
        "row",
        "formulation",
        "multiplier",
        "alpha",
        "status",
        "gamma_syn",
        "gamma_ver",
        "verdict",
        "ref_gamma_syn",
        "ref_gamma_ver",
        "ref_verdict",
        "flag",
        "error",
    ]
    store = ResultStore(os.path.join(config.output, f"table{which}"))
    store.save_csv(
        f"table{which}.csv",
        columns,
        ([entry[column] for column in columns] for entry in entries),
        _header(config),
    )

    _print_table(f"Таблица {which} ({plant_name}, α = {alpha:g}):", entries, rows)
    print(f"Таблица сохранена в '{store.path(f'table{which}.csv')}'.")

    if context is not None:
        context |= dict(
            table=which,
            flagged=sum(1 for entry in entries if entry["flag"]),
        )

    return entries


def _load_gain(config: RunConfig, setup: PlantSetup) -> tuple[np.ndarray, float]:
    """
    Коэффициент L и граница γ: из `result.json` (`gain_from`) или новым
    синтезом. Явно заданная `gamma` имеет приоритет.
    """
    if config.gain_from is not None:
        if not os.path.isfile(config.gain_from):
            raise ConfigError(f"файл '{config.gain_from}' не найден")
        directory, file_name = os.path.split(config.gain_from)
        try:
            data = ResultStore(directory or ".").load(file_name)
        except json.JSONDecodeError as e:
            raise ConfigError(f"файл '{config.gain_from}' повреждён: {e}") from None
        if not isinstance(data, dict) or data.get("gain") is None:
            raise ConfigError(f"в файле '{config.gain_from}' нет коэффициента L")
        try:
            gain = np.asarray(data["gain"], dtype=float)
        except (TypeError, ValueError):
            raise ConfigError(
                f"коэффициент L в файле '{config.gain_from}' не числовой"
            ) from None
        gamma = data.get("gamma_ver")
        if gamma is None:
            gamma = data.get("gamma_syn")
        gamma = math.nan if gamma is None else float(gamma)
    else:
        outcome = run_synthesis(config, setup, _resolve_alpha(config, setup))
        if not outcome.synthesis.is_optimal:
            raise InfeasibleError("синтез")
        gain, gamma = outcome.synthesis.gain, outcome.gamma_ref

    if config.gamma is not None:
        gamma = config.gamma
    return gain, gamma


def _print_report(title: str, report: ValidationReport):
    verdict = "pass" if report.passed else "fail"
    print(
        f"{title}: сдвиг α = {report.alpha_shift:g}, точек {len(report.samples)}, "
        f"худшая норма {format_gamma(report.worst)} при γ = "
        f"{format_gamma(report.gamma_ref)} -> {verdict}"
    )
    if report.n_errors:
        print(f"  Точек с ошибками: {report.n_errors}.")


@log_action(verbose=True)
def cmd_validate(
    config: RunConfig, *, context: dict | None = None
) -> list[ValidationReport]:
    """
    Проверяет коэффициент L на замороженных Δ: H∞ нормы системы ошибки в
    вершинах и случайных точках сравниваются с γ. Если сдвиг валидации
    положителен, дополнительно строится распределение для исходной системы.

    Returns:
        list[ValidationReport]: Отчёты (сдвинутая система, затем исходная).
    """
    setup = config.plant_setup()
    gain, gamma = _load_gain(config, setup)
    if not math.isfinite(gamma):
        raise ConfigError("граница γ не задана: укажите --gamma")
    shift = setup.validation_shift if config.shift is None else config.shift

    shifts = [shift] if shift == 0 else [shift, 0.0]
    reports = [
        validate_certificate(
            setup.plant, gain, gamma, config.samples, alpha_shift, config.seed
        )
        for alpha_shift in shifts
    ]

    store = ResultStore(config.run_dir("validate", with_design=False))
    for report in reports:
        suffix = "" if report.alpha_shift == shift else "-unshifted"
        columns, rows = report.rows()
        store.save_csv(f"validation{suffix}.csv", columns, rows, _header(config))
    store.save(
        "result.json",
        {
            "version": artifact_version(),
            "command": "validate",
            "config": config.to_dict(),
            "reports": [
                report.summary() | {"worst": _finite_or_none(report.worst)}
                for report in reports
            ],
        },
    )

    for report in reports:
        title = "Сдвинутая система" if report.alpha_shift > 0 else "Система"
        _print_report(title, report)
    print(f"Результаты сохранены в '{store.run_dir}'.")

    if context is not None:
        context |= dict(
            gamma_ref=gamma,
            worst=reports[0].worst,
            result="pass" if reports[0].passed else "fail",
        )

    return reports


@log_action(verbose=True)
def cmd_montecarlo(
    config: RunConfig, *, context: dict | None = None
) -> TrajectoryStats:
    """
    Моделирует наблюдатель по `config.sim.n_runs` прогонам с замороженной
    неопределённостью и сохраняет полосы перцентилей нормы ошибки.
    """
    setup = config.plant_setup()
    gain, _ = _load_gain(config, setup)
    quat_cfg = config.quaternion if config.plant == PlantName.QUATERNION else None
    stats = monte_carlo(setup.plant, gain, config.sim, quat_cfg)

    store = ResultStore(config.run_dir("montecarlo", with_design=False))
    columns, rows = stats.rows()
    store.save_csv("montecarlo.csv", columns, rows, _header(config))
    final = np.percentile(stats.final_norms, (5, 50, 95))
    store.save(
        "result.json",
        {
            "version": artifact_version(),
            "command": "montecarlo",
            "config": config.to_dict(),
            "runs": config.sim.n_runs,
            "final_norm_percentiles": dict(zip(("p5", "p50", "p95"), final)),
        },
    )

    print(
        f"Моделирование: {config.sim.n_runs} прогонов, t = {config.sim.t_final:g} с."
    )
    print(
        f"  ‖e(T)‖: p5 = {final[0]:.3e}, p50 = {final[1]:.3e}, p95 = {final[2]:.3e}"
    )
    print(f"Результаты сохранены в '{store.run_dir}'.")

    if context is not None:
        context |= dict(runs=config.sim.n_runs, final_p50=float(final[1]))

    return stats


@log_action(verbose=True)
def cmd_damping(config: RunConfig, *, context: dict | None = None) -> DampingResult:
    """
    Ищет демпфирование α: бисекцией находит α_min, затем методом золотого
    сечения минимизирует γ_actual (или γ_cert) на [α_min, alpha_max].
    """
    setup = config.plant_setup()
    spec: MultiplierSpec | None = config.multiplier_spec(setup)

    def synth(alpha: float) -> SynthesisResult:
        cfg = SynthesisConfig(config.formulation, spec, alpha, config.eps_g)
        delta = setup.nominal_delta if spec is None else None
        return synthesize(setup.plant, cfg, delta)

    evaluator = make_damping_evaluator(
        setup.plant,
        synth,
        config.damping.objective,
        n_samples=Settings().SCREENING_SAMPLES,
        actual_shift=config.shift or 0.0,
        seed=config.seed,
    )
    result = optimize_alpha(synth, evaluator, config.damping)

    store = ResultStore(config.run_dir("damping"))
    columns, rows = result.rows()
    store.save_csv("damping.csv", columns, rows, _header(config))
    store.save(
        "result.json",
        {
            "version": artifact_version(),
            "command": "damping",
            "config": config.to_dict(),
            "alpha_min": result.alpha_min,
            "alpha_star": result.alpha_star,
            "gamma_actual_star": _finite_or_none(result.gamma_actual_star),
        },
    )

    print(f"α_min = {result.alpha_min:.4g}, α* = {result.alpha_star:.4g}")
    print(f"  γ_actual(α*) = {format_gamma(result.gamma_actual_star)}")
    print(f"  Вычислений: {len(result.trace)}.")
    print(f"Результаты сохранены в '{store.run_dir}'.")

    if context is not None:
        context |= dict(
            alpha_min=result.alpha_min,
            alpha_star=result.alpha_star,
            gamma=result.gamma_actual_star,
        )

    return result
