"""Exception hierarchy; each subclass maps to one CLI exit code."""


class BenchmarkError(Exception):
    category = "error"
    exit_code = 1


class ConfigError(BenchmarkError):
    category = "config error"
    exit_code = 2


class DataError(BenchmarkError):
    category = "data error"
    exit_code = 3


class ModelError(BenchmarkError):
    category = "model error"
    exit_code = 4


class StrategyError(BenchmarkError):
    category = "strategy error"
    exit_code = 5


class EvaluationError(BenchmarkError):
    category = "evaluation error"
    exit_code = 6


class ReportError(BenchmarkError):
    category = "report error"
    exit_code = 7
