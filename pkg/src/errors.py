"""
ExplainBench 的异常类型

库函数只负责抛出异常；转换成提示信息和退出码的工作交给 main.py。
"""


class BenchError(Exception):
    """所有 ExplainBench 异常的基类"""


class DatasetReadError(BenchError, OSError):
    """数据文件不存在或无法读取"""


class EmptyDatasetError(BenchError):
    """文件中没有任何可解析的数据行"""


class SchemaError(BenchError):
    """数据内容与 schema 不符 (例如目标列不是数值)"""


class ArgumentError(BenchError, ValueError):
    """参数越界或维度不匹配"""


class ConvergenceError(BenchError):
    """SVR 求解器在 max_iter 内没有达到 KKT 容差"""

    def __init__(self, message: str, violation: float, n_iter: int):
        super().__init__(message)
        self.violation = violation
        self.n_iter = n_iter


class DegenerateWeightsError(BenchError):
    """LIME 局部拟合的样本权重全部为 0"""


class DegenerateDataError(BenchError):
    """Wilcoxon 检验中所有配对差值都为 0"""


class TableFormatError(BenchError):
    """回放用的表格 CSV 列布局不正确"""


class StageError(BenchError):
    """实验流水线中某一步失败，stage 记录失败的步骤名"""

    def __init__(self, stage: str, cause: Exception):
        super().__init__(f"[{stage}] {cause}")
        self.stage = stage
        self.cause = cause
