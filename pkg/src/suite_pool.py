from dataclasses import dataclass


@dataclass(frozen=True)
class PlannedRun:
    dataset: str
    n_features: int
    seed: int


class SuitePool:
    def __init__(self):
        # 默认实验计划: 5 个数据集各 3 次运行，特征数与发布的结果表一致
        # 原始运行的种子不可考，这里固定为 1..15
        self.plan = {
            'wine': [9, 8, 6],
            'boston': [10, 11, 12],
            'yacht': [3, 5, 2],
            'computer_hardware': [5, 6, 3],
            'auto': [6, 4, 5],
        }

    def get_all_runs(self) -> list[PlannedRun]:
        runs = []
        seed = 1
        for dataset, counts in self.plan.items():
            for k in counts:
                runs.append(PlannedRun(dataset=dataset, n_features=k, seed=seed))
                seed += 1
        return runs

    def get_datasets(self) -> list[str]:
        return list(self.plan)
