import sys
import os
import argparse
import logging
# 强制设置标准输出编码为 utf-8，解决 Windows 控制台中文乱码问题
try:
    sys.stdout.reconfigure(encoding='utf-8')
except (AttributeError, ValueError, OSError):
    pass

from errors import (
    ArgumentError,
    BenchError,
    DatasetReadError,
    EmptyDatasetError,
    SchemaError,
    StageError,
    TableFormatError,
)
from experiment import explain_row, replay_tables, run_suite
from reporting import render_instance_report, render_report, rules_text, write_outputs
from settings import Settings

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_DATA = 2
EXIT_STAGE = 3

_DATA_ERRORS = (DatasetReadError, EmptyDatasetError, SchemaError, TableFormatError)

DEFAULT_TABLE2 = os.path.join("data", "table2.csv")
DEFAULT_TABLE3 = os.path.join("data", "table3.csv")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="bench", description="用决策树、多元线性回归和 LIME 解释 SVR 黑盒并比较拟合度")
    parser.add_argument("--log-level", default=os.getenv("BENCH_LOG_LEVEL", "INFO"),
                        help="日志级别 (DEBUG/INFO/WARNING/ERROR)，默认读取 BENCH_LOG_LEVEL")
    sub = parser.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="按 manifest 执行整套实验")
    run.add_argument("--manifest", help="key=value 配置文件；不指定时使用默认配置和内置的 15 次运行计划")
    run.add_argument("--out", required=True, help="结果输出目录")
    run.add_argument("--seed", type=int, help="覆盖 manifest 中的基础种子")
    run.add_argument("--fidelity-ref", choices=["blackbox", "truth"], help="全局 RMSE 的参考值")
    run.add_argument("--ties", choices=["include", "strict"], help="局部比较中平局是否计为胜")
    run.add_argument("--dump-models", action="store_true", help="把每次运行的 SVR 黑盒导出为 JSON (models/)")

    replay = sub.add_parser("replay", help="用发布的结果表直接计算全部统计量")
    replay.add_argument("--table2", default=DEFAULT_TABLE2, help="全局 RMSE 表 CSV")
    replay.add_argument("--table3", default=DEFAULT_TABLE3, help="局部比较表 CSV")
    replay.add_argument("--out", help="同时把结果写入该目录")

    explain = sub.add_parser("explain", help="并排展示单条测试记录的三种解释")
    explain.add_argument("--dataset", required=True, help="数据集名称或别名")
    explain.add_argument("--row", type=int, required=True, help="测试集中的行号 (从 0 开始)")
    explain.add_argument("--manifest", help="key=value 配置文件")
    explain.add_argument("--features", type=int, help="使用的特征数，默认使用全部特征")
    explain.add_argument("--seed", type=int, help="运行种子")
    explain.add_argument("--rules", action="store_true", help="同时打印整棵树的规则集")
    return parser


def _setup_logging(level: str):
    numeric = getattr(logging, str(level).upper(), None)
    if not isinstance(numeric, int):
        raise ArgumentError(f"无法识别的日志级别: {level}")
    logging.basicConfig(level=numeric, format="%(asctime)s %(levelname)s %(name)s: %(message)s")


def _progress(i, total, config):
    print(f"[{i + 1}/{total}] {config.label()}")


def cmd_run(args) -> int:
    settings = Settings(args.manifest).override(seed=args.seed, fidelity_reference=args.fidelity_ref, ties=args.ties)
    configs = settings.run_configs()
    summary = run_suite(configs, settings.loader(), progress_callback=_progress)
    write_outputs(summary, args.out, dump_models=args.dump_models)
    print(render_report(summary))
    return EXIT_OK


def cmd_replay(args) -> int:
    summary = replay_tables(args.table2, args.table3)
    if args.out:
        write_outputs(summary, args.out)
    print(render_report(summary))
    return EXIT_OK


def cmd_explain(args) -> int:
    settings = Settings(args.manifest)
    if args.seed is not None:
        settings = settings.override(seed=args.seed)
    loader = settings.loader()
    path, schema = loader.resolve(args.dataset)
    k = args.features
    if k is None:
        k = loader.load_dataset(path, schema).n_features
    config = settings.make_config(schema.name, k, settings.get("seed"))
    report = explain_row(config, args.row, loader)
    print(render_instance_report(report))
    if args.rules:
        print("\n整棵树的规则集:")
        print(rules_text(report.rules))
    return EXIT_OK


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return EXIT_OK if e.code in (0, None) else EXIT_USAGE
    try:
        _setup_logging(args.log_level)
        handler = {"run": cmd_run, "replay": cmd_replay, "explain": cmd_explain}[args.command]
        return handler(args)
    except StageError as e:
        print(f"运行失败，步骤 {e.stage}: {e.cause}", file=sys.stderr)
        return EXIT_DATA if isinstance(e.cause, _DATA_ERRORS) else EXIT_STAGE
    except _DATA_ERRORS as e:
        print(f"数据错误: {e}", file=sys.stderr)
        return EXIT_DATA
    except ArgumentError as e:
        print(f"参数错误: {e}", file=sys.stderr)
        return EXIT_USAGE
    except BenchError as e:
        print(f"运行失败: {e}", file=sys.stderr)
        return EXIT_STAGE


if __name__ == "__main__":
    sys.exit(main())
