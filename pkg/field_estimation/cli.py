# 命令行入口：generate-field / run / bench

import argparse
import logging
import sys
from pathlib import Path
from typing import Any, Dict, List, Optional, Sequence, Tuple

import yaml
from pydantic import ValidationError

from user_config.config import ConfigLoader, load_config_file
from utils.error_handler import get_error_handler
from utils.logging_config import configure_root_logger

from .errors import ConfigError
from .eval_harness import machine_info, run_batch, run_scenario, summarize
from .exporters import (
    format_summary_table,
    run_artifacts,
    summary_rows,
    write_box_plot,
    write_per_step_mse,
    write_results,
    write_truth_dump,
    write_yaml,
)
from .field import sample_ground_truth, scenario_streams
from .models import CliConfig

logger = logging.getLogger(__name__)

CONFIG_SECTIONS = ('scenario', 'bench', 'output')
TOP_LEVEL_KEYS = CONFIG_SECTIONS + ('logging',)

# 命令行参数 -> 配置键
FLAG_KEYS = {
    'seed': 'scenario.seed',
    'steps': 'scenario.steps',
    'estimator': 'scenario.estimator',
    'workers': 'bench.workers',
    'scenarios': 'bench.scenarios',
    'out': 'output.dir',
    'log_level': 'logging.level',
}


class CliArgumentParser(argparse.ArgumentParser):
    """用法错误以 ConfigError 抛出，退出码为 1"""

    def error(self, message: str):
        raise ConfigError(f"命令行参数错误: {message}")


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument('--config', help='用户配置文件（YAML，可用点号键）')
    common.add_argument('--seed', type=int, help='基础随机种子')
    common.add_argument('--out', help='输出目录')
    common.add_argument('--estimator', choices=['exact', 'approx'], help='估计器')
    common.add_argument('--steps', type=int, help='每次运行的测量数')
    common.add_argument('--workers', type=int, help='批量运行的并行进程数')
    common.add_argument('--scenarios', type=int, help='批量运行的场景数')
    common.add_argument('--per-step-mse', action='store_true', help='批量运行时导出逐步MSE')
    common.add_argument('--log-level', help='日志级别 (DEBUG/INFO/WARNING/ERROR)')
    common.add_argument('--set', action='append', default=[], metavar='KEY=VALUE',
                        help='点号键覆盖，可重复，例如 --set scenario.sensing.alpha=0.6')

    parser = CliArgumentParser(prog='field_estimation', description='二值测量的在线逻辑回归场估计')
    subparsers = parser.add_subparsers(dest='command', parser_class=CliArgumentParser)
    subparsers.required = True
    subparsers.add_parser('generate-field', parents=[common], help='生成真值场并导出网格')
    subparsers.add_parser('run', parents=[common], help='运行单个场景')
    subparsers.add_parser('bench', parents=[common], help='批量运行并汇总')
    return parser


def load_effective_config(args: argparse.Namespace) -> Tuple[Dict[str, Any], CliConfig]:
    """包内默认配置 < 用户配置文件 < 命令行参数 < --set"""
    try:
        loader = ConfigLoader(strict=True)
        if args.config:
            loader.merge(load_config_file(args.config))
        for flag, key in FLAG_KEYS.items():
            value = getattr(args, flag, None)
            if value is not None:
                loader.set(key, value)
        if args.per_step_mse:
            loader.set('output.per_step_mse', True)
        loader.apply_assignments(args.set)
    except (OSError, yaml.YAMLError, ValueError) as e:
        raise ConfigError(f"配置加载失败: {e}") from e

    document = loader.config
    unknown = sorted(set(document) - set(TOP_LEVEL_KEYS))
    if unknown:
        raise ConfigError(f"未知的配置段: {', '.join(unknown)}")

    try:
        config = CliConfig.model_validate({k: document[k] for k in CONFIG_SECTIONS if k in document})
    except ValidationError as e:
        raise ConfigError(f"配置校验失败: {e}") from e

    effective = {'logging': document.get('logging', {}), **config.model_dump(mode='json')}
    return effective, config


def cmd_generate_field(config: CliConfig, out_dir: Path) -> int:
    """按种子生成真值场，导出 x,y,phi,prob 网格"""
    scenario = config.scenario
    truth_rng = scenario_streams(scenario.seed)[0]
    truth = sample_ground_truth(scenario.area, truth_rng, scenario.truth, threshold=scenario.cost.tau)
    path = write_truth_dump(out_dir / 'true_field.csv', truth, scenario.area, scenario.eval_grid.resolution)
    print(f"真值场已写出: {path}")
    return 0


def cmd_run(config: CliConfig, out_dir: Path) -> int:
    """运行单个场景并导出轨迹、航点、逐步MSE和估计场"""
    scenario = config.scenario
    record = run_scenario(scenario)
    run_artifacts(out_dir, record, scenario.eval_grid.resolution, scenario.area,
                  per_step_mse=True, traces=config.output.traces)

    print(f"估计器: {record.estimator}  种子: {record.seed}  测量数: {record.steps_completed}")
    print(f"最终MSE: {record.final_mse:.6f}  耗时: {record.time_s:.3f}s")
    if record.regret_unconverged:
        print(f"遗憾诊断: {len(record.regret_unconverged)} 步批量最优解未收敛，按下降终点计入")
    if record.diagnostics_error:
        print(f"遗憾诊断失败: {record.diagnostics_error}")
    if record.aborted:
        print(f"运行中止: {record.failure_reason}", file=sys.stderr)
        return 3
    return 0


def cmd_bench(config: CliConfig, out_dir: Path, estimators: Sequence[str]) -> int:
    """每个估计器运行 n 个场景，导出结果与箱线图数据并打印汇总表"""
    scenario, bench = config.scenario, config.bench
    all_records = []
    summaries = []
    for estimator in estimators:
        records = run_batch(scenario, bench.scenarios, estimator, bench.workers)
        all_records.extend(records)
        summaries.append(summarize(records))

    write_results(out_dir / 'results.csv', all_records)
    write_box_plot(out_dir / 'box_plot.csv', summaries)
    if config.output.per_step_mse:
        write_per_step_mse(out_dir / 'per_step_mse.csv', all_records)
    info = machine_info()
    write_yaml(out_dir / 'machine.yaml', info)
    write_yaml(out_dir / 'summary.yaml', {'estimators': summary_rows(summaries)})

    print(f"机器: {info['processor'] or info['machine']}, {info['cpu_count_logical']} 逻辑核, "
          f"{info['memory_total_gb']} GB 内存")
    print(format_summary_table(summaries))

    exit_code = 0
    for summary in summaries:
        if summary.aborted:
            for record in all_records:
                if record.aborted and record.estimator == summary.estimator:
                    logger.warning(f"{record.estimator} 场景 {record.scenario_id} 中止: {record.failure_reason}")
        if summary.completion_rate < bench.min_completion:
            logger.warning(
                f"{summary.estimator} 完成率 {summary.completion_rate:.0%} 低于要求的 {bench.min_completion:.0%}"
            )
            exit_code = 3
    return exit_code


def main(argv: Optional[List[str]] = None) -> int:
    """命令行主函数，返回退出码"""
    command = None
    try:
        args = build_parser().parse_args(argv)
        command = args.command
        effective, config = load_effective_config(args)
        try:
            configure_root_logger(effective['logging'].get('level'))
        except ValueError as e:
            raise ConfigError(str(e)) from e

        out_dir = Path(config.output.dir)
        write_yaml(out_dir / 'effective_config.yaml', effective)

        if command == 'generate-field':
            return cmd_generate_field(config, out_dir)
        if command == 'run':
            return cmd_run(config, out_dir)
        estimators = [config.scenario.estimator] if args.estimator else list(config.bench.estimators)
        return cmd_bench(config, out_dir, estimators)
    except KeyboardInterrupt:
        print("已中断", file=sys.stderr)
        return 130
    except Exception as e:
        info = get_error_handler().handle_error(e, {'command': command})
        print(f"错误: {info['error_message']}", file=sys.stderr)
        return info['exit_code']
