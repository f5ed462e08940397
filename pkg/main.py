import argparse
import json
import logging
import os
import sys

import numpy as np
from pydantic import ValidationError

from choquet.estimators import d_ct_discrepancy, estimate_ct, estimate_vdc
from choquet.measures import EmpiricalMeasure, energy_distance, from_csv, moments, sample_batch
from choquet.models import (
    ConstraintProfile,
    CriticConfig,
    GanConfig,
    OracleCheckConfig,
    PortfolioConfig,
    RatesConfig,
    VdcRunConfig,
)
from choquet.net import ResidualMaxoutGenerator, make_rng
from choquet.oracle import (
    BumpKernel,
    BumpSpec,
    analytic_same_mean,
    analytic_same_variance,
    brute_force_vdc,
    oracle_table,
    random_discrete_pair,
)
from choquet.report import emit_svg_scatter, write_result, write_table
from choquet.train import (
    make_target,
    rate_experiment,
    train_ct_gan,
    train_dominance_gan,
    train_portfolio,
    train_wgan,
)
from config import settings

logger = logging.getLogger(__name__)


class ConfigError(Exception):
    """命令行或配置文件错误，退出码 1"""


class ChoquetArgumentParser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        raise ConfigError(message)


def build_parser() -> ChoquetArgumentParser:
    parser = ChoquetArgumentParser(description='Choquet 序学习实验：ICMN 评估网络、代理 VDC / CT 距离与真值核对')
    parser.add_argument('subcommand', choices=list(SUBCOMMANDS), help='要运行的实验')
    parser.add_argument('--config', type=str, help='JSON 配置文件 (扁平键值)')
    parser.add_argument('--out', type=str, default=settings.output_dir, help=f'输出目录 (默认: {settings.output_dir})')
    parser.add_argument('--seed', type=int, help='覆盖配置中的随机种子')
    parser.add_argument('--set', dest='overrides', action='append', default=[], metavar='KEY=VALUE',
                        help='覆盖单个配置项，值按 JSON 解析，可重复')
    parser.add_argument('--excel', action='store_true', help='同时输出 log.xlsx')
    parser.add_argument('--log-level', type=str, default=settings.log_level, help='日志级别')
    return parser


def _parse_value(raw: str):
    try:
        return json.loads(raw)
    except json.JSONDecodeError:
        return raw


def load_config(model, path, overrides, seed):
    """读取扁平 JSON 配置，依次应用 --set 与 --seed 覆盖，然后校验"""
    data = {}
    if path:
        try:
            with open(path, 'r', encoding='utf-8') as fh:
                data = json.load(fh)
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError(f"cannot read config {path}: {exc}")
        if not isinstance(data, dict):
            raise ConfigError(f"config {path} must contain a JSON object")
    for item in overrides:
        if '=' not in item:
            raise ConfigError(f"--set expects KEY=VALUE, got {item!r}")
        key, raw = item.split('=', 1)
        data[key.strip()] = _parse_value(raw)
    if seed is not None:
        data['seed'] = seed
    unknown = sorted(set(data) - set(model.model_fields))
    if unknown:
        raise ConfigError(f"unknown config keys for {model.__name__}: {', '.join(unknown)}")
    try:
        return model(**data)
    except ValidationError as exc:
        problems = "; ".join(f"{'.'.join(str(p) for p in err['loc']) or '<config>'}: {err['msg']}" for err in exc.errors())
        raise ConfigError(f"invalid {model.__name__}: {problems}")


# ----------------------------------------------------------------------
# 子命令
# ----------------------------------------------------------------------
def run_portfolio(cfg: PortfolioConfig, out_dir: str, excel: bool) -> dict:
    outcome = train_portfolio(cfg)
    write_table(outcome.log.to_frame(), out_dir, excel=excel)
    outcome.critic.save_json(os.path.join(out_dir, 'critic.json'))
    return {
        'z_final': outcome.z_final,
        'mean_return': outcome.mean_return,
        'benchmark_mean': outcome.benchmark_mean,
        'penalty': outcome.penalty,
    }


def _generated(generator: ResidualMaxoutGenerator, cfg: GanConfig, stream: int) -> EmpiricalMeasure:
    rng = make_rng(np.random.SeedSequence(cfg.seed).spawn(stream + 1)[stream])
    return EmpiricalMeasure.from_points(generator(rng.standard_normal((cfg.eval_samples, cfg.latent_dim))))


def _write_samples(out_dir: str, target: EmpiricalMeasure, generated: EmpiricalMeasure):
    generated.to_csv(os.path.join(out_dir, 'samples.csv'))
    if generated.dim == 2:
        emit_svg_scatter(target, generated, os.path.join(out_dir, 'samples.svg'))


def run_ct_gan(cfg: GanConfig, out_dir: str, excel: bool) -> dict:
    outcome = train_ct_gan(make_target(cfg), cfg)
    write_table(outcome.log.to_frame(), out_dir, excel=excel)
    outcome.generator.save_json(os.path.join(out_dir, 'generator.json'))
    target = sample_batch(make_target(cfg), cfg.eval_samples)
    generated = _generated(outcome.generator, cfg, 6)
    _write_samples(out_dir, target, generated)
    ct = outcome.log.column('ct')
    return {
        'ct_first': ct[0] if ct else 0.0,
        'ct_last': ct[-1] if ct else 0.0,
        'energy_distance': energy_distance(generated, target),
    }


def run_dominance_gan(cfg: GanConfig, out_dir: str, excel: bool) -> dict:
    if cfg.baseline_path:
        baseline = ResidualMaxoutGenerator.load_json(cfg.baseline_path)
    else:
        print(f"未指定基线生成器，先训练 {cfg.baseline_epochs} 步的基线 WGAN")
        baseline = train_wgan(make_target(cfg), cfg.model_copy(update={'epochs': cfg.baseline_epochs})).generator
        baseline.save_json(os.path.join(out_dir, 'baseline.json'))
    outcome = train_dominance_gan(make_target(cfg), baseline, cfg)
    write_table(outcome.log.to_frame(), out_dir, excel=excel)
    outcome.generator.save_json(os.path.join(out_dir, 'generator.json'))

    target = sample_batch(make_target(cfg), cfg.eval_samples)
    generated = _generated(outcome.generator, cfg, 6)
    reference = _generated(baseline, cfg, 6)
    _write_samples(out_dir, target, generated)
    check = CriticConfig(
        shape=cfg.critic_shape,
        profile=ConstraintProfile(radius=cfg.critic_radius),
        inner_steps=500,
        seed=cfg.seed,
    )
    return {
        'vdc_final': estimate_vdc(generated, reference, check).value,
        'second_moment_generated': moments(generated)[1],
        'second_moment_baseline': moments(reference)[1],
        'energy_distance': energy_distance(generated, target),
        'energy_distance_baseline': energy_distance(reference, target),
    }


def run_rates(cfg: RatesConfig, out_dir: str, excel: bool) -> dict:
    result = rate_experiment(cfg)
    write_table(result.table, out_dir, excel=excel)
    write_table(result.raw, out_dir, name='trials')
    return {'slope': result.slope}


def run_oracle_check(cfg: OracleCheckConfig, out_dir: str, excel: bool) -> dict:
    spec = BumpSpec(kernel=BumpKernel(cfg.kernel))
    vdc, d_ct = analytic_same_variance(spec, cfg.shift, cfg.radius)
    same_mean = analytic_same_mean(spec, cfg.scale, cfg.radius)

    rng = make_rng(cfg.seed)
    pairs = [random_discrete_pair(rng, cfg.lp_atoms) for _ in range(cfg.lp_instances)]
    instances = [(first, second, cfg.radius) for first, second in pairs]
    table = oracle_table(instances)
    table['brute_force'] = [brute_force_vdc(minus, plus, C) for minus, plus, C in instances]
    write_table(table, out_dir, excel=excel)
    brute_error = float((table['value'] - table['brute_force']).abs().max()) if len(table) else 0.0
    max_gap = float(table['gap'].abs().max()) if len(table) else 0.0
    return {
        'vdc': vdc,
        'd_ct': d_ct,
        'same_mean_vdc': same_mean.vdc_pm,
        'same_mean_dct': same_mean.dct_pm,
        'same_mean_d_ct': same_mean.d_ct,
        'lp_max_gap': max_gap,
        'lp_max_brute_error': brute_error,
    }


def run_vdc(cfg: VdcRunConfig, out_dir: str, excel: bool) -> dict:
    plus = from_csv(cfg.plus_path)
    minus = from_csv(cfg.minus_path)
    if plus.dim != minus.dim:
        raise ConfigError(f"point clouds have different dimensions: {plus.dim} vs {minus.dim}")
    estimate = estimate_ct(plus, minus, cfg.critic_config(plus.dim))
    write_table(estimate.forward.trace, out_dir, excel=excel)
    if plus.dim == 2:
        emit_svg_scatter(plus, minus, os.path.join(out_dir, 'samples.svg'))
    return {
        'vdc_plus_minus': estimate.forward.value,
        'vdc_minus_plus': estimate.backward.value,
        'd_ct': estimate.value,
        'dct_plus_minus': d_ct_discrepancy(estimate.forward.value, plus, minus),
    }


SUBCOMMANDS = {
    'portfolio': (PortfolioConfig, run_portfolio),
    'ct-gan': (GanConfig, run_ct_gan),
    'dominance-gan': (GanConfig, run_dominance_gan),
    'rates': (RatesConfig, run_rates),
    'oracle-check': (OracleCheckConfig, run_oracle_check),
    'vdc': (VdcRunConfig, run_vdc),
}


def run(argv=None) -> int:
    """执行一个子命令，返回退出码：0 成功，1 配置错误，2 运行错误"""
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        level = logging.getLevelName(args.log_level.upper())
        if not isinstance(level, int):
            raise ConfigError(f"unknown log level {args.log_level!r}")
        logging.basicConfig(level=level, format='%(asctime)s - %(levelname)s - %(message)s')
        model, handler = SUBCOMMANDS[args.subcommand]
        cfg = load_config(model, args.config, args.overrides, args.seed)
    except ConfigError as exc:
        print(f"配置错误: {exc}", file=sys.stderr)
        return 1

    try:
        os.makedirs(args.out, exist_ok=True)
        print(f"正在运行 {args.subcommand}，输出目录: {args.out}")
        scalars = handler(cfg, args.out, args.excel)
        write_result(args.out, args.subcommand, cfg.seed, scalars)
    except ConfigError as exc:
        print(f"配置错误: {exc}", file=sys.stderr)
        return 1
    except Exception as exc:
        logger.error(f"{args.subcommand} failed: {exc}")
        return 2
    print(f"运行完成，结果已保存至: {os.path.join(args.out, 'result.json')}")
    return 0


def main():
    sys.exit(run())


if __name__ == "__main__":
    main()
