# -*- coding: utf-8 -*-

"""
rfsense command line: every subcommand reads the configuration, logs it
with its hash and the master seed, runs one experiment and writes CSV/JSON
files to the output directory.
"""

import argparse
import json
import logging
import os
import sys

import coloredlogs

from .errors import *
from .config import ExperimentConfig
from .csv import write_csv
from .experiment import Experiment
from .storage import save_dataset, load_dataset, save_model, load_model

logger = logging.getLogger(__name__)

COMMANDS = ('simulate', 'dataset', 'train', 'generate', 'rss', 'localize', 'detect', 'bench', 'fresnel-map')


def build_parser():
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("-c", "--config", help="JSON configuration file (defaults apply to missing keys)")
    common.add_argument("-s", "--seed", type=int, help="master seed (overrides experiment.seed)")
    common.add_argument("-o", "--out", help="output directory (overrides output.dir)")
    common.add_argument("--set", action="append", default=[], metavar="BLOCK.KEY=VALUE",
                        help="override a configuration value, may be repeated")
    common.add_argument("-v", "--verbose", help="increase output verbosity", action="store_true")

    parser = argparse.ArgumentParser(prog="rfsense-cli.py",
                                     description="diffraction body model, generative surrogate and RF sensing experiments")
    sub = parser.add_subparsers(dest="command", metavar="COMMAND")

    p = sub.add_parser("simulate", parents=[common], help="diffraction sweeps (los, orientation or grid)")
    p.add_argument("--sweep", choices=["los", "orientation", "grid"], help="sweep kind (default: experiment.sweep.kind)")

    p = sub.add_parser("dataset", parents=[common], help="build the training set from the physics prior")
    p.add_argument("-w", "--workers", type=int, help="worker processes (default: experiment.workers)")
    p.add_argument("--conditions", choices=["grid", "orientation"],
                   help="nominal conditions to sample (default: experiment.conditions)")

    p = sub.add_parser("train", parents=[common], help="train the C-VAE on a saved training set")
    p.add_argument("--dataset", help="training set file (default: <out>/<output.dataset>)")
    p.add_argument("--rss", action="store_true",
                   help="train with beta = experiment.rss_beta and save to <out>/<output.rss_model>")

    p = sub.add_parser("generate", parents=[common], help="generated profile statistics per nominal condition")
    p.add_argument("--model", help="model file (default: <out>/<output.model>)")
    p.add_argument("-n", type=int, help="samples per condition (default: experiment.generate_samples)")
    p.add_argument("--conditions", choices=["grid", "orientation"],
                   help="nominal conditions to generate for (default: experiment.conditions)")

    p = sub.add_parser("rss", parents=[common], help="generated RSS histograms at the configured positions")
    p.add_argument("--model", help="model file (default: <out>/<output.rss_model>)")

    p = sub.add_parser("localize", parents=[common], help="MAP localization of synthetic observations")
    p.add_argument("--model", help="model file (default: <out>/<output.model>)")
    p.add_argument("--trials", type=int, help="number of observations (default: experiment.trials)")

    p = sub.add_parser("detect", parents=[common], help="Fresnel-region detection rates")
    p.add_argument("--model", action="append", default=[], help="model file, may be repeated for a (Z, beta) table")
    p.add_argument("--oracle", action="store_true", help="use the diffraction model itself as generator")

    p = sub.add_parser("bench", parents=[common], help="per-sample generation time, C-VAE vs diffraction")
    p.add_argument("--model", action="append", default=[], help="model file, one per latent size Z")

    sub.add_parser("fresnel-map", parents=[common], help="Fresnel-region labels of the grid cells")
    return parser


def _config(args):
    config = ExperimentConfig.from_file(args.config) if args.config else ExperimentConfig()
    overrides = list(args.set)
    if args.seed is not None:
        overrides.append("experiment.seed={}".format(args.seed))
    if args.out:
        overrides.append("output.dir={}".format(json.dumps(args.out)))
    return config.with_overrides(overrides)


class Outputs:

    """ paths and writers under the output directory, all tagged with the config hash """

    def __init__(self, config):
        self.dir = config['output']['dir']
        self.hash = config.hash
        self.config = config
        os.makedirs(self.dir, exist_ok=True)

    def path(self, name):
        return os.path.join(self.dir, name)

    def default(self, key, given=None):
        return given or self.path(self.config['output'][key])

    def csv(self, name, header, rows):
        write_csv(self.path(name), header, rows, self.hash)
        logger.info("wrote {} rows to {}".format(len(rows), self.path(name)))

    def json(self, name, data):
        with open(self.path(name), 'w', encoding='utf-8') as outfile:
            json.dump(dict(config_hash=self.hash, **data), outfile, sort_keys=True, indent=2)
            outfile.write("\n")
        logger.info("wrote {}".format(self.path(name)))


def _load_model(out, exp, path=None, key='model'):
    model = load_model(out.default(key, path), expected_F=exp.Geometry.F)
    logger.info("parameter counts: {}".format(model.parameter_counts))
    return model


def run(args, config):
    exp = Experiment(config)
    out = Outputs(config)

    if args.command == 'simulate':
        out.csv("simulate.csv", ("x_m", "y_m", "phi_rad", "freq_hz", "atten_db"), exp.simulate(args.sweep))

    elif args.command == 'dataset':
        dataset = exp.build_dataset(args.workers, args.conditions)
        save_dataset(out.default('dataset'), dataset)

    elif args.command == 'train':
        dataset = load_dataset(out.default('dataset', args.dataset))
        if args.rss:
            model, history = exp.train(dataset, beta=config['experiment']['rss_beta'])
            save_model(out.default('rss_model'), model)
        else:
            model, history = exp.train(dataset)
            save_model(out.default('model'), model)
        out.csv("loss.csv", ("epoch", "train_loss", "val_loss", "best_val_loss"),
                [(h.epoch, h.train, h.validation, h.best) for h in history])

    elif args.command == 'generate':
        model = _load_model(out, exp, args.model)
        out.csv("generate.csv", ("x_m", "y_m", "phi_rad", "freq_hz", "mean_db", "std_db"), exp.generate(model, args.n, args.conditions))

    elif args.command == 'rss':
        model = _load_model(out, exp, args.model, 'rss_model')
        for k, (state, distribution) in enumerate(exp.rss(model)):
            out.csv("rss_{}.csv".format(k), ("bin_low_dbm", "bin_high_dbm", "mass"), distribution.histogram.rows())

    elif args.command == 'localize':
        model = _load_model(out, exp, args.model)
        out.csv("localize.csv", ("trial", "true_x_m", "true_y_m", "est_x_m", "est_y_m", "error_m", "score"),
                exp.localize(model, args.trials))

    elif args.command == 'detect':
        if args.oracle and args.model:
            raise DataError("--oracle and --model are mutually exclusive")
        models = [] if args.oracle else [_load_model(out, exp, path) for path in (args.model or [None])]
        reports = exp.detect(models)
        out.csv("detect.csv", ("Z", "beta", "d_T_m", "p_L0", "p_L1", "trials"),
                [row for report in reports for row in report.csv_rows()])
        out.json("detect.json", dict(reports=[report.to_dict() for report in reports]))

    elif args.command == 'bench':
        models = {}
        for path in (args.model or [None]):
            model = _load_model(out, exp, path)
            models[model.Z] = model
        report = exp.bench(models)
        out.csv("bench.csv", ("config", "sec_per_sample", "ratio_vs_em"), report.csv_rows())
        out.json("bench.json", dict(entries=report.to_dict()))

    elif args.command == 'fresnel-map':
        out.csv("fresnel_map.csv", ("x_m", "y_m", "excess_path_m", "d_T_m", "label"), exp.fresnel_map())


def main(argv=None):
    parser = build_parser()
    argv = sys.argv[1:] if argv is None else list(argv)
    if not argv:
        parser.print_usage(sys.stderr)
        return 2
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return e.code
    if not args.command:
        parser.print_usage(sys.stderr)
        return 2

    if args.verbose:
        coloredlogs.install(level='DEBUG')
    else:
        coloredlogs.install(level='INFO', fmt='%(name)s: %(message)s')

    try:
        config = _config(args)
        config.validate()
        logger.info("configuration {}:\n{}".format(config.hash, config.dumps()))
        logger.info("master seed {}".format(config.seed))
        run(args, config)
    except DataError as e:
        print("{}: error: {}".format(parser.prog, e), file=sys.stderr)
        return 2
    except (QuadratureError, SamplingError, ShapeError, StaleCacheError, NumericalError,
            FormatError, BenchError, OSError) as e:
        print("{}: {}: {}".format(parser.prog, e.__class__.__name__, e), file=sys.stderr)
        return 1
    return 0
