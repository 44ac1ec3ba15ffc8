"""Batch command-line interface: fit, diagnose, compare, predict, verify.

Every run is reproducible from its config: outputs carry no timestamps
(the run.log sidecar is the one documented exception) and default output
directories are derived from the link and seed. Exit codes: 0 success
(warnings allowed), 2 usage, 3 data problems, 4 numerical failures,
5 mismatched artifacts.
"""

import argparse
import dataclasses
import datetime
import json
import os
import sys

from . import chainfile, report
from .data import (
    dataset_fingerprint,
    design_from_metadata,
    encode,
    encode_new,
    holdout_split,
    parse_dataset,
    parse_new_rows,
    prepare_training_table,
    write_records,
    HOLDOUT_STREAM,
)
from .diagnostics import summarize
from .errors import DataError, DatasetMismatch, MismatchError, NumericalError
from .loo import compare as loo_compare, pointwise_loglik, psis_loo
from .model import LINKS, ModelSpec, PriorSpec, default_priors
from .oracle import run_verification
from .predict import SCALES, posterior_predict
from .rngutil import substream_seed
from .sampler import SamplerConfig, sample

EXIT_OK = 0
EXIT_USAGE = 2
EXIT_DATA = 3
EXIT_NUMERICAL = 4
EXIT_MISMATCH = 5

RHAT_WARNING_LEVEL = 1.01


@dataclasses.dataclass
class RunConfig:
    """Everything a fit depends on; only `data` is required."""

    data: str
    delimiter: str = ";"
    subsample: int = 10000
    balance: str = "after"
    holdout: int = 0
    link: str = "logit"
    prior: dict = None
    chains: int = 4
    warmup: int = 1000
    draws: int = 1000
    seed: int = 0
    target_accept: float = 0.8
    standardize: bool = True
    out: str = None

    def __post_init__(self):
        if self.link not in LINKS:
            raise ValueError(f"link must be one of {LINKS}, got {self.link!r}")
        if self.balance not in ("before", "after", "off"):
            raise ValueError(f"unknown balance mode {self.balance!r}")
        if self.subsample < 0 or self.holdout < 0:
            raise ValueError("subsample and holdout must be non-negative")
        if self.prior is None:
            self.prior = default_priors(self.link).to_dict()
        if self.out is None:
            self.out = os.path.join("runs", f"{self.link}-seed{self.seed}")

    def prior_spec(self):
        return PriorSpec.from_dict(self.prior)

    def sampler_config(self):
        return SamplerConfig(
            n_chains=self.chains,
            n_warmup=self.warmup,
            n_draws=self.draws,
            seed=self.seed,
            target_accept=self.target_accept,
        )

    def to_dict(self):
        return dataclasses.asdict(self)

    @classmethod
    def from_dict(cls, d):
        return cls(**d)


class _RunLog:
    """Timestamped sidecar; the only artifact allowed to differ between reruns."""

    def __init__(self, path):
        self._path = path
        self._entries = []

    def note(self, message):
        stamp = datetime.datetime.now(datetime.timezone.utc).isoformat()
        self._entries.append(f"{stamp} {message}")

    def flush(self):
        with open(self._path, "w", encoding="utf-8") as handle:
            handle.write("\n".join(self._entries) + "\n")


def _emit(text_body, json_body, fmt, out_dir=None, stem=None):
    """Print and optionally write the selected formats."""
    if fmt in ("text", "both"):
        sys.stdout.write(text_body)
        if out_dir is not None:
            with open(os.path.join(out_dir, f"{stem}.txt"), "w", encoding="utf-8") as h:
                h.write(text_body)
    if fmt in ("json", "both"):
        if fmt == "json":
            sys.stdout.write(json_body)
        if out_dir is not None:
            with open(os.path.join(out_dir, f"{stem}.json"), "w", encoding="utf-8") as h:
                h.write(json_body)


def _warn(message):
    print(f"warning: {message}", file=sys.stderr)


def _pipeline_info(config):
    return {
        "delimiter": config.delimiter,
        "subsample": config.subsample,
        "balance": config.balance,
        "holdout": config.holdout,
        "seed": config.seed,
        "standardize": config.standardize,
    }


def _build_training_set(table, config):
    """(train_table, balance_report, holdout_table) per the run config."""
    prepared, balance_report = prepare_training_table(
        table, config.subsample, config.balance, config.seed
    )
    holdout_table = None
    if config.holdout:
        prepared, holdout_table = holdout_split(
            prepared, config.holdout, substream_seed(config.seed, HOLDOUT_STREAM)
        )
    return prepared, balance_report, holdout_table


def cmd_fit(args):
    config = RunConfig(
        data=args.data,
        delimiter=args.delimiter,
        subsample=args.subsample,
        balance=args.balance,
        holdout=args.holdout,
        link=args.link,
        prior=(
            {
                "intercept_mean": args.prior_intercept[0],
                "intercept_sd": args.prior_intercept[1],
                "slope_mean": args.prior_slopes[0],
                "slope_sd": args.prior_slopes[1],
            }
            if args.prior_intercept or args.prior_slopes
            else None
        ),
        chains=args.chains,
        warmup=args.warmup,
        draws=args.draws,
        seed=args.seed,
        target_accept=args.target_accept,
        standardize=not args.no_standardize,
        out=args.out,
    )
    os.makedirs(config.out, exist_ok=True)
    log = _RunLog(os.path.join(config.out, "run.log"))
    log.note(f"fit started: link={config.link} seed={config.seed}")

    with open(os.path.join(config.out, "config.json"), "w", encoding="utf-8") as h:
        h.write(json.dumps(config.to_dict(), indent=2, sort_keys=True) + "\n")

    table = parse_dataset(config.data, config.delimiter)
    log.note(f"parsed {table.n_rows} rows")
    train, balance_report, holdout_table = _build_training_set(table, config)
    log.note(f"training rows: {train.n_rows}")

    design, target = encode(train, standardize=config.standardize)
    model = ModelSpec(
        link=config.link, prior=config.prior_spec(), design=design, target=target
    )
    draws = sample(model, config.sampler_config(), threads=args.threads)
    log.note("sampling finished")

    model_info = {"link": config.link, "prior": config.prior, "design": design.metadata()}
    dataset_info = {
        "fingerprint": dataset_fingerprint(design, target),
        "n_rows": int(design.n_rows),
        "pipeline": _pipeline_info(config),
        "balance": balance_report.to_dict() if balance_report else None,
    }
    chain_path = os.path.join(config.out, f"{config.link}.chain")
    chainfile.save_chain_file(chain_path, draws, model_info, dataset_info)

    with open(os.path.join(config.out, "encoding.json"), "w", encoding="utf-8") as h:
        h.write(json.dumps(design.metadata(), indent=2, sort_keys=True) + "\n")
    if balance_report is not None:
        with open(os.path.join(config.out, "balance.json"), "w", encoding="utf-8") as h:
            h.write(json.dumps(balance_report.to_dict(), indent=2, sort_keys=True) + "\n")
    if holdout_table is not None:
        write_records(
            holdout_table, os.path.join(config.out, "holdout.csv"), config.delimiter
        )

    rows = summarize(draws)
    _emit(
        report.render_summary_text(rows),
        report.render_summary_json(rows),
        args.format,
        out_dir=config.out,
        stem="summary",
    )

    total_divergences = sum(draws.divergence_counts)
    if total_divergences:
        _warn(f"{total_divergences} divergent transitions after warmup")
    bad_rhat = [r.name for r in rows if r.rhat == r.rhat and r.rhat > RHAT_WARNING_LEVEL]
    if bad_rhat:
        _warn(
            f"rhat above {RHAT_WARNING_LEVEL} for: " + ", ".join(bad_rhat)
        )
    log.note(f"fit finished: {total_divergences} divergences")
    log.flush()
    return EXIT_OK


def cmd_diagnose(args):
    draws, _ = chainfile.load_chain_file(args.chain)
    rows = summarize(draws)
    _emit(
        report.render_summary_text(rows),
        report.render_summary_json(rows),
        args.format,
    )
    bad_rhat = [r.name for r in rows if r.rhat == r.rhat and r.rhat > RHAT_WARNING_LEVEL]
    if bad_rhat:
        _warn(f"rhat above {RHAT_WARNING_LEVEL} for: " + ", ".join(bad_rhat))
    return EXIT_OK


def _rebuild_model(header, table):
    """Recreate the training design a chain file header describes."""
    pipeline = header["dataset"]["pipeline"]
    config = RunConfig(
        data="",
        delimiter=pipeline["delimiter"],
        subsample=int(pipeline["subsample"]),
        balance=pipeline["balance"],
        holdout=int(pipeline["holdout"]),
        link=header["model"]["link"],
        prior=header["model"]["prior"],
        seed=int(pipeline["seed"]),
        standardize=bool(pipeline["standardize"]),
    )
    train, _, _ = _build_training_set(table, config)
    design, target = encode(train, standardize=config.standardize)
    if design.metadata() != header["model"]["design"]:
        raise DatasetMismatch(
            "rebuilt design does not match the design stored in the chain file; "
            "the data file differs from the one used to fit"
        )
    fingerprint = dataset_fingerprint(design, target)
    if fingerprint != header["dataset"]["fingerprint"]:
        raise DatasetMismatch(
            f"rebuilt dataset fingerprint {fingerprint} differs from stored "
            f"{header['dataset']['fingerprint']}"
        )
    return ModelSpec(
        link=config.link, prior=config.prior_spec(), design=design, target=target
    )


def cmd_compare(args):
    if len(args.chains) < 2:
        raise ValueError("compare needs at least two chain files")
    table = parse_dataset(args.data, args.delimiter)
    results = []
    names = []
    total_high_k = 0
    for path in args.chains:
        draws, header = chainfile.load_chain_file(path)
        model = _rebuild_model(header, table)
        loglik = pointwise_loglik(draws, model)
        loo_result = psis_loo(loglik)
        total_high_k += loo_result.n_high_k
        base = f"{model.link}_model"
        name = base
        counter = 2
        while name in names:
            name = f"{base}_{counter}"
            counter += 1
        names.append(name)
        results.append((name, loo_result))
    comparison = loo_compare(results)
    _emit(
        report.render_comparison_text(comparison),
        report.render_comparison_json(comparison),
        args.format,
    )
    if total_high_k:
        _warn(f"{total_high_k} observations with Pareto k above 0.7")
    return EXIT_OK


def cmd_predict(args):
    draws, header = chainfile.load_chain_file(args.chain)
    metadata = header["model"]["design"]
    table = parse_new_rows(args.data, args.delimiter, metadata)
    if table.n_rows == 0:
        sys.stdout.write(report.render_predictions_text([]))
        return EXIT_OK
    values = encode_new(metadata, table)
    rows = posterior_predict(
        draws,
        design_from_metadata(metadata, values),
        header["model"]["link"],
        scale=args.scale,
        seed=args.seed,
        training_metadata=metadata,
    )
    _emit(
        report.render_predictions_text(rows),
        report.render_predictions_json(rows),
        args.format,
    )
    return EXIT_OK


def cmd_verify(args):
    checks = run_verification(seed=args.seed)
    _emit(
        report.render_checks_text(checks),
        report.render_checks_json(checks),
        args.format,
    )
    if all(c.passed for c in checks):
        return EXIT_OK
    return EXIT_NUMERICAL


def build_parser():
    parser = argparse.ArgumentParser(
        prog="bernreg",
        description=(
            "Bayesian binary-response regression: gradient-based posterior "
            "sampling, convergence diagnostics, leave-one-out model "
            "comparison, and posterior prediction."
        ),
    )
    sub = parser.add_subparsers(dest="command", required=True)

    fit = sub.add_parser("fit", help="fit a model and write a run directory")
    fit.add_argument("--data", required=True, help="delimited input file")
    fit.add_argument("--delimiter", default=";")
    fit.add_argument("--subsample", type=int, default=10000,
                     help="rows to draw before fitting; 0 keeps the whole table")
    fit.add_argument("--balance", choices=("before", "after", "off"), default="after")
    fit.add_argument("--holdout", type=int, default=0,
                     help="rows held out of training and written to holdout.csv")
    fit.add_argument("--link", choices=LINKS, default="logit")
    fit.add_argument("--prior-intercept", nargs=2, type=float, metavar=("MEAN", "SD"))
    fit.add_argument("--prior-slopes", nargs=2, type=float, metavar=("MEAN", "SD"))
    fit.add_argument("--chains", type=int, default=4)
    fit.add_argument("--warmup", type=int, default=1000)
    fit.add_argument("--draws", type=int, default=1000)
    fit.add_argument("--seed", type=int, default=0)
    fit.add_argument("--target-accept", type=float, default=0.8)
    fit.add_argument("--no-standardize", action="store_true")
    fit.add_argument("--threads", type=int, default=1,
                     help="chain scheduling only; never changes results")
    fit.add_argument("--format", choices=("text", "json", "both"), default="both")
    fit.add_argument("--out", default=None,
                     help="output directory (default runs/<link>-seed<seed>)")
    fit.set_defaults(func=cmd_fit)

    diag = sub.add_parser("diagnose", help="summaries and diagnostics of a saved fit")
    diag.add_argument("chain", help="chain file from a fit")
    diag.add_argument("--format", choices=("text", "json", "both"), default="text")
    diag.set_defaults(func=cmd_diagnose)

    comp = sub.add_parser("compare", help="rank saved fits by held-out fit quality")
    comp.add_argument("chains", nargs="+", help="two or more chain files")
    comp.add_argument("--data", required=True, help="the training data file")
    comp.add_argument("--delimiter", default=";")
    comp.add_argument("--format", choices=("text", "json", "both"), default="text")
    comp.set_defaults(func=cmd_compare)

    pred = sub.add_parser("predict", help="score new rows with a saved fit")
    pred.add_argument("chain", help="chain file from a fit")
    pred.add_argument("--data", required=True, help="delimited rows to score")
    pred.add_argument("--delimiter", default=";")
    pred.add_argument("--scale", choices=SCALES, default="outcome")
    pred.add_argument("--seed", type=int, default=0)
    pred.add_argument("--format", choices=("text", "json", "both"), default="text")
    pred.set_defaults(func=cmd_predict)

    ver = sub.add_parser("verify", help="run the numerical cross-check suite")
    ver.add_argument("--seed", type=int, default=0)
    ver.add_argument("--format", choices=("text", "json", "both"), default="text")
    ver.set_defaults(func=cmd_verify)

    return parser


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except FileNotFoundError as exc:
        print(f"error: cannot read {exc.filename}", file=sys.stderr)
        return EXIT_DATA
    except DataError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except NumericalError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    except MismatchError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_MISMATCH
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
