"""Command-line interface.

Subcommands: generate, score, sweep-truncation, sweep-k, limits, export.
Results go to files only; progress and errors go to stderr. A simple
key=value config file can pre-set any long flag (flags win). Exit codes:
0 success, 1 usage/configuration error, 2 data error, 3 infeasible
evaluation.
"""

from __future__ import annotations

import argparse
import random
import sys

from . import attackers, dataio, datagen, evaluation
from .codecs import CodecConfig, HashPolicy
from .errors import (
    AttackMaterialError,
    ConfigError,
    DataFormatError,
    EvaluationError,
    ProfileError,
)
from .model import Decision, FeatureVector, RiskConfig, classify, risk_score
from .store import HistoryStore

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_DATA = 2
EXIT_INFEASIBLE = 3


class _UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise _UsageError(message)


def _parse_steps(text: str) -> tuple[int, ...]:
    """Accept '0..24', a comma list, or a single integer."""
    text = text.strip()
    try:
        if ".." in text:
            lo, hi = text.split("..", 1)
            return tuple(range(int(lo), int(hi) + 1))
        return tuple(int(part) for part in text.split(","))
    except ValueError as exc:
        raise _UsageError(f"invalid step list {text!r}") from exc


def _load_config_file(path: str) -> dict[str, str]:
    values: dict[str, str] = {}
    try:
        with open(path) as fh:
            for line_no, line in enumerate(fh, start=1):
                text = line.split("#", 1)[0].strip()
                if not text:
                    continue
                key, sep, value = text.partition("=")
                if not sep:
                    raise DataFormatError("expected key=value", row=line_no)
                values[key.strip().replace("-", "_")] = value.strip()
    except OSError as exc:
        raise DataFormatError(f"cannot read config file {path!r}: {exc}") from exc
    return values


def _apply_config(args: argparse.Namespace, defaults: dict):
    """Precedence: built-in defaults < config file < explicit flags."""
    if getattr(args, "config", None):
        file_values = _load_config_file(args.config)
        for key, value in file_values.items():
            if key not in defaults:
                raise ConfigError(f"unknown config key {key!r}")
            if getattr(args, key) is None:
                setattr(args, key, value)
    for key, default in defaults.items():
        if getattr(args, key, None) is None:
            setattr(args, key, default)


def _codec_from_args(args) -> CodecConfig:
    policy = None
    if args.hash_salt is not None:
        try:
            salt = bytes.fromhex(args.hash_salt)
        except ValueError as exc:
            raise ConfigError("hash salt must be hex-encoded bytes") from exc
        policy = HashPolicy(salt=salt, iterations=int(args.hash_iterations))
    return CodecConfig(
        truncation_bits=int(getattr(args, "bits_base", 0)),
        coarsen_ua=bool(args.coarsen_ua),
        hash_policy=policy,
    )


def _risk_from_args(args) -> RiskConfig:
    alpha = None if str(args.alpha).lower() == "none" else float(args.alpha)
    return RiskConfig(alpha=alpha, unseen_floor=float(args.floor))


def _build_models(args, dataset) -> dict[str, attackers.AttackerModel]:
    kinds = tuple(k.strip() for k in str(args.models).split(",") if k.strip())
    blocklist = None
    geomap = None
    if any(k in ("naive", "vpn") for k in kinds):
        if not args.blocklist:
            raise ConfigError("naive/vpn attacker models need --blocklist")
        blocklist = attackers.load_blocklist(
            args.blocklist, rng=random.Random(int(args.seed))
        )
    if "vpn" in kinds:
        if not args.geomap:
            raise ConfigError("the vpn attacker model needs --geomap")
        geomap = attackers.GeoMap.from_csv(args.geomap)
    return {
        kind: attackers.build_attacker_model(
            kind, dataset, blocklist=blocklist, geomap=geomap
        )
        for kind in kinds
    }


# -- subcommands ---------------------------------------------------------


def _cmd_generate(args) -> int:
    _apply_config(args, {
        "users": 780, "logins": 9555, "seed": 0,
        "region_concentration": 0.9, "time_span_days": 660, "outlier_rate": 0.02,
    })
    profile = datagen.DatasetProfile(
        n_users=int(args.users),
        total_logins=int(args.logins),
        region_concentration=float(args.region_concentration),
        time_span_days=int(args.time_span_days),
        outlier_rate=float(args.outlier_rate),
        seed=int(args.seed),
    )
    dataset = datagen.generate(profile)
    dataio.write_dataset(dataset, args.out)
    print(f"wrote {len(dataset.events)} events for {profile.n_users} users to {args.out}",
          file=sys.stderr)
    if args.blocklist_out:
        with open(args.blocklist_out, "w") as fh:
            fh.write("\n".join(datagen.synthetic_blocklist_lines(profile)) + "\n")
        print(f"wrote synthetic blocklist to {args.blocklist_out}", file=sys.stderr)
    if args.geomap_out:
        with open(args.geomap_out, "w") as fh:
            for cidr, region in datagen.synthetic_geomap_pairs(profile):
                fh.write(f"{cidr},{region}\n")
        print(f"wrote synthetic geo map to {args.geomap_out}", file=sys.stderr)
    return EXIT_OK


def _cmd_score(args) -> int:
    _apply_config(args, {
        "bits": 0, "hash_salt": None, "hash_iterations": 1, "coarsen_ua": False,
        "alpha": 1.0, "floor": 1e-4, "threshold": None, "seed": 0,
    })
    dataset = dataio.read_dataset(args.dataset)
    args.bits_base = int(args.bits)
    codec = _codec_from_args(args)
    risk = _risk_from_args(args)
    store = HistoryStore(dataset.feature_ids)
    ip_idx = dataset.feature_ids.index("ip")
    ua_idx = dataset.feature_ids.index("user_agent")
    for ev in dataset.events:
        values = list(ev.values)
        values[ip_idx] = codec.encode_ip(values[ip_idx])
        values[ua_idx] = codec.encode_ua(values[ua_idx])
        store.record_login(ev.user_id, FeatureVector(tuple(values)), ev.timestamp)
    fv_values = [""] * len(dataset.feature_ids)
    fv_values[ip_idx] = codec.encode_ip(args.ip)
    fv_values[ua_idx] = codec.encode_ua(args.ua)
    score = risk_score(store, risk, args.user, FeatureVector(tuple(fv_values)))
    with open(args.out, "w") as fh:
        fh.write("user_id,score,decision\n")
        decision = ""
        if args.threshold is not None:
            decision = classify(score, float(args.threshold)).value
        fh.write(f"{args.user},{format(score.value, '.17g')},{decision}\n")
    print(f"score {score.value:.6g} for user {args.user}", file=sys.stderr)
    return EXIT_OK


_SWEEP_DEFAULTS = {
    "seed": 0, "target_tpr": 0.995, "attempts": 100,
    "models": "naive,vpn,targeted", "blocklist": None, "geomap": None,
    "hash_salt": None, "hash_iterations": 1, "coarsen_ua": False,
    "alpha": 1.0, "floor": 1e-4, "rsr_delta": 0.01,
}


def _run_sweep(args, enhancement: str) -> int:
    defaults = dict(_SWEEP_DEFAULTS)
    if enhancement == evaluation.TRUNCATION:
        defaults["bits"] = "0..24"
    else:
        defaults["k"] = "1..6"
    _apply_config(args, defaults)
    dataset = dataio.read_dataset(args.dataset)
    models = _build_models(args, dataset)
    kinds = tuple(models)
    steps = _parse_steps(str(args.bits if enhancement == evaluation.TRUNCATION else args.k))
    config = evaluation.EvalConfig(
        target_tpr=float(args.target_tpr),
        attacker_models=kinds,
        attempts_per_victim=int(args.attempts),
        truncation_bits=steps if enhancement == evaluation.TRUNCATION else (0,),
        k_values=steps if enhancement == evaluation.K_ANONYMITY else (1,),
        rsr_limit_delta=float(args.rsr_delta),
        seed=int(args.seed),
    )
    args.bits_base = 0
    codec = _codec_from_args(args)
    risk = _risk_from_args(args)
    print(f"running {enhancement} sweep over steps {list(steps)} "
          f"({len(dataset.events)} events, models {','.join(kinds)})", file=sys.stderr)
    result = evaluation.run_sweep(dataset, config, enhancement, models,
                                  codec_base=codec, risk=risk)
    dataio.write_sweep_result(result, args.out)
    print(f"wrote sweep results to {args.out}", file=sys.stderr)
    return EXIT_OK


def _cmd_limits(args) -> int:
    _apply_config(args, {"rsr_delta": None})
    result = dataio.read_sweep_result(args.result)
    delta = float(args.rsr_delta) if args.rsr_delta is not None else None
    limits = evaluation.extract_limits(result, rsr_limit_delta=delta)
    dataio.write_limits(limits, args.out)
    print(f"wrote limits to {args.out}", file=sys.stderr)
    return EXIT_OK


def _cmd_export(args) -> int:
    _apply_config(args, {})
    result = dataio.read_sweep_result(args.result)
    dataio.export_plot_data(result, args.out)
    print(f"wrote plot data to {args.out}", file=sys.stderr)
    return EXIT_OK


# -- parser --------------------------------------------------------------


def build_parser() -> _Parser:
    parser = _Parser(prog="rbaprivacy",
                     description="Risk-based authentication privacy evaluation")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--config", help="key=value config file; flags override it")
        p.add_argument("--seed", type=int)

    p = sub.add_parser("generate", help="generate a synthetic login dataset")
    common(p)
    p.add_argument("--users", type=int)
    p.add_argument("--logins", type=int)
    p.add_argument("--region-concentration", dest="region_concentration", type=float)
    p.add_argument("--time-span-days", dest="time_span_days", type=int)
    p.add_argument("--outlier-rate", dest="outlier_rate", type=float)
    p.add_argument("--out", required=True)
    p.add_argument("--blocklist-out", dest="blocklist_out")
    p.add_argument("--geomap-out", dest="geomap_out")
    p.set_defaults(handler=_cmd_generate)

    p = sub.add_parser("score", help="score one login attempt against a dataset history")
    common(p)
    p.add_argument("--dataset", required=True)
    p.add_argument("--user", required=True)
    p.add_argument("--ip", required=True)
    p.add_argument("--ua", required=True)
    p.add_argument("--bits", type=int)
    p.add_argument("--hash-salt", dest="hash_salt")
    p.add_argument("--hash-iterations", dest="hash_iterations", type=int)
    p.add_argument("--coarsen-ua", dest="coarsen_ua", action="store_const", const=True)
    p.add_argument("--alpha")
    p.add_argument("--floor", type=float)
    p.add_argument("--threshold", type=float)
    p.add_argument("--out", required=True)
    p.set_defaults(handler=_cmd_score)

    for name, enhancement in (("sweep-truncation", evaluation.TRUNCATION),
                              ("sweep-k", evaluation.K_ANONYMITY)):
        p = sub.add_parser(name, help=f"run a {enhancement} sweep")
        common(p)
        p.add_argument("--dataset", required=True)
        if enhancement == evaluation.TRUNCATION:
            p.add_argument("--bits", help="e.g. 0..24 or 0,4,8")
        else:
            p.add_argument("--k", help="e.g. 1..6")
        p.add_argument("--target-tpr", dest="target_tpr", type=float)
        p.add_argument("--attempts", type=int)
        p.add_argument("--models", help="comma list of naive,vpn,targeted")
        p.add_argument("--blocklist")
        p.add_argument("--geomap")
        p.add_argument("--hash-salt", dest="hash_salt")
        p.add_argument("--hash-iterations", dest="hash_iterations", type=int)
        p.add_argument("--coarsen-ua", dest="coarsen_ua", action="store_const", const=True)
        p.add_argument("--alpha")
        p.add_argument("--floor", type=float)
        p.add_argument("--rsr-delta", dest="rsr_delta", type=float)
        p.add_argument("--out", required=True)
        p.set_defaults(handler=lambda a, e=enhancement: _run_sweep(a, e))

    p = sub.add_parser("limits", help="extract acceptable-step limits from a sweep result")
    common(p)
    p.add_argument("--result", required=True)
    p.add_argument("--rsr-delta", dest="rsr_delta", type=float)
    p.add_argument("--out", required=True)
    p.set_defaults(handler=_cmd_limits)

    p = sub.add_parser("export", help="export plot-ready series from a sweep result")
    common(p)
    p.add_argument("--result", required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(handler=_cmd_export)

    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        return args.handler(args)
    except _UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        parser.print_usage(sys.stderr)
        return EXIT_USAGE
    except (ConfigError, ProfileError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (DataFormatError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except (EvaluationError, AttackMaterialError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INFEASIBLE


if __name__ == "__main__":
    sys.exit(main())
