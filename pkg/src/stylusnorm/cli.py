"""Command-line entry point.

Exit codes: 0 success, 1 runtime failure, 2 usage or configuration error.
"""

from __future__ import annotations

import argparse
import json
import sys
from dataclasses import asdict, dataclass, fields
from pathlib import Path

import numpy as np

from . import calib, dataio, evaluation, scenarios, stylus, vq

EXIT_OK, EXIT_RUNTIME, EXIT_USAGE = 0, 1, 2


class UsageError(Exception):
    """Bad arguments, config or input files: exit code 2."""


@dataclass
class RunConfig:
    seed: int = 7
    n_users: int = 50
    n_train: int = 5
    n_test: int = 5
    n_samples_mean: int = 300
    jitter: float = 0.03
    db: str = ""
    sections: int = 2
    bits: int = 6
    weight_mode: str = "published"
    scenarios: str = "1,2,3,4,5,6,7,no_pressure"
    forgery: str = "random"
    sweep: str = ""
    c_fr: float = 1.0
    c_fa: float = 1.0
    p_true: float = 0.5
    ink_profile: str = "ink"
    plastic_profile: str = "plastic"
    out: str = "results"
    recenter: bool = False

    def cost(self) -> evaluation.CostParams:
        return evaluation.CostParams(self.c_fr, self.c_fa, self.p_true)

    def synthetic(self) -> dataio.SyntheticConfig:
        return dataio.SyntheticConfig(self.n_users, self.n_train, self.n_test, self.n_samples_mean, self.seed, self.jitter)


def _int_list(text: str) -> list[str]:
    return [t.strip() for t in text.split(",") if t.strip()]


def _flag(text: str) -> bool:
    low = text.lower()
    if low in ("1", "true", "yes", "on"):
        return True
    if low in ("0", "false", "no", "off"):
        return False
    raise ValueError(text)


def read_config(path) -> RunConfig:
    """Flat ``key = value`` file; ``#`` starts a comment."""
    types = {f.name: f.type for f in fields(RunConfig)}
    values = {}
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise UsageError(f"cannot read config: {exc}") from None
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        key, sep, value = line.partition("=")
        key, value = key.strip(), value.strip()
        if not sep or key not in types:
            raise UsageError(f"{path}:{lineno}: unknown or malformed entry {raw.strip()!r}")
        cast = {"int": int, "float": float, "str": str, "bool": _flag}[types[key]]
        try:
            values[key] = cast(value)
        except ValueError:
            raise UsageError(f"{path}:{lineno}: {key} expects {types[key]}, got {value!r}") from None
    return RunConfig(**values)


def _config(args) -> RunConfig:
    cfg = read_config(args.config) if getattr(args, "config", None) else RunConfig()
    for name in ("seed", "bits", "sections", "weight_mode", "scenarios", "forgery", "sweep", "out", "db"):
        value = getattr(args, name, None)
        if value is not None:
            setattr(cfg, name, value)
    if getattr(args, "recenter", False):
        cfg.recenter = True
    if cfg.weight_mode not in stylus.WEIGHT_MODES:
        raise UsageError(f"weight_mode must be one of {stylus.WEIGHT_MODES}")
    if cfg.forgery not in ("random", "skilled"):
        raise UsageError("forgery must be random or skilled")
    if not 1 <= cfg.bits <= 8:
        raise UsageError("bits must lie in 1..8")
    return cfg


def _profile(name: str) -> stylus.StylusProfile:
    try:
        return stylus.load_profile(name)
    except (OSError, ValueError) as exc:
        raise UsageError(f"cannot load profile {name!r}: {exc}") from None


def _database(cfg: RunConfig):
    if cfg.db:
        try:
            return dataio.load_database(cfg.db)
        except (OSError, ValueError) as exc:
            raise UsageError(f"cannot load database {cfg.db!r}: {exc}") from None
    try:
        return dataio.synth_database(cfg.synthetic()), {}
    except ValueError as exc:
        raise UsageError(str(exc)) from None


# -- subcommands -------------------------------------------------------------


def cmd_fit(args) -> int:
    try:
        points = calib.read_calibration_csv(Path(args.measurements).read_text(encoding="utf-8"))
    except OSError as exc:
        raise UsageError(f"cannot read {args.measurements}: {exc}") from None
    except ValueError as exc:
        raise UsageError(f"{args.measurements}: {exc}") from None
    nib = calib.NibSpec(args.nib_diameter)
    raw, pressure = calib.points_to_pressure(points, nib)
    if args.family == "poly6":
        model = calib.fit_poly6(np.column_stack([pressure, raw]))
        print("coefficients (x^6 .. x^0): " + " ".join(f"{c:.6g}" for c in model.coefficients))
        print(f"R^2 = {model.r_squared:.6f}")
        if args.output:
            raise UsageError("poly6 models are not invertible and cannot be saved as a profile")
        return EXIT_OK
    fit = calib.fit_log if args.family == "log" else calib.fit_ellipse
    model = fit(np.column_stack([raw, pressure]))
    for key, value in model.params().items():
        print(f"{key.upper()} = {value:.6g}")
    print(f"R^2 = {model.r_squared:.6f}")
    if args.output:
        profile = stylus.StylusProfile(args.name, nib, model, nominal_max=args.nominal_max)
        Path(args.output).write_text(stylus.format_profile(profile), encoding="utf-8")
        print(f"wrote {args.output}")
    return EXIT_OK


def cmd_profile_show(args) -> int:
    prof = _profile(args.profile)
    sys.stdout.write(stylus.format_profile(prof))
    print(f"# physical_max = {prof.physical_max:.4f} N/mm^2")
    print(f"# nib_surface_mm2 = {prof.nib.surface_mm2:.4f}")
    for mode in stylus.WEIGHT_MODES:
        print(f"# pressure_weight[{mode}] = {stylus.pressure_weight(prof, mode):.4f}")
    return EXIT_OK


def cmd_map(args) -> int:
    src, dst = _profile(args.src), _profile(args.dst)
    in_dir, out_dir = Path(args.input_dir), Path(args.output_dir)
    if not in_dir.is_dir():
        raise UsageError(f"{in_dir} is not a directory")
    files = sorted(in_dir.rglob("*.sig"))
    failed = 0
    for path in files:
        rel = path.relative_to(in_dir)
        try:
            sig = dataio.read_signature_file(path)
            n_clamped = int(np.count_nonzero(stylus.saturated(src, dst, sig.pressure)))
            mapped = stylus.map_signature(src, dst, sig)
        except ValueError as exc:
            failed += 1
            print(f"{rel}: error: {exc}", file=sys.stderr)
            continue
        target = out_dir / rel
        target.parent.mkdir(parents=True, exist_ok=True)
        dataio.write_signature_file(target, mapped)
        print(f"{rel}: {len(sig)} samples, clamped={n_clamped}")
    print(f"mapped {len(files) - failed}/{len(files)} files")
    return EXIT_RUNTIME if failed else EXIT_OK


def cmd_synth(args) -> int:
    cfg = _config(args)
    for name in ("n_users", "n_train", "n_test", "n_samples_mean", "jitter"):
        value = getattr(args, name, None)
        if value is not None:
            setattr(cfg, name, value)
    cfg.db = ""
    db, _ = _database(cfg)
    dataio.save_database(db, args.output_dir)
    print(f"wrote {len(db)} users to {args.output_dir}")
    return EXIT_OK


def _pressure_space(sig, profile):
    return stylus.physical_signature(profile, sig) if profile is not None else sig


def cmd_train(args) -> int:
    cfg = _config(args)
    try:
        db, _ = dataio.load_database(args.db_dir)
    except (OSError, ValueError) as exc:
        raise UsageError(f"cannot load database: {exc}") from None
    norm = _profile(args.normalize) if args.normalize else None
    w = np.ones(5)
    if args.no_pressure:
        w[2] = 0.0
    elif norm is not None:
        w[2] = stylus.pressure_weight(norm, cfg.weight_mode)
    out = Path(args.output)
    out.mkdir(parents=True, exist_ok=True)
    for i, (uid, (train, _)) in enumerate(sorted(db.items())):
        sigs = [_pressure_space(s, norm) for s in train]
        model = vq.train_user_model(sigs, cfg.sections, cfg.bits, w, user_id=uid, seed=1000 * i, recenter=cfg.recenter)
        (out / f"{uid}.vq").write_text(vq.format_model(model), encoding="utf-8")
    print(f"trained {len(db)} models ({cfg.sections} sections, {cfg.bits} bits) into {out}")
    return EXIT_OK


def _load_models(folder):
    paths = sorted(Path(folder).glob("*.vq"))
    if not paths:
        raise UsageError(f"no *.vq models in {folder}")
    try:
        return [vq.parse_model(p.read_text(encoding="utf-8")) for p in paths]
    except ValueError as exc:
        raise UsageError(f"bad model file: {exc}") from None


def _load_sigs(paths, norm):
    try:
        return [_pressure_space(dataio.read_signature_file(p), norm) for p in paths]
    except (OSError, ValueError) as exc:
        raise UsageError(f"cannot read signature: {exc}") from None


def cmd_identify(args) -> int:
    models = _load_models(args.models)
    norm = _profile(args.normalize) if args.normalize else None
    for path, sig in zip(args.signatures, _load_sigs(args.signatures, norm)):
        print(f"{path}\t{evaluation.identify(models, sig)}")
    return EXIT_OK


def cmd_verify(args) -> int:
    models = {m.user_id: m for m in _load_models(args.models)}
    if args.user not in models:
        raise UsageError(f"no model for user {args.user!r}")
    norm = _profile(args.normalize) if args.normalize else None
    for path, sig in zip(args.signatures, _load_sigs(args.signatures, norm)):
        s = vq.score(models[args.user], sig)
        verdict = "accept" if s <= args.threshold else "reject"
        print(f"{path}\t{s:.6f}\t{verdict}")
    return EXIT_OK


def _manifest(cfg: RunConfig, ink, plastic) -> str:
    doc = {
        "config": asdict(cfg),
        "profiles": {
            p.name: {"model": p.model_kind, **p.transfer.params(), "nib_diameter_mm": p.nib.diameter_mm, "raw_max": p.raw_max}
            for p in (ink, plastic)
        },
        "weight_mode": cfg.weight_mode,
        "pressure_weights": {p.name: stylus.pressure_weight(p, cfg.weight_mode) for p in (ink, plastic)},
        "acceptance_margins_pts": {
            "raw_mismatch_gap_min": scenarios.RAW_MISMATCH_GAP_PTS,
            "normalized_match_tolerance": scenarios.NORMALIZED_TOLERANCE_PTS,
        },
    }
    return json.dumps(doc, indent=2, sort_keys=True) + "\n"


def _run_sweep(cfg, db, ink, plastic, out: Path):
    try:
        fractions = [float(f) for f in _int_list(cfg.sweep)]
    except ValueError:
        raise UsageError(f"sweep expects comma-separated percentages, got {cfg.sweep!r}") from None
    points = scenarios.mismatch_sweep(
        db, fractions, cfg.sections, cfg.bits, ink=ink, plastic=plastic, cost=cfg.cost(), seed=cfg.seed,
        recenter=cfg.recenter,
    )
    (out / "sweep.csv").write_text(scenarios.sweep_csv(points), encoding="utf-8")
    for p in points:
        print(f"sweep {p.fraction:g}%: identification {p.identification_rate:.2f}%  min DCF {p.min_dcf:.2f}%")
    return points


def cmd_scenario(args) -> int:
    cfg = _config(args)
    try:
        chosen = [scenarios.get_scenario(k) for k in _int_list(cfg.scenarios)]
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    ink, plastic = _profile(cfg.ink_profile), _profile(cfg.plastic_profile)
    db, forgeries = _database(cfg)
    if cfg.forgery == "skilled" and not forgeries:
        raise UsageError("skilled-forgery runs need a database with forgery/ folders")
    out = Path(cfg.out)
    out.mkdir(parents=True, exist_ok=True)
    results = []
    for sc in chosen:
        res = scenarios.run_scenario(
            sc, db, cfg.forgery, cfg.sections, cfg.bits, cfg.weight_mode,
            forgeries=forgeries, ink=ink, plastic=plastic, cost=cfg.cost(), seed=cfg.seed,
            recenter=cfg.recenter,
        )
        results.append(res)
        stem = f"det_{sc.id}_{cfg.forgery}"
        (out / f"{stem}.csv").write_text(evaluation.det_csv(res.curve), encoding="utf-8")
        evaluation.write_det_svg(out / f"{stem}.svg", {sc.label: res.curve}, cfg.cost(), title=sc.label)
        print(
            f"scenario {sc.label}: identification {res.identification_rate:.2f}%  "
            f"min DCF {res.min_dcf:.2f}%  EER {res.eer:.2f}%  clamped {100 * res.clamped_fraction:.2f}%"
        )
    if results:
        curves = {scenarios.get_scenario(r.scenario).label: r.curve for r in results}
        evaluation.write_det_svg(out / f"det_all_{cfg.forgery}.svg", curves, cfg.cost(), title=f"{cfg.forgery} forgeries")
    (out / "results.csv").write_text(scenarios.results_csv(results), encoding="utf-8")
    (out / "summary.csv").write_text(scenarios.results_table(results), encoding="utf-8")
    if cfg.sweep:
        _run_sweep(cfg, db, ink, plastic, out)
    (out / "manifest.json").write_text(_manifest(cfg, ink, plastic), encoding="utf-8")
    print(f"wrote results to {out}")
    return EXIT_OK


def cmd_sweep(args) -> int:
    cfg = _config(args)
    if args.fractions is not None:
        cfg.sweep = args.fractions
    if not cfg.sweep:
        cfg.sweep = "0,25,50,75,100"
    ink, plastic = _profile(cfg.ink_profile), _profile(cfg.plastic_profile)
    db, _ = _database(cfg)
    out = Path(cfg.out)
    out.mkdir(parents=True, exist_ok=True)
    _run_sweep(cfg, db, ink, plastic, out)
    (out / "manifest.json").write_text(_manifest(cfg, ink, plastic), encoding="utf-8")
    return EXIT_OK


def cmd_det(args) -> int:
    try:
        scores = evaluation.read_scores_csv(Path(args.scores).read_text(encoding="utf-8"))
    except OSError as exc:
        raise UsageError(f"cannot read {args.scores}: {exc}") from None
    except ValueError as exc:
        raise UsageError(f"{args.scores}: {exc}") from None
    if scores.genuine.size == 0 or scores.impostor.size == 0:
        raise UsageError("need both genuine and impostor scores")
    cp = evaluation.CostParams(args.c_fr, args.c_fa, args.p_true)
    curve = evaluation.far_frr_sweep(scores)
    value, thr = evaluation.min_dcf(curve, cp)
    prefix = Path(args.output)
    prefix.parent.mkdir(parents=True, exist_ok=True)
    Path(f"{prefix}.csv").write_text(evaluation.det_csv(curve), encoding="utf-8")
    evaluation.write_det_svg(f"{prefix}.svg", {Path(args.scores).stem: curve}, cp)
    print(f"min DCF = {100 * value:.2f}% at threshold {thr:g}")
    print(f"EER = {100 * evaluation.eer(curve):.2f}%")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="stylusnorm",
        description="Stylus pressure calibration, cross-stylus mapping and signature recognition experiments.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def run_options(p, with_scenarios=False):
        p.add_argument("--config", help="flat key=value run configuration")
        p.add_argument("--seed", type=int)
        p.add_argument("--bits", type=int, help="codebook bits per section (1-8)")
        p.add_argument("--sections", type=int)
        p.add_argument("--weight-mode", dest="weight_mode", choices=stylus.WEIGHT_MODES)
        p.add_argument("--db", help="database folder (default: synthetic)")
        p.add_argument("--out", help="output folder")
        p.add_argument("--recenter", action="store_true", help="translate x/y so each signature starts at the origin")
        if with_scenarios:
            p.add_argument("--scenarios", help="comma-separated ids, e.g. 1,4,6,no_pressure")
            p.add_argument("--forgery", choices=("random", "skilled"))
            p.add_argument("--sweep", help="comma-separated mismatch percentages")

    p = sub.add_parser("fit", help="fit a transfer curve to balance measurements")
    p.add_argument("measurements", help="CSV with header mass_g,raw_level")
    p.add_argument("--family", choices=("poly6", "log", "ellipse"), required=True)
    p.add_argument("--nib-diameter", dest="nib_diameter", type=float, required=True, help="mm")
    p.add_argument("--name", default="custom")
    p.add_argument("--nominal-max", dest="nominal_max", type=float, help="nominal full scale in N/mm^2")
    p.add_argument("-o", "--output", help="profile file to write")
    p.set_defaults(func=cmd_fit)

    p = sub.add_parser("profile", help="inspect stylus profiles")
    psub = p.add_subparsers(dest="profile_command", required=True)
    ps = psub.add_parser("show", help="print a profile and its derived values")
    ps.add_argument("profile", help="built-in name (ink, plastic) or profile file")
    ps.set_defaults(func=cmd_profile_show)

    p = sub.add_parser("map", help="map signature pressure from one stylus to another")
    p.add_argument("--src", required=True)
    p.add_argument("--dst", required=True)
    p.add_argument("input_dir")
    p.add_argument("output_dir")
    p.set_defaults(func=cmd_map)

    p = sub.add_parser("synth", help="write a synthetic signature database")
    run_options(p)
    p.add_argument("--users", dest="n_users", type=int)
    p.add_argument("--train", dest="n_train", type=int)
    p.add_argument("--test", dest="n_test", type=int)
    p.add_argument("--samples", dest="n_samples_mean", type=int)
    p.add_argument("--jitter", type=float)
    p.add_argument("output_dir")
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("train", help="train per-user multi-section VQ models")
    run_options(p)
    p.add_argument("db_dir")
    p.add_argument("-o", "--output", required=True, help="model folder")
    p.add_argument("--normalize", metavar="PROFILE", help="convert pressure to N/mm^2 with this profile")
    p.add_argument("--no-pressure", dest="no_pressure", action="store_true")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("identify", help="closest user model for each signature")
    p.add_argument("models")
    p.add_argument("signatures", nargs="+")
    p.add_argument("--normalize", metavar="PROFILE")
    p.set_defaults(func=cmd_identify)

    p = sub.add_parser("verify", help="score signatures against one claimed user")
    p.add_argument("models")
    p.add_argument("signatures", nargs="+")
    p.add_argument("--user", required=True)
    p.add_argument("--threshold", type=float, required=True)
    p.add_argument("--normalize", metavar="PROFILE")
    p.set_defaults(func=cmd_verify)

    p = sub.add_parser("scenario", help="run the match/mismatch scenario matrix")
    run_options(p, with_scenarios=True)
    p.set_defaults(func=cmd_scenario)

    p = sub.add_parser("sweep", help="identification vs share of users in mismatch")
    run_options(p)
    p.add_argument("--fractions", help="comma-separated percentages (default 0,25,50,75,100)")
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("det", help="DET curve, min DCF and EER from a label,score CSV")
    p.add_argument("scores")
    p.add_argument("-o", "--output", required=True, help="output prefix (.csv and .svg)")
    p.add_argument("--c-fr", dest="c_fr", type=float, default=1.0)
    p.add_argument("--c-fa", dest="c_fa", type=float, default=1.0)
    p.add_argument("--p-true", dest="p_true", type=float, default=0.5)
    p.set_defaults(func=cmd_det)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (ValueError, RuntimeError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
