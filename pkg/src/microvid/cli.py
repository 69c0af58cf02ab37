"""``microvid`` command line.

Exit codes: 0 success, 1 partial success (some videos skipped), 2 bad
configuration or input.
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path
from typing import Sequence

import numpy as np

from . import analysis, ingest, learn, synth
from .features import FeatureTable, extract_video, feature_names
from .groups import ATTRIBUTE_GROUPS, NOVELTY_GROUPS, Group, parse_groups
from .novelty import NoveltyModel, corpus_mean_spectrum

EXIT_OK, EXIT_PARTIAL, EXIT_CONFIG = 0, 1, 2
SPECTRUM_FILE = "mean_spectrum.npy"
log = logging.getLogger("microvid")


class ConfigError(Exception):
    pass


def _setup_logging(out_dir: Path | None) -> None:
    log.setLevel(logging.INFO)
    for h in list(log.handlers):
        log.removeHandler(h)
        h.close()
    if out_dir is not None:
        out_dir.mkdir(parents=True, exist_ok=True)
        fh = logging.FileHandler(out_dir / "microvid.log", encoding="utf-8")
        fh.setFormatter(logging.Formatter("%(asctime)s %(levelname)s %(message)s"))
        log.addHandler(fh)


def _thresholds(values) -> list[float]:
    values = values if isinstance(values, (list, tuple)) else [values]
    try:
        return [ingest.parse_threshold(v) for v in values]
    except ValueError as exc:
        raise ConfigError(str(exc)) from None


def _groups(spec) -> tuple[Group, ...]:
    if isinstance(spec, (list, tuple)):
        spec = ",".join(spec)
    try:
        return parse_groups(spec)
    except ValueError as exc:
        raise ConfigError(str(exc)) from None


def _require(path, what: str) -> Path:
    if path is None:
        raise ConfigError(f"--{what} is required")
    p = Path(path)
    if not p.exists():
        raise ConfigError(f"{what} not found: {p}")
    return p


# -- extract ----------------------------------------------------------------


def _extract_one(entry, groups, spectrum, model_json, extended, decode_cfg):
    try:
        model = NoveltyModel.from_json(model_json) if model_json else None
        asset = ingest.decode_asset(entry, decode_cfg)
        return entry.video_id, extract_video(asset, groups, spectrum, model, extended), None
    except Exception as exc:  # reported per video; the run continues
        return entry.video_id, None, f"{type(exc).__name__}: {exc}"


def _middle_frames(entries, cfg):
    for e in entries:
        try:
            asset = ingest.decode_asset(e, cfg)
        except (ingest.DecodeError, ValueError, OSError) as exc:
            log.warning("spectrum: skipping %s (%s)", e.video_id, exc)
            continue
        yield asset.frame(asset.n_frames // 2)


def cmd_extract(args) -> int:
    out = Path(args.out)
    _setup_logging(out)
    try:
        entries = ingest.load_manifest(_require(args.manifest, "manifest"))
    except (ingest.ManifestError, OSError) as exc:
        raise ConfigError(f"unreadable manifest: {exc}") from None
    groups = _groups(args.groups)
    model = NoveltyModel.load(_require(args.novelty_model, "novelty-model")) if args.novelty_model else None
    if model is None:
        if args.groups in (None, "all"):
            groups = tuple(g for g in groups if g not in NOVELTY_GROUPS)
        elif set(groups) & set(NOVELTY_GROUPS):
            raise ConfigError("novelty groups need --novelty-model")
    decode_cfg = ingest.DecodeConfig(decoder_cmd=args.decoder)

    spectrum = None
    if args.spectrum:
        spectrum = np.load(_require(args.spectrum, "spectrum"))
    elif model is not None and model.mean_spectrum_ is not None:
        spectrum = model.mean_spectrum_
    elif Group.COMPOSITION in groups or set(groups) & set(NOVELTY_GROUPS):
        cached = out / SPECTRUM_FILE
        if args.resume and cached.exists():
            spectrum = np.load(cached)
        else:
            spectrum = corpus_mean_spectrum(_middle_frames(entries, decode_cfg))
            np.save(cached, spectrum)
        log.info("corpus mean spectrum from %d videos", len(entries))

    table = FeatureTable.load(out) if args.resume and out.exists() else FeatureTable()
    done = table.complete_ids(groups) if args.resume else set()
    todo = [e for e in entries if e.video_id not in done]
    model_json = model.to_json() if model is not None else None
    jobs = [(e, groups, spectrum, model_json, args.extended_affect, decode_cfg) for e in todo]
    workers = max(1, args.workers or os.cpu_count() or 1)
    if workers > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=min(workers, len(jobs))) as pool:
            results = list(pool.map(_extract_one, *zip(*jobs)))
    else:
        results = [_extract_one(*j) for j in jobs]

    failures = []
    for vid, vf, err in sorted(results, key=lambda r: r[0]):
        if err is None:
            table.add(vf)
        else:
            failures.append((vid, err))
            log.error("%s: %s", vid, err)
    table.save(out)
    if args.npz:
        table.save_npz(out / "features.npz")
    n_ok = len(todo) - len(failures)
    print(f"extracted {n_ok} videos ({len(done)} already present), {len(failures)} failed; groups: "
          + ",".join(g.value for g in groups))
    for vid, err in failures:
        print(f"  failed {vid}: {err}", file=sys.stderr)
    return EXIT_PARTIAL if failures else EXIT_OK


# -- novelty ----------------------------------------------------------------


def cmd_novelty_fit(args) -> int:
    fdir = _require(args.features, "features")
    _setup_logging(Path(args.out).parent)
    table = FeatureTable.load(fdir)
    for g in ATTRIBUTE_GROUPS:
        if g not in table.summary:
            raise ConfigError(f"background feature table is missing group {g.value}")
    spec_path = Path(args.spectrum) if args.spectrum else fdir / SPECTRUM_FILE
    spectrum = np.load(spec_path) if spec_path.exists() else None
    background = table.per_video(ATTRIBUTE_GROUPS)
    try:
        model = NoveltyModel(n_clusters=args.k, random_state=args.seed).fit(background, spectrum)
    except ValueError as exc:
        raise ConfigError(str(exc)) from None
    Path(args.out).parent.mkdir(parents=True, exist_ok=True)
    model.save(args.out)
    print(f"novelty model: {model.corpus_size_} background videos, k={args.k} -> {args.out}")
    return EXIT_OK


# -- dataset / train / evaluate ---------------------------------------------


def _dataset(args, threshold: float) -> ingest.LabeledDataset:
    try:
        records = ingest.read_annotations(_require(args.annotations, "annotations"))
    except ingest.ManifestError as exc:
        raise ConfigError(str(exc)) from None
    return ingest.derive_dataset(records, threshold)


def cmd_dataset(args) -> int:
    for t in _thresholds(args.threshold):
        ds = _dataset(args, t)
        print(f"{ds.tag}: {ds.n_creative} creative, {ds.n_noncreative} non-creative")
        if args.out:
            out = Path(args.out)
            out.mkdir(parents=True, exist_ok=True)
            ingest.write_dataset(ds, out / f"{ds.tag}.csv")
    return EXIT_OK


def _load_features(args, groups) -> dict[Group, dict[str, np.ndarray]]:
    fdir = _require(args.features, "features")
    try:
        table = FeatureTable.load(fdir, groups)
    except FileNotFoundError as exc:
        raise ConfigError(str(exc)) from None
    return {g: table.instances(g) for g in groups}


def _available_groups(args) -> tuple[Group, ...]:
    groups = _groups(args.groups)
    if args.groups in (None, "all"):
        fdir = _require(args.features, "features")
        groups = tuple(g for g in groups if (fdir / f"{g.value}.csv").exists())
    return groups


def _experiment_config(args, threshold, groups) -> dict:
    return {"threshold": threshold, "seed": args.seed, "groups": [g.value for g in groups],
            "C": args.C, "gamma": args.gamma, "grid_search": args.grid_search,
            "tie_creative": not args.tie_noncreative}


def cmd_train(args) -> int:
    groups = _available_groups(args)
    feats = _load_features(args, groups)
    (threshold,) = _thresholds(args.threshold)[:1]
    ds = _dataset(args, threshold)
    try:
        result, models = learn.run_experiment(feats, ds, args.seed, groups, args.C, args.gamma,
                                              args.grid_search, not args.tie_noncreative)
    except ValueError as exc:
        raise ConfigError(str(exc)) from None
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    learn.save_bundle(out, models, result.split, _experiment_config(args, threshold, groups))
    print(f"trained {len(models)} group classifiers on {len(result.split.train_ids)} videos -> {out}")
    return EXIT_OK


def cmd_evaluate(args) -> int:
    groups = _available_groups(args)
    feats = _load_features(args, groups)
    sections, doc = [], {}
    for threshold in _thresholds(args.threshold):
        ds = _dataset(args, threshold)
        try:
            result, _ = learn.run_experiment(feats, ds, args.seed, groups, args.C, args.gamma,
                                             args.grid_search, not args.tie_noncreative)
        except ValueError as exc:
            raise ConfigError(f"{ds.tag}: {exc}") from None
        sections.append(result.format())
        doc[result.tag] = {
            "n_test": len(result.split.test_ids),
            "groups": {g.value: a for g, a in result.group_accuracy.items()},
            "fusion": result.fusion_accuracy,
        }
    text = "\n\n".join(sections)
    print(text)
    if args.out:
        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
        (out / "report.txt").write_text(text + "\n", encoding="utf-8")
        (out / "report.json").write_text(json.dumps(doc, indent=1, sort_keys=True) + "\n", encoding="utf-8")
    return EXIT_OK


def cmd_analyze(args) -> int:
    groups = _available_groups(args)
    fdir = _require(args.features, "features")
    table = FeatureTable.load(fdir, groups)
    (threshold,) = _thresholds(args.threshold)[:1]
    ds = _dataset(args, threshold)
    ids = [v for v, _ in ds.entries]
    labels = [int(lab) for _, lab in ds.entries]
    try:
        mats = {g: table.matrix(g, ids) for g in groups}
    except KeyError as exc:
        raise ConfigError(str(exc.args[0])) from None
    names = {g: feature_names(g, extended_affect=mats[g].shape[1] == 27) for g in groups}
    exclusions = analysis.DEFAULT_EXCLUDED if args.exclude is None else _groups(args.exclude)
    try:
        report = analysis.rank_features(mats, labels, names, exclusions, tag=ds.tag)
    except ValueError as exc:
        raise ConfigError(str(exc)) from None
    paths = report.write(args.out)
    for g, v in report.group_mpc.items():
        print(f"MPC {g.value:<14s} {v:.4f}")
    print("top features: " + ", ".join(f"{n} ({r:+.3f})" for n, r in report.feature_rho[:5]))
    print("wrote " + ", ".join(str(p) for p in paths.values()))
    return EXIT_OK


def cmd_synth(args) -> int:
    cfg = synth.SynthConfig(size=args.size, n_frames=args.frames, purity=args.purity)
    paths = synth.write_corpus(args.out, args.n_creative, args.n_other, args.n_background, args.seed, cfg)
    print("wrote " + ", ".join(str(p) for p in paths.values()))
    return EXIT_OK


# -- parser -----------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="microvid", description="Micro-video creativity features and classifiers.")
    p.add_argument("--config", help="JSON file of option defaults; command-line flags take precedence")
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp, features=True, labels=True, multi_threshold=False):
        if features:
            sp.add_argument("--features", help="feature table directory")
        if labels:
            sp.add_argument("--annotations", help="annotation CSV (video_id + 5 votes)")
            sp.add_argument("--threshold", nargs="+" if multi_threshold else None, default=["100"] if multi_threshold else "100",
                            help="agreement threshold: 60, 80 or 100")
        sp.add_argument("--seed", type=int, default=0)
        sp.add_argument("--groups", default=None, help="comma-separated feature groups (default: all available)")

    sp = sub.add_parser("extract", help="compute feature tables for a manifest")
    sp.add_argument("--manifest")
    sp.add_argument("--out", required=True)
    sp.add_argument("--groups", default=None)
    sp.add_argument("--novelty-model", help="fitted novelty model; enables the novelty groups")
    sp.add_argument("--spectrum", help="corpus mean spectrum (.npy) for the uniqueness feature")
    sp.add_argument("--workers", type=int, default=None, help="worker processes (default: logical cores)")
    sp.add_argument("--resume", action="store_true", help="skip videos already present in --out")
    sp.add_argument("--extended-affect", action="store_true", help="27-dim visual affect (adds skin, level of detail)")
    sp.add_argument("--decoder", help="external decoder command with {input} and {outdir} placeholders")
    sp.add_argument("--npz", action="store_true", help="also write a compressed features.npz")
    sp.add_argument("--seed", type=int, default=0)
    sp.set_defaults(func=cmd_extract)

    sp = sub.add_parser("novelty-fit", help="cluster background feature tables into a novelty model")
    sp.add_argument("--features", help="background feature table directory")
    sp.add_argument("--out", required=True, help="model file (JSON)")
    sp.add_argument("--k", type=int, default=10)
    sp.add_argument("--seed", type=int, default=0)
    sp.add_argument("--spectrum", help="override the mean spectrum stored next to the features")
    sp.set_defaults(func=cmd_novelty_fit)

    sp = sub.add_parser("dataset", help="derive D-60/80/100 labelled sets from annotations")
    sp.add_argument("--annotations")
    sp.add_argument("--threshold", nargs="+", default=["60", "80", "100"])
    sp.add_argument("--out", help="directory for D-*.csv files")
    sp.set_defaults(func=cmd_dataset)

    for name, func, helptext in (
        ("train", cmd_train, "train per-group classifiers and save a model bundle"),
        ("evaluate", cmd_evaluate, "split, train and report test accuracy per group and fusion"),
    ):
        sp = sub.add_parser(name, help=helptext)
        common(sp, multi_threshold=name == "evaluate")
        sp.add_argument("--C", type=float, default=1.0)
        sp.add_argument("--gamma", type=float, default=None)
        sp.add_argument("--grid-search", action="store_true",
                        help="choose C and gamma per group on a validation fold of the training videos")
        sp.add_argument("--tie-noncreative", action="store_true",
                        help="a 6/6 frame vote counts as non-creative (default: creative)")
        sp.add_argument("--out", required=name == "train")
        sp.set_defaults(func=func)

    sp = sub.add_parser("analyze", help="per-group MPC and per-feature correlation report")
    common(sp)
    sp.add_argument("--exclude", default=None, help="groups left out of the per-feature ranking")
    sp.add_argument("--out", required=True)
    sp.set_defaults(func=cmd_analyze)

    sp = sub.add_parser("synth", help="write a synthetic labelled corpus")
    sp.add_argument("--out", required=True)
    sp.add_argument("--n-creative", type=int, default=100)
    sp.add_argument("--n-other", type=int, default=100)
    sp.add_argument("--n-background", type=int, default=100)
    sp.add_argument("--size", type=int, default=64)
    sp.add_argument("--frames", type=int, default=24)
    sp.add_argument("--purity", type=float, default=0.9)
    sp.add_argument("--seed", type=int, default=0)
    sp.set_defaults(func=cmd_synth)
    return p


def _apply_config(parser: argparse.ArgumentParser, argv: Sequence[str]) -> argparse.Namespace:
    pre = argparse.ArgumentParser(add_help=False)
    pre.add_argument("--config")
    known, _ = pre.parse_known_args(argv)
    if known.config:
        try:
            cfg = json.loads(Path(known.config).read_text(encoding="utf-8"))
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError(f"cannot read config {known.config}: {exc}") from None
        if not isinstance(cfg, dict):
            raise ConfigError("config file must hold a JSON object")
        subparsers = next(a for a in parser._actions if isinstance(a, argparse._SubParsersAction))
        command = next((t for t in argv if t in subparsers.choices), None)
        if command is not None:
            sub = subparsers.choices[command]
            cfg = {k.replace("-", "_"): v for k, v in cfg.items()}
            unknown = sorted(set(cfg) - {a.dest for a in sub._actions})
            if unknown:
                raise ConfigError(f"unknown config keys for {command}: {', '.join(unknown)}")
            sub.set_defaults(**cfg)
            for action in sub._actions:  # required flags may come from the file
                if action.dest in cfg:
                    action.required = False
    return parser.parse_args(argv)


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    argv = sys.argv[1:] if argv is None else list(argv)
    try:
        args = _apply_config(parser, argv)
        return args.func(args)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (ingest.ManifestError, FileNotFoundError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
