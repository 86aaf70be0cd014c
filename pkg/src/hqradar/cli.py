"""Command-line entry point: ``hqradar {simulate,dataset,train,eval}``.

Exit codes: 0 success, 2 configuration error, 3 numeric failure.
Log verbosity comes from the ``HQRADAR_LOG`` environment variable.
"""

from __future__ import annotations

import argparse
import csv
import dataclasses
import json
import logging
import os
import sys
from pathlib import Path


from . import config as C
from . import dataset as D
from . import evaluation as E
from . import models, plotting, training
from .errors import ConfigError, FormatError, NumericError, ParameterError
from .radar import RadarConfig, TargetGeometry, add_awgn, noise_only, noise_variance, synthesize_mm
from .spectrogram import bin_frequencies, stft

log = logging.getLogger("hqradar")

EXIT_OK, EXIT_CONFIG, EXIT_NUMERIC = 0, 2, 3


def _write_json(path: Path, obj) -> None:
    path.write_text(json.dumps(obj, indent=2, sort_keys=True) + "\n")


def _profile(name: str):
    for p in D.builtin_profiles():
        if p.name.lower() == name.lower() or p.name.lower().replace(" ", "-") == name.lower():
            return p
    names = ", ".join(p.name for p in D.builtin_profiles())
    raise ConfigError(f"unknown profile {name!r}; choose one of: {names}", "profile")


def cmd_simulate(args) -> int:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    radar = RadarConfig()
    if args.noise_only:
        snr = args.snr if args.snr is not None else -5.0
        ts = noise_only(radar.n_samples, noise_variance(snr, 1.0), args.seed)
        ts.sample_rate = radar.prf
        title = f"white noise (sigma2 for {snr:g} dB)"
    else:
        profile = _profile(args.profile)
        geom = TargetGeometry(args.theta, args.pitch, args.range, args.vrad, args.phase, 1.0)
        ts = synthesize_mm(profile, radar, geom)
        if args.snr is not None:
            ts = add_awgn(ts, args.snr, 1.0, args.seed)
        title = profile.name + (f", SNR {args.snr:g} dB" if args.snr is not None else ", no noise")
    spec = stft(ts, args.window, args.hop)

    with open(out / "timeseries.csv", "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["t", "re", "im"])
        for t, v in zip(ts.times, ts.samples):
            w.writerow([repr(float(t)), repr(float(v.real)), repr(float(v.imag))])
    freqs = bin_frequencies(args.window, ts.sample_rate)
    for ch, name in enumerate(("re", "im")):
        with open(out / f"spectrogram_{name}.csv", "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["freq_hz", *[f"frame{i}" for i in range(spec.n_frames)]])
            for f, row in zip(freqs, spec.data[ch]):
                w.writerow([repr(float(f)), *[repr(float(v)) for v in row]])
    written = ["timeseries.csv", "spectrogram_re.csv", "spectrogram_im.csv"]
    if args.plot:
        t_ms = ts.times * 1e3
        plotting.write(out / "timeseries.svg", plotting.line_plot(
            {"real": (t_ms, ts.samples.real), "imag": (t_ms, ts.samples.imag)}, "time [ms]", "amplitude", title))
        for ch, name in enumerate(("real", "imag")):
            plotting.write(out / f"spectrogram_{name[:2]}.svg", plotting.heatmap(
                spec.data[ch], f"{title}: {name} STFT", "frame", "Doppler bin (negative to positive)"))
        written += ["timeseries.svg", "spectrogram_re.svg", "spectrogram_im.svg"]
    log.info("wrote %s", ", ".join(written))
    return EXIT_OK


def cmd_dataset(args) -> int:
    cfg = C.load(args.config)
    seed = args.seed if args.seed is not None else cfg.dataset_seed
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    data, manifest = D.generate(cfg.task, cfg.snr_db, cfg.counts, cfg.sampler, seed,
                                radar=cfg.radar, window=cfg.window, hop=cfg.hop, threads=args.threads)
    D.save(data, manifest, out / "dataset.mdqd")
    _write_json(out / "manifest.json", manifest.to_dict())
    log.info("wrote %d examples to %s", len(data), out / "dataset.mdqd")
    return EXIT_OK


def cmd_train(args) -> int:
    cfg = C.load(args.config)
    data, manifest = D.load(args.dataset)
    if manifest.task != cfg.task:
        raise ConfigError(f"dataset task {manifest.task!r} does not match config task {cfg.task!r}", "dataset.task")
    tcfg = cfg.training
    if args.seed is not None:
        tcfg = dataclasses.replace(tcfg, seed=args.seed)
    net = models.build(cfg.architecture)
    net.metadata = {"task": cfg.task, "standardization": manifest.standardization,
                    "train_snr_db": manifest.snr_db, "model_name": cfg.model_name}
    training.train(net, data, tcfg, args.out)
    return EXIT_OK


def cmd_eval(args) -> int:
    cfg = C.load(args.config)
    net = models.Network.load(args.checkpoint)
    meta = net.metadata
    if "standardization" not in meta:
        raise ConfigError("checkpoint carries no standardization statistics", "checkpoint")
    if meta.get("task", cfg.task) != cfg.task:
        raise ConfigError(f"checkpoint task {meta['task']!r} differs from config task {cfg.task!r}", "dataset.task")
    seeds = cfg.eval_seeds
    if args.seed is not None:
        seeds = [args.seed + r for r in range(cfg.eval_repeats)]
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    name = meta.get("model_name", cfg.model_name)
    sweep = E.evaluate_over_snr(net, cfg.eval_snrs, cfg.eval_repeats, seeds, task=cfg.task, n_test=cfg.eval_n_test,
                                standardization=meta["standardization"], sampler=cfg.sampler,
                                model_name=name, radar=cfg.radar, window=cfg.window, hop=cfg.hop,
                                threads=args.threads)
    E.write_f1_table(out / "f1_table.csv", [sweep])
    E.write_sweep_outputs(out, sweep, D.class_names(cfg.task))
    if any(r.single_sample for r in sweep.results):
        log.warning("repeats=1: std_f1 reported as 0 (single sample)")
    if args.plot:
        plotting.write(out / f"f1_{name}.svg", plotting.f1_plot([sweep], f"F1 vs SNR, {name}"))
        if cfg.task == D.DETECTION:
            for r in sweep.results:
                curve = E.roc(r.probabilities[:, 1], r.labels == 1)
                plotting.write(out / f"roc_{name}_{r.snr_db:g}.svg",
                               plotting.roc_plot({f"{r.snr_db:g} dB": curve}, f"ROC {name}, {r.snr_db:g} dB"))
    _write_json(out / "eval_manifest.json", {"model": name, "task": cfg.task, "seeds": seeds,
                                              "table": sweep.table(), "n_test": cfg.eval_n_test})
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="hqradar", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp, config=True):
        if config:
            sp.add_argument("--config", required=True, help="experiment config JSON")
        sp.add_argument("--out", required=True, help="output directory")
        sp.add_argument("--seed", type=int, default=None)
        sp.add_argument("--threads", type=int, default=1)
        sp.add_argument("--plot", action="store_true", help="also write SVG plots")

    s = sub.add_parser("simulate", help="simulate one return and its spectrogram")
    common(s, config=False)
    s.set_defaults(seed=0)
    s.add_argument("--profile", default="Parrot Disco")
    s.add_argument("--noise-only", action="store_true")
    s.add_argument("--snr", type=float, default=None, help="single-pulse SNR in dB; omit for a clean signal")
    s.add_argument("--theta", type=float, default=0.5)
    s.add_argument("--pitch", type=float, default=0.15)
    s.add_argument("--range", type=float, default=1000.0)
    s.add_argument("--vrad", type=float, default=0.0)
    s.add_argument("--phase", type=float, default=0.0)
    s.add_argument("--window", type=int, default=16)
    s.add_argument("--hop", type=int, default=8)
    s.set_defaults(func=cmd_simulate)

    s = sub.add_parser("dataset", help="generate a dataset file and manifest")
    common(s)
    s.set_defaults(func=cmd_dataset)

    s = sub.add_parser("train", help="train a model on a dataset file")
    common(s)
    s.add_argument("--dataset", required=True)
    s.set_defaults(func=cmd_train)

    s = sub.add_parser("eval", help="SNR sweep evaluation of a checkpoint")
    common(s)
    s.add_argument("--checkpoint", required=True)
    s.set_defaults(func=cmd_eval)
    return p


def main(argv=None) -> int:
    logging.basicConfig(level=os.environ.get("HQRADAR_LOG", "WARNING").upper(),
                        format="%(levelname)s %(name)s: %(message)s")
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (ParameterError, FormatError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (NumericError, FloatingPointError) as exc:
        print(f"numeric failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC


if __name__ == "__main__":
    sys.exit(main())
