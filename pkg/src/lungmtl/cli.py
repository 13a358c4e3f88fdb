"""Command-line entry point: corpus -> features -> model -> reports.

Verbs: extract, train, eval, predict, synth, risk label|fit|predict.
Configuration is layered: module defaults <- --config JSON file <- flags
(flags win). Every verb is deterministic given (inputs, config, seeds);
all outputs are written atomically. Exit status is 0 iff no error.
"""

import argparse
import json
import sys
import time
from dataclasses import asdict
from pathlib import Path

import numpy as np

from . import metrics
from .checkpoint import load_checkpoint, save_checkpoint
from .config import RunConfig, build_run_config
from .corpus import (DiseaseLabel, LabeledExample, SoundLabel, load_corpus,
                     parse_demographics, read_wav, stratified_split,
                     write_synth_corpus)
from .dsp import extract_mfcc, read_features, write_features
from .errors import (BadConfigError, ConfigMismatchError, IoError,
                     LungMtlError, OutOfRubricError, SingleClassOnlyError,
                     UnreadableCheckpointError)
from .ioutil import atomic_write_text
from .mtl import MtlModel, build_model, train
from .risk import (N_RISK_CLASSES, RISK_CLASS_NAMES, assign_risk, fit_forest,
                   fit_rbf_svm, fit_softmax_regression, predict_model,
                   predict_risk, rule_labels, to_features)

SOUND_NAMES = tuple(s.name for s in SoundLabel)
DISEASE_NAMES = tuple(d.name for d in DiseaseLabel)
EVAL_BATCH = 64


def _require(value, flag):
    if not value:
        raise BadConfigError(f"missing required path; set {flag} "
                             "or the matching [paths] config entry")
    return value


def _existing(path, what):
    path = Path(path)
    if not path.exists():
        raise IoError(f"{what} not found: {path}")
    return path


def _model_dtype(cfg: RunConfig):
    return np.float64 if cfg.float64 else np.float32


# --- verbs -------------------------------------------------------------------

def cmd_extract(cfg: RunConfig, args) -> int:
    audio_dir = _existing(_require(cfg.paths.audio_dir, "--audio-dir"),
                          "audio dir")
    diagnosis = _existing(
        _require(cfg.paths.diagnosis_file, "--diagnosis-file"),
        "diagnosis file")
    out = _require(cfg.paths.feature_file, "--out")
    corpus = load_corpus(audio_dir, diagnosis,
                         demographics_file=cfg.paths.demographics_file,
                         level=cfg.level, workers=cfg.workers)
    if not corpus.records:
        raise IoError(f"no usable recordings under {audio_dir}")
    examples = [
        LabeledExample(features=extract_mfcc(rec.clip, cfg.mfcc).values,
                       sound=rec.sound, disease=rec.disease,
                       patient_id=rec.patient_id,
                       recording_id=rec.clip.recording_id)
        for rec in corpus.records
    ]
    write_features(out, cfg.mfcc, examples)
    print(f"wrote {len(examples)} feature matrices "
          f"({cfg.mfcc.n_coefficients}x{cfg.mfcc.target_frames}, "
          f"fingerprint {cfg.mfcc.fingerprint()}) to {out}")
    return 0


def _load_feature_arrays(path):
    mfcc_cfg, examples = read_features(_existing(path, "feature file"))
    x = np.stack([ex.features for ex in examples])
    y_sound = np.array([int(ex.sound) for ex in examples], dtype=np.intp)
    y_disease = np.array([int(ex.disease) for ex in examples], dtype=np.intp)
    return mfcc_cfg, x, y_sound, y_disease


def cmd_train(cfg: RunConfig, args) -> int:
    mfcc_cfg, x, y_sound, y_disease = _load_feature_arrays(
        _require(cfg.paths.feature_file, "--features"))
    ckpt_path = _require(cfg.paths.checkpoint, "--checkpoint")
    n = x.shape[0]
    if cfg.split.train_ratio < 1.0:
        split = stratified_split(n, y_sound, cfg.split.train_ratio,
                                 cfg.split.seed)
        tr, va = np.array(split.train, dtype=np.intp), np.array(
            split.test, dtype=np.intp)
        val_data = (x[va], y_sound[va], y_disease[va])
    else:
        tr, val_data = np.arange(n), None

    model = build_model(cfg.arch_id, (1,) + x.shape[1:],
                        seed=cfg.train.seed, dtype=_model_dtype(cfg))
    model, history = train(model, (x[tr], y_sound[tr], y_disease[tr]),
                           val_data, cfg.train, cfg.loss)
    save_checkpoint(ckpt_path, model,
                    feature_fingerprint=mfcc_cfg.fingerprint())
    if cfg.paths.history_file:
        echo = json.dumps(
            {"arch_id": cfg.arch_id, "train": asdict(cfg.train),
             "loss": {"w_sound": cfg.loss.w_sound,
                      "w_disease": cfg.loss.w_disease,
                      "lambda_reg": cfg.loss.lambda_reg}},
            sort_keys=True, separators=(",", ":"))
        atomic_write_text(cfg.paths.history_file,
                          "# " + echo + "\n" + metrics.history_dump(history))
    last = history[-1]
    val = "" if last["val_loss"] is None else f" val_loss={last['val_loss']:.4f}"
    print(f"trained {cfg.arch_id} for {last['epoch']} epochs: "
          f"train_loss={last['train_loss']:.4f}{val} "
          f"sound_acc={last['sound_acc']:.4f} "
          f"disease_acc={last['disease_acc']:.4f}; checkpoint {ckpt_path}")
    return 0


def _load_nn_checkpoint(cfg, mfcc_cfg, input_shape):
    model, doc = load_checkpoint(_require(cfg.paths.checkpoint, "--checkpoint"))
    if not isinstance(model, MtlModel):
        raise UnreadableCheckpointError(
            f"{cfg.paths.checkpoint}: expected a network checkpoint, "
            f"found {doc.get('model_kind') or doc.get('kind')}")
    fp = doc.get("feature_fingerprint")
    if fp is not None and fp != mfcc_cfg.fingerprint():
        raise ConfigMismatchError(
            f"checkpoint was trained on features {fp}, "
            f"got {mfcc_cfg.fingerprint()}")
    if model.input_shape != input_shape:
        raise ConfigMismatchError(
            f"checkpoint expects {model.input_shape}, features are "
            f"{input_shape}")
    return model


def _batched_probs(model, x):
    outs = [model.forward(x[i:i + EVAL_BATCH, None], train=False)
            for i in range(0, x.shape[0], EVAL_BATCH)]
    return (np.concatenate([o[0] for o in outs]),
            np.concatenate([o[1] for o in outs]))


def cmd_eval(cfg: RunConfig, args) -> int:
    mfcc_cfg, x, y_sound, y_disease = _load_feature_arrays(
        _require(cfg.paths.feature_file, "--features"))
    model = _load_nn_checkpoint(cfg, mfcc_cfg, (1,) + x.shape[1:])
    x = x.astype(_model_dtype(cfg), copy=False)

    t0 = time.monotonic()
    probs_s, probs_d = _batched_probs(model, x)
    wall = time.monotonic() - t0

    out_dir = cfg.paths.out_dir
    if out_dir:
        Path(out_dir).mkdir(parents=True, exist_ok=True)
    for head, names, y, probs in (
            ("sound", SOUND_NAMES, y_sound, probs_s),
            ("disease", DISEASE_NAMES, y_disease, probs_d)):
        cm = metrics.confusion(y, probs.argmax(axis=1), len(names))
        rep = metrics.report(cm, wall_time_s=wall)
        print(f"== {head} head ==")
        print(rep.to_text(names))
        if out_dir:
            base = Path(out_dir)
            atomic_write_text(base / f"{head}_report.csv", rep.to_csv(names))
            atomic_write_text(base / f"{head}_confusion.csv", cm.to_csv(names))
            try:
                roc = metrics.roc_auc(y, probs.astype(np.float64))
                atomic_write_text(base / f"{head}_roc.csv", roc.to_csv(names))
            except SingleClassOnlyError as exc:
                print(f"note: {head} ROC skipped: {exc}", file=sys.stderr)
    return 0


def cmd_predict(cfg: RunConfig, args) -> int:
    wav = _existing(args.wav, "audio file")
    clip = read_wav(wav)
    features = extract_mfcc(clip, cfg.mfcc).values
    model = _load_nn_checkpoint(
        cfg, cfg.mfcc, (1, features.shape[0], features.shape[1]))
    x = features[None, None].astype(_model_dtype(cfg))
    probs_s, probs_d = model.forward(x, train=False)
    result = {
        "file": str(wav),
        "sound": SOUND_NAMES[int(probs_s[0].argmax())],
        "disease": DISEASE_NAMES[int(probs_d[0].argmax())],
        "sound_probs": [float(p) for p in probs_s[0]],
        "disease_probs": [float(p) for p in probs_d[0]],
    }
    print(json.dumps(result, sort_keys=True))
    return 0


def cmd_synth(cfg: RunConfig, args) -> int:
    out_dir = _require(cfg.paths.out_dir, "--out-dir")
    write_synth_corpus(out_dir, n_per_class=args.n_per_class, seed=cfg.seed,
                       duration_s=args.duration,
                       demographics_n=args.demographics)
    total = 4 * args.n_per_class
    extra = (f" and {args.demographics} demographic records"
             if args.demographics else "")
    print(f"wrote {total} synthetic recordings{extra} to {out_dir}")
    return 0


def _fit_risk_model(cfg: RunConfig, x, y):
    kind = cfg.risk.model
    if kind == "forest":
        return fit_forest(x, y, n_estimators=cfg.risk.n_estimators,
                          seed=cfg.risk.seed,
                          max_features=cfg.risk.max_features,
                          n_classes=N_RISK_CLASSES)
    if kind == "softmax":
        return fit_softmax_regression(x, y, lr=cfg.risk.lr,
                                      max_iter=cfg.risk.max_iter,
                                      tol=cfg.risk.tol,
                                      n_classes=N_RISK_CLASSES)
    if kind == "svm":
        return fit_rbf_svm(x, y, c=cfg.risk.c, gamma=cfg.risk.gamma,
                           tol=cfg.risk.svm_tol,
                           max_iter=cfg.risk.svm_max_iter,
                           n_classes=N_RISK_CLASSES)
    raise BadConfigError(
        f"risk.model must be forest, softmax, or svm, got {kind!r}")


def cmd_risk(cfg: RunConfig, args) -> int:
    records, bad_rows = parse_demographics(_existing(
        _require(cfg.paths.demographics_file, "--demographics-file"),
        "demographics file"))
    if bad_rows:
        print(f"warning: {len(bad_rows)} demographic rows skipped "
              f"(missing/invalid fields): patients {bad_rows}",
              file=sys.stderr)
    kept, excluded = [], []
    for record in records:
        try:
            assign_risk(record)
            kept.append(record)
        except OutOfRubricError:
            excluded.append(record.patient_id)
    if excluded:
        print(f"warning: excluded {len(excluded)} out-of-rubric records "
              f"(age < 35): patients {excluded}", file=sys.stderr)
    if not kept:
        raise IoError(f"no in-rubric records in {cfg.paths.demographics_file}")

    if args.subverb == "label":
        print("patient_id,age_years,gender,bmi_kg_m2,risk_level,risk_name")
        for record in kept:
            level = assign_risk(record)
            print(f"{record.patient_id},{record.age_years!r},"
                  f"{record.gender.name},{record.bmi_kg_m2!r},"
                  f"{int(level)},{level.name}")
        return 0

    if args.subverb == "fit":
        x, y = to_features(kept), rule_labels(kept)
        if cfg.split.train_ratio < 1.0:
            split = stratified_split(len(kept), y, cfg.split.train_ratio,
                                     cfg.split.seed)
            tr, te = split.train, split.test
        else:
            tr = te = list(range(len(kept)))
        model = _fit_risk_model(cfg, x[tr], y[tr])
        if cfg.risk.model == "svm":
            print(f"gamma={model.gamma!r}")
        cm = metrics.confusion(y[te], predict_model(model, x[te]),
                               N_RISK_CLASSES)
        print(f"{cfg.risk.model}: {len(tr)} train / {len(te)} test records")
        print(metrics.report(cm).to_text(RISK_CLASS_NAMES))
        if cfg.paths.checkpoint:
            save_checkpoint(cfg.paths.checkpoint, model)
            print(f"checkpoint {cfg.paths.checkpoint}")
        return 0

    # predict
    model, _ = load_checkpoint(_require(cfg.paths.checkpoint, "--checkpoint"))
    levels, rep = predict_risk(model, kept)
    print("patient_id,risk_level,risk_name")
    for record, level in zip(kept, levels):
        print(f"{record.patient_id},{int(level)},{level.name}")
    print()
    print(rep.to_text(RISK_CLASS_NAMES))
    return 0


# --- argument plumbing --------------------------------------------------------

# argparse dest -> dotted config path; only flags the user passed override.
_FLAG_MAP = {
    "audio_dir": "paths.audio_dir",
    "diagnosis_file": "paths.diagnosis_file",
    "demographics_file": "paths.demographics_file",
    "features": "paths.feature_file",
    "checkpoint": "paths.checkpoint",
    "history": "paths.history_file",
    "out_dir": "paths.out_dir",
    "arch": "arch_id",
    "level": "level",
    "epochs": "train.epochs",
    "batch_size": "train.batch_size",
    "lr": "train.lr",
    "w_sound": "loss.w_sound",
    "w_disease": "loss.w_disease",
    "lambda_reg": "loss.lambda_reg",
    "train_ratio": "split.train_ratio",
    "split_seed": "split.seed",
    "model": "risk.model",
    "n_estimators": "risk.n_estimators",
    "risk_seed": "risk.seed",
    "svm_c": "risk.c",
    "gamma": "risk.gamma",
    "workers": "workers",
    "float64": "float64",
}


def _add_global_flags(parser, default):
    parser.add_argument("--config", metavar="PATH", default=default,
                        help="JSON run config; flags override it")
    parser.add_argument("--seed", type=int, default=default,
                        help="sets the run, training, and risk seeds at once")
    parser.add_argument("--workers", type=int, default=default,
                        help="worker threads for corpus ingestion")
    parser.add_argument("--float64", action="store_true", default=default,
                        help="run models in float64 instead of float32")


def make_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="lungmtl",
        description="Joint lung sound/disease classification and COPD "
                    "risk rating from respiratory audio and demographics.")
    _add_global_flags(parser, default=None)
    # Accept the same flags after the verb; SUPPRESS keeps an unset
    # sub-level flag from clobbering a root-level value.
    common = argparse.ArgumentParser(add_help=False)
    _add_global_flags(common, default=argparse.SUPPRESS)
    sub = parser.add_subparsers(dest="verb", required=True)

    p = sub.add_parser("extract", help="corpus -> feature file",
                       parents=[common])
    p.add_argument("--audio-dir")
    p.add_argument("--diagnosis-file")
    p.add_argument("--demographics-file")
    p.add_argument("--out", dest="features", help="output feature file")
    p.add_argument("--level", choices=("recording", "cycle"))

    p = sub.add_parser("train", parents=[common], help="feature file -> checkpoint + history")
    p.add_argument("--features")
    p.add_argument("--checkpoint")
    p.add_argument("--history", help="history CSV output path")
    p.add_argument("--arch", choices=("mobilenet_mtl", "cnn2d_mtl"))
    p.add_argument("--epochs", type=int)
    p.add_argument("--batch-size", type=int)
    p.add_argument("--lr", type=float)
    p.add_argument("--w-sound", type=float)
    p.add_argument("--w-disease", type=float)
    p.add_argument("--lambda-reg", type=float)
    p.add_argument("--train-ratio", type=float,
                   help="train fraction; 1.0 disables the validation split")
    p.add_argument("--split-seed", type=int)

    p = sub.add_parser("eval", parents=[common], help="checkpoint + features -> reports")
    p.add_argument("--features")
    p.add_argument("--checkpoint")
    p.add_argument("--out-dir", help="directory for report/confusion/ROC CSVs")

    p = sub.add_parser("predict", parents=[common], help="checkpoint + wav -> one-line result")
    p.add_argument("wav", help="input .wav file")
    p.add_argument("--checkpoint")

    p = sub.add_parser("synth", parents=[common], help="write a synthetic corpus")
    p.add_argument("--out-dir")
    p.add_argument("--n-per-class", type=int, default=8)
    p.add_argument("--duration", type=float, default=5.0)
    p.add_argument("--demographics", type=int, default=0,
                   help="also write this many demographic records")

    p = sub.add_parser("risk", parents=[common], help="demographics -> risk levels / models")
    p.add_argument("subverb", choices=("label", "fit", "predict"))
    p.add_argument("--demographics-file")
    p.add_argument("--model", choices=("forest", "softmax", "svm"))
    p.add_argument("--checkpoint")
    p.add_argument("--n-estimators", type=int)
    p.add_argument("--risk-seed", type=int)
    p.add_argument("--svm-c", type=float)
    p.add_argument("--gamma", type=float)
    p.add_argument("--train-ratio", type=float)
    p.add_argument("--split-seed", type=int)
    return parser


_VERBS = {
    "extract": cmd_extract,
    "train": cmd_train,
    "eval": cmd_eval,
    "predict": cmd_predict,
    "synth": cmd_synth,
    "risk": cmd_risk,
}


def main(argv=None) -> int:
    args = make_parser().parse_args(argv)
    try:
        overrides = {}
        for dest, dotted in _FLAG_MAP.items():
            value = getattr(args, dest, None)
            if value is not None:
                overrides[dotted] = value
        if args.seed is not None:
            for dotted in ("seed", "train.seed", "risk.seed"):
                overrides[dotted] = args.seed
        cfg = build_run_config(args.config, overrides)
        return _VERBS[args.verb](cfg, args)
    except LungMtlError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
