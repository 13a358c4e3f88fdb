"""Corpus ingestion: ICBHI-format audio, annotations, diagnoses, demographics.

Also provides deterministic train/test splits and a synthetic desk-scale
corpus generator so the full pipeline can run without the real dataset.
"""

import csv
import logging
import math
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from enum import IntEnum
from pathlib import Path

import numpy as np

from .errors import (
    BadTokenCountError,
    ClassTooSmallWarning,
    EmptyFileError,
    MalformedRowError,
    MissingDiagnosisWarning,
)
from .wavio import read_wav_samples, write_wav

log = logging.getLogger(__name__)


class SoundLabel(IntEnum):
    CRACKLES = 0
    WHEEZES = 1
    BOTH = 2
    HEALTHY = 3


class DiseaseLabel(IntEnum):
    BRONCHIECTASIS = 0
    BRONCHIOLITIS = 1
    COPD = 2
    PNEUMONIA = 3
    URTI = 4
    HEALTHY = 5


class Gender(IntEnum):
    FEMALE = 0
    MALE = 1


_DISEASE_BY_NAME = {d.name: d for d in DiseaseLabel}

N_SOUND_CLASSES = len(SoundLabel)
N_DISEASE_CLASSES = len(DiseaseLabel)


@dataclass
class CycleAnnotation:
    """One annotated respiratory cycle: [start_s, end_s) with event flags."""
    start_s: float
    end_s: float
    crackle: bool
    wheeze: bool


@dataclass
class AudioClip:
    """Mono audio with provenance. Samples are normalized to [-1, 1]."""
    samples: np.ndarray
    sample_rate_hz: int
    patient_id: int | None = None
    recording_id: str = ""
    cycles: list[CycleAnnotation] = field(default_factory=list)

    @property
    def duration_s(self) -> float:
        return len(self.samples) / self.sample_rate_hz


@dataclass
class DemographicRecord:
    patient_id: int
    age_years: float
    gender: Gender
    bmi_kg_m2: float


@dataclass
class CorpusRecord:
    """One labeled example source: audio plus both targets."""
    clip: AudioClip
    sound: SoundLabel
    disease: DiseaseLabel
    patient_id: int


@dataclass
class LabeledExample:
    """Extracted features plus both targets (one input, two outputs)."""
    features: np.ndarray
    sound: SoundLabel
    disease: DiseaseLabel
    patient_id: int
    recording_id: str = ""


@dataclass
class Corpus:
    records: list[CorpusRecord]
    demographics: list[DemographicRecord]
    n_recordings_found: int
    skipped_missing_diagnosis: list[str]


@dataclass
class Split:
    train: list[int]
    test: list[int]
    seed: int


def sound_label_from_flags(crackle: bool, wheeze: bool) -> SoundLabel:
    """Map the (crackle, wheeze) flag pair to its sound class."""
    if crackle and wheeze:
        return SoundLabel.BOTH
    if crackle:
        return SoundLabel.CRACKLES
    if wheeze:
        return SoundLabel.WHEEZES
    return SoundLabel.HEALTHY


def recording_sound_label(cycles) -> SoundLabel:
    """Collapse per-cycle flags to one recording-level label.

    Priority rule: Both > Crackles > Wheezes > Healthy over the recording's
    cycles. An empty cycle list is Healthy.
    """
    any_crackle = any(c.crackle for c in cycles)
    any_wheeze = any(c.wheeze for c in cycles)
    if any(c.crackle and c.wheeze for c in cycles):
        return SoundLabel.BOTH
    if any_crackle:
        return SoundLabel.CRACKLES
    if any_wheeze:
        return SoundLabel.WHEEZES
    return SoundLabel.HEALTHY


def read_wav(path) -> AudioClip:
    """Read a WAV file into an AudioClip; provenance parsed from the name
    when it follows the five-token convention."""
    samples, rate = read_wav_samples(path)
    stem = Path(path).stem
    try:
        patient_id = parse_filename(Path(path).name)[0]
    except BadTokenCountError:
        patient_id = None
    return AudioClip(samples=samples, sample_rate_hz=rate,
                     patient_id=patient_id, recording_id=stem)


def parse_filename(name: str):
    """Split ``<patient>_<recidx>_<location>_<mode>_<equipment>.<ext>``."""
    stem = name.rsplit(".", 1)[0]
    tokens = stem.split("_")
    if len(tokens) != 5:
        raise BadTokenCountError(
            f"{name!r}: expected 5 underscore-separated tokens, got {len(tokens)}"
        )
    try:
        patient_id = int(tokens[0])
    except ValueError as exc:
        raise BadTokenCountError(f"{name!r}: patient id {tokens[0]!r} not an integer") from exc
    return patient_id, tokens[1], tokens[2], tokens[3], tokens[4]


def parse_icbhi_annotations(path) -> list[CycleAnnotation]:
    """Parse a per-recording annotation file: ``start end crackle wheeze``
    per line, whitespace-separated."""
    cycles = []
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            parts = line.split()
            if len(parts) != 4:
                raise MalformedRowError(f"{path}:{lineno}: expected 4 fields, got {len(parts)}")
            try:
                start, end = float(parts[0]), float(parts[1])
                crackle, wheeze = int(parts[2]), int(parts[3])
            except ValueError as exc:
                raise MalformedRowError(f"{path}:{lineno}: non-numeric field") from exc
            if not (0 <= start < end):
                raise MalformedRowError(f"{path}:{lineno}: bad bounds [{start}, {end}]")
            if crackle not in (0, 1) or wheeze not in (0, 1):
                raise MalformedRowError(f"{path}:{lineno}: flags must be 0/1")
            cycles.append(CycleAnnotation(start, end, bool(crackle), bool(wheeze)))
    if not cycles:
        raise EmptyFileError(f"{path}: no annotation rows")
    return cycles


def parse_diagnosis_file(path) -> dict[int, DiseaseLabel]:
    """Read the ``patient_id,diagnosis`` CSV (header optional).

    Diagnosis names are matched case-insensitively against the six known
    classes; unknown names are left out (their recordings get skipped later
    with a warning).
    """
    mapping: dict[int, DiseaseLabel] = {}
    with open(path, "r", encoding="utf-8", newline="") as fh:
        for row in csv.reader(fh):
            if not row or not row[0].strip():
                continue
            try:
                pid = int(row[0])
            except ValueError:
                continue  # header or junk row
            if len(row) < 2:
                continue
            disease = _DISEASE_BY_NAME.get(row[1].strip().upper())
            if disease is not None:
                mapping[pid] = disease
    if not mapping:
        raise EmptyFileError(f"{path}: no diagnosis rows")
    return mapping


def _parse_gender(token: str) -> Gender | None:
    t = token.strip().upper()
    if t in ("F", "FEMALE", "0"):
        return Gender.FEMALE
    if t in ("M", "MALE", "1"):
        return Gender.MALE
    return None


def parse_demographics(path):
    """Read the demographics CSV.

    Columns: patient_id, sex, age, adult_bmi, child_weight_kg,
    child_height_cm (header optional, empty fields allowed). Child BMI is
    derived as weight/(height/100)^2 when the adult column is empty and both
    child columns are present. Rows with no derivable BMI, or values outside
    the validity windows (BMI in (5, 100), age in [0, 130]), are skipped.

    Returns (records, skipped_patient_ids).
    """
    records: list[DemographicRecord] = []
    skipped: list[int] = []
    with open(path, "r", encoding="utf-8", newline="") as fh:
        for row in csv.reader(fh):
            if not row or not row[0].strip():
                continue
            try:
                pid = int(row[0])
            except ValueError:
                continue  # header
            fields = [f.strip() for f in row[1:]] + [""] * max(0, 6 - len(row))
            gender = _parse_gender(fields[0])
            try:
                age = float(fields[1]) if fields[1] else None
            except ValueError:
                age = None
            bmi = None
            try:
                if fields[2]:
                    bmi = float(fields[2])
                elif fields[3] and fields[4]:
                    weight = float(fields[3])
                    height_m = float(fields[4]) / 100.0
                    if height_m > 0:
                        bmi = weight / (height_m * height_m)
            except ValueError:
                bmi = None
            if (gender is None or age is None or bmi is None
                    or not (0 <= age <= 130) or not (5 < bmi < 100)):
                skipped.append(pid)
                continue
            records.append(DemographicRecord(pid, age, gender, bmi))
    return records, skipped


def _load_one_recording(wav_path, ann_path):
    clip = read_wav(wav_path)
    clip.cycles = parse_icbhi_annotations(ann_path) if ann_path.exists() else []
    return clip


def load_corpus(audio_dir, diagnosis_file, demographics_file=None,
                level="recording", workers=None) -> Corpus:
    """Scan ``audio_dir`` for paired .wav/.txt files and attach both labels.

    level="recording" yields one record per recording (cycle flags collapsed
    by the priority rule); level="cycle" yields one record per annotated
    cycle, with the clip cropped to the cycle bounds. Recordings whose
    patient has no parseable diagnosis are skipped with a warning.
    """
    if level not in ("recording", "cycle"):
        raise ValueError(f"level must be 'recording' or 'cycle', got {level!r}")
    audio_dir = Path(audio_dir)
    wav_paths = sorted(audio_dir.glob("*.wav"))
    diagnosis = parse_diagnosis_file(diagnosis_file) if wav_paths else {}

    clips: list[AudioClip | None] = [None] * len(wav_paths)

    def job(i):
        wav = wav_paths[i]
        clips[i] = _load_one_recording(wav, wav.with_suffix(".txt"))

    if workers and workers > 1 and len(wav_paths) > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            list(pool.map(job, range(len(wav_paths))))
    else:
        for i in range(len(wav_paths)):
            job(i)

    records: list[CorpusRecord] = []
    skipped: list[str] = []
    for clip in clips:
        pid = clip.patient_id
        disease = diagnosis.get(pid) if pid is not None else None
        if disease is None:
            skipped.append(clip.recording_id)
            continue
        if level == "recording":
            records.append(CorpusRecord(clip, recording_sound_label(clip.cycles),
                                        disease, pid))
        else:
            rate = clip.sample_rate_hz
            for k, cyc in enumerate(clip.cycles):
                lo = int(round(cyc.start_s * rate))
                hi = min(int(round(cyc.end_s * rate)), len(clip.samples))
                if hi <= lo:
                    continue
                sub = AudioClip(clip.samples[lo:hi], rate, pid,
                                f"{clip.recording_id}#c{k}")
                records.append(CorpusRecord(
                    sub, sound_label_from_flags(cyc.crackle, cyc.wheeze),
                    disease, pid))

    if skipped:
        warnings.warn(
            f"{len(skipped)} recording(s) skipped for missing diagnosis: "
            f"{', '.join(skipped[:5])}{'...' if len(skipped) > 5 else ''}",
            MissingDiagnosisWarning,
        )

    demographics: list[DemographicRecord] = []
    if demographics_file is not None:
        demographics, demo_skipped = parse_demographics(demographics_file)
        if demo_skipped:
            log.info("demographics: %d record(s) without derivable BMI/age skipped",
                     len(demo_skipped))

    return Corpus(records=records, demographics=demographics,
                  n_recordings_found=len(wav_paths),
                  skipped_missing_diagnosis=skipped)


# --- splits -----------------------------------------------------------------

def stratified_split(n, labels, ratio, seed) -> Split:
    """Deterministic stratified split.

    Train size is round(ratio*n) overall; per-class train counts are
    apportioned by largest remainder so each class lands within one example
    of ratio. Falls back to an unstratified shuffle (with a warning) when
    some class has fewer than 2 members.
    """
    if not (0.0 < ratio < 1.0):
        raise ValueError(f"ratio must be in (0, 1), got {ratio}")
    labels = np.asarray(labels)
    if labels.shape[0] != n:
        raise ValueError(f"labels length {labels.shape[0]} != n {n}")
    rng = np.random.default_rng(seed)
    n_train = int(round(ratio * n))

    classes, counts = np.unique(labels, return_counts=True)
    if n and counts.min() < 2:
        warnings.warn("a class has < 2 members; falling back to unstratified split",
                      ClassTooSmallWarning)
        order = rng.permutation(n)
        return Split(sorted(order[:n_train].tolist()),
                     sorted(order[n_train:].tolist()), seed)

    # largest-remainder apportionment of the train budget across classes
    quotas = ratio * counts
    take = np.floor(quotas).astype(int)
    remainder = n_train - int(take.sum())
    if remainder > 0:
        frac_order = np.argsort(-(quotas - take), kind="stable")
        for idx in frac_order[:remainder]:
            take[idx] += 1
    elif remainder < 0:
        frac_order = np.argsort(quotas - take, kind="stable")
        gave = 0
        for idx in frac_order:
            if take[idx] > 0 and gave < -remainder:
                take[idx] -= 1
                gave += 1

    train: list[int] = []
    test: list[int] = []
    for cls, k in zip(classes, take):
        members = np.flatnonzero(labels == cls)
        perm = rng.permutation(members.size)
        train.extend(members[perm[:k]].tolist())
        test.extend(members[perm[k:]].tolist())
    return Split(sorted(train), sorted(test), seed)


def split_by_patient(patient_ids, ratio, seed) -> Split:
    """Group-aware split: whole patients go to one side.

    Patients are shuffled deterministically and assigned greedily until the
    train side reaches ratio*n recordings (class balance is not guaranteed).
    """
    if not (0.0 < ratio < 1.0):
        raise ValueError(f"ratio must be in (0, 1), got {ratio}")
    patient_ids = np.asarray(patient_ids)
    n = patient_ids.shape[0]
    rng = np.random.default_rng(seed)
    patients = rng.permutation(np.unique(patient_ids))
    budget = ratio * n
    train: list[int] = []
    test: list[int] = []
    for pid in patients:
        members = np.flatnonzero(patient_ids == pid).tolist()
        if len(train) + len(members) / 2 <= budget:
            train.extend(members)
        else:
            test.extend(members)
    return Split(sorted(train), sorted(test), seed)


# --- synthetic corpus -------------------------------------------------------

# (sound class, variant) -> disease; the variant changes an audible generator
# parameter (crackle rate / wheeze band) so the disease head is learnable.
SYNTH_DISEASE_MAP = {
    (SoundLabel.CRACKLES, 0): DiseaseLabel.PNEUMONIA,
    (SoundLabel.CRACKLES, 1): DiseaseLabel.BRONCHIECTASIS,
    (SoundLabel.WHEEZES, 0): DiseaseLabel.COPD,
    (SoundLabel.WHEEZES, 1): DiseaseLabel.URTI,
    (SoundLabel.BOTH, 0): DiseaseLabel.COPD,
    (SoundLabel.BOTH, 1): DiseaseLabel.BRONCHIOLITIS,
    (SoundLabel.HEALTHY, 0): DiseaseLabel.HEALTHY,
    (SoundLabel.HEALTHY, 1): DiseaseLabel.HEALTHY,
}

_WHEEZE_BANDS = ((200.0, 450.0), (450.0, 800.0))
_CRACKLE_RATES = (10.0, 30.0)


def _pink_noise(rng, n):
    """1/f-shaped noise via spectral weighting of white noise."""
    white = rng.standard_normal(n)
    spectrum = np.fft.rfft(white)
    freqs = np.fft.rfftfreq(n)
    weights = np.ones_like(freqs)
    weights[1:] = 1.0 / np.sqrt(freqs[1:])
    weights[0] = 0.0
    pink = np.fft.irfft(spectrum * weights, n)
    rms = np.sqrt(np.mean(pink * pink))
    return 0.08 * pink / max(rms, 1e-12)


def _add_crackles(rng, x, rate_hz, sample_rate_hz):
    n = len(x)
    count = rng.poisson(rate_hz * n / sample_rate_hz)
    burst_len = max(2, int(round(0.005 * sample_rate_hz)))  # 5 ms
    t = np.arange(burst_len) / sample_rate_hz
    envelope = np.exp(-t / 0.002)
    for _ in range(count):
        pos = int(rng.integers(0, max(1, n - burst_len)))
        amp = rng.uniform(0.8, 1.3) * rng.choice((-1.0, 1.0))
        x[pos:pos + burst_len] += amp * envelope
    return x


def _add_wheeze(rng, x, band, sample_rate_hz):
    n = len(x)
    t = np.arange(n) / sample_rate_hz
    tone_hz = rng.uniform(*band)
    am_hz = rng.uniform(0.2, 0.45)
    phase = rng.uniform(0.0, 2.0 * np.pi)
    am = 1.0 + 0.5 * np.sin(2.0 * np.pi * am_hz * t)
    x += 0.3 * am * np.sin(2.0 * np.pi * tone_hz * t + phase)
    return x


def synth_corpus(n_per_class, seed, sample_rate_hz=4000, duration_s=5.0):
    """Generate a labeled synthetic corpus, n_per_class clips per sound class.

    Crackles = pink-noise base + Poisson-placed 5 ms exponential-decay
    impulses; Wheezes = base + amplitude-modulated tone in 200-800 Hz;
    Both = both additions; Healthy = base only. The disease label follows
    SYNTH_DISEASE_MAP from (sound class, clip variant). Deterministic for a
    fixed seed.
    """
    if n_per_class < 1:
        raise ValueError("n_per_class must be >= 1")
    n_samples = int(round(duration_s * sample_rate_hz))
    out = []
    pid = 0
    for sound in SoundLabel:
        for i in range(n_per_class):
            pid += 1
            variant = i % 2
            rng = np.random.default_rng(
                np.random.SeedSequence(entropy=seed, spawn_key=(int(sound), i)))
            x = _pink_noise(rng, n_samples)
            if sound in (SoundLabel.CRACKLES, SoundLabel.BOTH):
                x = _add_crackles(rng, x, _CRACKLE_RATES[variant], sample_rate_hz)
            if sound in (SoundLabel.WHEEZES, SoundLabel.BOTH):
                x = _add_wheeze(rng, x, _WHEEZE_BANDS[variant], sample_rate_hz)
            peak = np.max(np.abs(x))
            if peak > 1.0:
                x = x / peak
            clip = AudioClip(samples=x, sample_rate_hz=sample_rate_hz,
                             patient_id=pid,
                             recording_id=f"{pid}_1b1_Al_sc_Synth")
            out.append((clip, sound, SYNTH_DISEASE_MAP[(sound, variant)]))
    return out


def synth_demographics(n, seed, age_range=(35.0, 90.0), bmi_range=(15.0, 40.0)):
    """Uniform synthetic demographics for the risk subsystem."""
    rng = np.random.default_rng(seed)
    records = []
    for pid in range(1, n + 1):
        records.append(DemographicRecord(
            patient_id=pid,
            age_years=float(rng.uniform(*age_range)),
            gender=Gender(int(rng.integers(0, 2))),
            bmi_kg_m2=float(rng.uniform(*bmi_range)),
        ))
    return records


def write_synth_corpus(out_dir, n_per_class, seed, sample_rate_hz=4000,
                       duration_s=5.0, demographics_n=0):
    """Materialize a synthetic corpus in ICBHI layout.

    Writes one .wav + .txt pair per clip (cycles carry the clip's flags),
    a diagnosis.csv, and optionally a demographics.csv with
    ``demographics_n`` extra rule-space records.
    """
    out_dir = Path(out_dir)
    audio_dir = out_dir / "audio"
    audio_dir.mkdir(parents=True, exist_ok=True)
    clips = synth_corpus(n_per_class, seed, sample_rate_hz, duration_s)

    flags = {
        SoundLabel.CRACKLES: (1, 0),
        SoundLabel.WHEEZES: (0, 1),
        SoundLabel.BOTH: (1, 1),
        SoundLabel.HEALTHY: (0, 0),
    }
    with open(out_dir / "diagnosis.csv", "w", encoding="utf-8", newline="") as diag:
        diag.write("patient_id,diagnosis\n")
        for clip, sound, disease in clips:
            write_wav(audio_dir / f"{clip.recording_id}.wav",
                      clip.samples, clip.sample_rate_hz)
            crackle, wheeze = flags[sound]
            n_cycles = 4
            step = clip.duration_s / n_cycles
            with open(audio_dir / f"{clip.recording_id}.txt", "w",
                      encoding="utf-8") as ann:
                for k in range(n_cycles):
                    ann.write(f"{k * step:.3f}\t{(k + 1) * step:.3f}\t{crackle}\t{wheeze}\n")
            diag.write(f"{clip.patient_id},{disease.name.capitalize()}\n")

    if demographics_n:
        demo = synth_demographics(demographics_n, seed)
        with open(out_dir / "demographics.csv", "w", encoding="utf-8",
                  newline="") as fh:
            fh.write("patient_id,sex,age,adult_bmi,child_weight_kg,child_height_cm\n")
            for rec in demo:
                sex = "F" if rec.gender == Gender.FEMALE else "M"
                fh.write(f"{rec.patient_id},{sex},{rec.age_years:.1f},"
                         f"{rec.bmi_kg_m2:.2f},,\n")
    return out_dir
