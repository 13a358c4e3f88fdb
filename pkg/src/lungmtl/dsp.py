"""MFCC feature chain: pre-emphasis, framing, FFT power spectrum, mel
filterbank, log energies, DCT-II.

Every stage is a pure function so each can be checked against a naive
oracle independently; extract_mfcc is their composition plus resampling
and pad/truncate to a fixed grid.
"""

import hashlib
import json
from dataclasses import asdict, dataclass
from pathlib import Path

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin

from .corpus import AudioClip, DiseaseLabel, LabeledExample, SoundLabel
from .errors import (
    BadFftSizeError,
    ConfigMismatchError,
    DegenerateFilterError,
    EmptyAudioError,
    MalformedHeaderError,
)
from .ioutil import atomic_write_bytes
from .validation import check_fitted

# Bounds the energy logarithm; silence must not produce -inf.
LOG_FLOOR = 1e-10

FEATURE_MAGIC = "lungmtl-features"
FEATURE_VERSION = 1


@dataclass(frozen=True)
class MfccConfig:
    """Feature-chain parameters. Defaults cover the 20-2000 Hz band where
    crackles and wheezes live, on a 5 s frame grid."""
    pre_emphasis_alpha: float = 0.97
    frame_len_ms: float = 25.0
    hop_ms: float = 10.0
    n_fft: int = 512
    n_mel_filters: int = 26
    n_coefficients: int = 20
    fmin_hz: float = 20.0
    fmax_hz: float = 2000.0
    target_frames: int = 498
    target_sample_rate_hz: int = 4000

    def __post_init__(self):
        if not (0.0 <= self.pre_emphasis_alpha < 1.0):
            raise ValueError(f"pre_emphasis_alpha must be in [0,1), got {self.pre_emphasis_alpha}")
        if self.n_fft < 1 or (self.n_fft & (self.n_fft - 1)) != 0:
            raise BadFftSizeError(f"n_fft must be a power of two, got {self.n_fft}")
        if self.n_mel_filters < 1 or self.n_coefficients < 1:
            raise ValueError("n_mel_filters and n_coefficients must be >= 1")
        if self.n_coefficients > self.n_mel_filters:
            raise ValueError(
                f"n_coefficients ({self.n_coefficients}) exceeds "
                f"n_mel_filters ({self.n_mel_filters})")
        if not (0.0 <= self.fmin_hz < self.fmax_hz <= self.target_sample_rate_hz / 2):
            raise ValueError(
                f"need 0 <= fmin < fmax <= rate/2, got fmin={self.fmin_hz}, "
                f"fmax={self.fmax_hz}, rate={self.target_sample_rate_hz}")
        if self.target_frames < 1:
            raise ValueError("target_frames must be >= 1")
        if self.n_fft < self.frame_len_samples:
            raise ValueError(
                f"n_fft ({self.n_fft}) shorter than the frame "
                f"({self.frame_len_samples} samples)")

    @property
    def frame_len_samples(self) -> int:
        return int(round(self.frame_len_ms / 1000.0 * self.target_sample_rate_hz))

    @property
    def hop_samples(self) -> int:
        return int(round(self.hop_ms / 1000.0 * self.target_sample_rate_hz))

    def fingerprint(self) -> str:
        blob = json.dumps(asdict(self), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(blob.encode("utf-8")).hexdigest()[:16]


@dataclass
class FeatureMatrix:
    """(n_coefficients, target_frames) grid tagged with its config hash."""
    values: np.ndarray
    config_fingerprint: str


def pre_emphasis(x, alpha: float) -> np.ndarray:
    """y[0] = x[0]; y[t] = x[t] - alpha * x[t-1]."""
    if not (0.0 <= alpha < 1.0):
        raise ValueError(f"alpha must be in [0,1), got {alpha}")
    x = np.asarray(x, dtype=np.float64)
    y = x.copy()
    y[1:] -= alpha * x[:-1]
    return y


def hamming_window(length: int) -> np.ndarray:
    """w[k] = 0.54 - 0.46*cos(2*pi*k/(K-1)); the degenerate K=1 window is 1."""
    if length == 1:
        return np.ones(1)
    k = np.arange(length)
    return 0.54 - 0.46 * np.cos(2.0 * np.pi * k / (length - 1))


def frame_and_window(x, sample_rate_hz, frame_len_ms, hop_ms) -> np.ndarray:
    """Slice into overlapping frames and apply a Hamming window.

    Returns (n_frames, frame_len). Inputs shorter than one frame yield a
    single zero-padded frame.
    """
    x = np.asarray(x, dtype=np.float64)
    frame_len = int(round(frame_len_ms / 1000.0 * sample_rate_hz))
    hop = int(round(hop_ms / 1000.0 * sample_rate_hz))
    if frame_len < 1 or hop < 1:
        raise ValueError(f"frame ({frame_len}) and hop ({hop}) must be >= 1 sample")
    if x.shape[0] < frame_len:
        padded = np.zeros(frame_len)
        padded[:x.shape[0]] = x
        frames = padded[None, :]
    else:
        n_frames = 1 + (x.shape[0] - frame_len) // hop
        idx = hop * np.arange(n_frames)[:, None] + np.arange(frame_len)[None, :]
        frames = x[idx]
    return frames * hamming_window(frame_len)


def fft_radix2(x) -> np.ndarray:
    """Iterative radix-2 decimation-in-time FFT over the last axis."""
    x = np.asarray(x)
    n = x.shape[-1]
    if n < 1 or (n & (n - 1)) != 0:
        raise BadFftSizeError(f"FFT length must be a power of two, got {n}")
    bits = n.bit_length() - 1
    idx = np.arange(n)
    rev = np.zeros(n, dtype=np.intp)
    for b in range(bits):
        rev = (rev << 1) | ((idx >> b) & 1)
    out = np.asarray(x, dtype=np.complex128)[..., rev]
    size = 2
    while size <= n:
        half = size // 2
        twiddle = np.exp((-2j * np.pi / size) * np.arange(half))
        blocks = out.reshape(out.shape[:-1] + (n // size, size))
        even = blocks[..., :half]
        odd = blocks[..., half:] * twiddle
        out = np.concatenate((even + odd, even - odd), axis=-1)
        out = out.reshape(out.shape[:-2] + (n,))
        size *= 2
    return out


def power_spectrum(frame, n_fft: int) -> np.ndarray:
    """One-sided P[k] = |FFT(frame)[k]|^2 / n_fft for k = 0..n_fft/2.

    Accepts a single frame or a batch (..., frame_len); frames are
    zero-padded to n_fft.
    """
    frame = np.asarray(frame, dtype=np.float64)
    if n_fft < 1 or (n_fft & (n_fft - 1)) != 0:
        raise BadFftSizeError(f"n_fft must be a power of two, got {n_fft}")
    m = frame.shape[-1]
    if m > n_fft:
        raise BadFftSizeError(f"frame length {m} exceeds n_fft {n_fft}")
    if m < n_fft:
        pad = [(0, 0)] * (frame.ndim - 1) + [(0, n_fft - m)]
        frame = np.pad(frame, pad)
    spectrum = fft_radix2(frame)
    power = (spectrum.real ** 2 + spectrum.imag ** 2) / n_fft
    return power[..., : n_fft // 2 + 1]


def hz_to_mel(f):
    return 2595.0 * np.log10(1.0 + np.asarray(f, dtype=np.float64) / 700.0)


def mel_to_hz(m):
    return 700.0 * (10.0 ** (np.asarray(m, dtype=np.float64) / 2595.0) - 1.0)


def mel_filterbank(n_filters, n_fft, sample_rate_hz, fmin_hz, fmax_hz) -> np.ndarray:
    """Triangular filters on a mel-equal grid, peak 1 at the center bin.

    Returns (n_filters, n_fft/2 + 1).
    """
    if n_filters < 1:
        raise ValueError(f"n_filters must be >= 1, got {n_filters}")
    if not (0.0 <= fmin_hz < fmax_hz <= sample_rate_hz / 2):
        raise ValueError(
            f"need 0 <= fmin < fmax <= rate/2, got {fmin_hz}, {fmax_hz}")
    edges_hz = mel_to_hz(np.linspace(hz_to_mel(fmin_hz), hz_to_mel(fmax_hz),
                                     n_filters + 2))
    bins = np.floor((n_fft + 1) * edges_hz / sample_rate_hz).astype(int)
    bins = np.minimum(bins, n_fft // 2)
    filters = np.zeros((n_filters, n_fft // 2 + 1))
    for i in range(n_filters):
        left, center, right = bins[i], bins[i + 1], bins[i + 2]
        if center == left or right == center:
            raise DegenerateFilterError(
                f"filter {i} collapses onto coincident bins "
                f"({left}, {center}, {right}); reduce n_filters or raise n_fft")
        k = np.arange(left, center + 1)
        filters[i, k] = (k - left) / (center - left)
        k = np.arange(center, right + 1)
        filters[i, k] = (right - k) / (right - center)
    return filters


def log_mel_energies(power, filters, floor: float = LOG_FLOOR) -> np.ndarray:
    """e[i] = ln(max(filters[i] . P, floor)); accepts batched P."""
    power = np.asarray(power, dtype=np.float64)
    energy = power @ np.asarray(filters, dtype=np.float64).T
    return np.log(np.maximum(energy, floor))


def dct_matrix(n_out: int, n: int) -> np.ndarray:
    """First n_out rows of the orthonormal DCT-II matrix for length n."""
    k = np.arange(n_out)[:, None]
    j = np.arange(n)[None, :]
    mat = np.cos(np.pi * k * (2 * j + 1) / (2.0 * n))
    scale = np.full((n_out, 1), np.sqrt(2.0 / n))
    scale[0, 0] = np.sqrt(1.0 / n)
    return scale * mat


def dct_ii(e, n_out: int) -> np.ndarray:
    """Orthonormal DCT-II keeping the first n_out coefficients.

    Accepts a single vector or a batch (..., n).
    """
    e = np.asarray(e, dtype=np.float64)
    n = e.shape[-1]
    if n_out > n:
        raise ValueError(f"n_out ({n_out}) exceeds input length ({n})")
    return e @ dct_matrix(n_out, n).T


def resample_linear(x, src_rate_hz, dst_rate_hz) -> np.ndarray:
    """Resample by linear interpolation on the shared time axis."""
    x = np.asarray(x, dtype=np.float64)
    if src_rate_hz == dst_rate_hz:
        return x
    n_out = max(1, int(round(x.shape[0] * dst_rate_hz / src_rate_hz)))
    positions = np.arange(n_out) * (src_rate_hz / dst_rate_hz)
    return np.interp(positions, np.arange(x.shape[0]), x)


def floor_energy_column(cfg: MfccConfig) -> np.ndarray:
    """The MFCC column produced by silence; also the pad value for short
    clips so padding is indistinguishable from silence."""
    return dct_ii(np.full(cfg.n_mel_filters, np.log(LOG_FLOOR)), cfg.n_coefficients)


def extract_mfcc(clip: AudioClip, cfg: MfccConfig) -> FeatureMatrix:
    """Run the full chain and fit the result to the fixed feature grid.

    Columns are frames, rows are coefficients; short clips are padded with
    the floor-energy column, long ones truncated to cfg.target_frames.
    """
    x = np.asarray(clip.samples, dtype=np.float64)
    if x.size == 0:
        raise EmptyAudioError(f"clip {clip.recording_id!r} has no samples")
    x = resample_linear(x, clip.sample_rate_hz, cfg.target_sample_rate_hz)
    x = pre_emphasis(x, cfg.pre_emphasis_alpha)
    frames = frame_and_window(x, cfg.target_sample_rate_hz,
                              cfg.frame_len_ms, cfg.hop_ms)
    power = power_spectrum(frames, cfg.n_fft)
    filters = mel_filterbank(cfg.n_mel_filters, cfg.n_fft,
                             cfg.target_sample_rate_hz, cfg.fmin_hz, cfg.fmax_hz)
    energies = log_mel_energies(power, filters)
    coeffs = dct_ii(energies, cfg.n_coefficients).T  # (n_coefficients, n_frames)

    n_frames = coeffs.shape[1]
    if n_frames < cfg.target_frames:
        pad = np.tile(floor_energy_column(cfg)[:, None],
                      (1, cfg.target_frames - n_frames))
        coeffs = np.concatenate([coeffs, pad], axis=1)
    elif n_frames > cfg.target_frames:
        coeffs = coeffs[:, : cfg.target_frames]
    return FeatureMatrix(values=coeffs, config_fingerprint=cfg.fingerprint())


class MfccExtractor(BaseEstimator, TransformerMixin):
    """Stateless transformer from AudioClips to stacked feature matrices.

    fit only freezes the validated config; transform returns a float32
    array of shape (n_clips, n_coefficients, target_frames).
    """

    def __init__(self, pre_emphasis_alpha=0.97, frame_len_ms=25.0, hop_ms=10.0,
                 n_fft=512, n_mel_filters=26, n_coefficients=20, fmin_hz=20.0,
                 fmax_hz=2000.0, target_frames=498, target_sample_rate_hz=4000):
        self.pre_emphasis_alpha = pre_emphasis_alpha
        self.frame_len_ms = frame_len_ms
        self.hop_ms = hop_ms
        self.n_fft = n_fft
        self.n_mel_filters = n_mel_filters
        self.n_coefficients = n_coefficients
        self.fmin_hz = fmin_hz
        self.fmax_hz = fmax_hz
        self.target_frames = target_frames
        self.target_sample_rate_hz = target_sample_rate_hz

    def fit(self, X=None, y=None):
        self.config_ = MfccConfig(**self.get_params())
        return self

    def transform(self, X) -> np.ndarray:
        check_fitted(self, "config_")
        mats = [extract_mfcc(clip, self.config_).values for clip in X]
        return np.stack(mats).astype(np.float32)


# --- feature dump -----------------------------------------------------------

def write_features(path, cfg: MfccConfig, examples) -> None:
    """Write one corpus worth of features: a one-line JSON header (config,
    fingerprint, per-record labels) then the float32 matrices, row-major."""
    arr = np.stack([np.asarray(ex.features) for ex in examples]).astype("<f4")
    header = {
        "format": FEATURE_MAGIC,
        "version": FEATURE_VERSION,
        "config": asdict(cfg),
        "config_fingerprint": cfg.fingerprint(),
        "dtype": "<f4",
        "shape": list(arr.shape),
        "records": [
            {"recording_id": ex.recording_id, "patient_id": ex.patient_id,
             "sound": int(ex.sound), "disease": int(ex.disease)}
            for ex in examples
        ],
    }
    blob = json.dumps(header, sort_keys=True, separators=(",", ":"))
    atomic_write_bytes(path, blob.encode("utf-8") + b"\n" + arr.tobytes())


def read_features(path):
    """Inverse of write_features. Returns (MfccConfig, list[LabeledExample])."""
    data = Path(path).read_bytes()
    newline = data.find(b"\n")
    if newline < 0:
        raise MalformedHeaderError(f"{path}: missing header line")
    try:
        header = json.loads(data[:newline])
    except json.JSONDecodeError as exc:
        raise MalformedHeaderError(f"{path}: header is not valid JSON") from exc
    if header.get("format") != FEATURE_MAGIC:
        raise MalformedHeaderError(f"{path}: not a feature file")
    if header.get("version") != FEATURE_VERSION:
        raise MalformedHeaderError(
            f"{path}: unsupported version {header.get('version')!r}")
    try:
        cfg = MfccConfig(**header["config"])
        shape = tuple(header["shape"])
        records = header["records"]
    except (KeyError, TypeError) as exc:
        raise MalformedHeaderError(f"{path}: incomplete header") from exc
    if cfg.fingerprint() != header.get("config_fingerprint"):
        raise ConfigMismatchError(
            f"{path}: header config does not match its fingerprint")
    payload = data[newline + 1:]
    expected = int(np.prod(shape)) * 4
    if len(payload) != expected or len(records) != shape[0]:
        raise MalformedHeaderError(
            f"{path}: payload size {len(payload)} does not match header shape {shape}")
    arr = np.frombuffer(payload, dtype="<f4").reshape(shape)
    examples = [
        LabeledExample(features=arr[i], sound=SoundLabel(rec["sound"]),
                       disease=DiseaseLabel(rec["disease"]),
                       patient_id=rec["patient_id"],
                       recording_id=rec.get("recording_id", ""))
        for i, rec in enumerate(records)
    ]
    return cfg, examples
