"""Minimal RIFF/WAVE reader and writer.

Accepts PCM 16-bit and IEEE float 32-bit payloads, mono or multichannel
(channels are averaged to mono on read). The writer always emits PCM 16-bit
little-endian mono.
"""

import struct

import numpy as np

from .errors import EmptyAudioError, MalformedHeaderError, UnsupportedEncodingError

_FMT_PCM = 0x0001
_FMT_IEEE_FLOAT = 0x0003
_FMT_EXTENSIBLE = 0xFFFE

PCM16_SCALE = 32768.0


def read_wav_samples(path):
    """Read a WAV file into (mono float64 samples in [-1, 1], sample rate).

    Integer PCM is scaled by 1/32768; float payloads are clipped to [-1, 1].
    Multichannel audio is averaged across channels.
    """
    try:
        with open(path, "rb") as fh:
            blob = fh.read()
    except OSError as exc:
        raise OSError(f"cannot read WAV file {path}: {exc}") from exc

    if len(blob) < 12 or blob[:4] != b"RIFF" or blob[8:12] != b"WAVE":
        raise MalformedHeaderError(f"{path}: not a RIFF/WAVE file")

    fmt = None
    data = None
    pos = 12
    while pos + 8 <= len(blob):
        chunk_id = blob[pos:pos + 4]
        (chunk_size,) = struct.unpack_from("<I", blob, pos + 4)
        body = blob[pos + 8:pos + 8 + chunk_size]
        if chunk_id == b"fmt ":
            if len(body) < 16:
                raise MalformedHeaderError(f"{path}: fmt chunk too short")
            fmt = struct.unpack_from("<HHIIHH", body, 0)
        elif chunk_id == b"data":
            data = body
        # chunks are word-aligned
        pos += 8 + chunk_size + (chunk_size & 1)

    if fmt is None or data is None:
        raise MalformedHeaderError(f"{path}: missing fmt or data chunk")

    audio_format, n_channels, sample_rate, _, _, bits = fmt
    if audio_format == _FMT_EXTENSIBLE:
        raise UnsupportedEncodingError(f"{path}: WAVE_FORMAT_EXTENSIBLE not supported")
    if n_channels < 1:
        raise MalformedHeaderError(f"{path}: channel count {n_channels}")

    if audio_format == _FMT_PCM and bits == 16:
        raw = np.frombuffer(data[: len(data) - len(data) % 2], dtype="<i2")
        samples = raw.astype(np.float64) / PCM16_SCALE
    elif audio_format == _FMT_IEEE_FLOAT and bits == 32:
        raw = np.frombuffer(data[: len(data) - len(data) % 4], dtype="<f4")
        samples = np.clip(raw.astype(np.float64), -1.0, 1.0)
    else:
        raise UnsupportedEncodingError(
            f"{path}: format tag {audio_format} / {bits}-bit not supported "
            "(PCM16 and float32 only)"
        )

    if samples.size == 0:
        raise EmptyAudioError(f"{path}: no samples")

    if n_channels > 1:
        usable = samples.size - samples.size % n_channels
        samples = samples[:usable].reshape(-1, n_channels).mean(axis=1)
        if samples.size == 0:
            raise EmptyAudioError(f"{path}: no complete frames")
    return samples, int(sample_rate)


def write_wav(path, samples, sample_rate_hz):
    """Write mono samples in [-1, 1] as a PCM16 little-endian WAV file."""
    samples = np.asarray(samples, dtype=np.float64)
    if samples.ndim != 1 or samples.size == 0:
        raise EmptyAudioError("write_wav needs a nonempty 1-D sample array")
    pcm = np.clip(np.round(samples * PCM16_SCALE), -32768, 32767).astype("<i2")
    payload = pcm.tobytes()

    header = b"".join([
        b"RIFF",
        struct.pack("<I", 36 + len(payload)),
        b"WAVE",
        b"fmt ",
        struct.pack("<IHHIIHH", 16, _FMT_PCM, 1, int(sample_rate_hz),
                    int(sample_rate_hz) * 2, 2, 16),
        b"data",
        struct.pack("<I", len(payload)),
    ])
    with open(path, "wb") as fh:
        fh.write(header)
        fh.write(payload)
