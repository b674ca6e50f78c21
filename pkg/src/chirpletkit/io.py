"""Signal files, decimation and the decomposition interchange format."""

from __future__ import annotations

import json
import logging
import math
import struct
import wave
from pathlib import Path

import numpy as np
from scipy.signal import firwin, kaiserord

from .core import ChirpletAtom, ChirpletParams, Decomposition
from .errors import (
    ChirpletError,
    CorruptFileError,
    FormatVersionError,
    InvalidInputError,
    ParseError,
    UnsupportedFormatError,
)

__all__ = [
    "FORMAT_VERSION",
    "ATOM_FIELDS",
    "load_signal",
    "read_wav",
    "write_wav",
    "read_csv_signal",
    "write_csv_signal",
    "decimate",
    "decomposition_to_dict",
    "decomposition_from_dict",
    "dumps_decomposition",
    "save_decomposition",
    "load_decomposition",
]

log = logging.getLogger(__name__)

FORMAT_VERSION = 1
#: Six estimation reals per atom; ``cc`` is stored alongside as a diagnostic.
ATOM_FIELDS = ("amp", "phase_rad", "tc_samples", "fc_rad_per_sample",
               "c_rad_per_sample2", "dt_samples")

_WAVE_PCM = 1
_WAVE_FLOAT = 3
_WAVE_EXTENSIBLE = 0xFFFE


# ------------------------------------------------------------------ WAV


def read_wav(path):
    """Read a PCM16 or 32-bit float WAV file.

    Returns ``(samples, sample_rate_hz)``. PCM values are divided by 32768.
    Only the first channel of a multichannel file is kept.
    """
    data = Path(path).read_bytes()
    if len(data) < 12:
        raise ParseError("file too short for a RIFF header", len(data))
    if data[0:4] != b"RIFF" or data[8:12] != b"WAVE":
        raise ParseError("missing RIFF/WAVE signature", 0)
    fmt = None
    payload = None
    pos = 12
    while pos + 8 <= len(data):
        chunk_id = data[pos : pos + 4]
        (size,) = struct.unpack_from("<I", data, pos + 4)
        body = pos + 8
        if body + size > len(data):
            if chunk_id == b"data" and fmt is not None:
                # tolerate streaming writers that leave the size unset
                size = len(data) - body
            else:
                raise ParseError(f"chunk {chunk_id!r} runs past end of file", pos)
        if chunk_id == b"fmt ":
            if size < 16:
                raise ParseError("fmt chunk shorter than 16 bytes", pos)
            tag, channels, rate, _, block_align, bits = struct.unpack_from("<HHIIHH", data, body)
            if tag == _WAVE_EXTENSIBLE:
                if size < 26:
                    raise ParseError("truncated WAVE_FORMAT_EXTENSIBLE header", pos)
                (tag,) = struct.unpack_from("<H", data, body + 24)
            fmt = (tag, channels, rate, block_align, bits, pos)
        elif chunk_id == b"data":
            payload = (body, size)
        pos = body + size + (size & 1)
    if fmt is None:
        raise ParseError("no fmt chunk found", pos)
    if payload is None:
        raise ParseError("no data chunk found", pos)
    tag, channels, rate, block_align, bits, fmt_pos = fmt
    if channels < 1:
        raise ParseError("fmt chunk declares zero channels", fmt_pos)
    if tag == _WAVE_PCM and bits == 16:
        dtype, scale = "<i2", 1.0 / 32768.0
    elif tag == _WAVE_FLOAT and bits == 32:
        dtype, scale = "<f4", 1.0
    else:
        raise UnsupportedFormatError(
            f"unsupported WAV encoding (format tag {tag}, {bits} bits); "
            "use PCM16 or 32-bit float"
        )
    start, size = payload
    frame = channels * (bits // 8)
    n_frames = size // frame
    if size % frame:
        log.warning("dropping %d trailing bytes of a partial frame", size % frame)
    raw = np.frombuffer(data, dtype=dtype, count=n_frames * channels, offset=start)
    raw = raw.reshape(n_frames, channels)
    if channels > 1:
        log.warning("%d-channel WAV: using the first channel only", channels)
    return raw[:, 0].astype(np.float64) * scale, float(rate)


def write_wav(path, x, sample_rate_hz) -> None:
    """Write real samples in [-1, 1] as mono PCM16 (values outside are clipped)."""
    x = np.asarray(x, dtype=np.float64)
    if np.any(np.abs(x) > 1.0):
        log.warning("clipping %d samples outside [-1, 1]", int(np.sum(np.abs(x) > 1.0)))
    pcm = np.clip(np.round(x * 32768.0), -32768, 32767).astype("<i2")
    with wave.open(str(path), "wb") as w:
        w.setnchannels(1)
        w.setsampwidth(2)
        w.setframerate(int(round(sample_rate_hz)))
        w.writeframes(pcm.tobytes())


# ------------------------------------------------------------------ CSV


def read_csv_signal(path):
    """One sample per line, with an optional ``# rate=<hz>`` header.

    A line with two comma-separated values is read as ``real, imag`` of an
    analytic sample. Returns ``(samples, sample_rate_hz or None)``.
    """
    rate = None
    values = []
    offset = 0
    with open(path, "rb") as fh:
        for lineno, raw in enumerate(fh, 1):
            line = raw.decode("utf-8", errors="replace").strip()
            if not line:
                pass
            elif line.startswith("#"):
                key, _, val = line[1:].strip().partition("=")
                if key.strip().lower() == "rate":
                    try:
                        rate = float(val)
                    except ValueError:
                        raise ParseError(f"bad rate header on line {lineno}", offset) from None
            else:
                parts = [p.strip() for p in line.split(",")]
                try:
                    nums = [float(p) for p in parts]
                except ValueError:
                    raise ParseError(f"not a number on line {lineno}: {line!r}", offset) from None
                if len(nums) not in (1, 2):
                    raise ParseError(f"expected 1 or 2 columns on line {lineno}", offset)
                values.append(nums)
            offset += len(raw)
    if not values:
        raise ParseError("no samples found", offset)
    widths = {len(v) for v in values}
    if len(widths) > 1:
        raise ParseError("mixed one- and two-column lines", None)
    arr = np.array(values, dtype=np.float64)
    if arr.shape[1] == 1:
        return arr[:, 0], rate
    return arr[:, 0] + 1j * arr[:, 1], rate


def write_csv_signal(path, x, sample_rate_hz=None) -> None:
    x = np.asarray(x)
    with open(path, "w") as fh:
        if sample_rate_hz is not None:
            fh.write(f"# rate={sample_rate_hz!r}\n")
        if np.iscomplexobj(x):
            for v in x:
                fh.write(f"{float(v.real)!r},{float(v.imag)!r}\n")
        else:
            for v in x:
                fh.write(f"{float(v)!r}\n")


def load_signal(path, fmt: str | None = None):
    """Load ``(samples, sample_rate_hz)`` from a ``wav`` or ``csv`` file."""
    path = Path(path)
    fmt = (fmt or path.suffix.lstrip(".")).lower()
    if fmt == "wav":
        return read_wav(path)
    if fmt in ("csv", "txt"):
        return read_csv_signal(path)
    raise UnsupportedFormatError(f"unknown signal format {fmt!r}; use wav or csv")


# ------------------------------------------------------------ decimation


def design_lowpass(factor: int, numtaps: int | None = None) -> np.ndarray:
    """Kaiser windowed-sinc anti-alias filter with cutoff ``0.9 pi / factor``.

    By default the length is the larger of 63 taps and what a 45 dB stopband
    starting at ``pi / factor`` requires.
    """
    cutoff = 0.9 / factor
    width = 0.2 / factor  # transition band, as a fraction of Nyquist
    need, beta = kaiserord(45.0, width)
    if numtaps is None:
        numtaps = max(63, need)
    numtaps += 1 - numtaps % 2
    return firwin(numtaps, cutoff, window=("kaiser", beta))


def decimate(x, factor: int, sample_rate_hz=None, numtaps: int | None = None):
    """Low-pass filter and keep every ``factor``-th sample.

    The filter is applied with zero phase; the record is extended by edge
    replication so a constant input stays constant. Returns
    ``(y, sample_rate_hz / factor)`` (the rate is ``None`` when unknown).
    """
    if int(factor) != factor or factor < 2:
        raise InvalidInputError(f"decimation factor must be an integer >= 2, got {factor}")
    factor = int(factor)
    x = np.asarray(x)
    taps = design_lowpass(factor, numtaps)
    half = taps.size // 2
    padded = np.pad(x, half, mode="edge")
    y = np.convolve(padded, taps, mode="valid")[::factor]
    rate = None if sample_rate_hz is None else sample_rate_hz / factor
    return y, rate


# ----------------------------------------------------- decomposition files


def decomposition_to_dict(d: Decomposition) -> dict:
    header = {
        "format_version": FORMAT_VERSION,
        "n_samples": int(d.n_samples),
        "sample_rate_hz": None if d.sample_rate_hz is None else float(d.sample_rate_hz),
        "radix": int(d.radix),
        "i0": int(d.i0),
        "cc_threshold": None if d.cc_threshold is None else float(d.cc_threshold),
        "n_atoms": len(d.atoms),
        "residual_energy_trace": [float(v) for v in d.residual_energy_trace],
    }
    atoms = []
    for a in d.atoms:
        p = a.params
        atoms.append({
            "amp": float(a.amp),
            "phase_rad": float(a.phase),
            "tc_samples": p.tc,
            "fc_rad_per_sample": p.omega,
            "c_rad_per_sample2": p.c,
            "dt_samples": p.dt,
            "cc": float(a.cc),
        })
    return {"header": header, "atoms": atoms}


def _require(mapping, key, kind, where):
    if key not in mapping:
        raise CorruptFileError(f"{where}: missing field {key!r}")
    value = mapping[key]
    if kind is float:
        ok = isinstance(value, (int, float)) and not isinstance(value, bool)
        if ok and not math.isfinite(value):
            ok = False
    elif kind is int:
        ok = isinstance(value, int) and not isinstance(value, bool)
    else:
        ok = isinstance(value, kind)
    if not ok:
        raise CorruptFileError(f"{where}: field {key!r} has invalid value {value!r}")
    return value


def decomposition_from_dict(doc) -> Decomposition:
    if not isinstance(doc, dict) or "header" not in doc or "atoms" not in doc:
        raise CorruptFileError("decomposition document needs 'header' and 'atoms'")
    h = doc["header"]
    if not isinstance(h, dict):
        raise CorruptFileError("header must be an object")
    version = h.get("format_version")
    if version != FORMAT_VERSION:
        raise FormatVersionError(
            f"unsupported decomposition format version {version!r} (expected {FORMAT_VERSION})"
        )
    n = _require(h, "n_samples", int, "header")
    radix = _require(h, "radix", int, "header")
    i0 = _require(h, "i0", int, "header")
    n_atoms = _require(h, "n_atoms", int, "header")
    rate = h.get("sample_rate_hz")
    cc_thr = h.get("cc_threshold")
    for key, val in (("sample_rate_hz", rate), ("cc_threshold", cc_thr)):
        if val is not None:
            _require(h, key, float, "header")
    trace = _require(h, "residual_energy_trace", list, "header")
    atoms_doc = doc["atoms"]
    if not isinstance(atoms_doc, list):
        raise CorruptFileError("atoms must be a list")
    if n_atoms != len(atoms_doc):
        raise CorruptFileError(f"header declares {n_atoms} atoms but {len(atoms_doc)} are stored")
    if len(trace) != n_atoms + 1:
        raise CorruptFileError("residual_energy_trace must hold n_atoms + 1 entries")
    for v in trace:
        if not isinstance(v, (int, float)) or isinstance(v, bool):
            raise CorruptFileError("residual_energy_trace entries must be numbers")
    atoms = []
    for i, rec in enumerate(atoms_doc):
        where = f"atom {i}"
        if not isinstance(rec, dict):
            raise CorruptFileError(f"{where} is not an object")
        vals = {k: float(_require(rec, k, float, where)) for k in ATOM_FIELDS + ("cc",)}
        if vals["amp"] < 0:
            raise CorruptFileError(f"{where}: negative amplitude")
        try:
            params = ChirpletParams(vals["tc_samples"], vals["fc_rad_per_sample"],
                                    vals["c_rad_per_sample2"], vals["dt_samples"])
        except ChirpletError as exc:
            raise CorruptFileError(f"{where}: {exc}") from None
        atoms.append(ChirpletAtom(params, vals["amp"], vals["phase_rad"], vals["cc"]))
    try:
        return Decomposition(atoms, n, [float(v) for v in trace], radix=radix, i0=i0,
                             sample_rate_hz=rate, cc_threshold=cc_thr)
    except ChirpletError as exc:
        raise CorruptFileError(str(exc)) from None


def dumps_decomposition(d: Decomposition) -> str:
    """Canonical JSON text: fixed key order, shortest round-trip float repr."""
    return json.dumps(decomposition_to_dict(d), indent=2, allow_nan=False) + "\n"


def save_decomposition(d: Decomposition, path) -> None:
    Path(path).write_text(dumps_decomposition(d))


def load_decomposition(path) -> Decomposition:
    text = Path(path).read_text()
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ParseError(f"invalid JSON: {exc.msg}", len(text[: exc.pos].encode())) from None
    return decomposition_from_dict(doc)
