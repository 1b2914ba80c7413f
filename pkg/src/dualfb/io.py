"""PGM images, CSV vectors and matrices, TOML configuration and trace files."""

from __future__ import annotations

import re
import sys
from pathlib import Path

import numpy as np

from .errors import ConfigError, InputError, PGMError

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

__all__ = [
    "read_pgm",
    "write_pgm",
    "read_vector_csv",
    "write_vector_csv",
    "read_matrix_csv",
    "write_matrix_csv",
    "write_trace_csv",
    "read_trace_csv",
    "load_config",
    "TRACE_HEADER",
]

TRACE_HEADER = "n,iterate_change,primal_obj,dual_obj,gap,wall_time_ms"

_NUMBER = re.compile(r"^[+-]?(\d+\.?\d*|\.\d+)([eE][+-]?\d+)?$")


# PGM -----------------------------------------------------------------------


def _header_tokens(data):
    """Yield (token, end offset) for the four header fields, skipping comments."""
    pos, n = 0, len(data)
    tokens = []
    while len(tokens) < 4:
        while pos < n and data[pos : pos + 1].isspace():
            pos += 1
        if pos >= n:
            raise PGMError(f"truncated header: found {len(tokens)} of 4 fields")
        if data[pos : pos + 1] == b"#":
            end = data.find(b"\n", pos)
            pos = n if end < 0 else end + 1
            continue
        start = pos
        while pos < n and not data[pos : pos + 1].isspace() and data[pos : pos + 1] != b"#":
            pos += 1
        tokens.append(data[start:pos])
    return tokens, pos


def read_pgm(path, return_maxval=False):
    """Read a P2 or P5 graymap and scale samples to ``[0, 1]``.

    Parameters
    ----------
    path : str or Path
    return_maxval : bool
        Also return the file's maxval.
    """
    data = Path(path).read_bytes()
    tokens, pos = _header_tokens(data)
    magic = tokens[0]
    if magic not in (b"P2", b"P5"):
        raise PGMError(f"{path}: unsupported magic number {magic!r} (expected P2 or P5)")
    try:
        width, height, maxval = (int(t) for t in tokens[1:])
    except ValueError:
        raise PGMError(f"{path}: malformed header fields {tokens[1:]}") from None
    if width < 1 or height < 1:
        raise PGMError(f"{path}: image dimensions must be positive")
    if not 1 <= maxval <= 65535:
        raise PGMError(f"{path}: maxval {maxval} outside [1, 65535]")
    count = width * height
    if magic == b"P5":
        if pos >= len(data) or not data[pos : pos + 1].isspace():
            raise PGMError(f"{path}: missing separator after header")
        payload = data[pos + 1 :]
        width_bytes = 1 if maxval < 256 else 2
        need = count * width_bytes
        if len(payload) < need:
            raise PGMError(f"{path}: truncated payload ({len(payload)} of {need} bytes)")
        dtype = np.uint8 if width_bytes == 1 else np.dtype(">u2")
        samples = np.frombuffer(payload[:need], dtype=dtype).astype(float)
    else:
        text = re.sub(rb"#[^\n]*", b" ", data[pos:])
        parts = text.split()
        if len(parts) < count:
            raise PGMError(f"{path}: truncated payload ({len(parts)} of {count} samples)")
        try:
            samples = np.array([int(t) for t in parts[:count]], dtype=float)
        except ValueError:
            raise PGMError(f"{path}: non-integer sample in payload") from None
    if np.any(samples > maxval):
        raise PGMError(f"{path}: sample exceeds maxval {maxval}")
    img = samples.reshape(height, width) / maxval
    return (img, maxval) if return_maxval else img


def write_pgm(path, img, maxval=255, binary=True):
    """Clamp to ``[0, 1]``, quantize by rounding and write P5 (or P2)."""
    if maxval not in (255, 65535):
        raise InputError("maxval must be 255 or 65535")
    img = np.asarray(img, dtype=float)
    if img.ndim != 2:
        raise InputError("image must be two-dimensional")
    if not np.all(np.isfinite(img)):
        raise InputError("image contains non-finite pixels")
    q = np.rint(np.clip(img, 0.0, 1.0) * maxval).astype(np.int64)
    h, w = img.shape
    if binary:
        header = f"P5\n{w} {h}\n{maxval}\n".encode()
        body = q.astype(np.uint8 if maxval == 255 else ">u2").tobytes()
        Path(path).write_bytes(header + body)
    else:
        lines = [f"P2\n{w} {h}\n{maxval}"] + [" ".join(str(v) for v in row) for row in q]
        Path(path).write_text("\n".join(lines) + "\n")


# CSV -----------------------------------------------------------------------


def _parse_rows(path):
    try:
        text = Path(path).read_text(encoding="utf-8")
    except UnicodeDecodeError as exc:
        raise InputError(f"{path}: not valid UTF-8 ({exc})") from None
    rows = []
    for lineno, line in enumerate(text.splitlines(), start=1):
        if not line.strip():
            continue
        row = []
        for tok in line.split(","):
            tok = tok.strip()
            if not _NUMBER.match(tok):
                raise InputError(f"{path}:{lineno}: cannot parse {tok!r} as a real number")
            row.append(float(tok))
        rows.append((lineno, row))
    if not rows:
        raise InputError(f"{path}:1: no numbers found")
    return rows


def read_vector_csv(path):
    """One real per line, or one comma-separated line."""
    rows = _parse_rows(path)
    if len(rows) > 1 and any(len(r) != 1 for _, r in rows):
        bad = next(ln for ln, r in rows if len(r) != 1)
        raise InputError(f"{path}:{bad}: expected one value per line")
    return np.array([v for _, r in rows for v in r])


def write_vector_csv(path, v):
    v = np.ravel(np.asarray(v, dtype=float))
    Path(path).write_text("".join(f"{x:.17g}\n" for x in v))


def read_matrix_csv(path):
    rows = _parse_rows(path)
    width = len(rows[0][1])
    for ln, r in rows:
        if len(r) != width:
            raise InputError(f"{path}:{ln}: expected {width} columns, found {len(r)}")
    return np.array([r for _, r in rows])


def write_matrix_csv(path, A):
    A = np.atleast_2d(np.asarray(A, dtype=float))
    Path(path).write_text("".join(",".join(f"{x:.17g}" for x in row) + "\n" for row in A))


def _fmt(x):
    return "" if x is None else f"{x:.17g}"


def write_trace_csv(path, trace):
    """Trace rows with header ``n,iterate_change,primal_obj,dual_obj,gap,wall_time_ms``."""
    lines = [TRACE_HEADER]
    for row in trace:
        lines.append(
            ",".join(
                [str(row.n), _fmt(row.iterate_change), _fmt(row.primal_obj), _fmt(row.dual_obj), _fmt(row.gap),
                 f"{row.wall_time_ms:.3f}"]
            )
        )
    Path(path).write_text("\n".join(lines) + "\n")


def read_trace_csv(path):
    """Parse a trace file into a list of dicts (missing values become ``None``)."""
    lines = Path(path).read_text().splitlines()
    if not lines or lines[0] != TRACE_HEADER:
        raise InputError(f"{path}:1: trace header must be {TRACE_HEADER!r}")
    keys = TRACE_HEADER.split(",")
    out = []
    for ln, line in enumerate(lines[1:], start=2):
        vals = line.split(",")
        if len(vals) != len(keys):
            raise InputError(f"{path}:{ln}: expected {len(keys)} fields")
        rec = {}
        for k, s in zip(keys, vals):
            rec[k] = None if s == "" else (int(s) if k == "n" else float(s))
        out.append(rec)
    return out


# configuration ---------------------------------------------------------------


def load_config(path, schema=None):
    """Read a TOML document and check it against ``schema``.

    ``schema`` maps section names to the set of allowed keys; top-level
    scalars are not allowed. Unknown sections or keys raise ConfigError.
    """
    try:
        with open(path, "rb") as fh:
            doc = tomllib.load(fh)
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError(f"{path}: {exc}") from None
    if schema is not None:
        for section, body in doc.items():
            if section not in schema:
                raise ConfigError(f"{path}: unknown section [{section}]")
            if not isinstance(body, dict):
                raise ConfigError(f"{path}: '{section}' must be a table")
            for key in body:
                if key not in schema[section]:
                    raise ConfigError(f"{path}: unknown key '{key}' in [{section}]")
    return doc
