"""File formats: binary PGM images, plain-text LP instances, CSV traces."""

import io as _io
import math

import numpy as np

from .problems.lp import LPInstance

__all__ = ["write_pgm", "read_pgm", "write_lp", "read_lp", "parse_lp", "format_lp",
           "trace_to_csv", "write_trace_csv", "write_vector", "read_vector"]

TRACE_HEADER = "iter,tau,sigma,p,d,b,backtracked,objective"


def write_pgm(path, image):
    """Write a 2-D array as binary PGM (P5, maxval 255), clipping and rounding."""
    img = np.clip(np.rint(np.asarray(image, dtype=float)), 0, 255).astype(np.uint8)
    rows, cols = img.shape
    with open(path, "wb") as fh:
        fh.write(f"P5\n{cols} {rows}\n255\n".encode("ascii"))
        fh.write(img.tobytes())


def _pgm_tokens(data, count):
    tokens, pos = [], 0
    while len(tokens) < count:
        while data[pos:pos + 1].isspace():
            pos += 1
        if data[pos:pos + 1] == b"#":
            while data[pos:pos + 1] not in (b"\n", b""):
                pos += 1
            continue
        start = pos
        while pos < len(data) and not data[pos:pos + 1].isspace():
            pos += 1
        tokens.append(data[start:pos])
    return tokens, pos + 1  # exactly one whitespace byte precedes the raster


def read_pgm(path):
    """Read a binary PGM (P5) with maxval <= 255 into a float array."""
    with open(path, "rb") as fh:
        data = fh.read()
    (magic, w, h, maxval), pos = _pgm_tokens(data, 4)
    if magic != b"P5":
        raise ValueError(f"{path}: not a binary PGM (magic {magic!r})")
    w, h, maxval = int(w), int(h), int(maxval)
    if maxval > 255:
        raise ValueError(f"{path}: only 8-bit PGM is supported")
    raster = np.frombuffer(data, dtype=np.uint8, count=w * h, offset=pos)
    return raster.reshape(h, w).astype(float)


def format_lp(instance):
    """``m n`` / ``c`` / one ``a_i1 ... a_in b_i`` line per constraint."""
    out = [f"{instance.m} {instance.n}", " ".join(repr(float(v)) for v in instance.c)]
    for row, bi in zip(instance.A, instance.b):
        out.append(" ".join(repr(float(v)) for v in row) + " " + repr(float(bi)))
    return "\n".join(out) + "\n"


def parse_lp(text):
    lines = [ln.split("#", 1)[0].strip() for ln in text.splitlines()]
    lines = [ln for ln in lines if ln]
    if not lines:
        raise ValueError("empty LP file")
    try:
        m, n = (int(v) for v in lines[0].split())
    except ValueError:
        raise ValueError("first LP line must be 'm n'") from None
    if len(lines) != m + 2:
        raise ValueError(f"expected {m + 2} non-empty lines, found {len(lines)}")
    c = np.array(lines[1].split(), dtype=float)
    rows = np.array([ln.split() for ln in lines[2:]], dtype=float).reshape(m, -1)
    if c.size != n or rows.shape[1] != n + 1:
        raise ValueError("LP row lengths do not match 'm n' header")
    return LPInstance(c, rows[:, :n], rows[:, n])


def write_lp(path, instance):
    with open(path, "w", newline="\n") as fh:
        fh.write(format_lp(instance))


def read_lp(path):
    with open(path) as fh:
        return parse_lp(fh.read())


def _fmt(v):
    if v is None or (isinstance(v, float) and math.isnan(v)):
        return ""
    return repr(float(v))


def trace_to_csv(trace):
    """CSV text of every trace record (LF endings, '.' decimal, shortest round-trip floats)."""
    buf = _io.StringIO()
    buf.write(TRACE_HEADER + "\n")
    for r in trace.records:
        buf.write(",".join([str(r.k), _fmt(r.tau), _fmt(r.sigma), _fmt(r.p), _fmt(r.d),
                            _fmt(r.b), "1" if r.backtracked else "0", _fmt(r.objective)]))
        buf.write("\n")
    return buf.getvalue()


def write_trace_csv(path, trace):
    with open(path, "w", newline="\n") as fh:
        fh.write(trace_to_csv(trace))


def write_vector(path, v):
    """One value per line; complex values as ``re im``."""
    v = np.asarray(v)
    with open(path, "w", newline="\n") as fh:
        for val in v:
            if np.iscomplexobj(v):
                fh.write(f"{float(val.real)!r} {float(val.imag)!r}\n")
            else:
                fh.write(f"{float(val)!r}\n")


def read_vector(path):
    with open(path) as fh:
        rows = [ln.split() for ln in fh if ln.strip()]
    if rows and len(rows[0]) == 2:
        arr = np.array(rows, dtype=float)
        return arr[:, 0] + 1j * arr[:, 1]
    return np.array([r[0] for r in rows], dtype=float)
