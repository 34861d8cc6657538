"""Image file formats: PGM (P2/P5), CSV, and a small raw 3D cube format.

PGM follows the Netpbm conventions: '#' comments in the header, arbitrary
whitespace between header tokens, plain (P2) rasters limited to 70-character
lines, and 2-byte big-endian samples in binary (P5) rasters when maxval
exceeds 255.

RAW3D is the cube container used for spectral data:

    bytes 0..7   magic "NLPCA3D\\0"
    bytes 8..19  three little-endian uint32 dims (height, width, bands)
    byte  20     dtype tag: 0 = uint16, 1 = float64
    byte  21..   row-major sample data

Both writers emit a canonical byte layout, so write(read(path)) == path
bit-exactly for files produced here, and read(write(x)) == x for arrays.
"""

import csv
import struct

import numpy as np

MAGIC = b"NLPCA3D\x00"
MAX_PIXELS = 2 ** 32  # dimension-overflow guard for all formats

__all__ = ["ImageFormatError", "read_image", "write_image"]


class ImageFormatError(ValueError):
    """Malformed image file; carries the byte offset of the problem."""

    def __init__(self, message, path=None, offset=None):
        loc = f"{path or '<data>'}"
        if offset is not None:
            loc += f" at byte offset {offset}"
        super().__init__(f"{loc}: {message}")
        self.path = path
        self.offset = offset


def _sniff_format(path, data):
    if data[:2] in (b"P2", b"P5"):
        return "pgm"
    if data[:8] == MAGIC:
        return "raw3d"
    if str(path).lower().endswith(".csv"):
        return "csv"
    raise ImageFormatError("unrecognized format", path, 0)


def read_image(path, format=None):
    """Read an image; format in {'pgm', 'pgm-ascii', 'pgm-binary', 'csv',
    'raw3d'} or None to sniff from magic bytes / extension."""
    with open(path, "rb") as fh:
        data = fh.read()
    fmt = format or _sniff_format(path, data)
    if fmt.startswith("pgm"):
        return _read_pgm(data, path)
    if fmt == "csv":
        return _read_csv(path)
    if fmt == "raw3d":
        return _read_raw3d(data, path)
    raise ValueError(f"unknown format {fmt!r}")


def write_image(image, path, format=None):
    """Write an image; format defaults from the file extension
    (.pgm -> binary PGM, .csv -> CSV, .raw3d -> RAW3D)."""
    image = np.asarray(image)
    if format is None:
        name = str(path).lower()
        if name.endswith(".pgm"):
            format = "pgm-binary"
        elif name.endswith(".csv"):
            format = "csv"
        elif name.endswith(".raw3d"):
            format = "raw3d"
        else:
            raise ValueError(f"cannot infer format for {path!r}")
    if format == "pgm":
        format = "pgm-binary"
    if format == "pgm-ascii":
        _write_pgm(image, path, binary=False)
    elif format == "pgm-binary":
        _write_pgm(image, path, binary=True)
    elif format == "csv":
        _write_csv(image, path)
    elif format == "raw3d":
        _write_raw3d(image, path)
    else:
        raise ValueError(f"unknown format {format!r}")


# ---------------------------------------------------------------- PGM

class _Tokens:
    """Whitespace/comment-aware tokenizer tracking byte offsets."""

    def __init__(self, data, path):
        self.data = data
        self.pos = 0
        self.path = path

    def skip_separators(self):
        d = self.data
        while self.pos < len(d):
            c = d[self.pos:self.pos + 1]
            if c.isspace():
                self.pos += 1
            elif c == b"#":
                nl = d.find(b"\n", self.pos)
                self.pos = len(d) if nl < 0 else nl + 1
            else:
                return

    def next_int(self, what):
        self.skip_separators()
        start = self.pos
        d = self.data
        while self.pos < len(d) and d[self.pos:self.pos + 1].isdigit():
            self.pos += 1
        if self.pos == start:
            raise ImageFormatError(f"expected {what}", self.path, start)
        return int(d[start:self.pos])


def _read_pgm(data, path):
    if data[:2] not in (b"P2", b"P5"):
        raise ImageFormatError("not a PGM file (expected P2 or P5)", path, 0)
    binary = data[:2] == b"P5"
    toks = _Tokens(data, path)
    toks.pos = 2
    width = toks.next_int("width")
    height = toks.next_int("height")
    maxval = toks.next_int("maxval")
    if width <= 0 or height <= 0:
        raise ImageFormatError("nonpositive dimensions", path, 2)
    if width * height > MAX_PIXELS:
        raise ImageFormatError("dimension overflow", path, 2)
    if not 0 < maxval < 65536:
        raise ImageFormatError(f"maxval {maxval} out of range", path, toks.pos)
    if binary:
        # exactly one whitespace byte separates maxval from the raster
        if toks.pos >= len(data) or not data[toks.pos:toks.pos + 1].isspace():
            raise ImageFormatError("missing raster separator", path, toks.pos)
        start = toks.pos + 1
        dtype = np.dtype(">u2") if maxval > 255 else np.dtype("u1")
        need = width * height * dtype.itemsize
        if len(data) - start < need:
            raise ImageFormatError(
                f"raster truncated: need {need} bytes, have {len(data) - start}",
                path, start)
        arr = np.frombuffer(data[start:start + need], dtype=dtype)
        arr = arr.astype(np.int64).reshape(height, width)
    else:
        vals = np.empty(width * height, dtype=np.int64)
        for i in range(width * height):
            vals[i] = toks.next_int(f"pixel {i}")
        arr = vals.reshape(height, width)
    if arr.max(initial=0) > maxval:
        raise ImageFormatError("sample exceeds maxval", path, toks.pos)
    return arr


def _pgm_header(image, path):
    if image.ndim != 2:
        raise ValueError("PGM stores 2D images only")
    if not np.issubdtype(image.dtype, np.integer):
        if np.any(image != np.floor(image)):
            raise ValueError("PGM stores integers; round or rescale first")
        image = image.astype(np.int64)
    if image.min(initial=0) < 0:
        raise ValueError("PGM cannot store negative values")
    top = int(image.max(initial=0))
    if top > 65535:
        raise ValueError(f"value {top} exceeds the 16-bit PGM range")
    maxval = 255 if top <= 255 else 65535
    return image, maxval


def _write_pgm(image, path, binary):
    image, maxval = _pgm_header(np.asarray(image), path)
    h, w = image.shape
    header = f"{'P5' if binary else 'P2'}\n{w} {h}\n{maxval}\n"
    with open(path, "wb") as fh:
        fh.write(header.encode("ascii"))
        if binary:
            dtype = np.dtype(">u2") if maxval > 255 else np.dtype("u1")
            fh.write(image.astype(dtype).tobytes())
        else:
            line = ""
            for v in image.ravel():
                tok = str(int(v))
                if line and len(line) + 1 + len(tok) > 70:
                    fh.write((line + "\n").encode("ascii"))
                    line = tok
                else:
                    line = tok if not line else line + " " + tok
            if line:
                fh.write((line + "\n").encode("ascii"))


# ---------------------------------------------------------------- CSV

def _read_csv(path):
    rows = []
    integral = True
    with open(path, newline="") as fh:
        for row in csv.reader(fh):
            if not row:
                continue
            for tok in row:
                tok = tok.strip()
                if integral and not tok.lstrip("+-").isdigit():
                    integral = False
            rows.append([float(t) for t in row])
    if not rows:
        raise ImageFormatError("empty CSV", path, 0)
    widths = {len(r) for r in rows}
    if len(widths) != 1:
        raise ImageFormatError("ragged CSV rows", path, 0)
    arr = np.array(rows, dtype=np.float64)
    return arr.astype(np.int64) if integral else arr


def _write_csv(image, path):
    image = np.asarray(image)
    if image.ndim != 2:
        raise ValueError("CSV stores 2D images only")
    as_int = np.issubdtype(image.dtype, np.integer)
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        for row in image:
            if as_int:
                writer.writerow([int(v) for v in row])
            else:
                # %.17g round-trips float64 exactly
                writer.writerow([format(float(v), ".17g") for v in row])


# ---------------------------------------------------------------- RAW3D

def _read_raw3d(data, path):
    if data[:8] != MAGIC:
        raise ImageFormatError("bad magic (expected NLPCA3D)", path, 0)
    if len(data) < 21:
        raise ImageFormatError("header truncated", path, len(data))
    dims = struct.unpack_from("<III", data, 8)
    tag = data[20]
    if any(d == 0 for d in dims):
        raise ImageFormatError(f"zero dimension in {dims}", path, 8)
    if dims[0] * dims[1] * dims[2] > MAX_PIXELS:
        raise ImageFormatError("dimension overflow", path, 8)
    if tag == 0:
        dtype = np.dtype("<u2")
    elif tag == 1:
        dtype = np.dtype("<f8")
    else:
        raise ImageFormatError(f"unknown dtype tag {tag}", path, 20)
    need = dims[0] * dims[1] * dims[2] * dtype.itemsize
    have = len(data) - 21
    if have < need:
        raise ImageFormatError(
            f"data truncated: need {need} bytes, have {have}", path, 21 + have)
    arr = np.frombuffer(data[21:21 + need], dtype=dtype).reshape(dims)
    return arr.astype(np.int64) if tag == 0 else arr.astype(np.float64)


def _write_raw3d(image, path):
    image = np.asarray(image)
    if image.ndim != 3:
        raise ValueError("RAW3D stores 3D cubes only")
    if any(d >= 2 ** 32 for d in image.shape):
        raise ValueError("dimension overflow: dims must fit in uint32")
    if np.issubdtype(image.dtype, np.integer):
        if image.min(initial=0) < 0 or image.max(initial=0) > 65535:
            raise ValueError("integer data out of uint16 range; use floats")
        tag, dtype = 0, np.dtype("<u2")
    else:
        tag, dtype = 1, np.dtype("<f8")
    with open(path, "wb") as fh:
        fh.write(MAGIC)
        fh.write(struct.pack("<III", *image.shape))
        fh.write(bytes([tag]))
        fh.write(np.ascontiguousarray(image, dtype=dtype).tobytes())
