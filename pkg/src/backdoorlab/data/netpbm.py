"""Binary PGM (P5) and PPM (P6) codec, 8-bit only."""
import numpy as np

from ..errors import BadMagicError, DimensionMismatchError, FormatError, TruncatedError

_WHITESPACE = b" \t\n\r\x0b\x0c"


def _read_token(data, pos):
    # Header tokens are separated by whitespace; '#' starts a comment to end of line.
    n = len(data)
    while pos < n:
        c = data[pos:pos + 1]
        if c == b"#":
            while pos < n and data[pos:pos + 1] not in (b"\n", b"\r"):
                pos += 1
        elif c in _WHITESPACE:
            pos += 1
        else:
            break
    start = pos
    while pos < n and data[pos:pos + 1] not in _WHITESPACE and data[pos:pos + 1] != b"#":
        pos += 1
    if start == pos:
        raise TruncatedError("Netpbm header ends early", offset=pos)
    return data[start:pos], pos


def parse_netpbm(data):
    """Decode P5/P6 bytes to a uint8 array of shape (H, W, C) with C in {1, 3}."""
    data = bytes(data)
    magic = data[:2]
    if magic not in (b"P5", b"P6"):
        raise BadMagicError(f"unsupported Netpbm magic {magic!r}", offset=0)
    channels = 1 if magic == b"P5" else 3
    pos = 2
    values = []
    for _ in range(3):
        token, pos = _read_token(data, pos)
        if not token.isdigit():
            raise FormatError(f"non-numeric Netpbm header field {token!r}", offset=pos - len(token))
        values.append(int(token))
    width, height, maxval = values
    if width < 1 or height < 1:
        raise DimensionMismatchError(f"image size {width}x{height} is empty", offset=pos)
    if not 0 < maxval < 256:
        raise FormatError(f"maxval {maxval} unsupported (8-bit only)", offset=pos)
    if pos >= len(data) or data[pos:pos + 1] not in _WHITESPACE:
        raise FormatError("missing whitespace before raster", offset=pos)
    pos += 1
    expected = width * height * channels
    if len(data) - pos < expected:
        raise TruncatedError(f"raster needs {expected} bytes, {len(data) - pos} present",
                             offset=len(data))
    if len(data) - pos > expected:
        raise DimensionMismatchError(
            f"{len(data) - pos - expected} bytes beyond the {width}x{height} raster",
            offset=pos + expected,
        )
    pixels = np.frombuffer(data, dtype=np.uint8, count=expected, offset=pos)
    return pixels.reshape(height, width, channels).copy()


def dump_netpbm(image):
    image = np.asarray(image, dtype=np.uint8)
    if image.ndim == 2:
        image = image[:, :, None]
    h, w, c = image.shape
    if c not in (1, 3):
        raise ValueError(f"Netpbm needs 1 or 3 channels, got {c}")
    magic = b"P5" if c == 1 else b"P6"
    return magic + f"\n{w} {h}\n255\n".encode() + np.ascontiguousarray(image).tobytes()


def read_netpbm(path):
    with open(path, "rb") as f:
        return parse_netpbm(f.read())


def write_netpbm(path, image):
    with open(path, "wb") as f:
        f.write(dump_netpbm(image))
