"""Spectrogram images as binary PGM (P5) files."""

import numpy as np

from emostyle import dsp


def spectrogram_image(spec, floor_db=dsp.FLOOR_DB):
    """8-bit image of a dB mel spectrogram, low mel bins at the bottom row."""
    data = spec.data if isinstance(spec, dsp.MelSpectrogram) else np.asarray(spec)
    scaled = (np.clip(data, floor_db, 0.0) - floor_db) / -floor_db * 255.0
    return np.round(scaled).astype(np.uint8)[::-1]


def write_pgm(path, image):
    image = np.asarray(image, dtype=np.uint8)
    height, width = image.shape
    with open(path, "wb") as fh:
        fh.write(f"P5\n{width} {height}\n255\n".encode("ascii"))
        fh.write(image.tobytes())


def read_pgm(path):
    with open(path, "rb") as fh:
        raw = fh.read()
    tokens, pos = [], 0
    while len(tokens) < 4:
        while raw[pos : pos + 1].isspace():
            pos += 1
        if raw[pos : pos + 1] == b"#":
            pos = raw.index(b"\n", pos) + 1
            continue
        end = pos
        while not raw[end : end + 1].isspace():
            end += 1
        tokens.append(raw[pos:end])
        pos = end
    if tokens[0] != b"P5":
        raise ValueError(f"{path}: not a binary PGM")
    width, height, maxval = (int(t) for t in tokens[1:])
    if maxval != 255:
        raise ValueError(f"{path}: only 8-bit PGM is supported")
    data = np.frombuffer(raw[pos + 1 : pos + 1 + width * height], dtype=np.uint8)
    return data.reshape(height, width)


def save_spectrogram(path, spec):
    write_pgm(path, spectrogram_image(spec))
