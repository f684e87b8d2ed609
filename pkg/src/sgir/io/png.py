import numpy as np
from PIL import Image

from sgir.io.image import ImageBuffer


def srgb_encode(linear):
    linear = np.clip(np.asarray(linear, dtype=np.float64), 0.0, 1.0)
    return np.where(linear <= 0.0031308, 12.92 * linear, 1.055 * np.power(linear, 1.0 / 2.4) - 0.055)


def srgb_decode(encoded):
    encoded = np.asarray(encoded, dtype=np.float64)
    return np.where(encoded <= 0.04045, encoded / 12.92, np.power((encoded + 0.055) / 1.055, 2.4))


def to_srgb_bytes(image):
    return np.rint(255.0 * srgb_encode(image.data)).astype(np.uint8)


def write_png(path, image):
    """8-bit sRGB PNG of an LDR image (values clamped to [0, 1])."""
    Image.fromarray(to_srgb_bytes(image), mode="RGB").save(path)


def read_png(path):
    """Linear-light image from an 8-bit sRGB PNG."""
    with Image.open(path) as img:
        data = np.asarray(img.convert("RGB"), dtype=np.float64) / 255.0
    return ImageBuffer(srgb_decode(data))
