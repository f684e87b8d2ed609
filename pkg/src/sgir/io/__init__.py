"""
Images (PFM, PNG) and SGIRF1 checkpoints.
"""

from sgir.io.image import ImageBuffer
from sgir.io.pfm import parse_pfm, encode_pfm, read_pfm, write_pfm
from sgir.io.png import srgb_encode, srgb_decode, to_srgb_bytes, read_png, write_png
from sgir.io.checkpoint import encode_checkpoint, decode_checkpoint, save_checkpoint, load_checkpoint

__all__ = [
    'ImageBuffer',
    'parse_pfm', 'encode_pfm', 'read_pfm', 'write_pfm',
    'srgb_encode', 'srgb_decode', 'to_srgb_bytes', 'read_png', 'write_png',
    'encode_checkpoint', 'decode_checkpoint', 'save_checkpoint', 'load_checkpoint'
]
