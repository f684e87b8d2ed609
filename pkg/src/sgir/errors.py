"""Exceptions signalled by sgir operations."""


class SgirError(Exception):
    """Base class for every condition sgir signals."""

    def __init__(self, message):
        self.message = message
        super().__init__(message)


class DegenerateProduct(SgirError):
    """Raised when two lobes cancel (lambda1*xi1 = -lambda2*xi2).

    ``mask`` marks the degenerate entries of a batched product.
    """

    def __init__(self, message, mask=None):
        self.mask = mask
        super().__init__(message)


class GrazingView(SgirError):
    """Raised when the view direction is (nearly) tangent to the surface."""
    pass


class OutOfGamut(SgirError):
    """Raised when a tone-mapped value lies outside the invertible range."""
    pass


class DegenerateNormal(SgirError):
    """Raised when the SDF gradient vanishes."""
    pass


class NonFiniteGradient(SgirError):
    """Raised when an optimizer step sees a NaN or infinite gradient component."""
    pass


class ParseError(SgirError):
    """Raised on malformed binary or text input; ``offset`` is the byte position."""

    def __init__(self, message, offset):
        self.offset = offset
        super().__init__(f"{message} (at byte {offset})")


class ValidationError(SgirError):
    """Raised on invalid configuration or arguments."""
    pass


class DimensionMismatch(ValidationError):
    """Raised when two images or arrays that must agree in shape do not."""
    pass
