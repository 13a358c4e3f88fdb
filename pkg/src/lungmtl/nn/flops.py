"""Multiply-accumulate accounting for a layer stack."""

from ..errors import UnresolvedShapeError


def _check_resolved(shape):
    if not shape or any(not isinstance(d, int) or d < 1 for d in shape):
        raise UnresolvedShapeError(f"unresolved input shape {shape}")


def resolve_shapes(layers, input_shape):
    """Per-layer output shapes for one unbatched input."""
    shape = tuple(input_shape)
    _check_resolved(shape)
    shapes = []
    for layer in layers:
        shape = layer.out_shape(shape)
        shapes.append(shape)
    return shapes


def flop_count(layers, input_shape) -> int:
    """Exact MAC count of one forward pass over the stack.

    Convolutions count kernel-area x channel products per output cell,
    dense layers count their matrix product; normalization, activations,
    pooling, and softmax count zero.
    """
    shape = tuple(input_shape)
    _check_resolved(shape)
    total = 0
    for layer in layers:
        total += layer.macs(shape)
        shape = layer.out_shape(shape)
    return int(total)
