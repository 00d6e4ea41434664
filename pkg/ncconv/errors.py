from typing import Dict, Optional


class NcConvError(Exception):
    pass


class DimensionError(NcConvError):
    pass


class GeometryError(NcConvError):
    pass


class ShapeError(NcConvError):
    def __init__(self, message: str, layer_index: Optional[int] = None):
        if layer_index is not None:
            message = f"layer {layer_index}: {message}"
        super().__init__(message)
        self.layer_index = layer_index


class StateError(NcConvError):
    pass


class ConfigError(NcConvError):
    pass


class DataFormatError(NcConvError):
    pass


class CheckpointError(NcConvError):
    pass


class LabelError(NcConvError):
    pass


class NonFiniteLossError(NcConvError):
    def __init__(self, message: str, grad_norms: Dict[str, float]):
        lines = [message] + [f"  {name}: {norm:.6g}" for name, norm in grad_norms.items()]
        super().__init__("\n".join(lines))
        self.grad_norms = grad_norms
