"""Exception hierarchy shared across the package."""


class SeqBindError(Exception):
    """Base class for all errors raised by seqbind."""


class DataError(SeqBindError):
    """Malformed or unusable input data."""


class ShapeMismatch(SeqBindError):
    """Incompatible array shapes fed to a compute primitive."""

    def __init__(self, op, *shapes):
        self.op = op
        self.shapes = shapes
        super().__init__(f"{op}: incompatible shapes {' vs '.join(str(s) for s in shapes)}")


class ConfigError(SeqBindError):
    """Invalid architecture spec, hyperparameter setting, or CLI usage."""


class TrainingDiverged(SeqBindError):
    """Loss or parameters became non-finite during training."""
