class RadarAplancError(Exception):
    pass


class ConfigError(RadarAplancError, ValueError):
    """Invalid configuration; ``field`` names the offending key when known."""

    def __init__(self, message: str, field: str | None = None):
        super().__init__(message)
        self.field = field


class ArgumentError(RadarAplancError, ValueError):
    pass


class DataError(RadarAplancError, ValueError):
    pass


class FormatError(RadarAplancError):
    """Malformed on-disk container. ``offset`` is the byte offset (or line number for text)."""

    def __init__(self, message: str, offset: int | None = None):
        if offset is not None:
            message = f"{message} (at offset {offset})"
        super().__init__(message)
        self.offset = offset


class TrainingError(RadarAplancError):
    pass
