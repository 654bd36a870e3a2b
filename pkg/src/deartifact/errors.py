"""Exception types shared across the package."""


class ShapeMismatchError(ValueError):
    """Operands have incompatible channel counts or spatial dimensions."""


class ConfigurationError(ValueError):
    """A config value is out of range or inconsistent with the data."""


class TruncationError(ValueError):
    """A byte stream ended before the expected structure was complete."""


class UnsupportedNetworkError(ValueError):
    """A container carries a network id this build does not know."""

    def __init__(self, network_id):
        self.network_id = network_id
        super().__init__(f"unsupported network id byte 0x{network_id:02X}")


class InfeasibleError(ValueError):
    """No allocation fits the size budget; carries the minimum achievable size."""

    def __init__(self, min_total_size, limit):
        self.min_total_size = min_total_size
        self.limit = limit
        super().__init__(
            f"infeasible: minimum achievable total size {min_total_size} "
            f"exceeds limit {limit}"
        )


class CapExceededError(ValueError):
    """Brute-force enumeration would exceed the configured assignment cap."""


class CodecError(RuntimeError):
    """The base codec failed; message carries the codec's diagnostic."""
