"""Exception taxonomy. Every error carries a stable machine-readable code."""


class SenseflowError(Exception):
    code = "internal-error"

    def __init__(self, message: str = ""):
        super().__init__(message)
        self.message = message


# --- acquisition ---

class MalformedSdd(SenseflowError):
    code = "malformed-sdd"


class InvalidSdd(SenseflowError):
    code = "invalid-sdd"


class UnsupportedDriver(SenseflowError):
    code = "unsupported-driver"


class WrapperUnavailable(SenseflowError):
    code = "wrapper-unavailable"


class SensorFault(SenseflowError):
    code = "sensor-fault"


# --- registry ---

class DuplicateSensorId(SenseflowError):
    code = "duplicate-sensor-id"


class UnknownProvider(SenseflowError):
    code = "unknown-provider"


# --- knowledge ---

class MalformedDomain(SenseflowError):
    code = "malformed-domain"


class CyclicDependency(SenseflowError):
    code = "cyclic-dependency"

    def __init__(self, cycle, message: str = ""):
        self.cycle = list(cycle)
        super().__init__(message or "dependency cycle: " + " -> ".join(self.cycle))


class UnknownAttribute(SenseflowError):
    code = "unknown-attribute"

    def __init__(self, attribute: str, message: str = ""):
        self.attribute = attribute
        super().__init__(message or f"unknown attribute: {attribute}")


# --- fusion ---

class DuplicateOperatorId(SenseflowError):
    code = "duplicate-operator-id"


class SignatureMismatch(SenseflowError):
    code = "signature-mismatch"


class NoOperatorFound(SenseflowError):
    code = "no-operator-found"


class ArityMismatch(SenseflowError):
    code = "arity-mismatch"


class KindMismatch(SenseflowError):
    code = "kind-mismatch"


# --- reasoning ---

class UnsatisfiableAttribute(SenseflowError):
    code = "unsatisfiable-attribute"

    def __init__(self, attribute: str, message: str = ""):
        self.attribute = attribute
        super().__init__(message or f"unsatisfiable attribute: {attribute}")


# --- dissemination ---

class SchemaViolation(SenseflowError):
    code = "schema-violation"


class UnsupportedFormat(SenseflowError):
    code = "unsupported-format"


class InvalidInterval(SenseflowError):
    code = "invalid-interval"


class SinkUnavailable(SenseflowError):
    code = "sink-unavailable"


# --- service ---

class ConfigError(SenseflowError):
    code = "config-error"


class StateError(SenseflowError):
    """Operation attempted in an illegal lifecycle state (e.g. tick after stop)."""
    code = "state-error"
