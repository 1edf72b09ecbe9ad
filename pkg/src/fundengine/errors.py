"""Engine error hierarchy."""


class EngineError(Exception):
    """Base class for all engine failures."""


class FixedPointOverflow(EngineError):
    """A fixed-point result exceeded the representable range."""


class DivisionByZero(EngineError):
    """Division by a zero fixed-point value."""


class IntegrityError(EngineError):
    """A ledger invariant was violated (negative balance, tracker drift, ...)."""


class DegenerateInput(EngineError):
    """An operation received inputs outside its defined domain."""


class SchemaError(EngineError):
    """A scenario or snapshot file failed validation."""

    def __init__(self, messages):
        if isinstance(messages, str):
            messages = [messages]
        self.messages = list(messages)
        super().__init__("; ".join(self.messages))
