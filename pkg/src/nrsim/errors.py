class NrsimError(Exception):
    pass


class InvariantViolation(NrsimError, ValueError):
    pass


class MalformedMessage(NrsimError, ValueError):
    pass


class PreconditionViolated(NrsimError):
    pass


class NotCamped(NrsimError):
    pass


class NoCellAvailable(NrsimError):
    pass


class ContentionLost(NrsimError):
    pass


class UnknownCell(NrsimError, KeyError):
    pass


class ConfigInvalid(NrsimError):
    """Scenario rejected during parsing or validation.

    ``path`` names the offending field (``cells[1].attack.delta_units``);
    ``line``/``column`` are set for syntax errors.
    """

    def __init__(self, path, message, line=None, column=None):
        self.path = path
        self.message = message
        self.line = line
        self.column = column
        where = path
        if line is not None:
            where = f"{path} (line {line}, column {column or 1})"
        super().__init__(f"{where}: {message}")


class LogFormatError(NrsimError):
    def __init__(self, lineno, message, last_good=None):
        self.lineno = lineno
        self.last_good = last_good
        text = f"line {lineno}: {message}"
        if last_good is not None:
            text += f" (last good line {last_good})"
        super().__init__(text)
