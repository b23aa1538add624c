class CarlDtnError(Exception):
    pass


class DegenerateSet(CarlDtnError):
    """A fuzzy output set with no mass; means a rule base does not cover its inputs."""


class InvalidScenario(CarlDtnError):
    pass


class ParseError(InvalidScenario):
    def __init__(self, message: str, line: int):
        super().__init__(f"line {line}: {message}")
        self.line = line


class ValidationError(InvalidScenario):
    def __init__(self, key: str, message: str):
        super().__init__(f"{key}: {message}")
        self.key = key


class UnknownPeer(CarlDtnError):
    pass


class TransferAborted(CarlDtnError):
    pass


class AdmissionRefused(CarlDtnError):
    pass
