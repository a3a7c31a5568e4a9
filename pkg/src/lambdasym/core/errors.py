from typing import Optional


class LambdaSymError(ValueError):
    """Base class of every error raised by lambdasym."""


class ParseError(LambdaSymError):
    def __init__(self, message: str, line: int = 1, column: int = 1, text: Optional[str] = None):
        self.message = message
        self.line = line
        self.column = column
        self.text = text
        super().__init__(f"{line}:{column}: {message}")


class UnknownSymbolError(ParseError):
    pass


class UnboundSymbolError(LambdaSymError):
    def __init__(self, name: str):
        self.name = name
        super().__init__(f"Unbound symbol {name}")


class DomainError(LambdaSymError):
    def __init__(self, message: str, subexpression: str):
        self.subexpression = subexpression
        super().__init__(f"{message} in {subexpression}")


class StencilError(LambdaSymError):
    pass


class UnsupportedSchemeError(LambdaSymError):
    pass


class SamplingError(LambdaSymError):
    pass


class AnsatzError(LambdaSymError):
    pass


class InvariantError(LambdaSymError):
    pass


class NotReducibleError(LambdaSymError):
    pass


class ConvergenceError(LambdaSymError):
    pass
