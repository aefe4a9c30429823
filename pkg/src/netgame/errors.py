"""Exception types, each tied to a CLI exit code."""


class NetgameError(Exception):
    exit_code = 1
    category = "error"


class ConfigError(NetgameError):
    exit_code = 3
    category = "config"


class DataError(NetgameError):
    exit_code = 4
    category = "data"


class OutputError(NetgameError):
    exit_code = 5
    category = "io"


class ConvergenceError(NetgameError):
    exit_code = 6
    category = "convergence"
