"""Exception hierarchy shared by all modules.

Every error carries a short machine-readable ``kind`` so the CLI can print
``error: <kind>: <message>`` lines that scripts can parse.
"""


class RisIsacError(Exception):
    kind = "Error"


class NonHermitian(RisIsacError, ValueError):
    kind = "NonHermitian"


class NonFinite(RisIsacError, ValueError):
    kind = "NonFinite"


class NotPSD(RisIsacError, ValueError):
    kind = "NotPSD"


class RankDeficient(RisIsacError, ValueError):
    kind = "RankDeficient"


class DimensionMismatch(RisIsacError, ValueError):
    kind = "DimensionMismatch"


class NoSignChange(RisIsacError, ValueError):
    kind = "NoSignChange"


class MaxIterations(RisIsacError, RuntimeError):
    kind = "MaxIterations"


class SingularInnerBlock(RisIsacError, ValueError):
    kind = "SingularInnerBlock"


class ZeroClutter(RisIsacError, ValueError):
    kind = "ZeroClutter"


class InsufficientTrials(RisIsacError, ValueError):
    kind = "InsufficientTrials"


class Infeasible(RisIsacError, ValueError):
    kind = "Infeasible"


class ConfigError(RisIsacError, ValueError):
    kind = "ConfigError"
