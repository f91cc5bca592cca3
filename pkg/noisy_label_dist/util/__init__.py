import logging
import numpy as np
from colorama import Fore, Style

log = logging.getLogger("noisy_label_dist")

class NlyError(Exception):
    pass

class ConfigError(NlyError):
    """
    Invalid configuration, arguments or domain values.
    """

class FormatError(NlyError):
    """
    An nly/1 document could not be parsed.
    """

class NumericalError(NlyError):
    """
    A computation produced a value that cannot be continued from.
    """

class RankDeficiencyError(NumericalError):
    pass

def warn(string):
    log.warning(Fore.YELLOW + "Warning: " + string + Style.RESET_ALL)

def error(string, exc=NlyError):
    log.error(Fore.RED + "Error: " + string + Style.RESET_ALL)
    raise exc(string)

def argmaxRows(values: np.ndarray) -> np.ndarray:
    # np.argmax returns the first maximal index, which is the tie-break we want
    return np.argmax(np.atleast_2d(values), axis=1)

def checkSimplexRows(name: str, rows: np.ndarray, tol=1e-12):
    """
    Raises NumericalError unless every row is nonnegative and sums to one.
    """
    rows = np.atleast_2d(rows)
    if rows.shape[0] == 0:
        return
    if np.any(rows < 0) or not np.all(np.isfinite(rows)):
        error(f"{name} has negative or non-finite entries", NumericalError)
    worst = np.max(np.abs(rows.sum(axis=1) - 1.0))
    if worst > tol:
        error(f"{name} rows do not sum to one (max deviation {worst:.3e})", NumericalError)
