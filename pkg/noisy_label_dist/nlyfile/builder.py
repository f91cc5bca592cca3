import json
import numpy as np

VERSION = "nly/1"

def float_format(value) -> str:
    # repr is the shortest string that round-trips to the same double
    return repr(float(value))

def int_format(value) -> str:
    return str(int(value))

class NlyBuilder:
    """
    Line-oriented writer for nly/1 documents.

    Entries are emitted in call order; the same calls always produce the
    same bytes.
    """

    def __init__(self, kind: str):
        self.kind = kind
        self.lines = [f"{VERSION} {kind}"]

    def scalar(self, name: str, value):
        match value:
            case bool():
                self.lines.append(f"scalar {name} bool {'true' if value else 'false'}")
            case int() | np.integer():
                self.lines.append(f"scalar {name} int {int_format(value)}")
            case float() | np.floating():
                self.lines.append(f"scalar {name} float {float_format(value)}")
            case str():
                self.lines.append(f"scalar {name} str {json.dumps(value)}")
            case _:
                raise TypeError(f"unsupported scalar type for {name}: {type(value)}")
        return self

    def matrix(self, name: str, value: np.ndarray):
        value = np.asarray(value, dtype=float)
        assert value.ndim == 2
        self.lines.append(f"matrix {name} {value.shape[0]} {value.shape[1]}")
        for row in value:
            self.lines.append(" ".join(map(float_format, row)))
        return self

    def intmatrix(self, name: str, value: np.ndarray):
        value = np.asarray(value)
        assert value.ndim == 2
        self.lines.append(f"intmatrix {name} {value.shape[0]} {value.shape[1]}")
        for row in value:
            self.lines.append(" ".join(map(int_format, row)))
        return self

    def vector(self, name: str, value):
        value = np.asarray(value, dtype=float).reshape(-1)
        self.lines.append(f"vector {name} {value.shape[0]}")
        self.lines.append(" ".join(map(float_format, value)))
        return self

    def intvector(self, name: str, value):
        value = np.asarray(value).reshape(-1)
        self.lines.append(f"intvector {name} {value.shape[0]}")
        self.lines.append(" ".join(map(int_format, value)))
        return self

    def ragged(self, name: str, rows):
        rows = list(rows)
        self.lines.append(f"ragged {name} {len(rows)}")
        for row in rows:
            self.lines.append(" ".join(map(int_format, row)))
        return self

    def toString(self) -> str:
        return "\n".join(self.lines + ["end"]) + "\n"

    def write(self, path):
        with open(path, "w", newline="\n") as f:
            f.write(self.toString())
