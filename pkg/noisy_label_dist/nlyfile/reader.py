import json
import numpy as np

from noisy_label_dist.nlyfile.builder import VERSION
from noisy_label_dist.util import FormatError

class NlyDocument:
    """
    Parsed nly/1 document: a kind plus named entries in file order.
    """

    def __init__(self, kind: str, entries: dict):
        self.kind = kind
        self.entries = entries

    def __getitem__(self, name):
        if name not in self.entries:
            raise FormatError(f"{self.kind} document has no entry '{name}'")
        return self.entries[name]

    def __contains__(self, name):
        return name in self.entries

    def get(self, name, default=None):
        return self.entries.get(name, default)

    def expectKind(self, kind: str):
        if self.kind != kind:
            raise FormatError(f"expected a {kind} document, found {self.kind}")
        return self

    @classmethod
    def from_file(cls, path):
        with open(path, "r") as f:
            return cls.from_str(f.read())

    @classmethod
    def from_str(cls, text: str):
        lines = text.split("\n")
        header = lines[0].split(" ")
        if len(header) != 2 or header[0] != VERSION:
            raise FormatError(f"unsupported header: {lines[0]!r}")

        entries = {}
        pos = 1

        def take():
            nonlocal pos
            if pos >= len(lines):
                raise FormatError("unexpected end of document")
            line = lines[pos]
            pos += 1
            return line

        def numbers(line, conv, count):
            items = line.split() if line else []
            if len(items) != count:
                raise FormatError(f"expected {count} values, found {len(items)}")
            try:
                return [conv(item) for item in items]
            except ValueError as e:
                raise FormatError(str(e)) from e

        while True:
            line = take()
            if line == "end":
                break
            parts = line.split(" ", 3)
            try:
                match parts[0]:
                    case "scalar":
                        _, name, typ, raw = parts
                        entries[name] = parseScalar(typ, raw)
                    case "matrix" | "intmatrix":
                        _, name, rows, cols = parts
                        rows, cols = int(rows), int(cols)
                        conv = float if parts[0] == "matrix" else int
                        data = [numbers(take(), conv, cols) for _ in range(rows)]
                        entries[name] = np.array(data, dtype=conv).reshape((rows, cols))
                    case "vector" | "intvector":
                        _, name, length = parts
                        conv = float if parts[0] == "vector" else int
                        entries[name] = np.array(numbers(take(), conv, int(length)), dtype=conv)
                    case "ragged":
                        _, name, rows = parts
                        entries[name] = [np.array(list(map(int, take().split())), dtype=int) for _ in range(int(rows))]
                    case _:
                        raise FormatError(f"unknown entry type: {parts[0]!r}")
            except ValueError as e:
                raise FormatError(f"malformed entry line {line!r}: {e}") from e

        return cls(header[1], entries)

def parseScalar(typ: str, raw: str):
    match typ:
        case "bool":
            if raw not in ("true", "false"):
                raise FormatError(f"bad bool: {raw!r}")
            return raw == "true"
        case "int":
            return int(raw)
        case "float":
            return float(raw)
        case "str":
            return json.loads(raw)
        case _:
            raise FormatError(f"unknown scalar type: {typ!r}")
