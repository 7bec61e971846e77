"""Architecture-string grammar and experiment config files.

Architecture strings follow the experiment tables: ``"2 x [16, 16, 16, 20]"``
declares two subnets with those layer widths (the final width is the model
rank, the last two widths are the dense postprocessing layers). The
uncertainty form appends a trunk: ``"2x[35, 35] + [35, 35]"``.

Config files are flat INI text (sections of key = value pairs), parsed with
:mod:`configparser`.
"""

import configparser


class ArchitectureError(ValueError):
    def __init__(self, text, pos, message):
        super().__init__(f"bad architecture string at position {pos}: {message} "
                         f"(in {text!r})")
        self.pos = pos


def _parse_bracket_list(s, pos):
    if pos >= len(s) or s[pos] != "[":
        raise ArchitectureError(s, pos, "expected '['")
    end = s.find("]", pos)
    if end < 0:
        raise ArchitectureError(s, pos, "unterminated '['")
    body = s[pos + 1:end]
    widths = []
    offset = pos + 1
    for piece in body.split(","):
        stripped = piece.strip()
        if not stripped.isdigit():
            raise ArchitectureError(s, offset, f"expected integer width, got {stripped!r}")
        widths.append(int(stripped))
        offset += len(piece) + 1
    if not widths:
        raise ArchitectureError(s, pos, "empty width list")
    return widths, end + 1


def parse_architecture(s):
    """Parse ``"N x [w1, ..., wk]"`` with an optional ``"+ [trunk]"`` segment.

    Returns (subnet count, widths, trunk widths or None). The last width is
    the rank; the last two belong to the dense postprocessing layers.
    """
    if not isinstance(s, str):
        raise ArchitectureError(str(s), 0, "not a string")
    i = 0
    n = len(s)
    while i < n and s[i].isspace():
        i += 1
    start = i
    while i < n and s[i].isdigit():
        i += 1
    if i == start:
        raise ArchitectureError(s, i, "expected subnet count")
    count = int(s[start:i])
    if count < 1:
        raise ArchitectureError(s, start, "subnet count must be >= 1")
    while i < n and s[i].isspace():
        i += 1
    if i >= n or s[i] not in "xX*":
        raise ArchitectureError(s, i, "expected 'x' separator")
    i += 1
    while i < n and s[i].isspace():
        i += 1
    widths, i = _parse_bracket_list(s, i)
    while i < n and s[i].isspace():
        i += 1
    trunk = None
    if i < n and s[i] == "+":
        i += 1
        while i < n and s[i].isspace():
            i += 1
        trunk, i = _parse_bracket_list(s, i)
        while i < n and s[i].isspace():
            i += 1
    if i != n:
        raise ArchitectureError(s, i, f"unexpected trailing text {s[i:]!r}")
    return count, widths, trunk


def format_architecture(count, widths, trunk=None):
    base = f"{count} x [{', '.join(str(w) for w in widths)}]"
    if trunk is not None:
        base += f" + [{', '.join(str(w) for w in trunk)}]"
    return base


_BOOL = {"true": True, "false": False, "yes": True, "no": False, "1": True, "0": False}


def _coerce(value):
    v = value.strip()
    low = v.lower()
    if low in _BOOL:
        return _BOOL[low]
    try:
        return int(v)
    except ValueError:
        pass
    try:
        return float(v)
    except ValueError:
        pass
    return v


def read_config(path):
    """Read an INI experiment config into a dict of {section: {key: value}}.

    Values are coerced to bool/int/float where they parse as such.
    """
    parser = configparser.ConfigParser(inline_comment_prefixes=("#", ";"))
    with open(path) as f:
        parser.read_file(f, source=str(path))
    out = {}
    for section in parser.sections():
        out[section] = {key: _coerce(val) for key, val in parser.items(section)}
    return out


def write_config(path, sections):
    parser = configparser.ConfigParser()
    for name, mapping in sections.items():
        parser[name] = {k: str(v) for k, v in mapping.items()}
    with open(path, "w") as f:
        parser.write(f)
