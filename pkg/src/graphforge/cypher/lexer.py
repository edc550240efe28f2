"""Tokenizer for the Cypher subset; tracks line/column for error reporting."""

from __future__ import annotations

from dataclasses import dataclass

from ..errors import CypherSyntaxError

PUNCT_2 = ("<=", ">=", "<>", "..")
PUNCT_1 = "()[]{}:,.=<>+-*/%|"


@dataclass(frozen=True)
class Token:
    kind: str  # NAME | INT | FLOAT | STRING | PARAM | PUNCT | EOF
    value: object
    line: int
    col: int

    def is_kw(self, word: str) -> bool:
        return self.kind == "NAME" and isinstance(self.value, str) and self.value.upper() == word

    def __repr__(self):
        return f"Token({self.kind}, {self.value!r}, {self.line}:{self.col})"


_ESCAPES = {"n": "\n", "t": "\t", "r": "\r", "\\": "\\", "'": "'", '"': '"', "`": "`"}


def tokenize(source: str) -> list:
    tokens = []
    i = 0
    line = 1
    col = 1
    n = len(source)

    def err(msg):
        raise CypherSyntaxError(msg, line, col)

    while i < n:
        ch = source[i]
        if ch == "\n":
            i += 1
            line += 1
            col = 1
            continue
        if ch in " \t\r":
            i += 1
            col += 1
            continue
        if ch == "/" and i + 1 < n and source[i + 1] == "/":
            while i < n and source[i] != "\n":
                i += 1
            continue
        start_line, start_col = line, col
        if ch.isalpha() or ch == "_":
            j = i
            while j < n and (source[j].isalnum() or source[j] == "_"):
                j += 1
            tokens.append(Token("NAME", source[i:j], start_line, start_col))
            col += j - i
            i = j
            continue
        if ch.isdigit():
            j = i
            while j < n and source[j].isdigit():
                j += 1
            is_float = False
            # a '.' starts a fraction only if a digit follows ('1..3' is a range)
            if j < n and source[j] == "." and j + 1 < n and source[j + 1].isdigit():
                is_float = True
                j += 1
                while j < n and source[j].isdigit():
                    j += 1
            if j < n and source[j] in "eE":
                k = j + 1
                if k < n and source[k] in "+-":
                    k += 1
                if k < n and source[k].isdigit():
                    is_float = True
                    j = k
                    while j < n and source[j].isdigit():
                        j += 1
            text = source[i:j]
            tokens.append(
                Token("FLOAT" if is_float else "INT", float(text) if is_float else int(text), start_line, start_col)
            )
            col += j - i
            i = j
            continue
        if ch in "'\"":
            quote = ch
            j = i + 1
            buf = []
            while True:
                if j >= n:
                    err("unterminated string literal")
                c = source[j]
                if c == "\\":
                    if j + 1 >= n:
                        err("unterminated escape")
                    esc = source[j + 1]
                    if esc == "u":
                        if j + 5 >= n:
                            err("truncated unicode escape")
                        buf.append(chr(int(source[j + 2 : j + 6], 16)))
                        j += 6
                        continue
                    buf.append(_ESCAPES.get(esc, esc))
                    j += 2
                    continue
                if c == quote:
                    break
                if c == "\n":
                    err("newline in string literal")
                buf.append(c)
                j += 1
            tokens.append(Token("STRING", "".join(buf), start_line, start_col))
            col += j + 1 - i
            i = j + 1
            continue
        if ch == "$":
            j = i + 1
            while j < n and (source[j].isalnum() or source[j] == "_"):
                j += 1
            if j == i + 1:
                err("empty parameter name")
            tokens.append(Token("PARAM", source[i + 1 : j], start_line, start_col))
            col += j - i
            i = j
            continue
        two = source[i : i + 2]
        if two in PUNCT_2:
            tokens.append(Token("PUNCT", two, start_line, start_col))
            i += 2
            col += 2
            continue
        if ch in PUNCT_1:
            tokens.append(Token("PUNCT", ch, start_line, start_col))
            i += 1
            col += 1
            continue
        err(f"unexpected character {ch!r}")
    tokens.append(Token("EOF", None, line, col))
    return tokens
