import re

from typing import FrozenSet, List, Pattern

from ..errors import LexError

TokenSeq = List[str]
TokenBag = FrozenSet[str]


class Lexer:
    """
    Maximal-munch scanner for Java-like source text.
    """

    __slots__ = ("_pattern",)

    OPERATORS: tuple = (
        "==", "!=", "<=", ">=", "&&", "||", "++", "--", "->", "::",
        "<<", ">>", "+=", "-=", "*=", "/=",
    )

    RULES: tuple = (
        ("SKIP",    r"\s+"),
        ("COMMENT", r"//[^\n]*|/\*.*?(?:\*/|\Z)"),
        ("STRING",  r'"(?:[^"\\\n]|\\.)*"'),
        ("CHAR",    r"'(?:[^'\\\n]|\\.)+'"),
        ("NUMBER",  r"0[xX][0-9a-fA-F_]+[lL]?"
                    r"|0[bB][01_]+[lL]?"
                    r"|(?:\d[\d_]*)?\.\d[\d_]*(?:[eE][+-]?\d+)?[fFdD]?"
                    r"|\d[\d_]*(?:[eE][+-]?\d+)?[lLfFdD]?"),
        ("NAME",    r"[A-Za-z_$][A-Za-z0-9_$]*"),
        ("OP",      "|".join(re.escape(op) for op in OPERATORS)),
        ("QUOTE",   r"[\"']"),
        ("OTHER",   r"\S"),
    )

    def __init__(self) -> None:
        self._pattern: Pattern = re.compile(
            "|".join(f"(?P<{name}>{regex})" for name, regex in Lexer.RULES), re.DOTALL
        )

    def tokenize(self, source: str) -> TokenSeq:
        """
        Splits source text into lexemes, dropping whitespace and comments.
        """
        tokens: TokenSeq = []
        pos: int = 0

        while pos < len(source):
            match = self._pattern.match(source, pos)
            kind: str = match.lastgroup

            # A lone quote means the literal never terminated:
            if kind == "QUOTE":
                offset: int = len(source[:pos].encode("utf-8"))
                what: str = "string" if match.group() == '"' else "char"
                raise LexError(f"unterminated {what} literal", offset)

            if kind not in ("SKIP", "COMMENT"):
                tokens.append(match.group())
            pos = match.end()

        return tokens


_default_lexer: Lexer = Lexer()


def tokenize(source: str) -> TokenSeq:
    return _default_lexer.tokenize(source)


def dedup_bag(tokens: TokenSeq) -> TokenBag:
    """
    Removes duplicate tokens, keeping set semantics.
    """
    return frozenset(tokens)
