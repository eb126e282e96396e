"""Textual ``.ssec`` language: parsing, serialization and diagnostics."""

from .lexer import Token, tokenize
from .parser import DslError, ParseTree, load_model, parse, parse_file
from .serializer import fmt_expr, serialize

__all__ = [
    "DslError",
    "ParseTree",
    "Token",
    "fmt_expr",
    "load_model",
    "parse",
    "parse_file",
    "serialize",
    "tokenize",
]
