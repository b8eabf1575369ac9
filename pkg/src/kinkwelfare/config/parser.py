"""Parser for run configuration files using Lark."""

from pathlib import Path
from typing import Any, List, Union

from lark import Lark, Token, Transformer, v_args
from lark.exceptions import LarkError, UnexpectedInput, VisitError

from ..core.errors import ConfigError
from . import nodes


def _position(meta) -> dict:
    if getattr(meta, "empty", True):
        return {}
    return {"line": meta.line, "column": meta.column}


class ConfigTransformer(Transformer):
    """Transforms the Lark parse tree into configuration nodes."""

    def start(self, children: List[Any]) -> nodes.Document:
        return nodes.Document(statements=children)

    @v_args(meta=True)
    def assignment(self, meta, children: List[Any]) -> nodes.Assignment:
        key, value = children
        return nodes.Assignment(key=str(key), value=value, **_position(meta))

    @v_args(meta=True)
    def section(self, meta, children: List[Any]) -> nodes.Section:
        name, *body = children
        return nodes.Section(name=str(name), body=body, **_position(meta))

    @v_args(meta=True)
    def cell(self, meta, children: List[Any]) -> nodes.Cell:
        label, *body = children
        return nodes.Cell(label=_unquote(label), body=body, **_position(meta))

    @v_args(meta=True)
    def use_statement(self, meta, children: List[Any]) -> nodes.UseStatement:
        return nodes.UseStatement(path=children[0], **_position(meta))

    def dotted_name(self, children: List[Token]) -> List[str]:
        return [str(part) for part in children]

    def number(self, children: List[Token]) -> Union[int, float]:
        text = children[0].value
        if any(c in text for c in ".eE"):
            return float(text)
        return int(text)

    def string(self, children: List[Token]) -> str:
        return _unquote(children[0])

    def true(self, _) -> bool:
        return True

    def false(self, _) -> bool:
        return False

    def null(self, _) -> None:
        return None

    def list_value(self, children: List[Any]) -> List[Any]:
        return list(children)


def _unquote(token: Token) -> str:
    value = str(token)[1:-1]
    return value.replace('\\"', '"').replace("\\\\", "\\")


class ConfigParser:
    """Parses configuration text into a :class:`nodes.Document`."""

    def __init__(self):
        grammar_path = Path(__file__).parent / "grammar.lark"
        self.parser = Lark(
            grammar_path.read_text(encoding="utf-8"),
            parser="lalr",
            propagate_positions=True,
        )
        self.transformer = ConfigTransformer()

    def parse(self, text: str) -> nodes.Document:
        """Parse configuration text.

        Raises:
            ConfigError: On syntax errors, with the offending line and column.
        """
        try:
            tree = self.parser.parse(text)
        except UnexpectedInput as e:
            message = str(e).strip().splitlines()[0]
            raise ConfigError(f"syntax error: {message}", e.line, e.column)
        except LarkError as e:
            raise ConfigError(f"syntax error: {e}")
        try:
            return self.transformer.transform(tree)
        except VisitError as e:
            raise ConfigError(f"invalid value: {e.orig_exc}")

    def parse_file(self, path: Union[str, Path]) -> nodes.Document:
        try:
            text = Path(path).read_text(encoding="utf-8")
        except OSError as e:
            raise ConfigError(f"cannot read config {path}: {e}")
        return self.parse(text)


def parse_config(text: str) -> nodes.Document:
    """Parse configuration text into a document."""
    return ConfigParser().parse(text)
