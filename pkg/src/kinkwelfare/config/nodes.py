"""Syntax tree of run configuration files."""

from dataclasses import dataclass, field
from typing import Any, List, Optional, Union


@dataclass
class ConfigNode:
    """Base class for all configuration nodes."""

    line: Optional[int] = field(default=None, kw_only=True)
    column: Optional[int] = field(default=None, kw_only=True)


@dataclass
class Assignment(ConfigNode):
    key: str
    value: Any


@dataclass
class UseStatement(ConfigNode):
    path: List[str]

    @property
    def dotted(self) -> str:
        return ".".join(self.path)


@dataclass
class Cell(ConfigNode):
    """A labeled estimation-grid cell."""

    label: str
    body: List[Assignment]


@dataclass
class Section(ConfigNode):
    name: str
    body: List["Statement"]

    def assignments(self) -> List[Assignment]:
        return [s for s in self.body if isinstance(s, Assignment)]

    def sections(self) -> List["Section"]:
        return [s for s in self.body if isinstance(s, Section)]


Statement = Union[Assignment, Section, Cell, UseStatement]


@dataclass
class Document(ConfigNode):
    statements: List[Statement]
