"""codm: an embeddable in-memory concept-oriented database engine."""

from .canonical import (
    canonical_item,
    concept_semantics,
    database_semantics,
    dump_relation,
    semantic_equal,
)
from .errors import CodmError
from .query.evaluator import ResultConcept, evaluate_block_query, evaluate_query
from .query.parser import parse_expression, parse_query
from .schema import BOTTOM, TOP, DimPath, Schema
from .store import Database, DeletionReport, ItemRef

__all__ = [
    "BOTTOM",
    "TOP",
    "CodmError",
    "Database",
    "DeletionReport",
    "DimPath",
    "ItemRef",
    "ResultConcept",
    "Schema",
    "canonical_item",
    "concept_semantics",
    "database_semantics",
    "dump_relation",
    "evaluate_block_query",
    "evaluate_query",
    "parse_expression",
    "parse_query",
    "semantic_equal",
]
