from .parser import parse_expression, parse_query
from .evaluator import evaluate_block_query, evaluate_query

__all__ = ["parse_query", "parse_expression", "evaluate_query", "evaluate_block_query"]
