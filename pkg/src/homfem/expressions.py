"""Safe arithmetic expressions over spatial coordinates.

Coefficient and source entries in config files are plain strings in a small
closed language, so runs stay serializable and reproducible (no callbacks).
The grammar, in EBNF::

    expr    = term , { ( "+" | "-" ) , term } ;
    term    = factor , { ( "*" | "/" ) , factor } ;
    factor  = [ "+" | "-" ] , power ;
    power   = atom , [ "**" , factor ] ;
    atom    = number | variable | constant
            | function , "(" , expr , ")"
            | "(" , expr , ")" ;
    variable = "x1" | "x2" | "x" | "y" ;      (* "x","y" alias "x1","x2" *)
    constant = "pi" ;
    function = "sin" | "cos" | "exp" | "abs" | "floor" ;

Strings are parsed with :mod:`ast` and validated against a node whitelist,
then evaluated vectorized over numpy point arrays.
"""

from __future__ import annotations

import ast

import numpy as np

__all__ = ["compile_expression", "ExpressionError"]

_FUNCTIONS = {
    "sin": np.sin,
    "cos": np.cos,
    "exp": np.exp,
    "abs": np.abs,
    "floor": np.floor,
}

_BINOPS = {
    ast.Add: np.add,
    ast.Sub: np.subtract,
    ast.Mult: np.multiply,
    ast.Div: np.divide,
    ast.Pow: np.power,
}

_VAR_ALIASES = {"x": 0, "y": 1, "x1": 0, "x2": 1}


class ExpressionError(ValueError):
    """Raised for expressions outside the documented grammar."""


def compile_expression(text: str, dim: int):
    """Compile ``text`` to a function mapping points (m, dim) -> values (m,).

    Raises :class:`ExpressionError` on syntax errors, unknown names, or
    constructs outside the grammar.
    """
    if not isinstance(text, str) or not text.strip():
        raise ExpressionError("expression must be a non-empty string")
    try:
        tree = ast.parse(text, mode="eval")
    except SyntaxError as exc:
        raise ExpressionError(f"cannot parse expression {text!r}: {exc.msg}") from exc
    evaluator = _build(tree.body, text, dim)

    def evaluate(points: np.ndarray) -> np.ndarray:
        pts = np.asarray(points, dtype=float)
        if pts.ndim == 1:
            pts = pts.reshape(-1, 1)
        with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
            out = evaluator(pts)
        return np.broadcast_to(np.asarray(out, dtype=float), (pts.shape[0],)).copy()

    evaluate.source = text
    return evaluate


def _build(node, text, dim):
    if isinstance(node, ast.Constant):
        if isinstance(node.value, (int, float)) and not isinstance(node.value, bool):
            value = float(node.value)
            return lambda pts: value
        raise ExpressionError(f"non-numeric constant in {text!r}")
    if isinstance(node, ast.Name):
        if node.id == "pi":
            return lambda pts: np.pi
        if node.id in _VAR_ALIASES:
            axis = _VAR_ALIASES[node.id]
            if axis >= dim:
                raise ExpressionError(
                    f"variable {node.id!r} exceeds space dimension {dim}")
            return lambda pts: pts[:, axis]
        raise ExpressionError(f"unknown name {node.id!r} in {text!r}")
    if isinstance(node, ast.UnaryOp) and isinstance(node.op, (ast.UAdd, ast.USub)):
        inner = _build(node.operand, text, dim)
        if isinstance(node.op, ast.UAdd):
            return inner
        return lambda pts: np.negative(inner(pts))
    if isinstance(node, ast.BinOp) and type(node.op) in _BINOPS:
        op = _BINOPS[type(node.op)]
        left = _build(node.left, text, dim)
        right = _build(node.right, text, dim)
        return lambda pts: op(left(pts), right(pts))
    if isinstance(node, ast.Call):
        if not isinstance(node.func, ast.Name) or node.func.id not in _FUNCTIONS:
            raise ExpressionError(f"unknown function in {text!r}")
        if len(node.args) != 1 or node.keywords:
            raise ExpressionError(
                f"{node.func.id} takes exactly one positional argument")
        fn = _FUNCTIONS[node.func.id]
        arg = _build(node.args[0], text, dim)
        return lambda pts: fn(arg(pts))
    raise ExpressionError(
        f"construct {type(node).__name__} not allowed in {text!r}")
