"""Misbehaving-agent strategies.

Scripts are arithmetic over the round index ``k`` (and optionally the
recipient id ``j``) with ``sin``/``cos``. They are parsed with :mod:`ast`
and evaluated by walking a whitelisted tree, never through ``eval``.
"""

from __future__ import annotations

import ast
import math
import operator
from dataclasses import dataclass, field

import numpy as np

SCRIPTED = "scripted"
CONSTANT = "constant"
RANDOM_BOX = "random-box"
PER_RECIPIENT = "per-recipient-scripted"
KINDS = (SCRIPTED, CONSTANT, RANDOM_BOX, PER_RECIPIENT)

_BINOPS = {
    ast.Add: operator.add,
    ast.Sub: operator.sub,
    ast.Mult: operator.mul,
    ast.Div: operator.truediv,
}
_FUNCS = {"sin": math.sin, "cos": math.cos}
_VARS = ("k", "j")


class ConfigurationError(ValueError):
    pass


class Expression:
    """A compiled coordinate script such as ``1.5*sin(k/5)``."""

    def __init__(self, source: str):
        self.source = str(source)
        try:
            tree = ast.parse(self.source, mode="eval")
        except SyntaxError as exc:
            raise ConfigurationError(f"cannot parse script {self.source!r}: {exc.msg}") from exc
        self._check(tree.body)
        self._tree = tree.body

    def _check(self, node):
        if isinstance(node, ast.Constant) and isinstance(node.value, (int, float)):
            return
        if isinstance(node, ast.Name) and node.id in _VARS:
            return
        if isinstance(node, ast.BinOp) and type(node.op) in _BINOPS:
            self._check(node.left)
            self._check(node.right)
            return
        if isinstance(node, ast.UnaryOp) and isinstance(node.op, (ast.USub, ast.UAdd)):
            self._check(node.operand)
            return
        if (
            isinstance(node, ast.Call)
            and isinstance(node.func, ast.Name)
            and node.func.id in _FUNCS
            and len(node.args) == 1
            and not node.keywords
        ):
            self._check(node.args[0])
            return
        raise ConfigurationError(
            f"unsupported construct {ast.dump(node)[:40]!r} in script {self.source!r}"
        )

    def _eval(self, node, env):
        if isinstance(node, ast.Constant):
            return float(node.value)
        if isinstance(node, ast.Name):
            return float(env[node.id])
        if isinstance(node, ast.BinOp):
            return _BINOPS[type(node.op)](self._eval(node.left, env), self._eval(node.right, env))
        if isinstance(node, ast.UnaryOp):
            v = self._eval(node.operand, env)
            return -v if isinstance(node.op, ast.USub) else v
        return _FUNCS[node.func.id](self._eval(node.args[0], env))

    def __call__(self, k: int, j: int = 0) -> float:
        try:
            v = self._eval(self._tree, {"k": k, "j": j})
        except (ZeroDivisionError, OverflowError, ValueError) as exc:
            raise ConfigurationError(f"script {self.source!r} failed at k={k}: {exc}") from exc
        if not math.isfinite(v):
            raise ConfigurationError(f"script {self.source!r} is not finite at k={k}")
        return v


def _exprs(spec, dim: int) -> list[Expression]:
    if not isinstance(spec, (list, tuple)) or len(spec) != dim:
        raise ConfigurationError(f"expected {dim} coordinate scripts, got {spec!r}")
    return [Expression(s) for s in spec]


@dataclass
class AdversaryStrategy:
    """What a faulty node sends, as a function of round and recipient."""

    kind: str
    dim: int
    params: dict = field(default_factory=dict)
    _scripts: list = field(default_factory=list, repr=False)
    _per: dict = field(default_factory=dict, repr=False)

    @classmethod
    def from_spec(cls, spec: dict, dim: int) -> "AdversaryStrategy":
        kind = spec.get("kind")
        if kind not in KINDS:
            raise ConfigurationError(f"unknown adversary kind {kind!r}")
        st = cls(kind=kind, dim=dim, params=dict(spec))
        if kind == SCRIPTED:
            st._scripts = _exprs(spec.get("expr"), dim)
        elif kind == CONSTANT:
            value = np.asarray(spec.get("value"), dtype=float).reshape(-1)
            if value.shape != (dim,) or not np.all(np.isfinite(value)):
                raise ConfigurationError(f"constant value must be {dim} finite numbers")
        elif kind == RANDOM_BOX:
            lo = np.asarray(spec.get("low"), dtype=float).reshape(-1)
            hi = np.asarray(spec.get("high"), dtype=float).reshape(-1)
            if lo.shape != (dim,) or hi.shape != (dim,) or np.any(hi < lo):
                raise ConfigurationError("random-box needs low <= high, one entry per coordinate")
        else:
            scripts = spec.get("scripts", {})
            st._per = {int(r): _exprs(s, dim) for r, s in scripts.items()}
            st._scripts = _exprs(spec["default"], dim) if "default" in spec else []
        return st

    def to_spec(self) -> dict:
        return {k: v for k, v in self.params.items()}

    @property
    def per_recipient(self) -> bool:
        return self.kind in (RANDOM_BOX, PER_RECIPIENT) or (
            self.kind == SCRIPTED and any("j" in e.source for e in self._scripts)
        )

    def emit(self, k: int, recipient: int, seed: int = 0, node: int = 0) -> np.ndarray:
        if self.kind == CONSTANT:
            return np.asarray(self.params["value"], dtype=float).reshape(-1)
        if self.kind == RANDOM_BOX:
            rng = np.random.default_rng([seed, node, k, recipient])
            lo = np.asarray(self.params["low"], dtype=float)
            hi = np.asarray(self.params["high"], dtype=float)
            return rng.uniform(lo, hi)
        scripts = self._per.get(recipient, self._scripts)
        if not scripts:
            raise ConfigurationError(f"no script for recipient {recipient}")
        return np.array([e(k, recipient) for e in scripts])


def adversary_emit(strategy: AdversaryStrategy, k: int, recipient: int, seed: int = 0, node: int = 0):
    return strategy.emit(k, recipient, seed, node)
