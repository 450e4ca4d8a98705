"""
Reverse-mode differentiation for scalar training losses.

A ``Tape`` records the primitive operations of one training step on top of
torch autograd; ``backward`` turns a scalar loss into a ``GradientMap`` over
every watched parameter and ``grad_check`` compares it against central
finite differences.
"""

from collections import OrderedDict
from typing import Any, Callable, Dict, List, Mapping, Optional, Tuple, Union

import numpy as np
import torch
from pydantic import BaseModel, Field

from .errors import NonScalarLossError, UnsupportedPrimitiveError, UntrackedLossError


DTYPE = torch.float64

PRIMITIVES: Dict[str, Callable[..., torch.Tensor]] = {}


def register_primitive(name: Optional[str] = None) -> Callable:
    """Decorator registering a differentiable function as a tape primitive."""
    def decorator(fn: Callable) -> Callable:
        PRIMITIVES[name or fn.__name__] = fn
        return fn
    return decorator


def _softmax(x: torch.Tensor, dim: int = -1) -> torch.Tensor:
    return torch.softmax(x, dim=dim)


PRIMITIVES.update({
    "add": torch.add,
    "sub": torch.sub,
    "mul": torch.mul,
    "div": torch.div,
    "neg": torch.neg,
    "pow": torch.pow,
    "tanh": torch.tanh,
    "sigmoid": torch.sigmoid,
    "logsigmoid": torch.nn.functional.logsigmoid,
    "exp": torch.exp,
    "log": torch.log,
    "cos": torch.cos,
    "sin": torch.sin,
    "matmul": torch.matmul,
    "sum": torch.sum,
    "mean": torch.mean,
    "softmax": _softmax,
})


class TapeNode:
    """One recorded primitive application."""

    __slots__ = ("index", "op", "operands", "output")

    def __init__(self, index: int, op: str, operands: Tuple[Optional[int], ...], output: torch.Tensor):
        self.index = index
        self.op = op
        # tape index of each operand, None for constants and parameters
        self.operands = operands
        self.output = output

    def __repr__(self) -> str:
        return f"TapeNode({self.index}, {self.op}, operands={self.operands})"


class GradientMap(OrderedDict):
    """Parameter name -> gradient tensor of the parameter's shape."""

    def global_norm(self) -> float:
        total = sum(float((g ** 2).sum()) for g in self.values())
        return float(np.sqrt(total))

    def apply_to(self, params: Mapping[str, torch.Tensor]) -> None:
        """Store each gradient on the matching parameter's ``.grad``."""
        for name, param in params.items():
            param.grad = self[name].detach().clone()


class Tape:
    """
    Append-only record of primitive operations for a single training step.

    A tape is confined to the thread that created it. Watched parameters are
    the leaves ``backward`` differentiates against.
    """

    def __init__(self, params: Optional[Union[Mapping[str, torch.Tensor], torch.nn.Module]] = None):
        if isinstance(params, torch.nn.Module):
            params = OrderedDict(params.named_parameters())
        self.params: "OrderedDict[str, torch.Tensor]" = OrderedDict()
        self.nodes: List[TapeNode] = []
        self._positions: Dict[int, int] = {}
        for name, tensor in (params or {}).items():
            self.watch(name, tensor)

    def watch(self, name: str, tensor: torch.Tensor) -> torch.Tensor:
        """Mark a leaf tensor as a trainable parameter."""
        if tensor.is_leaf and not tensor.requires_grad:
            tensor.requires_grad_(True)
        self.params[name] = tensor
        return tensor

    def record(self, op: Union[str, Callable[..., torch.Tensor]], *inputs: Any, **kwargs: Any) -> torch.Tensor:
        """
        Apply a registered primitive and append it to the tape.

        Args:
            op: Primitive name or the registered function itself
            *inputs: Tape values, parameters or constants
            **kwargs: Non-differentiable options forwarded to the primitive

        Returns:
            The primitive's output, a tape value
        """
        name, fn = _resolve(op)
        with torch.enable_grad():
            output = fn(*inputs, **kwargs)
        operands = tuple(
            self._positions.get(id(value)) if isinstance(value, torch.Tensor) else None
            for value in inputs
        )
        node = TapeNode(len(self.nodes), name, operands, output)
        self.nodes.append(node)
        if isinstance(output, torch.Tensor):
            self._positions[id(output)] = node.index
        return output

    def producer(self, value: Any) -> Optional[TapeNode]:
        """The node whose output is ``value``, if it was recorded here."""
        position = self._positions.get(id(value)) if isinstance(value, torch.Tensor) else None
        if position is None or self.nodes[position].output is not value:
            return None
        return self.nodes[position]

    def lineage(self, value: Any) -> List[TapeNode]:
        """Recorded nodes ``value`` depends on, in tape order."""
        node = self.producer(value)
        if node is None:
            return []
        seen = {node.index}
        stack = [node.index]
        while stack:
            for operand in self.nodes[stack.pop()].operands:
                if operand is not None and operand not in seen:
                    seen.add(operand)
                    stack.append(operand)
        return [self.nodes[i] for i in sorted(seen)]

    def __len__(self) -> int:
        return len(self.nodes)


def _resolve(op: Union[str, Callable]) -> Tuple[str, Callable]:
    if isinstance(op, str):
        if op not in PRIMITIVES:
            raise UnsupportedPrimitiveError(
                f"Unsupported primitive: {op}",
                details={"op": op, "known": sorted(PRIMITIVES)}
            )
        return op, PRIMITIVES[op]
    for name, fn in PRIMITIVES.items():
        if fn is op:
            return name, fn
    raise UnsupportedPrimitiveError(
        f"Unsupported primitive: {getattr(op, '__name__', repr(op))}",
        details={"op": getattr(op, "__name__", repr(op))}
    )


def backward(tape: Tape, loss: torch.Tensor, retain_graph: bool = False) -> GradientMap:
    """
    Gradients of a scalar loss with respect to every watched parameter.

    Parameters the loss does not reach receive zeros. A tape with no
    recorded nodes only names the parameters.

    Raises:
        NonScalarLossError: if ``loss`` has more than one element
        UntrackedLossError: if the tape has recorded nodes but not ``loss``
    """
    if not isinstance(loss, torch.Tensor) or loss.numel() != 1:
        shape = tuple(loss.shape) if isinstance(loss, torch.Tensor) else type(loss).__name__
        raise NonScalarLossError(
            "Loss must be a scalar tape value",
            details={"shape": shape}
        )
    if len(tape) and tape.producer(loss) is None:
        raise UntrackedLossError(
            "Loss was not recorded on this tape",
            details={"n_nodes": len(tape), "last_op": tape.nodes[-1].op}
        )

    names = list(tape.params)
    tensors = [tape.params[name] for name in names]
    grads: List[Optional[torch.Tensor]]
    if loss.requires_grad and tensors:
        grads = list(torch.autograd.grad(
            loss.reshape(()),
            tensors,
            allow_unused=True,
            retain_graph=retain_graph
        ))
    else:
        grads = [None] * len(tensors)

    result = GradientMap()
    for name, tensor, grad in zip(names, tensors, grads):
        result[name] = torch.zeros_like(tensor) if grad is None else grad
    return result


class CoordinateCheck(BaseModel):
    """Agreement of one coordinate between reverse mode and finite differences."""
    name: str
    index: List[int]
    analytic: float
    numeric: float
    rel_error: float


class GradCheckReport(BaseModel):
    """Outcome of a finite-difference gradient check."""
    passed: bool
    tol: float
    step: float
    max_rel_error: float
    n_checked: int
    worst: Optional[CoordinateCheck] = None
    coordinates: List[CoordinateCheck] = Field(default_factory=list)


def grad_check(
    f: Callable[[Dict[str, torch.Tensor]], torch.Tensor],
    params: Mapping[str, torch.Tensor],
    step: float = 1e-5,
    tol: float = 1e-3,
    floor: float = 1e-4,
    max_coords: Optional[int] = None,
    seed: int = 0
) -> GradCheckReport:
    """
    Compare reverse-mode gradients with central finite differences.

    ``f`` receives the parameter dict and must be deterministic. The tensors in
    ``params`` are perturbed in place and restored afterwards, so ``f`` may
    also read them through a module that owns them.

    Args:
        f: Scalar function of the parameters
        params: Named leaf tensors to differentiate against
        step: Central-difference step
        tol: Maximum accepted relative error
        floor: Lower bound of the relative-error denominator
        max_coords: Check at most this many randomly chosen coordinates
        seed: Seed of the coordinate subsample

    Returns:
        Per-coordinate relative errors and the pass/fail verdict
    """
    params = OrderedDict(params)
    tape = Tape(params)
    grads = backward(tape, f(params))

    coordinates = [
        (name, idx)
        for name, tensor in params.items()
        for idx in np.ndindex(*tensor.shape)
    ]
    if max_coords is not None and len(coordinates) > max_coords:
        rng = np.random.default_rng(seed)
        chosen = np.sort(rng.choice(len(coordinates), size=max_coords, replace=False))
        coordinates = [coordinates[i] for i in chosen]

    checks: List[CoordinateCheck] = []
    with torch.no_grad():
        for name, idx in coordinates:
            tensor = params[name]
            original = tensor[idx].item()
            tensor[idx] = original + step
            f_plus = float(f(params))
            tensor[idx] = original - step
            f_minus = float(f(params))
            tensor[idx] = original

            numeric = (f_plus - f_minus) / (2.0 * step)
            analytic = float(grads[name][idx])
            rel_error = abs(analytic - numeric) / max(abs(analytic), abs(numeric), floor)
            checks.append(CoordinateCheck(
                name=name,
                index=[int(i) for i in idx],
                analytic=analytic,
                numeric=numeric,
                rel_error=rel_error
            ))

    worst = max(checks, key=lambda c: c.rel_error) if checks else None
    max_rel_error = worst.rel_error if worst else 0.0
    return GradCheckReport(
        passed=max_rel_error < tol,
        tol=tol,
        step=step,
        max_rel_error=max_rel_error,
        n_checked=len(checks),
        worst=worst,
        coordinates=checks
    )
