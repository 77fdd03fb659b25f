"""Minimal reverse-mode autodiff over small float64 vectors.

The op set is exactly what the sampler and losses need: elementwise
arithmetic, log/exp, sum/dot reductions, cumsum, tempered softmax, and a
straight-through one-hot (hard argmax forward, identity backward). One Tape
per optimization run; a tape is confined to a single thread.
"""
from __future__ import annotations

import numpy as np

# Op codes (plain ints keep the backward dispatch cheap).
_CONST = 0
_PARAM = 1
_ADD = 2
_MUL = 3
_DIV = 4
_LOG = 5
_EXP = 6
_SUM = 7
_DOT = 8
_CUMSUM = 9
_SOFTMAX = 10
_ST_ONEHOT = 11


class DiffVector:
    """Handle to a tape node. Forward value is available immediately."""

    __slots__ = ("tape", "idx")

    def __init__(self, tape: "Tape", idx: int):
        self.tape = tape
        self.idx = idx

    @property
    def value(self) -> np.ndarray:
        return self.tape.values[self.idx]

    def __len__(self) -> int:
        return len(self.tape.values[self.idx])


class Tape:
    """Append-only op recorder. Gradients are produced by backward()."""

    def __init__(self):
        self.ops: list[int] = []
        self.args: list[tuple] = []
        self.values: list[np.ndarray] = []
        self.param_idx: list[int] = []

    def _push(self, op: int, value: np.ndarray, args: tuple = ()) -> DiffVector:
        self.ops.append(op)
        self.args.append(args)
        self.values.append(value)
        return DiffVector(self, len(self.values) - 1)

    # -- leaves ------------------------------------------------------------

    def constant(self, v) -> DiffVector:
        return self._push(_CONST, np.asarray(v, dtype=np.float64))

    def param(self, v) -> DiffVector:
        out = self._push(_PARAM, np.asarray(v, dtype=np.float64).copy())
        self.param_idx.append(out.idx)
        return out

    # -- elementwise -------------------------------------------------------

    def add(self, x: DiffVector, y: DiffVector) -> DiffVector:
        a, b = self.values[x.idx], self.values[y.idx]
        self._check_shapes(a, b)
        return self._push(_ADD, a + b, (x.idx, y.idx))

    def mul(self, x: DiffVector, y: DiffVector) -> DiffVector:
        a, b = self.values[x.idx], self.values[y.idx]
        self._check_shapes(a, b)
        return self._push(_MUL, a * b, (x.idx, y.idx))

    def div(self, x: DiffVector, y: DiffVector) -> DiffVector:
        a, b = self.values[x.idx], self.values[y.idx]
        self._check_shapes(a, b)
        if np.any(b == 0.0):
            raise ZeroDivisionError("div: zero entry in denominator")
        return self._push(_DIV, a / b, (x.idx, y.idx))

    def log(self, x: DiffVector, floor: float | None = None) -> DiffVector:
        """Elementwise log. ``floor`` clamps the argument from below; it is
        meant only for loss terms where a probability can round to zero."""
        a = self.values[x.idx]
        if floor is not None:
            live = a >= floor  # clamped entries get zero adjoint
            a = np.maximum(a, floor)
        else:
            if np.any(a <= 0.0):
                raise ValueError("log: nonpositive input")
            live = None
        return self._push(_LOG, np.log(a), (x.idx, a, live))

    def exp(self, x: DiffVector) -> DiffVector:
        out = np.exp(self.values[x.idx])
        return self._push(_EXP, out, (x.idx,))

    # -- reductions --------------------------------------------------------

    def sum(self, x: DiffVector) -> DiffVector:
        return self._push(_SUM, np.array([self.values[x.idx].sum()]), (x.idx,))

    def dot(self, x: DiffVector, w) -> DiffVector:
        """Inner product with a constant weight vector; returns length 1."""
        w = np.asarray(w, dtype=np.float64)
        a = self.values[x.idx]
        if a.shape != w.shape:
            raise ValueError(f"dot: length mismatch {a.shape} vs {w.shape}")
        return self._push(_DOT, np.array([a @ w]), (x.idx, w))

    # -- structured --------------------------------------------------------

    def cumsum(self, x: DiffVector) -> DiffVector:
        return self._push(_CUMSUM, np.cumsum(self.values[x.idx]), (x.idx,))

    def softmax(self, logits: DiffVector, tau: float, shift=None) -> DiffVector:
        """Tempered softmax. ``shift`` is an optional constant offset added
        to the logits before the softmax (e.g. Gumbel noise); it receives no
        gradient and does not change the adjoint."""
        if tau <= 0:
            raise ValueError("softmax: tau must be positive")
        z = self.values[logits.idx]
        if shift is not None:
            z = z + shift
        z = z / tau
        z = z - z.max()  # max-subtraction for stability
        e = np.exp(z)
        y = e / e.sum()
        return self._push(_SOFTMAX, y, (logits.idx, tau))

    def straight_through_onehot(self, soft: DiffVector) -> DiffVector:
        """Hard one-hot of argmax(soft); backward is the identity.
        Ties break to the lowest index."""
        a = self.values[soft.idx]
        if not np.all(np.isfinite(a)):
            raise ValueError("straight_through_onehot: non-finite input")
        if a.max() <= 0.0:
            raise ValueError("straight_through_onehot: no strictly positive entry")
        out = np.zeros_like(a)
        out[int(a.argmax())] = 1.0
        return self._push(_ST_ONEHOT, out, (soft.idx,))

    # -- backward ----------------------------------------------------------

    def backward(self, root: DiffVector) -> dict[int, np.ndarray]:
        """Reverse-accumulate from a scalar root; returns grads keyed by the
        tape index of each param node."""
        if len(self.values[root.idx]) != 1:
            raise ValueError("backward: root must be scalar (length 1)")
        grads: list[np.ndarray | None] = [None] * len(self.values)
        grads[root.idx] = np.ones(1)
        ops, args, values = self.ops, self.args, self.values

        def accum(i: int, g: np.ndarray):
            tgt = values[i]
            if g.shape != tgt.shape:  # scalar-broadcast operand
                g = np.array([g.sum()])
            if grads[i] is None:
                grads[i] = g  # never mutated in place, safe to alias
            else:
                grads[i] = grads[i] + g

        for idx in range(root.idx, -1, -1):
            g = grads[idx]
            if g is None:
                continue
            op = ops[idx]
            if op == _CONST or op == _PARAM:
                continue
            a = args[idx]
            if op == _ADD:
                accum(a[0], g)
                accum(a[1], g)
            elif op == _MUL:
                accum(a[0], g * values[a[1]])
                accum(a[1], g * values[a[0]])
            elif op == _DIV:
                b = values[a[1]]
                accum(a[0], g / b)
                accum(a[1], -g * values[idx] / b)
            elif op == _LOG:
                ga = g / a[1]  # a[1] is the (possibly clamped) argument
                if a[2] is not None:
                    ga = ga * a[2]
                accum(a[0], ga)
            elif op == _EXP:
                accum(a[0], g * values[idx])
            elif op == _SUM:
                accum(a[0], np.full_like(values[a[0]], g[0]))
            elif op == _DOT:
                accum(a[0], g[0] * a[1])
            elif op == _CUMSUM:
                accum(a[0], np.cumsum(g[::-1])[::-1])
            elif op == _SOFTMAX:
                y = values[idx]
                accum(a[0], (g - (g @ y)) * y / a[1])
            elif op == _ST_ONEHOT:
                accum(a[0], g)  # straight-through: identity adjoint
        return {i: (grads[i] if grads[i] is not None else np.zeros_like(values[i]))
                for i in self.param_idx}

    @staticmethod
    def _check_shapes(a: np.ndarray, b: np.ndarray):
        if a.shape != b.shape and len(a) != 1 and len(b) != 1:
            raise ValueError(f"length mismatch: {a.shape} vs {b.shape}")
