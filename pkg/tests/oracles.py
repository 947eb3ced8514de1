"""Independent host oracles and random strided-view generators for tests.

The oracles walk logical indices with plain Python loops and read storage
through offset + strides arithmetic, sharing no code with the backends.
"""

import itertools
import math
import re

import numpy as np

from portten.tensor import Storage, Tensor

F = np.float32

# scalar-at-a-time float32 semantics (every op rounds to float32)
_FUNCS = {
    "abs": lambda a: F(abs(F(a))),
    "sqrt": lambda a: F(np.sqrt(F(a))),
    "exp": lambda a: F(np.exp(F(a))),
    "log": lambda a: F(np.log(F(a))),
    "tanh": lambda a: F(np.tanh(F(a))),
    "max": lambda a, b: F(np.fmax(F(a), F(b))),
    "min": lambda a, b: F(np.fmin(F(a), F(b))),
}
_NUM = re.compile(r"(?<![A-Za-z_])(\d+\.\d*|\.\d+|\d+)(?:[eE][+-]?\d+)?")


def logical_indices(sizes):
    return itertools.product(*(range(n) for n in sizes))


def position(t: Tensor, idx) -> int:
    return t.storage_offset + sum(i * s for i, s in zip(idx, t.strides))


def host_values(t: Tensor) -> list[float]:
    return [float(t.storage.data[position(t, idx)]) for idx in logical_indices(t.sizes)]


def host_apply(expression: str, operands, scalar: float) -> np.ndarray:
    """Expected full storage of operands[0] after applying ``expression``."""
    rhs = expression.split("=", 1)[1].strip()
    code = compile(_NUM.sub(lambda m: f"F({m.group(0)})", rhs), "<expr>", "eval")
    names = ("x", "y", "z")[:len(operands)]
    out = operands[0].storage.data.copy()
    with np.errstate(all="ignore"):
        for idx in logical_indices(operands[0].sizes):
            env = {n: F(t.storage.data[position(t, idx)]) for n, t in zip(names, operands)}
            env.update(_FUNCS, s=F(scalar), F=F)
            out[position(operands[0], idx)] = F(eval(code, {"__builtins__": {}}, env))
    return out


def host_reduce(op: str, t: Tensor, dim=None):
    """Sequential reduction; sums use exact (fsum) accumulation."""
    if dim is None:
        vals = host_values(t)
        return math.fsum(vals) if op == "sum" else (max if op == "max" else min)(vals)
    out_sizes = list(t.sizes)
    out_sizes[dim] = 1
    out = np.empty(out_sizes, dtype=np.float64)
    idxs = np.empty(out_sizes, dtype=np.int64)
    for idx in logical_indices(out_sizes):
        vals = []
        for j in range(t.sizes[dim]):
            full = list(idx)
            full[dim] = j
            vals.append(float(t.storage.data[position(t, full)]))
        if op == "sum":
            out[idx] = math.fsum(vals)
        else:
            best = 0
            for j, v in enumerate(vals):
                if (v > vals[best]) if op == "max" else (v < vals[best]):
                    best = j
            out[idx], idxs[idx] = vals[best], best
    return out, idxs


def random_view(rng: np.random.Generator, sizes, *, contiguous_ok=True) -> Tensor:
    """A tensor of ``sizes`` carved out of a larger, randomly laid out storage.

    Layouts: plain contiguous, narrowed from a padded parent, permuted
    (transposed) dimension order, or strided with a step of 2.
    """
    sizes = tuple(int(n) for n in sizes)
    kind = rng.integers(0 if contiguous_ok else 1, 4)
    nd = len(sizes)
    if kind == 0:
        parent, start = sizes, (0,) * nd
        order = list(range(nd))
        step = 1
    else:
        pad = tuple(int(rng.integers(0, 3)) for _ in sizes)
        parent = tuple(n + p for n, p in zip(sizes, pad))
        start = tuple(int(rng.integers(0, p + 1)) for p in pad)
        order = list(rng.permutation(nd)) if kind == 2 else list(range(nd))
        step = 2 if kind == 3 else 1
    # parent storage laid out in `order`, innermost last
    strides = [0] * nd
    acc = step
    for d in reversed(order):
        strides[d] = acc
        acc *= parent[d]
    lead = int(rng.integers(0, 5))
    storage = Storage(lead + acc + int(rng.integers(0, 3)))
    storage.data[:] = rng.uniform(-4, 4, storage.length).astype(np.float32)
    offset = lead + sum(s * st for s, st in zip(start, strides))
    return Tensor(storage, offset, sizes, tuple(strides))


def random_sizes(rng: np.random.Generator, max_dims=4, max_size=6):
    return tuple(int(n) for n in rng.integers(1, max_size + 1, int(rng.integers(1, max_dims + 1))))


APPLY_EXPRESSIONS = {
    1: ["x = x * 2", "x = -x + s", "x = abs(x) / (x * x + 1)", "x = max(x, 0)",
        "x = sqrt(abs(x)) - s", "x = s"],
    2: ["x = x + y", "x = x * y - s", "x = min(x, y) / 3", "x = (x - y) * (x + y)"],
    3: ["x = x * y + z", "x = max(min(x, y), z)", "x = (x + y + z) / 3 * s"],
}


def rel_err(got, ref) -> float:
    got = np.asarray(got, dtype=np.float64)
    ref = np.asarray(ref, dtype=np.float64)
    scale = np.max(np.abs(ref)) if ref.size else 0.0
    diff = np.max(np.abs(got - ref)) if ref.size else 0.0
    return float(diff / scale) if scale > 0 else float(diff)


def random_geometry(rng: np.random.Generator, *, winograd=False, max_batch=4):
    """Desk-scale geometry: N<=4, C,K<=8, H,W<=16, k in {1,3,5}, stride {1,2}, pad {0,1,2}."""
    from portten import ConvGeometry

    while True:
        kh, kw = (3, 3) if winograd else (int(rng.choice([1, 3, 5])), int(rng.choice([1, 3, 5])))
        sh, sw = (1, 1) if winograd else (int(rng.integers(1, 3)), int(rng.integers(1, 3)))
        ph, pw = int(rng.integers(0, 3)), int(rng.integers(0, 3))
        h, w = int(rng.integers(1, 17)), int(rng.integers(1, 17))
        if kh <= h + 2 * ph and kw <= w + 2 * pw:
            return ConvGeometry(int(rng.integers(1, max_batch + 1)), int(rng.integers(1, 9)), h, w,
                                int(rng.integers(1, 9)), kh, kw, ph, pw, sh, sw)


def conv_operands_random(rng: np.random.Generator, geom, scale=1.0):
    x = rng.uniform(-1, 1, geom.input_shape).astype(np.float32)
    w = (scale * rng.uniform(-1, 1, geom.weight_shape)).astype(np.float32)
    b = rng.uniform(-1, 1, geom.out_channels).astype(np.float32)
    return x, w, b


def brute_conv(x, w, b, geom) -> np.ndarray:
    """Scalar loops straight from the cross-correlation definition, in float64."""
    out = np.zeros(geom.output_shape)
    for n in range(geom.batch):
        for k in range(geom.out_channels):
            for i in range(geom.out_h):
                for j in range(geom.out_w):
                    acc = 0.0 if b is None else float(b[k])
                    for c in range(geom.in_channels):
                        for r in range(geom.kernel_h):
                            for s in range(geom.kernel_w):
                                h = i * geom.stride_h + r - geom.pad_h
                                v = j * geom.stride_w + s - geom.pad_w
                                if 0 <= h < geom.in_h and 0 <= v < geom.in_w:
                                    acc += float(x[n, c, h, v]) * float(w[k, c, r, s])
                    out[n, k, i, j] = acc
    return out


def brute_im2col(image, geom) -> np.ndarray:
    """Receptive fields enumerated one output position at a time."""
    cols = np.zeros(geom.col_shape, dtype=np.float32)
    for i in range(geom.out_h):
        for j in range(geom.out_w):
            row = 0
            for c in range(geom.in_channels):
                for r in range(geom.kernel_h):
                    for s in range(geom.kernel_w):
                        h = i * geom.stride_h + r - geom.pad_h
                        v = j * geom.stride_w + s - geom.pad_w
                        if 0 <= h < geom.in_h and 0 <= v < geom.in_w:
                            cols[row, i * geom.out_w + j] = image[c, h, v]
                        row += 1
    return cols
