"""Compare the compiled kernels against the numpy fallback.

    python3 benchmarks/bench_kernels.py [--repeat 5] [--batch 100] [--json out.json]

Each case is timed with both backends on identical inputs.  Outputs are
checked for bit equality before any timing is reported.
"""
import argparse
import json
import platform
import sys
import timeit

import numpy as np

from adslice.tensor import ConvGeometry, _backend, conv2d_backward, conv2d_forward, maxpool_forward
from adslice.tensor.ops import maxpool_backward


def cases(batch):
    rng = np.random.default_rng(0)
    # layer shapes of the desk-scale deep ConvNet plus one full-size 300x300 block
    for c_in, c_out, size in ((1, 4, 64), (4, 8, 32), (8, 16, 16), (16, 32, 8), (1, 4, 300)):
        n = batch if size < 300 else max(1, batch // 10)
        x = rng.uniform(size=(n, c_in, size, size))
        w = rng.normal(size=(c_out, c_in, 3, 3))
        b = rng.normal(size=c_out)
        conv, pool = ConvGeometry.same(3), ConvGeometry.square(2, 2)
        y, cols = conv2d_forward(x, w, b, conv, return_cols=True)
        g = rng.normal(size=y.shape)
        p, arg = maxpool_forward(y, pool)
        gp = rng.normal(size=p.shape)
        tag = f"{n}x{c_in}x{size}x{size}->{c_out}"
        dims = (3, 3, 1, 1, 1, 1, size, size)
        yield f"im2col     {tag}", lambda x=x: _backend.kernels.im2col(x, *dims)
        yield f"col2im     {tag}", lambda cols=cols, s=x.shape: _backend.kernels.col2im(cols, *s, *dims)
        yield f"conv fwd   {tag}", lambda x=x, w=w, b=b: conv2d_forward(x, w, b, conv)
        yield f"conv bwd   {tag}", lambda g=g, x=x, w=w, cols=cols: conv2d_backward(g, x, w, conv, cols=cols)
        yield f"pool fwd   {tag}", lambda y=y: maxpool_forward(y, pool)
        yield f"pool bwd   {tag}", lambda gp=gp, arg=arg, s=y.shape: maxpool_backward(gp, arg, s)


def _flatten(result):
    if isinstance(result, tuple):
        return [a for r in result for a in _flatten(r)]
    return [result]


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=5)
    ap.add_argument("--batch", type=int, default=100)
    ap.add_argument("--json", help="also write results to this file")
    args = ap.parse_args(argv)
    if not _backend.compiled_available:
        sys.exit("compiled kernels are not built; run `pip install -e . --no-build-isolation` first")

    rows = []
    for name, fn in cases(args.batch):
        times, outs = {}, {}
        for backend in ("numpy", "cython"):
            _backend.use_backend(backend)
            outs[backend] = _flatten(fn())
            number = max(1, int(0.2 / max(timeit.timeit(fn, number=1), 1e-6)))
            best = min(timeit.repeat(fn, number=number, repeat=args.repeat)) / number
            times[backend] = best
        same = all(np.array_equal(a, b) for a, b in zip(outs["numpy"], outs["cython"]))
        if not same:
            sys.exit(f"{name}: backends disagree")
        rows.append({"case": name, "numpy_ms": times["numpy"] * 1e3, "cython_ms": times["cython"] * 1e3,
                     "speedup": times["numpy"] / times["cython"]})
    _backend.use_backend("cython")

    print(f"python {platform.python_version()}, numpy {np.__version__}, best of {args.repeat}")
    print(f"{'case':<34}{'numpy ms':>10}{'cython ms':>11}{'speedup':>9}")
    for r in rows:
        print(f"{r['case']:<34}{r['numpy_ms']:>10.3f}{r['cython_ms']:>11.3f}{r['speedup']:>8.2f}x")
    if args.json:
        with open(args.json, "w") as fh:
            json.dump(rows, fh, indent=2)


if __name__ == "__main__":
    main()
