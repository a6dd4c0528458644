"""Compare the compiled and numpy element kernels.

    python benchmarks/bench_kernels.py [--cells 6400] [--order 4] [--repeat 5]

Also times one full operator application per backend.
"""
import argparse
import importlib
import os
import subprocess
import sys
import timeit

import numpy as np

from rkdg import _kernels_py
from rkdg.basis import Space


def best(fn, repeat):
    return min(timeit.repeat(fn, number=3, repeat=repeat)) / 3


def kernel_table(cells, order, repeat):
    try:
        compiled = importlib.import_module("rkdg._kernels")
    except ImportError:
        print("compiled kernels not built; only the numpy backend is available")
        compiled = None
    sp = Space("onb", order, 2, 1)
    rng = np.random.default_rng(1)
    dofs = rng.standard_normal((cells, 1, sp.basis_size))
    scale = rng.random(cells) + 0.5
    A = rng.standard_normal((cells, sp.quad.size, 1))
    vol = np.full(cells, 1.0 / cells)
    cases = {
        "cell_eval": lambda k: k.cell_eval(dofs, sp.V, scale),
        "cell_test": lambda k: k.cell_test(A, sp.V),
        "modal_values": lambda k: k.modal_values(dofs, order, 2, vol),
    }
    print(f"{'kernel':<14}{'numpy [ms]':>12}{'cython [ms]':>13}{'speed-up':>10}")
    for name, call in cases.items():
        reps = 1 if name == "modal_values" else repeat
        t_py = best(lambda: call(_kernels_py), reps)
        if compiled is None:
            print(f"{name:<14}{1e3 * t_py:12.3f}{'-':>13}{'-':>10}")
            continue
        a, b = call(_kernels_py), call(compiled)
        assert np.allclose(a, b, rtol=1e-10, atol=1e-12), name
        t_cy = best(lambda: call(compiled), repeat)
        print(f"{name:<14}{1e3 * t_py:12.3f}{1e3 * t_cy:13.3f}{t_py / t_cy:10.2f}")


OPERATOR = """
import timeit
from rkdg import kernels
from rkdg.basis import Space
from rkdg.dgop import SpatialOperator, interpolate
from rkdg.models import advection_model
m = advection_model()
n = {n}
mesh = m.domain.make_mesh((n, n))
sp = Space("onb", {k}, 2, 1)
U = interpolate(sp, mesh, m.U0)
op = SpatialOperator(m, sp, mesh, limiter="{lim}")
op.apply(U)
t = min(timeit.repeat(lambda: op.apply(U), number=3, repeat={r})) / 3
print(kernels.BACKEND, t)
"""


def operator_table(cells, order, repeat):
    n = int(round(np.sqrt(cells)))
    print(f"\nSpatialOperator.apply, three-body problem, {n}x{n} cells, k={order}")
    for lim in ("none", "default", "default_plus_scaling"):
        res = {}
        for pure in (True, False):
            env = dict(os.environ)
            env.pop("RKDG_PURE_PYTHON", None)
            if pure:
                env["RKDG_PURE_PYTHON"] = "1"
            code = OPERATOR.format(n=n, k=order, lim=lim, r=repeat)
            out = subprocess.run([sys.executable, "-c", code], env=env, capture_output=True, text=True, check=True)
            backend, t = out.stdout.split()
            res[backend] = float(t)
        line = "  ".join(f"{b} {1e3 * t:8.2f} ms" for b, t in res.items())
        print(f"  limiter={lim:<22}{line}")


def main():
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("--cells", type=int, default=6400)
    p.add_argument("--order", type=int, default=4)
    p.add_argument("--repeat", type=int, default=5)
    args = p.parse_args()
    kernel_table(args.cells, args.order, args.repeat)
    operator_table(args.cells, args.order, args.repeat)


if __name__ == "__main__":
    main()
