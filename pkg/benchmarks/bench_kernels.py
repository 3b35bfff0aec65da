"""Time the compiled kernels against the numpy fallback.

Usage: python3 benchmarks/bench_kernels.py [--repeat N]
"""

import argparse
import timeit

import numpy as np

from treefusion import _pykernels
from treefusion.model import validate_tree

try:
    from treefusion import _kernels
except ImportError:  # extension not built
    _kernels = None


def _problem(seed=0, n=64, atoms=200, S=4):
    rng = np.random.default_rng(seed)
    X = rng.standard_normal((n * S, atoms))
    X /= np.linalg.norm(X[:n], axis=0)
    y = rng.standard_normal(n * S)
    row_offsets = np.arange(0, n * S + 1, n, dtype=np.intp)
    tree = validate_tree([{1}, {2}, {1, 2}, {3}, {4}, {3, 4}, {1, 2, 3, 4}], [1.0] * 7, S)
    members, offsets, weights = tree.csr()
    sig = np.linalg.norm(X[:n], 2) ** 2
    for s in range(1, S):
        sig = max(sig, np.linalg.norm(X[s * n:(s + 1) * n], 2) ** 2)
    return dict(X=X, y=y, row_offsets=row_offsets, members=members, offsets=offsets,
                weights=weights, step=1.0 / sig, V=rng.standard_normal((atoms, S)))


def _cases(mod, p):
    S = p["V"].shape[1]
    A0 = np.zeros_like(p["V"])
    return {
        "prox_tree_rows": lambda: mod.prox_tree_rows(
            p["V"], p["members"], p["offsets"], p["weights"], 0.3),
        "tree_penalty": lambda: mod.tree_penalty(p["V"], p["members"], p["offsets"], p["weights"]),
        "fista(200 it)": lambda: mod.fista(
            p["X"], p["y"], p["row_offsets"], np.ones(S), p["members"], p["offsets"],
            p["weights"], 0.05, A0, p["step"], False, 0.5, 200, 1e-300, 5),
    }


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=5)
    args = ap.parse_args()
    p = _problem()
    backends = [("python", _pykernels)] + ([("compiled", _kernels)] if _kernels else [])
    results = {name: {k: min(timeit.repeat(f, number=1, repeat=args.repeat))
                      for k, f in _cases(mod, p).items()} for name, mod in backends}
    print(f"{'kernel':<16}" + "".join(f"{n:>14}" for n, _ in backends) + "   speedup")
    for k in results["python"]:
        row = f"{k:<16}" + "".join(f"{results[n][k] * 1e3:>12.3f}ms" for n, _ in backends)
        if _kernels:
            row += f"   {results['python'][k] / results['compiled'][k]:7.1f}x"
        print(row)
    if _kernels is None:
        print("compiled extension not available; only the fallback was timed")


if __name__ == "__main__":
    main()
