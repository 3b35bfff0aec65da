import numpy as np
import pytest
from hypothesis import strategies as st

from treefusion import _pykernels
from treefusion._backend import COMPILED
from treefusion.model import MultimodalSample, build_dictionary, validate_tree

try:
    from treefusion import _kernels
except ImportError:  # extension not built
    _kernels = None

BACKENDS = [pytest.param(_pykernels, id="python")]
if _kernels is not None:
    BACKENDS.append(pytest.param(_kernels, id="compiled"))


@pytest.fixture(params=BACKENDS)
def backend(request):
    return request.param


def random_tree(rng, S, root=None):
    """Random laminar group family covering ``S`` modalities."""
    groups = []

    def split(items):
        if len(items) == 1:
            return
        k = int(rng.integers(2, len(items) + 1))
        cuts = np.sort(rng.choice(np.arange(1, len(items)), size=k - 1, replace=False))
        for part in np.split(np.asarray(items), cuts):
            part = [int(x) for x in part]
            if rng.random() < 0.6:
                groups.append(part)
            split(part)

    items = list(rng.permutation(np.arange(1, S + 1)))
    split(items)
    covered = {m for g in groups for m in g}
    if root if root is not None else (rng.random() < 0.8 or covered != set(range(1, S + 1))):
        groups.append(list(range(1, S + 1)))
    weights = rng.uniform(0.2, 2.0, size=len(groups))
    return validate_tree(groups, weights, S)


def random_problem(rng, n=8, N=16, S=3, C=None, noise=0.0):
    """Random dictionary with unit columns plus a random sample."""
    C = C or max(2, N // 4)
    counts = np.full(C, N // C)
    counts[: N - counts.sum()] += 1
    per_class = [[rng.standard_normal((k, n)) for _ in range(S)] for k in counts]
    D = build_dictionary(per_class)
    y = MultimodalSample(tuple(rng.standard_normal(n) for _ in range(S)))
    return D, y


@st.composite
def trees(draw, max_s=4):
    seed = draw(st.integers(0, 2**32 - 1))
    S = draw(st.integers(1, max_s))
    return random_tree(np.random.default_rng(seed), S)


def pytest_report_header(config):
    return f"treefusion backend: {'compiled' if COMPILED else 'python'}"


# acceptance criteria report: one line per criterion at the end of the run
ACCEPTANCE: dict = {}


def record_acceptance(key: str, passed: bool, detail: str) -> None:
    line = f"{key} {'PASS' if passed else 'FAIL'}: {detail}"
    ACCEPTANCE[key] = line
    print(line)


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE:
        terminalreporter.section("acceptance criteria")
        for key in sorted(ACCEPTANCE, key=lambda k: int(k.split("-")[1])):
            terminalreporter.write_line(ACCEPTANCE[key])
