import json
import subprocess
import sys
import os

import numpy as np
import pytest

from conftest import O1, O2
from ordelic._kernels import (
    _node_root_batch_np,
    _region_index_batch_np,
    _roe_batch_np,
    backend_name,
    node_root_batch,
    region_index_batch,
    roe_batch,
)
from ordelic.simplex import sample_simplex

GRID = np.array([0.0, 0.5, 1.0, 2.0, 3.0])
NODES = np.array([
    [0.0, 1.0, 1.0, 1.0, 2.0],
    [-3.0, -3.0, 0.0, 0.5, 1.75],
    [-2.5, -2.0, -1.75, -1.5, 0.0],
])
NORMALS = np.stack([O1, O2])


def test_backend_name_is_known():
    assert backend_name() in ("numba", "numpy")


class TestBackendAgreement:
    """The dispatched kernels must agree exactly with the numpy reference."""

    def test_node_root(self):
        probs = sample_simplex(3, 5000, seed=60)
        got = node_root_batch(GRID, NODES, probs)
        ref = _node_root_batch_np(GRID, NODES, probs)
        assert np.allclose(got, ref, atol=1e-12)

    def test_node_root_flat_interval(self):
        # expectation flat at zero over [0, 1]: midpoint root
        bp = np.array([0.0, 1.0])
        nodes = np.array([[0.0, 0.0]])
        probs = np.array([[1.0]])
        assert node_root_batch(bp, nodes, probs)[0] == pytest.approx(0.5)
        assert _node_root_batch_np(bp, nodes, probs)[0] == pytest.approx(0.5)

    def test_node_root_outside_grid(self):
        # all node expectations positive: root on the unit-slope left tail
        bp = np.array([0.0, 1.0])
        nodes = np.array([[2.0, 3.0]])
        probs = np.array([[1.0]])
        assert node_root_batch(bp, nodes, probs)[0] == pytest.approx(-2.0)
        nodes = np.array([[-3.0, -2.0]])
        assert node_root_batch(bp, nodes, probs)[0] == pytest.approx(3.0)

    def test_roe(self):
        probs = sample_simplex(3, 5000, seed=61)
        got = roe_batch(NORMALS, probs)
        ref = _roe_batch_np(NORMALS, probs)
        assert np.allclose(got, ref, atol=1e-15)

    def test_region_index(self):
        probs = sample_simplex(3, 5000, seed=62)
        got = region_index_batch(NORMALS, probs)
        ref = _region_index_batch_np(NORMALS, probs)
        assert np.array_equal(got, ref)
        assert got.dtype.kind == "i"

    def test_roe_degenerate_denominator_raises(self):
        # opposed consecutive normals make the straddling denominator negative
        bad = np.stack([-O1, O1])
        p = np.array([[0.05, 0.9, 0.05]])
        assert float(p[0] @ O1) > 0  # ensures the middle branch is taken
        with pytest.raises(FloatingPointError):
            roe_batch(bad, p)
        with pytest.raises(FloatingPointError):
            _roe_batch_np(bad, p)


SNIPPET = """
import json
import numpy as np
from ordelic._kernels import backend_name, node_root_batch, roe_batch
bp = np.array([0.0, 0.5, 1.0, 2.0, 3.0])
nodes = np.array({nodes})
normals = np.array({normals})
probs = np.array([[0.2, 0.5, 0.3], [0.7, 0.2, 0.1], [0.1, 0.1, 0.8]])
print(json.dumps({{
    "backend": backend_name(),
    "roots": node_root_batch(bp, nodes, probs).tolist(),
    "roe": roe_batch(normals, probs).tolist(),
}}))
"""


def _run_with_env(flag: str | None):
    env = dict(os.environ)
    if flag is None:
        env.pop("ORDELIC_NUMBA", None)
    else:
        env["ORDELIC_NUMBA"] = flag
    code = SNIPPET.format(nodes=NODES.tolist(), normals=NORMALS.tolist())
    out = subprocess.run([sys.executable, "-c", code], capture_output=True,
                         text=True, env=env, check=True)
    return json.loads(out.stdout)


class TestEnvFlag:
    def test_disabled_flag_selects_numpy(self):
        res = _run_with_env("0")
        assert res["backend"] == "numpy"
        res2 = _run_with_env("off")
        assert res2["backend"] == "numpy"

    def test_both_backends_same_values(self):
        a = _run_with_env("0")
        b = _run_with_env(None)
        assert np.allclose(a["roots"], b["roots"], atol=1e-12)
        assert np.allclose(a["roe"], b["roe"], atol=1e-15)
