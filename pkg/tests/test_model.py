import json

import numpy as np
import pytest

from pmi_relax import bench
from pmi_relax.model import (EmptySetError, PmiProblem, ProblemFormatError, ProblemKind, load_problem,
                             problem_from_json, sample_feasible, save_problem, scale_for_contraction)
from pmi_relax.poly import PolyMatrix

from conftest import const, var


def test_example1_file_is_linear(tmp_path):
    p = bench.gen_example1(1)
    path = tmp_path / "ex1.json"
    save_problem(p, path)
    q = load_problem(path)
    assert q.kind is ProblemKind.LINEAR
    assert q.n == 3 and [b.q for b in q.blocks] == [1, 2]
    assert q.objective == p.objective
    assert all(a.matrix == b.matrix for a, b in zip(p.blocks, q.blocks))
    assert q.content_hash() == p.content_hash()


def test_trivial_problem(tmp_path):
    data = {"n": 1, "objective": [], "blocks": [{"q": 1, "entries": [{"i": 1, "j": 1, "p": [{"c": 1, "e": [0]}]}]}]}
    p = problem_from_json(data)
    assert p.kind is ProblemKind.LINEAR
    assert p.is_feasible([0.3])


@pytest.mark.parametrize("gen", [lambda: bench.gen_example2("original"), lambda: bench.gen_chain(4),
                                 lambda: bench.gen_corrmat(4), lambda: bench.gen_random(3, 2, 2, seed=5)])
def test_round_trip(tmp_path, gen):
    p = gen()
    save_problem(p, tmp_path / "p.json")
    q = load_problem(tmp_path / "p.json")
    assert q.objective == p.objective and q.box == p.box
    assert [b.matrix for b in q.blocks] == [b.matrix for b in p.blocks]


@pytest.mark.parametrize("mutate, message", [
    (lambda d: d.update(extra=1), "unknown key"),
    (lambda d: d["blocks"][1]["entries"].append({"i": 2, "j": 1, "p": []}), "non-symmetric"),
    (lambda d: d["objective"].append({"c": 1.0, "e": [1]}), "variable-count mismatch"),
    (lambda d: d["blocks"][0].update(q=0), "positive integer"),
    (lambda d: d.update(box=[[0, 1]]), "intervals"),
])
def test_malformed_rejected(mutate, message):
    data = bench.gen_example1(1).to_json()
    mutate(data)
    with pytest.raises(ProblemFormatError, match=message):
        problem_from_json(json.loads(json.dumps(data)))


def test_kind_inference():
    x = var(2, 0)
    lin = PmiProblem.from_matrices(x, [PolyMatrix.scalar(1 - x)])
    non = PmiProblem.from_matrices(x, [PolyMatrix.scalar(1 - x * x)])
    assert lin.kind is ProblemKind.LINEAR and non.kind is ProblemKind.NONLINEAR


def test_scaling_override_example2():
    p = bench.gen_example2("original")
    # undo the stored 8/9 factor, then scale back by the user bound
    H = [b.matrix * (9.0 / 8.0) for b in p.blocks]
    raw = PmiProblem.from_matrices(p.objective, H, box=p.box)
    scaled, rep = scale_for_contraction(raw, {0: 9.0 / 8.0})
    assert rep.methods == ("user-supplied",)
    pts = np.random.default_rng(0).uniform(0, 1.2, (20, 2))
    assert np.allclose(scaled.blocks[0].matrix.evaluate_many(pts), p.blocks[0].matrix.evaluate_many(pts), atol=1e-14)


def test_scaling_unit_override_is_identity():
    p = bench.gen_example2("original")
    scaled, _ = scale_for_contraction(p, [1.0])
    assert scaled.blocks[0].matrix == p.blocks[0].matrix


def test_scaling_sample_estimate():
    p = bench.gen_example2("original")
    H = [b.matrix * (9.0 / 8.0) for b in p.blocks]
    raw = PmiProblem.from_matrices(p.objective, H, box=p.box)
    with pytest.warns(UserWarning, match="valid only if"):
        scaled, rep = scale_for_contraction(raw, samples=10**5, seed=0)
    assert 9 / 8 * 0.98 <= rep.bounds[0] <= 9 / 8 * 1.05


def test_scaling_preserves_feasibility():
    p = bench.gen_example2("original")
    scaled, _ = scale_for_contraction(p, [2.0])
    pts = np.random.default_rng(0).uniform(0, 1.2, (2000, 2))
    assert np.array_equal(p.min_eigenvalues(pts) >= 0, scaled.min_eigenvalues(pts) >= 0)


def test_sample_feasible_example1():
    p = bench.gen_example1(1)
    pts = sample_feasible(p, 100, seed=0)
    assert pts.shape == (100, 3)
    G = p.blocks[1].matrix.evaluate_many(pts)
    assert (np.linalg.eigvalsh(G)[:, 0] >= -1e-10).all()
    assert (pts[:, 2] <= 1 + 1e-12).all()


def test_sample_feasible_whole_box():
    p = PmiProblem.from_matrices(const(1, 0.0), [PolyMatrix.scalar(const(1, 1.0))])
    pts = sample_feasible(p, 50, seed=3, batch=50)
    assert pts.shape == (50, 1)


def test_sample_feasible_example2_first_quadrant():
    p = bench.gen_example2("original")
    pts = sample_feasible(p, 200, seed=1)
    x, y = pts[:, 0], pts[:, 1]
    g3 = 2.5 * x * y - x ** 2 - y ** 2 - x ** 2 * y ** 2
    assert (pts >= 0).all() and (g3 >= -1e-9).all()


def test_sample_feasible_empty():
    x = var(1, 0)
    p = PmiProblem.from_matrices(x, [PolyMatrix.scalar(-1 - x * x)])
    with pytest.raises(EmptySetError, match="empty or thin"):
        sample_feasible(p, 1, max_draws=10**5)
