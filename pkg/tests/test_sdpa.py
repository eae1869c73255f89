import numpy as np

from pmi_relax import bench
from pmi_relax.cone import build_dense
from pmi_relax.sdp import SdpBlock, SdpProblem, assemble_by_points, export_sdpa, plan_samples, read_sdpa, solve_ipm


def _same(a: SdpProblem, b: SdpProblem):
    assert a.block_sizes == b.block_sizes
    assert np.array_equal(a.b, b.b)
    assert np.array_equal(a.B, b.B) and np.array_equal(a.c_free, b.c_free)
    for x, y in zip(a.blocks, b.blocks):
        assert np.array_equal(x.A, y.A)
        assert np.array_equal(x.objective_matrix(), y.objective_matrix())


def test_lambda0_round_trip(tmp_path):
    sdp = SdpProblem([SdpBlock(1, np.ones((1, 1, 1)), label="lambda0")], [1.0], B=[[1.0]], c_free=[-1.0])
    path = export_sdpa(sdp, tmp_path / "t.dat-s")
    text = path.read_text().splitlines()
    assert text[0].split()[0] == "1" and text[1].split()[0] == "2"
    back = read_sdpa(path)
    _same(sdp, back)
    assert back.blocks[0].label == "lambda0"


def test_corrmat_round_trip_solve(tmp_path):
    p = bench.gen_corrmat(5)
    cone = build_dense(p, 2)
    sdp = assemble_by_points(cone, p.objective, plan_samples(p.n, 2))
    path = export_sdpa(sdp, tmp_path / "c.dat-s")
    back = read_sdpa(path)
    _same(sdp, back)
    a, b = solve_ipm(sdp), solve_ipm(back)
    assert abs(a.r[0] + 10) <= 1e-3
    assert abs(a.r[0] - b.r[0]) <= 1e-7


def test_export_deterministic(tmp_path):
    p = bench.gen_chain(3)
    sdp = assemble_by_points(build_dense(p, 2), p.objective, plan_samples(3, 2))
    a = export_sdpa(sdp, tmp_path / "a.dat-s").read_text()
    b = export_sdpa(sdp, tmp_path / "b.dat-s").read_text()
    assert a == b


def test_plain_file_without_sidecar(tmp_path):
    path = tmp_path / "plain.dat-s"
    path.write_text('"plain"\n1\n1\n-2 \n3.0\n0 1 1 1 1.0\n1 1 1 1 1.0\n1 1 2 2 1.0\n')
    sdp = read_sdpa(path)
    assert sdp.block_sizes == [1, 1] and sdp.n_free == 0
    res = solve_ipm(sdp)
    assert abs(res.primal_objective + 3.0) < 1e-6
