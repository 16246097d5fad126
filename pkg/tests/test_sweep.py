import csv
import json
import math

import numpy as np
import pytest

import abeigen.sweep as sw
from abeigen.errors import ContractError, GeometryError
from abeigen.geometry import CutoffSpec, DomainSpec, PoleFluxParams
from abeigen.eigensolver import solve_eigs
from abeigen.mesh import RefinementSpec, build_mesh, morph_mesh
from abeigen.operator import assemble_branch_cut
from abeigen.sweep import (SweepPlan, SweepRecord, bessel_zeros, boundary_limit_check,
                           dirichlet_eigenvalues, isolation_check, max_jumps, solve_point,
                           sweep, write_csv, write_jsonl, write_long_csv)

SQ = DomainSpec.square()


def test_bessel_zeros_oracle():
    np.testing.assert_allclose(bessel_zeros(0, 2), [2.404825557695773, 5.520078110286311],
                               rtol=1e-12)
    np.testing.assert_allclose(bessel_zeros(0.5, 3), [math.pi, 2 * math.pi, 3 * math.pi],
                               rtol=1e-12)
    assert bessel_zeros(1.5, 1)[0] == pytest.approx(4.493409457909064, rel=1e-12)
    assert bessel_zeros(2.5, 1)[0] == pytest.approx(5.763459196894550, rel=1e-12)


def test_dirichlet_eigenvalues():
    np.testing.assert_allclose(dirichlet_eigenvalues(SQ, 4),
                               math.pi ** 2 * np.array([2, 5, 5, 8]))
    d = dirichlet_eigenvalues(DomainSpec.disk(), 3)
    assert d[0] == pytest.approx(2.404825557695773 ** 2)
    assert d[1] == d[2]
    with pytest.raises(GeometryError):
        dirichlet_eigenvalues(DomainSpec.sector(), 1)


def test_empty_plan():
    assert sweep(SweepPlan(SQ, [])) == []
    assert max_jumps([]).size == 0


def test_plan_constructors():
    line = SweepPlan.line(SQ, (0, 0), (0.3, 0.3), 6)
    assert len(line.points) == 7
    assert line.points[-1] == ((0.3, 0.3), 0.5)
    g = SweepPlan.grid(SQ, (0, 0), 0.5, 0.05, 0.05, 3)
    assert len(g.points) == 27 and ((0.0, 0.0), 0.5) in g.points
    assert len(SweepPlan.grid(SQ, (0, 0), 0.5, 0.05, 0.05, 3, include_center=False).points) == 26
    assert ((0.0, 0.0), 0.5) in SweepPlan.grid(SQ, (0, 0), 0.5, 0.05, 0.05, 2).points


def test_plan_validation():
    with pytest.raises(GeometryError):
        SweepPlan.line(SQ, (0, 0), (0.48, 0), 3).validate()
    with pytest.raises(GeometryError):
        SweepPlan.line(SQ, (0, 0), (0.7, 0), 3).validate()


def test_alpha_path_symmetric_and_continuous():
    alphas = np.linspace(0.1, 0.9, 9)
    recs = sweep(SweepPlan.alpha_path(SQ, (0.0, 0.0), alphas, k=4))
    L = np.array([r.lambdas for r in recs])
    np.testing.assert_allclose(L, L[::-1], rtol=1e-10)
    assert np.all(max_jumps(recs) < 0.2 * L.max())


def test_diagonal_reflection_symmetry():
    a = solve_point(SQ, (0.2, 0.1), 0.5, 4).lambdas
    b = solve_point(SQ, (0.1, 0.2), 0.5, 4).lambdas
    np.testing.assert_allclose(a, b, rtol=1e-3)


def test_solve_point_records_errors():
    rec = solve_point(SQ, (0.49, 0.0), 0.5, 2)
    assert rec.error and rec.error.startswith("GeometryError")
    assert rec.lambdas == []


def test_nodal_analysis():
    rec = solve_point(SQ, (0.1, 0.05), 0.5, 2, analyses=("nodal",))
    assert rec.nodal is not None and rec.nodal[0][0]["h"] == 1


def test_cache_reuse(tmp_path, monkeypatch):
    plan = SweepPlan.line(SQ, (0, 0), (0.1, 0.1), 2, k=3)
    path = tmp_path / "cache.jsonl"
    first = sweep(plan, cache_path=path)
    n_lines = len(path.read_text().splitlines())
    assert n_lines == 3

    def boom(*args, **kw):
        raise AssertionError("cache miss")

    monkeypatch.setattr(sw, "_solve_task", boom)
    again = sweep(plan, cache_path=path)
    assert [r.lambdas for r in again] == [r.lambdas for r in first]
    assert len(path.read_text().splitlines()) == n_lines


def test_workers_match_serial(monkeypatch):
    plan = SweepPlan.line(SQ, (0, 0), (0.1, 0.0), 2, k=2)
    serial = sweep(plan, workers=1)
    monkeypatch.setenv(sw.WORKERS_ENV, "2")
    par = sweep(plan)
    assert [r.lambdas for r in par] == [r.lambdas for r in serial]


def test_writers(tmp_path):
    recs = sweep(SweepPlan.line(SQ, (0, 0), (0.1, 0.0), 1, k=2))
    write_jsonl(recs, tmp_path / "r.jsonl")
    back = [SweepRecord.from_dict(json.loads(x))
            for x in (tmp_path / "r.jsonl").read_text().splitlines()]
    assert [r.lambdas for r in back] == [r.lambdas for r in recs]
    write_csv(recs, tmp_path / "r.csv")
    rows = list(csv.reader(open(tmp_path / "r.csv")))
    assert rows[0] == ["index", "a1", "a2", "alpha", "lambda1", "lambda2"] and len(rows) == 3
    write_long_csv(recs, tmp_path / "l.csv")
    rows = list(csv.reader(open(tmp_path / "l.csv")))
    assert len(rows) == 1 + 2 * 2 and rows[1][-1] == "2"


def test_continuity_modulus_shrinks():
    end = (0.3, 0.3)
    j1 = max_jumps(sweep(SweepPlan.line(SQ, (0, 0), end, 10, k=4)))
    j2 = max_jumps(sweep(SweepPlan.line(SQ, (0, 0), end, 20, k=4)))
    assert np.all(j2 < 0.7 * j1)


def test_morph_matches_rebuild(square_mesh):
    c = CutoffSpec.for_domain(SQ)
    a = np.array([0.6, 0.3]) * c.invertibility_radius
    morphed = morph_mesh(square_mesh, a, c)
    lm = solve_eigs(assemble_branch_cut(morphed, PoleFluxParams(a, 0.5)), 4).lambdas
    direct = solve_eigs(assemble_branch_cut(build_mesh(SQ, a), PoleFluxParams(a, 0.5)), 4).lambdas
    np.testing.assert_allclose(lm, direct, rtol=2e-4)


class TestBoundaryLimit:
    def test_integer_flux_is_dirichlet(self):
        for a in ((0.0, 0.0), (0.2, -0.15)):
            lam = solve_point(SQ, a, 1.0, 1).lambdas[0]
            assert lam == pytest.approx(2 * math.pi ** 2, rel=1e-3)

    def test_square_edge(self):
        tab = boundary_limit_check(SQ, 0.5, (0.5, 0.0), [0.2, 0.1], 1)
        assert tab.monotone
        assert tab.lambdas[-1] > tab.dirichlet
        assert tab.deviations[-1] < tab.deviations[0]
        json.dumps(tab.to_dict())

    def test_disk(self):
        tab = boundary_limit_check(DomainSpec.disk(), 0.5, (1.0, 0.0), [0.3, 0.15], 1)
        assert tab.dirichlet == pytest.approx(2.404825557695773 ** 2)
        assert tab.monotone and tab.deviations[-1] < tab.deviations[0]


class TestIsolation:
    def test_vacuous_grid(self):
        with pytest.raises(ContractError):
            isolation_check(SQ, n=1)

    def test_small_grid(self):
        res = isolation_check(SQ, rho_a=0.05, rho_alpha=0.05, n=3)
        assert res.verdict == "isolated"
        assert res.cone_slope > 0 and res.kappa_min > 0
        assert res.center_gap < 1e-3 * 33.5
        assert len(res.gaps) == 27

    def test_not_applicable(self):
        res = isolation_check(SQ, rho_a=0.05, rho_alpha=0.05, n=2, conditions_hold=False)
        assert res.verdict == "theorem not applicable"
