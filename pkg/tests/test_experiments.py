import math

import numpy as np
import pytest

from nonlocalfv.experiments import (
    BUILTIN_NAMES,
    ExperimentSpec,
    StudyAborted,
    builtin_datum,
    eoc,
    preset,
    run_convergence_study,
)
from nonlocalfv.measures import Grid1D, Grid2D, project_hat
from nonlocalfv.velocity import KuramotoIdentical, KuramotoNonIdentical


class TestBuiltinDatum:
    def test_parabolic_peak_value(self):
        datum, _ = builtin_datum("parabolic1d")
        assert datum.density(np.array([math.pi]))[0] == pytest.approx(
            3 / (2 * math.pi), rel=1e-14
        )

    def test_singular_atoms(self):
        datum, _ = builtin_datum("singular1d")
        assert datum.atoms == ((3 * math.pi / 4, 0.25), (5 * math.pi / 4, 0.25))

    def test_polynomial_vanishes_at_zero_frequency(self):
        datum, _ = builtin_datum("polynomial2d")
        assert datum.density(np.array([math.pi / 4]), np.array([0.0]))[0] == 0.0

    def test_piecewise_constant_levels(self):
        datum, _ = builtin_datum("piecewise_constant1d")
        vals = datum.density(np.array([math.pi, 0.1]))
        assert vals[0] == pytest.approx(2 / (3 * math.pi), rel=1e-14)
        assert vals[1] == pytest.approx(1 / (3 * math.pi), rel=1e-14)

    def test_unknown_name_lists_choices(self):
        with pytest.raises(ValueError, match="polynomial2d"):
            builtin_datum("gaussian")

    def test_default_fields(self):
        _, f1 = builtin_datum("parabolic1d")
        assert isinstance(f1, KuramotoIdentical) and f1.k == 1.0
        _, f2 = builtin_datum("polynomial2d")
        assert isinstance(f2, KuramotoNonIdentical)
        assert f2.omega_support == (0.0, 1.0)

    @pytest.mark.parametrize("name", BUILTIN_NAMES)
    @pytest.mark.parametrize("n", [32, 64, 128])
    def test_projected_mass_is_one(self, name, n):
        datum, _ = builtin_datum(name)
        if name == "polynomial2d":
            grid = Grid2D(Grid1D.torus(n), Grid1D.line(n, -0.5, 1.5))
        else:
            grid = Grid1D.torus(n)
        assert project_hat(datum, grid).total_mass() == pytest.approx(1.0, abs=1e-10)


class TestEoc:
    def test_published_rows(self):
        assert eoc(0.1351, 0.0634) == pytest.approx(1.09, abs=0.005)
        assert eoc(0.0517, 0.0258) == pytest.approx(1.00, abs=0.005)

    def test_equal_errors_give_zero(self):
        assert eoc(0.25, 0.25) == 0.0

    def test_degenerate_errors_are_undefined(self):
        assert eoc(0.0, 0.1) is None
        assert eoc(0.1, 0.0) is None
        assert eoc(-1.0, 0.1) is None


class TestSpecValidation:
    def setup_method(self):
        self.datum, self.field = builtin_datum("parabolic1d")

    def make(self, **kw):
        base = dict(
            name="x",
            datum=self.datum,
            field=self.field,
            resolutions=(16, 32),
            reference_n=64,
            t_final=0.1,
            cfl_number=0.4,
        )
        base.update(kw)
        return ExperimentSpec(**base)

    def test_reference_must_nest(self):
        with pytest.raises(ValueError, match="multiple"):
            self.make(resolutions=(24, 32), reference_n=64)

    def test_t_final_positive(self):
        with pytest.raises(ValueError, match="positive"):
            self.make(t_final=0.0)

    def test_resolutions_sorted_unique(self):
        with pytest.raises(ValueError, match="increasing"):
            self.make(resolutions=(32, 16))
        with pytest.raises(ValueError, match="increasing"):
            self.make(resolutions=(16, 16, 32))

    def test_metric_names_checked(self):
        with pytest.raises(ValueError, match="unknown metric"):
            self.make(metrics=("w2",))

    def test_w1_rejected_in_2d(self):
        datum, field = builtin_datum("polynomial2d")
        with pytest.raises(ValueError, match="1D"):
            ExperimentSpec(
                name="x",
                datum=datum,
                field=field,
                resolutions=(8, 16),
                reference_n=16,
                t_final=0.1,
                cfl_number=0.4,
                metrics=("w1", "l1"),
            )


class TestStudy:
    def small_spec(self, **kw):
        datum, field = builtin_datum("parabolic1d")
        base = dict(
            name="x",
            datum=datum,
            field=field,
            resolutions=(16, 32),
            reference_n=64,
            t_final=0.1,
            cfl_number=0.4,
        )
        base.update(kw)
        return ExperimentSpec(**base)

    def test_rows_ordered_with_blank_first_eoc(self):
        table = run_convergence_study(self.small_spec())
        assert [r.n for r in table.rows] == [16, 32]
        first, second = table.rows
        assert first.eoc == {"w1": None, "l1": None}
        assert second.eoc["w1"] is not None
        assert table.complete
        assert table.reference_n == 64

    def test_errors_decrease(self):
        table = run_convergence_study(self.small_spec())
        for metric in ("w1", "l1"):
            errs = [r.errors[metric] for r in table.rows]
            assert errs[1] < errs[0]

    def test_reference_against_itself_is_zero(self):
        table = run_convergence_study(
            self.small_spec(resolutions=(16, 32), reference_n=32)
        )
        last = table.rows[-1]
        assert last.errors["w1"] == 0.0
        assert last.errors["l1"] == 0.0
        assert last.eoc == {"w1": None, "l1": None}

    def test_empty_metrics_keep_n_column(self):
        table = run_convergence_study(self.small_spec(metrics=()))
        assert [r.n for r in table.rows] == [16, 32]
        assert all(r.errors == {} for r in table.rows)

    def test_progress_callback_sees_every_job(self):
        seen = []
        run_convergence_study(
            self.small_spec(), progress=lambda n, s: seen.append(n)
        )
        assert sorted(seen) == [16, 32, 64]

    def test_solver_failure_aborts_with_partial_rows(self):
        datum, field = builtin_datum("polynomial2d")
        spec = ExperimentSpec(
            name="leaky",
            datum=datum,
            field=field,
            resolutions=(8, 16),
            reference_n=16,
            t_final=0.1,
            cfl_number=0.4,
            metrics=("l1",),
            dt_policy="bounds",
            boundary_defect_tol=1e-3,
        )
        with pytest.raises(StudyAborted, match="resolution 8") as exc_info:
            run_convergence_study(spec)
        partial = exc_info.value.partial
        assert not partial.complete
        assert [r.n for r in partial.rows] == [16]
        assert partial.rows[0].errors["l1"] == 0.0

    def test_short_piecewise_study_first_order_in_w1(self):
        datum, field = builtin_datum("piecewise_constant1d")
        spec = ExperimentSpec(
            name="pc",
            datum=datum,
            field=field,
            resolutions=(32, 64, 128),
            reference_n=512,
            t_final=0.5,
            cfl_number=0.4,
        )
        table = run_convergence_study(spec)
        for row in table.rows[1:]:
            assert row.eoc["w1"] == pytest.approx(1.0, abs=0.2)


class TestPreset:
    def test_1d_defaults(self):
        spec = preset("parabolic1d")
        assert spec.resolutions == (32, 64, 128, 256, 512)
        assert spec.reference_n == 4096
        assert spec.metrics == ("w1", "l1")
        assert spec.dt_policy == "velocity"
        assert spec.t_final == 0.5
        assert spec.cfl_number == 0.4

    def test_2d_defaults(self):
        spec = preset("polynomial2d")
        assert spec.resolutions == (32, 64, 128, 256, 512, 1024)
        assert spec.metrics == ("l1",)
        assert spec.dt_policy == "bounds"
        assert spec.boundary_defect_tol == 0.05
        assert spec.omega_range == (-0.5, 1.5)

    def test_coupling_override(self):
        spec = preset("parabolic1d", coupling_k=0.5)
        assert spec.field.k == 0.5
        spec2d = preset("polynomial2d", coupling_k=2.0)
        assert spec2d.field.k == 2.0
        assert spec2d.field.omega_support == (0.0, 1.0)

    def test_field_overrides(self):
        spec = preset("parabolic1d", resolutions=(32, 64), reference_n=128)
        assert spec.resolutions == (32, 64)
        assert spec.reference_n == 128
