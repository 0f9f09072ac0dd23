import numpy as np
import pytest

from neuralik.kinematics import preset_chain
from neuralik.model import IkModel, ModelConfig
from neuralik.pathfollow import (Trajectory, follow_path, follow_path_best_of,
                                 generate_smooth_path, save_trajectory)


def tiny_model(chain, seed=0):
    cfg = ModelConfig.for_chain(chain, "desk", n_components=3,
                                hyper_width=16, primary_hidden=8)
    model = IkModel(cfg, np.random.default_rng(seed))
    # spread the head weights so conditionals react to their inputs
    rng = np.random.default_rng(seed + 100)
    for name in ("head.w", "head.b"):
        t = model.params[name]
        t.data = rng.normal(0, 0.1, t.data.shape)
    return model


class TestSmoothPathGeneration:
    def test_step_bound_and_fk_consistency(self):
        chain = preset_chain("planar4")
        X, Y = generate_smooth_path(chain, 40, seed=0, max_delta=0.05)
        deltas = np.abs(np.diff(Y, axis=0))
        assert deltas.max() <= 0.05 + 1e-12
        for x, y in zip(X, Y):
            np.testing.assert_allclose(chain.forward(y), x, atol=1e-12)

    def test_stays_within_limits(self):
        chain = preset_chain("digit4")
        _, Y = generate_smooth_path(chain, 100, seed=1)
        assert (Y >= chain.limits_lo).all() and (Y <= chain.limits_hi).all()

    def test_deterministic(self):
        chain = preset_chain("planar2")
        a = generate_smooth_path(chain, 20, seed=2)
        b = generate_smooth_path(chain, 20, seed=2)
        np.testing.assert_array_equal(a[0], b[0])
        np.testing.assert_array_equal(a[1], b[1])

    def test_rejects_single_step(self):
        with pytest.raises(ValueError):
            generate_smooth_path(preset_chain("planar2"), 1, seed=0)


class TestFollowPath:
    def test_per_step_joint_motion_bounded(self):
        chain = preset_chain("planar2")
        model = tiny_model(chain)
        X, Y = generate_smooth_path(chain, 30, seed=3)
        r = 0.1
        tr = follow_path(model, chain, X, Y[0], r=r, rng=np.random.default_rng(4))
        deltas = np.abs(np.diff(tr.joints, axis=0))
        assert deltas.max() <= r + 1e-12

    def test_first_step_is_the_seed(self):
        chain = preset_chain("planar2")
        model = tiny_model(chain)
        X, Y = generate_smooth_path(chain, 10, seed=5)
        tr = follow_path(model, chain, X, Y[0], rng=np.random.default_rng(6))
        np.testing.assert_array_equal(tr.joints[0], Y[0])
        assert tr.fk_errors[0] < 1e-12

    def test_online_prefix_property(self):
        """The first t steps must not depend on poses after t: truncating
        the pose sequence reproduces the trajectory prefix."""
        chain = preset_chain("planar2")
        model = tiny_model(chain)
        X, Y = generate_smooth_path(chain, 25, seed=7)
        full = follow_path(model, chain, X, Y[0], rng=np.random.default_rng(8))
        head = follow_path(model, chain, X[:10], Y[0], rng=np.random.default_rng(8))
        np.testing.assert_array_equal(full.joints[:10], head.joints)

    def test_respects_joint_limits(self):
        chain = preset_chain("digit4")
        model = tiny_model(chain, seed=1)
        X, Y = generate_smooth_path(chain, 30, seed=9)
        tr = follow_path(model, chain, X, Y[0], rng=np.random.default_rng(10))
        assert (tr.joints >= chain.limits_lo).all()
        assert (tr.joints <= chain.limits_hi).all()

    def test_deterministic_given_rng(self):
        chain = preset_chain("planar2")
        model = tiny_model(chain)
        X, Y = generate_smooth_path(chain, 15, seed=11)
        a = follow_path(model, chain, X, Y[0], rng=np.random.default_rng(12))
        b = follow_path(model, chain, X, Y[0], rng=np.random.default_rng(12))
        np.testing.assert_array_equal(a.joints, b.joints)

    def test_error_definition(self):
        chain = preset_chain("planar2")
        model = tiny_model(chain)
        X, Y = generate_smooth_path(chain, 12, seed=13)
        tr = follow_path(model, chain, X, Y[0], rng=np.random.default_rng(14))
        for t in range(len(tr)):
            want = np.linalg.norm(chain.forward(tr.joints[t]) - X[t])
            assert abs(tr.fk_errors[t] - want) < 1e-15
        assert abs(tr.mean_error - tr.fk_errors.mean()) < 1e-15


class TestBestOf:
    def test_best_is_minimum_of_runs(self):
        chain = preset_chain("planar2")
        model = tiny_model(chain)
        X, Y = generate_smooth_path(chain, 12, seed=15)
        best, runs = follow_path_best_of(model, chain, X, Y[0], k=8,
                                         rng=np.random.default_rng(16))
        assert len(runs) == 8
        assert best.mean_error == min(tr.mean_error for tr in runs)

    def test_k_of_one(self):
        chain = preset_chain("planar2")
        model = tiny_model(chain)
        X, Y = generate_smooth_path(chain, 8, seed=17)
        best, runs = follow_path_best_of(model, chain, X, Y[0], k=1,
                                         rng=np.random.default_rng(18))
        assert len(runs) == 1
        np.testing.assert_array_equal(best.joints, runs[0].joints)

    def test_rejects_zero_k(self):
        chain = preset_chain("planar2")
        model = tiny_model(chain)
        with pytest.raises(ValueError):
            follow_path_best_of(model, chain, np.zeros((3, 3)), np.zeros(2), k=0)


class TestTrajectoryFile:
    def test_csv_round_trip(self, tmp_path):
        chain = preset_chain("planar2")
        model = tiny_model(chain)
        X, Y = generate_smooth_path(chain, 6, seed=19)
        tr = follow_path(model, chain, X, Y[0], rng=np.random.default_rng(20))
        path = tmp_path / "traj.csv"
        save_trajectory(tr, path)
        rows = np.loadtxt(path, delimiter=",", skiprows=1)
        header = path.read_text().splitlines()[0]
        assert header == "t,x,y,z,joint0,joint1,fk_error_m"
        np.testing.assert_array_equal(rows[:, 0], np.arange(6))
        np.testing.assert_array_equal(rows[:, 1:4], tr.poses)
        np.testing.assert_array_equal(rows[:, 4:6], tr.joints)
        np.testing.assert_array_equal(rows[:, 6], tr.fk_errors)
