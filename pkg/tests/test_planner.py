import numpy as np
import pytest

from hytl import autodiff as ad
from hytl.planner import PlannerConfig, WaypointPolicy, advance, planner_loss
from oracles import assert_grads_close, finite_difference_grads


def make_policy(seed=0, **overrides):
    cfg = PlannerConfig(
        state_dim=overrides.pop("state_dim", 4),
        hidden_dim=overrides.pop("hidden_dim", 8),
        n_waypoints=overrides.pop("n_waypoints", 3),
        waypoint_dim=overrides.pop("waypoint_dim", 3),
        **overrides,
    )
    return WaypointPolicy(cfg, np.random.default_rng(seed))


S0 = np.array([0.3, 0.5, 0.8, 0.0])


class TestSamplePlan:
    def test_vanishing_sigma_collapses_to_mean_chain(self):
        policy = make_policy(seed=1)
        policy.store["plan/sigma_b"].data[:] = -20.0
        sampled = policy.sample_plan(S0, rng=np.random.default_rng(2))
        mean_chain = policy.sample_plan(S0, deterministic=True)
        assert np.allclose(sampled.waypoints, mean_chain.waypoints, atol=1e-6)

    def test_zero_delta_head_gives_residual_identity_chain(self):
        # The delta head initializes to zero, so the noiseless chain repeats w0.
        policy = make_policy(seed=3)
        plan = policy.sample_plan(S0, deterministic=True)
        assert np.array_equal(plan.waypoints[1], plan.waypoints[0])
        assert np.array_equal(plan.waypoints[2], plan.waypoints[0])

    def test_monte_carlo_mean_of_first_waypoint(self):
        policy = make_policy(seed=4, n_waypoints=1)
        rng = np.random.default_rng(5)
        mean_chain = policy.sample_plan(S0, deterministic=True)
        wbar = mean_chain.raw[0]
        n = 10_000
        samples = np.array(
            [policy.sample_plan(S0, rng=rng).raw[0] for _ in range(n)]
        )
        emp = samples.mean(axis=0)
        # within 3 sigma/sqrt(n) of the mean per dimension (use empirical sd)
        sd = samples.std(axis=0)
        assert np.all(np.abs(emp - wbar) <= 3.0 * sd / np.sqrt(n))

    def test_waypoints_clamped_but_density_taken_preclamp(self):
        policy = make_policy(seed=6)
        policy.store["plan/w0_b"].data[:] = 3.0  # push the mean far outside
        plan = policy.sample_plan(S0, rng=np.random.default_rng(7))
        assert np.all(plan.waypoints <= 1.0) and np.all(plan.waypoints >= 0.0)
        assert np.any(plan.raw > 1.0)
        assert all(np.isfinite(float(lp.data)) for lp in plan.log_probs)

    def test_log_density_integrates_to_one(self):
        # Numerical quadrature of exp(log-density) over a wide grid.
        policy = make_policy(seed=8, waypoint_dim=1, n_waypoints=1)
        rng = np.random.default_rng(9)
        for _ in range(5):
            policy.store["plan/w0_b"].data[:] = rng.uniform(-1, 1)
            policy.store["plan/sigma_b"].data[:] = rng.uniform(-1.5, 1.0)
            mean_chain = policy.sample_plan(S0, deterministic=True)
            mu = mean_chain.raw[0, 0]
            lp0 = float(mean_chain.log_probs[0].data)
            sigma = 1.0 / np.sqrt(2.0 * np.pi) / np.exp(lp0)  # peak density inverts sigma
            xs = np.linspace(mu - 8 * sigma, mu + 8 * sigma, 1601)
            dens = np.array(
                [
                    np.exp(float(policy.plan_log_prob(S0, [[x]]).log_probs[0].data))
                    for x in xs
                ]
            )
            integral = np.trapezoid(dens, xs)
            assert integral == pytest.approx(1.0, abs=1e-6)


class TestAdvance:
    def _plan(self):
        policy = make_policy(seed=10)
        return policy.sample_plan(S0, rng=np.random.default_rng(11))

    def test_increments_when_reached(self):
        plan = self._plan()
        assert advance(plan, plan.waypoints[0], 0.05).active == 1

    def test_unchanged_when_far(self):
        plan = self._plan()
        far = plan.waypoints[0] + np.array([0.5, 0.5, 0.5])
        assert advance(plan, far, 0.05).active == 0

    def test_saturates_and_holds_last_waypoint(self):
        plan = self._plan()
        for i in range(plan.n):
            plan = advance(plan, plan.waypoints[min(plan.active, plan.n - 1)], 0.05)
        assert plan.exhausted
        assert np.array_equal(plan.active_waypoint(), plan.waypoints[-1])
        again = advance(plan, plan.waypoints[-1], 0.05)
        assert again.active == plan.active

    def test_straight_line_walkthrough_visits_in_order(self):
        plan = self._plan()
        visited = []
        pos = np.array([0.5, 0.5, 0.8])
        for _ in range(400):
            if plan.exhausted:
                break
            target = plan.active_waypoint()
            step = target - pos
            dist = np.linalg.norm(step)
            pos = target if dist < 0.03 else pos + step / dist * 0.03
            before = plan.active
            plan = advance(plan, pos, 0.05)
            if plan.active != before:
                assert plan.active == before + 1  # never skips
                visited.append(before)
        assert visited == [0, 1, 2]

    def test_rejects_bad_eps(self):
        with pytest.raises(ValueError):
            advance(self._plan(), np.zeros(3), 0.0)


class TestPlannerLoss:
    def test_zero_advantage_gives_zero_loss_and_gradient(self):
        policy = make_policy(seed=12)
        plan = policy.sample_plan(S0, rng=np.random.default_rng(13))
        loss = planner_loss(plan, episode_return=1.7, baseline=1.7)
        assert float(loss.data) == 0.0
        ad.backward(loss)
        for _, g in policy.store.grads().items():
            assert np.array_equal(g, np.zeros_like(g))

    def test_positive_advantage_increases_log_probability(self):
        policy = make_policy(seed=14)
        rng = np.random.default_rng(15)
        plan = policy.sample_plan(S0, rng=rng)
        logp_before = sum(float(lp.data) for lp in plan.log_probs)
        loss = planner_loss(plan, episode_return=2.0, baseline=0.0)
        ad.backward(loss)
        ad.adam_step(policy.store, lr=1e-2)
        replayed = policy.plan_log_prob(S0, plan.raw)
        logp_after = sum(float(lp.data) for lp in replayed.log_probs)
        assert logp_after > logp_before

    def test_gradient_matches_finite_differences_teacher_forced(self):
        policy = make_policy(seed=16, hidden_dim=6)
        plan = policy.sample_plan(S0, rng=np.random.default_rng(17))
        raw = plan.raw
        arrays = {name: p.data for name, p in policy.store.items()}

        def build():
            return planner_loss(policy.plan_log_prob(S0, raw), 2.5, 0.3)

        ad.backward(build())
        grads = policy.store.grads()

        def f():
            return float(build().data)

        assert_grads_close(grads, finite_difference_grads(f, arrays))
        policy.store.zero_grads()

    def test_one_dimensional_bandit_converges(self):
        policy = make_policy(seed=18, waypoint_dim=1, n_waypoints=1, state_dim=2)
        rng = np.random.default_rng(19)
        s0 = np.array([0.1, -0.4])
        for _ in range(5000):
            plan = policy.sample_plan(s0, rng=rng)
            ret = -abs(float(plan.raw[0, 0]) - 0.7)
            loss = planner_loss(plan, ret, policy.baseline)
            ad.backward(loss)
            ad.adam_step(policy.store, lr=1e-2)
            policy.update_baseline(ret)
        mean = float(policy.sample_plan(s0, deterministic=True).raw[0, 0])
        assert abs(mean - 0.7) < 0.05

    def test_baseline_ema_decay(self):
        policy = make_policy(seed=20)
        policy.update_baseline(1.0)
        assert policy.baseline == pytest.approx(0.01)
        policy.update_baseline(1.0)
        assert policy.baseline == pytest.approx(0.0199)
