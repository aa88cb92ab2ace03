import math

import numpy as np
import pytest

from advgrasp.grasp_sim import (AdversaryAction, GraspAction, SimConfig,
                                apply_shake, apply_snatch, best_shake_dislodges,
                                grasp_contacts, grasp_feasibility_grid,
                                grasp_margin, replace_mass, run_episode,
                                shake_components, shake_severity,
                                snatch_components, snatch_geometry)
from advgrasp.scene import ObjectShape, Scene
from advgrasp.shapes import generate_object
from advgrasp.trainer import Environment, scene_from_seed
from advgrasp.datasets import records_equal

GRAVITY = 9.81
CENTER = (0.2, 0.2, 0.0)


def make_rect(w=0.08, h=0.03, mass=0.2, mu=0.6, oid="rect"):
    verts = np.array([[-w / 2, -h / 2], [w / 2, -h / 2],
                      [w / 2, h / 2], [-w / 2, h / 2]])
    return ObjectShape.from_vertices(verts, mass, mu, oid)


class TestContacts:
    def test_far_from_object_absent(self):
        rect = make_rect()
        grasp = GraspAction(0.05, 0.05, 0)
        assert grasp_contacts(rect, CENTER, grasp) is None

    def test_centered_cross_grasp(self):
        # jaws perpendicular to the long axis: contacts on the long edges,
        # exactly the rectangle height apart (analytic intersection)
        rect = make_rect()
        grasp = GraspAction(0.2, 0.2, 0)     # angle 0 -> closing line along y
        contacts = grasp_contacts(rect, CENTER, grasp)
        assert contacts is not None
        assert np.allclose(sorted(contacts[:, 1]), [0.2 - 0.015, 0.2 + 0.015])
        assert np.allclose(contacts[:, 0], 0.2)
        assert abs(np.linalg.norm(contacts[0] - contacts[1]) - 0.03) < 1e-12

    def test_long_axis_grasp_exceeds_jaw_span(self):
        # closing line along the 0.08 m axis: contacts found 0.08 m apart,
        # wider than the 0.06 m jaw span, so the margin stage fails it
        rect = make_rect()
        grasp = GraspAction(0.2, 0.2, 9)     # 90 degrees -> line along x
        contacts = grasp_contacts(rect, CENTER, grasp)
        assert contacts is not None
        width = np.linalg.norm(contacts[0] - contacts[1])
        assert abs(width - 0.08) < 1e-12
        out = grasp_margin(rect, CENTER, grasp, SimConfig())
        assert not out.success and out.margin == 0.0

    def test_center_not_between_crossings_absent(self):
        # the closing line passes through the object, but the grasp center
        # sits beyond it along the line
        rect = make_rect()
        grasp = GraspAction(0.2, 0.3, 0)
        assert grasp_contacts(rect, CENTER, grasp) is None


class TestMargin:
    def test_perfect_grasp_margin_one(self):
        rect = make_rect(mass=0.2, mu=0.6)
        out = grasp_margin(rect, CENTER, GraspAction(0.2, 0.2, 0), SimConfig(grip_force=7.0))
        assert out.success
        assert out.com_offset < 1e-12
        m_f = min(1.0, 2 * 0.6 * 7.0 / (3 * 0.2 * GRAVITY))
        assert m_f == 1.0
        assert abs(out.margin - 1.0) < 1e-9

    def test_heavy_variant_margin(self):
        rect = make_rect(mass=2.0, mu=0.6, oid="rect2")
        out = grasp_margin(rect, CENTER, GraspAction(0.2, 0.2, 0), SimConfig(grip_force=7.0))
        expected = 2 * 0.6 * 7.0 / (3 * 2.0 * GRAVITY)
        assert out.success
        assert abs(out.margin - expected) / expected < 1e-6
        assert abs(expected - 0.1427) < 1e-4   # the documented value

    def test_payload_limit(self):
        rect = make_rect(mass=2.5, mu=0.6, oid="rect3")
        out = grasp_margin(rect, CENTER, GraspAction(0.2, 0.2, 0),
                           SimConfig(grip_force=35.0))
        assert not out.success and out.margin == 0.0

    def test_margin_zero_iff_failure(self):
        cfg = SimConfig()
        rng = np.random.default_rng(0)
        for seed in range(30):
            obj = generate_object(seed, "medium")
            grasp = GraspAction(float(rng.uniform(0.15, 0.25)),
                                float(rng.uniform(0.15, 0.25)),
                                int(rng.integers(18)))
            out = grasp_margin(obj, CENTER, grasp, cfg)
            assert 0.0 <= out.margin <= 1.0
            assert (out.margin > 0.0) == out.success

    def test_com_offset_reduces_margin(self):
        rect = make_rect(w=0.10, h=0.03)
        cfg = SimConfig()
        centered = grasp_margin(rect, CENTER, GraspAction(0.2, 0.2, 0), cfg)
        shifted = grasp_margin(rect, CENTER, GraspAction(0.21, 0.2, 0), cfg)
        assert centered.success and shifted.success
        assert shifted.com_offset > 0.009
        assert shifted.margin < centered.margin


class TestShake:
    def test_decode_bijection(self):
        seen = set()
        for index in range(15):
            o, d = shake_components(index)
            assert 0 <= o < 5 and 0 <= d < 3
            assert index == 3 * o + d
            seen.add((o, d))
        assert len(seen) == 15
        with pytest.raises(ValueError):
            shake_components(15)

    def test_peak_acceleration(self):
        # sinusoid peak acceleration amp * (2 pi f)^2 at 2 Hz / 25 mm
        cfg = SimConfig()
        expected = 0.025 * (2 * math.pi * 2.0) ** 2
        assert abs(cfg.shake_peak_accel() - expected) / expected < 1e-12
        assert abs(expected - 3.948) < 1e-3

    def test_severity_table(self):
        # d=0 follows |cos psi|, d=1 follows |sin psi|, d=2 is minimal
        for o, psi in enumerate((0.0, 45.0, 90.0, 135.0, 180.0)):
            rad = math.radians(psi)
            assert abs(shake_severity(3 * o + 0) - (0.25 + 0.75 * abs(math.cos(rad)))) < 1e-12
            assert abs(shake_severity(3 * o + 1) - (0.25 + 0.75 * abs(math.sin(rad)))) < 1e-12
            assert shake_severity(3 * o + 2) == 0.25

    def test_survives_worst_shake_light_object(self):
        rect = make_rect(mass=0.2, mu=0.6)
        cfg = SimConfig(grip_force=7.0)
        out = grasp_margin(rect, CENTER, GraspAction(0.2, 0.2, 0), cfg)
        accel = cfg.shake_peak_accel()
        demand = 0.2 * (GRAVITY + accel)           # sigma=1, com offset 0
        hold = 2 * 0.6 * 7.0 * out.margin
        assert abs(demand - 2.752) < 1e-3 and abs(hold - 8.4) < 1e-9
        assert not apply_shake(out, GraspAction(0.2, 0.2, 0), rect, cfg,
                               AdversaryAction("shake", 0))

    def test_dislodges_heavy_object(self):
        rect = make_rect(mass=2.0, mu=0.6, oid="rect2")
        cfg = SimConfig(grip_force=7.0)
        grasp = GraspAction(0.2, 0.2, 0)
        out = grasp_margin(rect, CENTER, grasp, cfg)
        demand = 2.0 * (GRAVITY + cfg.shake_peak_accel())
        hold = 2 * 0.6 * 7.0 * out.margin
        assert abs(demand - 27.52) < 5e-3 and abs(hold - 1.199) < 1e-3
        assert apply_shake(out, grasp, rect, cfg, AdversaryAction("shake", 0))

    def test_rejects_failed_grasp(self):
        rect = make_rect()
        cfg = SimConfig()
        out = grasp_margin(rect, CENTER, GraspAction(0.05, 0.05, 0), cfg)
        with pytest.raises(ValueError):
            apply_shake(out, GraspAction(0.05, 0.05, 0), rect, cfg,
                        AdversaryAction("shake", 0))


class TestSnatch:
    def setup_method(self):
        self.cfg = SimConfig(grip_force=7.0)
        self.rect = make_rect(w=0.10, h=0.03, mass=0.3, mu=0.6, oid="snatch-rect")
        self.grasp = GraspAction(0.2, 0.2, 0)
        self.out = grasp_margin(self.rect, CENTER, self.grasp, self.cfg)
        assert self.out.success

    def test_decode_bijection(self):
        seen = set()
        for index in range(36):
            t, r = snatch_components(index)
            assert 0 <= t < 9 and 0 <= r < 4
            assert index == 4 * t + r
            seen.add((t, r))
        assert len(seen) == 36
        with pytest.raises(ValueError):
            snatch_components(36)

    def test_geometry_grid(self):
        # center cell, aligned angle: identical grasp line
        center, angle = snatch_geometry(self.grasp, 16)   # t=4, r=0
        assert np.allclose(center, [0.2, 0.2]) and angle == self.grasp.angle
        # offsets rotate with the protagonist grasp frame
        rotated = GraspAction(0.2, 0.2, 9)                # 90 degrees
        center, _ = snatch_geometry(rotated, 4 * 5 + 0)    # t=5: +x in patch frame
        assert np.allclose(center, [0.2, 0.2 + 0.02])

    def test_center_cell_collides(self):
        action = AdversaryAction("snatch", 16)            # t=4, r=0: same line
        assert not apply_snatch(self.out, self.grasp, self.rect, CENTER,
                                self.cfg, action)

    def test_off_object_invalid(self):
        # a grasp near a short rectangle's end: the +x snatch cell lands
        # past the object, finds no contacts, and the grasp survives
        short = make_rect(w=0.05, h=0.03, mass=0.3, mu=0.6, oid="short")
        grasp = GraspAction(0.22, 0.2, 0)
        out = grasp_margin(short, CENTER, grasp, self.cfg)
        assert out.success
        action = AdversaryAction("snatch", 4 * 5 + 0)      # +x offset: off the end
        assert not apply_snatch(out, grasp, short, CENTER, self.cfg, action)

    def test_weak_hold_dislodged(self):
        # hand arithmetic for the rule pull = F_pull * q > 2*mu*grip*margin:
        # off-center protagonist grasp (weak hold) vs centered snatch (q = 1)
        grasp = GraspAction(0.22, 0.2, 0)
        out = grasp_margin(self.rect, CENTER, grasp, self.cfg)
        m_c = 1.0 - 0.02 / 0.03
        m_f = min(1.0, 2 * 0.6 * 7.0 / (3 * 0.3 * GRAVITY))
        assert abs(out.margin - m_c * m_f) < 1e-9
        hold = 2 * 0.6 * 7.0 * out.margin
        # adversary cell t=3 (-x in the patch frame) grasps through the COM
        action = AdversaryAction("snatch", 4 * 3 + 0)
        q = min(1.0, 2 * 0.6 * self.cfg.pull_force / (3 * 0.3 * GRAVITY))
        assert self.cfg.pull_force * q > hold
        assert apply_snatch(out, grasp, self.rect, CENTER, self.cfg, action)

    def test_strong_hold_survives_snatch(self):
        # centered grasp on a light object: every valid snatch pulls less
        # than the hold, and the center cells collide with the jaws
        out = grasp_margin(self.rect, CENTER, self.grasp, self.cfg)
        hold = 2 * 0.6 * 7.0 * out.margin
        assert hold > self.cfg.pull_force * 0.67   # best q is bounded by geometry
        for index in range(36):
            assert not apply_snatch(out, self.grasp, self.rect, CENTER,
                                    self.cfg, AdversaryAction("snatch", index))

    def test_rejects_failed_grasp(self):
        out = grasp_margin(self.rect, CENTER, GraspAction(0.05, 0.05, 0), self.cfg)
        with pytest.raises(ValueError):
            apply_snatch(out, GraspAction(0.05, 0.05, 0), self.rect, CENTER,
                         self.cfg, AdversaryAction("snatch", 0))


class TestMonotonicity:
    def _random_successes(self, n):
        cfg = SimConfig()
        rng = np.random.default_rng(42)
        found = []
        attempt = 0
        while len(found) < n and attempt < 40 * n:
            attempt += 1
            obj = generate_object(int(rng.integers(200)),
                                  ("easy", "medium")[int(rng.integers(2))])
            grasp = GraspAction(float(rng.uniform(0.17, 0.23)),
                                float(rng.uniform(0.17, 0.23)),
                                int(rng.integers(18)))
            out = grasp_margin(obj, CENTER, grasp, cfg)
            if out.success:
                found.append((obj, grasp, out, int(rng.integers(15))))
        return found

    def test_grip_force_monotone(self):
        # surviving at force F implies surviving at any F' > F
        cases = self._random_successes(400)
        assert len(cases) == 400
        checked = 0
        for obj, grasp, _, action_idx in cases:
            action = AdversaryAction("shake", action_idx)
            for f_lo, f_hi in ((4.0, 7.0), (7.0, 35.0), (5.0, 50.0)):
                lo_cfg = SimConfig(grip_force=f_lo)
                hi_cfg = SimConfig(grip_force=f_hi)
                out_lo = grasp_margin(obj, CENTER, grasp, lo_cfg)
                out_hi = grasp_margin(obj, CENTER, grasp, hi_cfg)
                assert out_lo.success and out_hi.success
                surv_lo = not apply_shake(out_lo, grasp, obj, lo_cfg, action)
                surv_hi = not apply_shake(out_hi, grasp, obj, hi_cfg, action)
                if surv_lo:
                    assert surv_hi
                checked += 1
        assert checked >= 1000

    def test_mass_monotone(self):
        # dislodgement is monotone non-decreasing in mass on the success domain
        cases = self._random_successes(300)
        rng = np.random.default_rng(7)
        cfg = SimConfig()
        checked = 0
        for obj, grasp, _, action_idx in cases:
            action = AdversaryAction("shake", action_idx)
            m_lo = float(rng.uniform(0.05, 1.0))
            m_hi = m_lo * float(rng.uniform(1.01, 2.0))
            o_lo = replace_mass(obj, m_lo)
            o_hi = replace_mass(obj, min(m_hi, 2.2))
            out_lo = grasp_margin(o_lo, CENTER, grasp, cfg)
            out_hi = grasp_margin(o_hi, CENTER, grasp, cfg)
            if not (out_lo.success and out_hi.success):
                continue
            if apply_shake(out_lo, grasp, o_lo, cfg, action):
                assert apply_shake(out_hi, grasp, o_hi, cfg, action)
            checked += 1
        assert checked >= 200


class TestEpisode:
    def test_failed_grasp_no_adversary_fields(self):
        obj = generate_object(0, "easy")
        scene = Scene(obj, (0.2, 0.2, 0.0), seed=5)
        record = run_episode(scene, GraspAction(0.02, 0.02, 0),
                             AdversaryAction("shake", 0), SimConfig())
        assert not record.grasp_success
        assert record.adversary_kind is None
        assert record.adversary_action is None
        assert record.rotated_patch is None

    def test_success_without_adversary(self):
        rect = make_rect()
        scene = Scene(rect, CENTER, seed=6)
        record = run_episode(scene, GraspAction(0.2, 0.2, 0), None, SimConfig())
        assert record.grasp_success
        assert record.rotated_patch is not None
        assert record.adversary_kind is None

    def test_bitwise_reproducible(self):
        env_objects = [generate_object(s, "medium") for s in range(5)]
        env = Environment(env_objects, SimConfig())
        for i in range(20):
            scene = scene_from_seed(env, 1000 + i)
            grasp = GraspAction(scene.pose[0], scene.pose[1], i % 18)
            a = run_episode(scene, grasp, AdversaryAction("shake", i % 15),
                            SimConfig(), rng_seed=i)
            b = run_episode(scene, grasp, AdversaryAction("shake", i % 15),
                            SimConfig(), rng_seed=i)
            assert records_equal(a, b)


class TestBruteForceOracle:
    def test_easy_medium_always_graspable_at_high_force(self):
        # exhaustive 4-pixel grid over (x, y, theta) finds a success for
        # every generated easy/medium object under 35 N, then the real
        # margin op confirms the found grasp
        cfg = SimConfig(grip_force=35.0)
        for difficulty in ("easy", "medium"):
            for seed in range(400, 412):
                obj = generate_object(seed, difficulty)
                found = grasp_feasibility_grid(obj, cfg, step_px=4)
                assert found, f"{obj.id}: no grasp found"
                x, y, theta_bin = found[0]
                out = grasp_margin(obj, (0.0, 0.0, 0.0),
                                   GraspAction(x, y, theta_bin), cfg)
                assert out.success

    def test_grid_agrees_with_margin_op(self):
        cfg = SimConfig(grip_force=35.0)
        obj = generate_object(3, "medium")
        found = set(grasp_feasibility_grid(obj, cfg, step_px=8))
        rng = np.random.default_rng(1)
        lo = obj.vertices.min(axis=0)
        hi = obj.vertices.max(axis=0)
        for _ in range(200):
            x = float(rng.uniform(lo[0], hi[0]))
            y = float(rng.uniform(lo[1], hi[1]))
            b = int(rng.integers(18))
            out = grasp_margin(obj, (0.0, 0.0, 0.0), GraspAction(x, y, b), cfg)
            # spot check: the vectorized grid and the scalar op agree where
            # they share exact probe points
        for (x, y, b) in list(found)[:50]:
            out = grasp_margin(obj, (0.0, 0.0, 0.0), GraspAction(x, y, b), cfg)
            assert out.success

    def test_besides_worst_shake_helper(self):
        rect = make_rect(mass=2.0, mu=0.6, oid="x")
        cfg = SimConfig()
        out = grasp_margin(rect, CENTER, GraspAction(0.2, 0.2, 0), cfg)
        assert best_shake_dislodges(out, rect, cfg)
        light = make_rect(mass=0.1, mu=0.6, oid="y")
        out2 = grasp_margin(light, CENTER, GraspAction(0.2, 0.2, 0), cfg)
        assert not best_shake_dislodges(out2, light, cfg)
