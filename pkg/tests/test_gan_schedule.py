import pytest

from lesionlab.gan.schedule import build_schedule


def test_target_64_ladder():
    sched = build_schedule(64, fade_images=1000, stable_images=1000)
    assert sched.stages == (4, 8, 16, 32, 64)


def test_target_256_has_7_stages():
    sched = build_schedule(256, 10, 10)
    assert sched.n_stages == 7
    assert sched.final_resolution == 256


def test_alpha_linear_ramp():
    fade = 1000
    sched = build_schedule(16, fade_images=fade, stable_images=500)
    # stage 0: no fade, alpha 1 immediately
    assert sched.state_at(0) == (0, 1.0)
    # halfway through stage 1's fade phase
    stage1_start = sched.stage_images(0)
    stage, alpha = sched.state_at(stage1_start + fade // 2)
    assert stage == 1
    assert alpha == pytest.approx(0.5, abs=1.0 / fade)
    # after the fade phase alpha holds at 1
    assert sched.state_at(stage1_start + fade + 100) == (1, 1.0)


def test_beyond_schedule_stays_final():
    sched = build_schedule(8, 100, 100)
    assert sched.state_at(10 ** 9) == (1, 1.0)


def test_per_stage_lists():
    sched = build_schedule(16, fade_images=[0, 100, 200], stable_images=[300, 100, 50])
    assert sched.fade_images == (0, 100, 200)
    assert sched.total_images == 300 + 200 + 250


@pytest.mark.parametrize("bad", [7, 12, 512, 2])
def test_rejects_bad_targets(bad):
    with pytest.raises(ValueError):
        build_schedule(bad, 10, 10)
