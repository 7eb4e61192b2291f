"""
End-to-end campaign checks on the default tasks.

These run full playback / IRLC / I2RLC campaigns on the surrogate plant and
take about a minute each; deselect them with `pytest -m "not campaign"`.
"""

import json

import numpy as np
import pytest

import config
from dataset import episode_seeds, noise_statistics
from main import main
from metrics import comparison_grid
from refinement import RefinementConfig, run_comparison, run_i2rlc, run_irlc
from saver import MANIFEST_FILE, ResultsSaver
from scenarios import build_context, generate_demo, task_by_kind
from trajectory import add_pose_noise, save_trajectory

pytestmark = pytest.mark.campaign

SPEEDS = list(range(2, 11))
MARGIN = 0.2                    # playback must be at least 20% worse
PEG_FORCE_LIMIT = 100.0         # N, the default protective stop threshold


@pytest.fixture(scope="module")
def flat():
    task = task_by_kind("flat_erase")
    context = build_context(task)
    demo = generate_demo(task, context=context)
    return demo, context


@pytest.fixture(scope="module")
def comparison(flat):
    demo, context = flat
    return run_comparison(demo, SPEEDS, RefinementConfig(), context)


def save_all(runs_by_method, out_dir):
    saver = ResultsSaver(out_dir, verbose=False)
    entries = [saver.save_run(run) for runs in runs_by_method.values() for run in runs]
    saver.save_results("refine", entries, config.DEFAULT_SEED, {"speeds": SPEEDS})
    return {p.relative_to(out_dir).as_posix(): p.read_bytes() for p in sorted(out_dir.rglob("*")) if p.is_file()}


def test_refinement_beats_playback(comparison):
    grid = comparison_grid(comparison, "dtw")
    for n in range(3, 11):
        playback = grid.loc["playback", n]
        assert playback > (1 + MARGIN) * grid.loc["irlc", n]
        assert playback > (1 + MARGIN) * grid.loc["i2rlc", n]
    for n in (8, 9, 10):
        assert grid.loc["i2rlc", n] <= grid.loc["irlc", n]


def test_i2rlc_keeps_errors_in_a_narrower_range(comparison):
    i2rlc = comparison["i2rlc"][0]
    irlc_top = next(run for run in comparison["irlc"] if run.speeds == [10])
    worst_i2rlc = max(r.dtw for r in i2rlc.records if r.dtw is not None)
    worst_irlc = max(r.dtw for r in irlc_top.records if r.dtw is not None)
    assert worst_i2rlc < worst_irlc


def test_matched_playback_budget(flat):
    demo, context = flat
    unlimited = context.replace(force_limit=1e6)
    cfg = RefinementConfig()
    assert run_i2rlc(demo, cfg, unlimited).playback_count == 27
    assert run_irlc(demo, 10, cfg, unlimited).playback_count == 27


def test_repeated_campaign_is_byte_identical(tmp_path, flat, comparison):
    demo, context = flat
    repeat = run_comparison(demo, SPEEDS, RefinementConfig(), context, workers=2)
    assert save_all(comparison, tmp_path / "first") == save_all(repeat, tmp_path / "second")


def test_protective_stop_on_peg():
    task = task_by_kind("peg_in_hole")
    context = build_context(task)
    assert context.force_limit == PEG_FORCE_LIMIT
    demo = generate_demo(task, context=context)
    cfg = RefinementConfig()

    i2rlc = run_i2rlc(demo, cfg, context)
    assert not i2rlc.stopped
    assert i2rlc.speeds == SPEEDS
    assert max(r.peak_force for r in i2rlc.records) < PEG_FORCE_LIMIT

    irlc = run_irlc(demo, 10, cfg, context)
    assert irlc.stopped
    assert irlc.stop_kind == "protective_stop"
    # the naive 10x playback passes; a refined reference trips the monitor
    assert irlc.records[0].stop is None
    assert 1 < irlc.playback_count < 27
    assert irlc.records[-1].stop is not None
    assert irlc.records[-1].iteration > 1


def test_dataset_from_refined_reference(tmp_path, flat, comparison):
    _, context = flat
    reference = comparison["i2rlc"][0].final_references[10]
    reference_file = save_trajectory(reference, tmp_path / "refined_10x.csv")

    out = tmp_path / "dataset"
    assert main(["dataset", "--reference", str(reference_file), "--task", "flat_erase",
                 "--rollouts", "10", "--out", str(out)]) == 0
    manifest = json.loads((out / MANIFEST_FILE).read_text(encoding="utf-8"))
    assert manifest["episode_count"] == 10
    assert manifest["flagged"] == []

    samples = episode_seeds(config.DEFAULT_SEED, 10000 // len(reference) + 1)
    noisy = [add_pose_noise(reference, config.NOISE_SIGMA_POS, config.NOISE_SIGMA_ROT, s) for s in samples]
    stats = noise_statistics(reference, noisy)
    assert stats["samples"] >= 10000
    assert abs(stats["sigma_pos"] - config.NOISE_SIGMA_POS) < 0.05 * config.NOISE_SIGMA_POS
    assert abs(stats["sigma_rot"] - config.NOISE_SIGMA_ROT) < 0.05 * config.NOISE_SIGMA_ROT
    assert np.all(np.isfinite(stats["per_axis"]))
