import numpy as np
import pytest

from odlkit.datasets import (
    SPEEDS,
    TASKS,
    DamageSpec,
    ModeSpec,
    SynthConfig,
    SyntheticFanSource,
    build_task,
    classify_path,
    load_cooling_fan,
    synth_spectra,
    synth_stream,
)
from odlkit.errors import DatasetIOError, FormatError, InvalidInputError
from odlkit.streams import read_stream, write_stream

EXPECTED_SIZES = {
    "2500rpm": (300, 235),
    "0rpm": (300, 235),
    "damage1": (1200, 470),
    "4speeds": (1200, 470),
}


@pytest.mark.parametrize("name,sizes", EXPECTED_SIZES.items())
def test_task_sizes(name, sizes):
    task = build_task(name, SyntheticFanSource(), seed=0)
    assert (len(task.train), len(task.eval)) == sizes
    assert len(task.truth) == sizes[1]
    assert task.train.spectrum_len == 256
    assert all(r.segment == "init" for r in task.train)


def test_rpm_eval_layout():
    task = build_task("2000rpm", SyntheticFanSource(), seed=0)
    assert task.truth[:59] == ["normal"] * 59
    assert task.is_anomalous.sum() == 235 - 59


def test_damage_task_has_both_classes_in_halves():
    task = build_task("damage2", SyntheticFanSource(), seed=1)
    assert task.is_anomalous[:235].sum() == 0 and task.is_anomalous[235:].all()


def test_4speeds_labels():
    task = build_task("4speeds", SyntheticFanSource(), seed=0)
    assert sorted(set(task.train.labels)) == sorted(SPEEDS)
    assert task.kind == "accuracy"


def test_build_task_is_deterministic():
    a = build_task("damage1", SyntheticFanSource(), seed=5)
    b = build_task("damage1", SyntheticFanSource(), seed=5)
    np.testing.assert_array_equal(a.train.matrix(), b.train.matrix())
    np.testing.assert_array_equal(a.eval.matrix(), b.eval.matrix())
    c = build_task("damage1", SyntheticFanSource(), seed=6)
    assert not np.array_equal(a.eval.matrix(), c.eval.matrix())


def test_eval_stream_independent_of_train_environment():
    a = build_task("2500rpm", SyntheticFanSource(), train_env="silent", seed=2)
    b = build_task("2500rpm", SyntheticFanSource(), train_env="noisy", seed=2)
    np.testing.assert_array_equal(a.eval.matrix(), b.eval.matrix())
    assert not np.array_equal(a.train.matrix(), b.train.matrix())


@pytest.mark.parametrize("speed", [2500, 2000, 1500])
def test_fundamental_is_the_spectral_peak_when_silent(speed):
    src = SyntheticFanSource()
    X = src.draw(speed, "normal", "silent", 20, np.random.default_rng(0))
    f = src.config(speed, "normal", "silent").frequencies
    peak_hz = f[np.argmax(X.mean(axis=0))]
    assert abs(peak_hz - speed / 60.0) <= 2.0


def test_noise_source_only_when_noisy():
    src = SyntheticFanSource()
    rng = np.random.default_rng(0)
    f = src.config(0, "normal", "silent").frequencies
    i = int(np.argmin(np.abs(f - 144.0)))
    silent = src.draw(0, "normal", "silent", 50, rng)[:, i].mean()
    noisy = src.draw(0, "normal", "noisy", 50, rng)[:, i].mean()
    assert noisy > 5 * silent


def test_damage_energy_grows_with_amplitude():
    base = dict(modes=(ModeSpec(40.0),), noise_floor=0.0, amplitude_jitter=0.0, freq_jitter_hz=0.0)
    energies = []
    for amp in (0.0, 0.2, 0.4, 0.8):
        X, _ = synth_spectra(SynthConfig(**base, damage=DamageSpec(8.0, amp)), 1, np.random.default_rng(0))
        energies.append(float(np.sum(X**2)))
    assert all(b > a for a, b in zip(energies, energies[1:]))


def test_synth_stream_deterministic_and_labeled():
    cfg = SynthConfig(modes=(ModeSpec(30.0), ModeSpec(60.0)), noise_floor=0.01, seed=3)
    a, b = synth_stream(cfg, 20), synth_stream(cfg, 20)
    np.testing.assert_array_equal(a.matrix(), b.matrix())
    assert set(a.labels) <= {0, 1}


def test_synth_config_validation():
    with pytest.raises(InvalidInputError):
        SynthConfig(modes=(ModeSpec(5000.0),))
    with pytest.raises(InvalidInputError):
        SynthConfig(noise_floor=-1.0)
    with pytest.raises(InvalidInputError):
        build_task("9000rpm", SyntheticFanSource())


def test_stream_jsonl_round_trip(tmp_path):
    task = build_task("2500rpm", SyntheticFanSource(), seed=0)
    p = tmp_path / "s.jsonl"
    write_stream(p, task.eval)
    back = read_stream(p)
    np.testing.assert_array_equal(np.stack([r.spectrum for r in back]), task.eval.matrix())
    assert [r.label for r in back] == task.eval.labels


def test_bad_stream_line_reports_location(tmp_path):
    p = tmp_path / "s.jsonl"
    p.write_text('{"spectrum": [1.0], "label": "normal"}\n{"label": 1}\n')
    with pytest.raises(FormatError, match=":2"):
        read_stream(p)


@pytest.mark.parametrize(
    "path,expect",
    [
        ("noisy/2500rpm/normal_01.csv", (2500, "normal", "noisy")),
        ("silent/1500_rpm_damage2.csv", (1500, "damage2", "silent")),
        ("fan_stop_noise.csv", (0, "normal", "noisy")),
        ("readme.csv", None),
    ],
)
def test_classify_path(path, expect):
    assert classify_path(path) == expect


def test_loader_on_fake_tree(tmp_path):
    rng = np.random.default_rng(0)
    d = tmp_path / "noisy" / "2500rpm"
    d.mkdir(parents=True)
    np.savetxt(d / "normal.csv", rng.random((5, 512)), delimiter=",")
    np.savetxt(d / "damage1.csv", rng.normal(size=(3, 1024)), delimiter=",")
    ds = load_cooling_fan(tmp_path)
    assert ds.counts == {(2500, "damage1", "noisy"): 3, (2500, "normal", "noisy"): 5}
    assert ds.draw(2500, "normal", "noisy", 4, rng).shape == (4, 512)
    with pytest.raises(InvalidInputError):
        ds.draw(2500, "normal", "noisy", 6, rng)


def test_loader_errors(tmp_path):
    with pytest.raises(DatasetIOError):
        load_cooling_fan(tmp_path / "missing")
    with pytest.raises(DatasetIOError):
        load_cooling_fan(tmp_path)
    (tmp_path / "mystery.csv").write_text("1,2,3\n")
    with pytest.raises(FormatError):
        load_cooling_fan(tmp_path)


def test_all_task_names_build():
    for name in TASKS:
        assert build_task(name, SyntheticFanSource(), seed=0).eval.spectrum_len == 256
