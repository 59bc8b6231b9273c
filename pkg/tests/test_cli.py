import numpy as np
import pytest

from acousticam.cli import load_targets, main
from acousticam.regression import RegressionModel
from acousticam.wavio import read_wav, write_wav

from scenario import build_scenario, write_geometry_file, write_targets_file


def run_cli(*argv):
    return main([str(a) for a in argv])


def test_opcount_reference_numbers(capsys):
    assert run_cli("opcount") == 0
    out = capsys.readouterr().out
    assert "118425600" in out
    assert "2506944" in out
    assert "47.24" in out


def test_simulate_small_run(tmp_path, capsys):
    csv = tmp_path / "rmse.csv"
    code = run_cli(
        "simulate", "--width", 64, "--height", 48, "--q", 2000,
        "--k-list", "0.0", "0.05", "--l-list", 1, 3, "--out", csv,
    )
    assert code == 0
    assert "L=1" in capsys.readouterr().out
    lines = csv.read_text().splitlines()
    assert lines[0] == "k,kept,L1,L3"
    assert len(lines) == 3


def test_simulate_rejects_bad_grid():
    assert run_cli("simulate", "--grid", 3, "--l-list", 4, "--q", 100) == 1


def test_synth_writes_wav(tmp_path):
    geometry = tmp_path / "geometry.txt"
    write_geometry_file(geometry)
    script = tmp_path / "script.txt"
    script.write_text("silence 0.1\nwhite 0 0 1 0.2\n")
    out = tmp_path / "out.wav"
    assert run_cli("synth", "--geometry", geometry, "--script", script, "--out", out) == 0
    audio, rate = read_wav(out)
    assert rate == 16000
    assert audio.shape == (int(0.3 * 16000), 4)
    assert np.all(audio[: int(0.1 * 16000)] == 0)


def test_synth_bad_script_fails(tmp_path):
    geometry = tmp_path / "geometry.txt"
    write_geometry_file(geometry)
    script = tmp_path / "script.txt"
    script.write_text("warble 1 2 3\n")
    assert run_cli("synth", "--geometry", geometry, "--script", script,
                   "--out", tmp_path / "x.wav") == 1


@pytest.fixture(scope="module")
def scenario(tmp_path_factory):
    tmp = tmp_path_factory.mktemp("cli_scenario")
    scn = build_scenario(tmp, width=48, height=36, distortion=-0.05,
                         grid_n=4, burst_s=0.45, gap_s=0.2, seed=3)
    code = main([
        "calibrate",
        "--audio", str(scn.audio_path),
        "--geometry", str(scn.geometry_path),
        "--targets", str(scn.targets_path),
        "--order", "3",
        "--frame", "256",
        "--frames-per-target", "15",
        "--out", str(scn.model_path),
    ])
    assert code == 0
    return scn


def test_calibrate_model_predicts_truth(scenario):
    model = RegressionModel.load(scenario.model_path)
    assert model.order == 3
    assert model.sample_rate == 16000.0
    positions = scenario.camera.pixel_to_plane(
        scenario.targets[:, 0], scenario.targets[:, 1]
    )
    truth = scenario.geometry.source_tdoas(positions)
    predicted = model.predict(scenario.targets[:, 0], scenario.targets[:, 1])
    assert np.max(np.abs(predicted - truth)) < 0.1


def test_calibrate_too_few_bursts(tmp_path, scenario):
    # claim more targets than the recording contains bursts for
    extra = np.vstack([scenario.targets, [[10.0, 10.0], [20.0, 20.0]]])
    targets_path = tmp_path / "too_many.txt"
    write_targets_file(targets_path, extra, 48, 36)
    code = run_cli(
        "calibrate", "--audio", scenario.audio_path,
        "--geometry", scenario.geometry_path, "--targets", targets_path,
        "--order", 2, "--frame", 256, "--out", tmp_path / "m.txt",
    )
    assert code == 1


def test_calibrate_underdetermined(tmp_path, scenario):
    code = run_cli(
        "calibrate", "--audio", scenario.audio_path,
        "--geometry", scenario.geometry_path, "--targets", scenario.targets_path,
        "--order", 4, "--frame", 256, "--out", tmp_path / "m.txt",
    )
    assert code == 1  # 16 targets cannot fit 25 coefficients


def test_calibrate_rate_mismatch(tmp_path, scenario):
    audio, _ = read_wav(scenario.audio_path)
    resampled = tmp_path / "wrong_rate.wav"
    write_wav(resampled, audio, 48000)
    code = run_cli(
        "calibrate", "--audio", resampled,
        "--geometry", scenario.geometry_path, "--targets", scenario.targets_path,
        "--order", 2, "--frame", 256, "--out", tmp_path / "m.txt",
    )
    assert code == 1


def test_calibrate_channel_mismatch(tmp_path, scenario):
    audio, rate = read_wav(scenario.audio_path)
    stereo = tmp_path / "stereo.wav"
    write_wav(stereo, audio[:, :2], rate)
    code = run_cli(
        "calibrate", "--audio", stereo,
        "--geometry", scenario.geometry_path, "--targets", scenario.targets_path,
        "--order", 2, "--frame", 256, "--out", tmp_path / "m.txt",
    )
    assert code == 1


def test_calibrate_missing_file(tmp_path, scenario):
    code = run_cli(
        "calibrate", "--audio", tmp_path / "nope.wav",
        "--geometry", scenario.geometry_path, "--targets", scenario.targets_path,
        "--order", 2, "--out", tmp_path / "m.txt",
    )
    assert code == 1


def test_render_places_peak_and_writes_rasters(tmp_path, scenario, capsys):
    # a fresh source inside the image, rendered through the fitted model
    from acousticam.synth import SourceEvent, synthesize

    u_true, v_true = 30.0, 20.0
    pos = scenario.camera.pixel_to_plane(u_true, v_true)
    audio = synthesize(scenario.geometry, [SourceEvent("white", 0.3, tuple(pos))], seed=9)
    wav = tmp_path / "live.wav"
    write_wav(wav, audio, 16000)
    out_dir = tmp_path / "frames"
    code = run_cli(
        "render", "--audio", wav, "--model", scenario.model_path,
        "--out", out_dir, "--frame", 256, "--delta", 1e-5, "--verify",
    )
    assert code == 0
    out = capsys.readouterr().out
    assert "verify:" in out
    pgms = sorted(out_dir.glob("frame_*.pgm"))
    csvs = sorted(out_dir.glob("frame_*.csv"))
    assert len(pgms) == len(csvs) > 0
    # peak position from the raw CSV of the first frame
    img = np.loadtxt(csvs[0], delimiter=",")
    assert img.shape == (36, 48)
    v_peak, u_peak = np.unravel_index(np.argmax(img), img.shape)
    assert abs(u_peak + 1 - u_true) <= 2
    assert abs(v_peak + 1 - v_true) <= 2
    header = pgms[0].read_bytes()[:15]
    assert header.startswith(b"P5\n48 36\n255\n")


def test_render_silence_zero_rasters(tmp_path, scenario):
    wav = tmp_path / "silence.wav"
    write_wav(wav, np.zeros((4096, 4)), 16000)
    out_dir = tmp_path / "silent_frames"
    code = run_cli(
        "render", "--audio", wav, "--model", scenario.model_path,
        "--out", out_dir, "--frame", 256,
    )
    assert code == 0
    for pgm in out_dir.glob("frame_*.pgm"):
        payload = pgm.read_bytes().split(b"255\n", 1)[1]
        assert set(payload) == {0}
    for csv in out_dir.glob("frame_*.csv"):
        assert np.all(np.loadtxt(csv, delimiter=",") == 0)


def test_render_rate_mismatch(tmp_path, scenario):
    wav = tmp_path / "w.wav"
    write_wav(wav, np.zeros((2048, 4)), 8000)
    code = run_cli(
        "render", "--audio", wav, "--model", scenario.model_path,
        "--out", tmp_path / "frames", "--frame", 256,
    )
    assert code == 1


def test_load_targets_validation(tmp_path):
    p = tmp_path / "targets.txt"
    p.write_text("10 20\n")  # missing image header
    with pytest.raises(ValueError, match="image"):
        load_targets(p)
    p.write_text("image 320 240\n10 20 30\n")
    with pytest.raises(ValueError):
        load_targets(p)
    p.write_text("image 320 240\n# only comments\n")
    with pytest.raises(ValueError):
        load_targets(p)
    p.write_text("image 64 48\n10 20\n30.5 40\n")
    targets, w, h = load_targets(p)
    assert (w, h) == (64, 48)
    assert targets.shape == (2, 2)
