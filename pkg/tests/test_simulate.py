import math

import numpy as np
import pytest

from afv import simulate
from afv.audio_io import chunk_stream
from afv.errors import SceneError, ValidationError
from afv.simulate import (
    SceneSpec,
    SourceSpec,
    ground_truth_pixel,
    in_frame,
    scene_from_json,
    scene_to_json,
    synth_scene,
)
from afv.spectral import band_bin, stft_snapshots
from afv.beamform import steering_vector

MINIMAL_SCENE = """
{
  "schema": 1,
  "duration_s": 0.5,
  "sources": [
    {"kind": "tone", "position": [0.0, 0.0, 1.5], "freq_hz": 1000.0, "level_dbfs": -12.0}
  ]
}
"""


def fit_tone_amplitude(x, freq_hz, rate):
    """Exact least-squares sine amplitude; independent of the synth path."""
    t = np.arange(len(x)) / rate
    basis = np.column_stack([np.sin(2 * np.pi * freq_hz * t),
                             np.cos(2 * np.pi * freq_hz * t)])
    coef, *_ = np.linalg.lstsq(basis, x, rcond=None)
    return math.hypot(coef[0], coef[1])


class TestSynthScene:
    def test_on_axis_symmetric_pair_identical(self, two_mic_geom):
        src = SourceSpec(position=(0.0, 0.0, 2.0), kind="tone",
                         level_dbfs=-6.0, freq_hz=1000.0)
        buf = synth_scene(SceneSpec(sources=(src,), duration_s=0.1), two_mic_geom)
        assert np.allclose(buf.samples[0], buf.samples[1], atol=1e-12)

    def test_one_over_r_amplitude_per_channel(self, two_mic_geom):
        src = SourceSpec(position=(0.3, -0.1, 1.2), kind="tone",
                         level_dbfs=-10.0, freq_hz=1234.5)
        buf = synth_scene(SceneSpec(sources=(src,), duration_s=0.2), two_mic_geom)
        for m in range(2):
            r = np.linalg.norm(np.array(src.position) - two_mic_geom.mics[m])
            fitted = fit_tone_amplitude(buf.samples[m], 1234.5, buf.sample_rate)
            assert fitted == pytest.approx(src.amplitude / r, rel=1e-9)

    def test_doubling_far_distance_halves_amplitude(self, two_mic_geom):
        scenes = []
        for d in (50.0, 100.0):
            src = SourceSpec(position=(0.0, 0.0, d), kind="tone",
                             level_dbfs=0.0, freq_hz=997.0)
            scenes.append(synth_scene(SceneSpec(sources=(src,), duration_s=0.2),
                                      two_mic_geom))
        a_near = fit_tone_amplitude(scenes[0].samples[0], 997.0, 44100)
        a_far = fit_tone_amplitude(scenes[1].samples[0], 997.0, 44100)
        assert a_far / a_near == pytest.approx(0.5, abs=1e-6)

    def test_deterministic_given_seeds(self, geom):
        src = SourceSpec(position=(0.2, 0.0, 1.5), kind="band_noise",
                         level_dbfs=-20.0, lo_hz=1000.0, hi_hz=3000.0, seed=7)
        scene = SceneSpec(sources=(src,), duration_s=0.3,
                          noise_floor_dbfs=-50.0, seed=42)
        a = synth_scene(scene, geom)
        b = synth_scene(scene, geom)
        assert np.array_equal(a.samples, b.samples)

    def test_superposition(self, geom):
        s1 = SourceSpec(position=(0.3, 0.0, 1.5), kind="tone",
                        level_dbfs=-12.0, freq_hz=2000.0)
        s2 = SourceSpec(position=(-0.3, 0.1, 1.5), kind="band_noise",
                        level_dbfs=-20.0, lo_hz=500.0, hi_hz=1500.0, seed=3)
        kw = dict(duration_s=0.25, noise_floor_dbfs=-40.0, seed=11)
        both = synth_scene(SceneSpec(sources=(s1, s2), **kw), geom)
        only1 = synth_scene(SceneSpec(sources=(s1,), **kw), geom)
        only2 = synth_scene(SceneSpec(sources=(s2,), **kw), geom)
        noise = synth_scene(SceneSpec(sources=(), **kw), geom)
        resum = only1.samples + only2.samples - noise.samples
        assert np.allclose(both.samples, resum, atol=1e-9)

    def test_clipping_names_hot_source(self, geom):
        quiet = SourceSpec(position=(0.0, 0.3, 1.5), kind="tone",
                           level_dbfs=-40.0, freq_hz=500.0)
        hot = SourceSpec(position=(0.0, 0.0, 0.2), kind="tone",
                         level_dbfs=0.0, freq_hz=1000.0)
        with pytest.raises(SceneError, match="source 1"):
            synth_scene(SceneSpec(sources=(quiet, hot), duration_s=0.05), geom)

    def test_band_noise_confined_to_band(self, two_mic_geom):
        src = SourceSpec(position=(0.0, 0.0, 1.0), kind="band_noise",
                         level_dbfs=-12.0, lo_hz=2000.0, hi_hz=5000.0, seed=5)
        buf = synth_scene(SceneSpec(sources=(src,), duration_s=0.5), two_mic_geom)
        spec = np.abs(np.fft.rfft(buf.samples[0]))
        freqs = np.fft.rfftfreq(buf.n_frames, 1 / buf.sample_rate)
        inside = spec[(freqs >= 2000) & (freqs <= 5000)]
        outside = spec[(freqs < 1900) | (freqs > 5100)]
        assert outside.max() < 1e-9 * inside.max()

    def test_phase_matches_steering_model(self, geom):
        # links simulator delays to the beamformer geometry conventions
        freq = band_bin(4000, 44100, 1024) * 44100 / 1024  # exact bin center
        src = SourceSpec(position=(0.35, -0.2, 1.5), kind="tone",
                         level_dbfs=-6.0, freq_hz=freq)
        buf = synth_scene(SceneSpec(sources=(src,), duration_s=0.1), geom)
        snaps = stft_snapshots(chunk_stream(buf, 2048)[0], 1024, 512)
        x = snaps.data[1, :, band_bin(4000, 44100, 1024)]
        a = steering_vector(src.position, geom, freq)
        # inter-channel phases of the data must match the model's
        measured = np.angle(x * np.conj(x[0]))
        modeled = np.angle(a * np.conj(a[0]))
        err = np.angle(np.exp(1j * (measured - modeled)))
        assert np.max(np.abs(err)) < 1e-3

    def test_noise_floor_level(self, two_mic_geom):
        scene = SceneSpec(sources=(), duration_s=1.0, noise_floor_dbfs=-30.0, seed=1)
        buf = synth_scene(scene, two_mic_geom)
        rms = float(np.sqrt(np.mean(buf.samples**2)))
        assert rms == pytest.approx(10 ** (-30 / 20) / math.sqrt(2), rel=0.02)


class TestGroundTruthPixel:
    def test_on_axis_hits_principal_point(self, cam):
        src = SourceSpec(position=(0.0, 0.0, 2.0), kind="tone",
                         level_dbfs=-6.0, freq_hz=440.0)
        assert ground_truth_pixel(src, cam) == (320.0, 180.0)

    def test_grid_point_maps_to_cell_center(self, cam, grid):
        src = SourceSpec(position=tuple(grid.points[10, 20]), kind="tone",
                         level_dbfs=-6.0, freq_hz=440.0)
        u, v = ground_truth_pixel(src, cam)
        uc, vc = grid.cell_center_pixel(20, 10)
        assert (u, v) == pytest.approx((uc, vc), abs=1e-9)

    def test_out_of_fov_flagged(self, cam):
        src = SourceSpec(position=(5.0, 0.0, 1.0), kind="tone",
                         level_dbfs=-6.0, freq_hz=440.0)
        pixel = ground_truth_pixel(src, cam)
        assert not in_frame(cam, pixel)


class TestSceneJson:
    def test_minimal_scene(self):
        scene = scene_from_json(MINIMAL_SCENE)
        assert len(scene.sources) == 1
        assert scene.sources[0].freq_hz == 1000.0
        assert scene.noise_floor_dbfs is None
        assert scene.sample_rate == 44100

    def test_positive_level_rejected_with_path(self):
        bad = MINIMAL_SCENE.replace("-12.0", "3.0")
        with pytest.raises(ValidationError, match=r"sources\[0\].level_dbfs"):
            scene_from_json(bad)

    def test_round_trip(self, geom):
        scene = SceneSpec(
            sources=(
                SourceSpec(position=(0.1, 0.2, 1.5), kind="tone",
                           level_dbfs=-6.0, freq_hz=2000.0),
                SourceSpec(position=(-0.4, 0.0, 2.0), kind="band_noise",
                           level_dbfs=-18.0, lo_hz=100.0, hi_hz=800.0, seed=9),
            ),
            duration_s=2.5, sample_rate=48000, noise_floor_dbfs=-55.0, seed=4,
        )
        assert scene_from_json(scene_to_json(scene)) == scene

    def test_unknown_scene_field_rejected(self):
        bad = MINIMAL_SCENE.replace('"schema": 1,', '"schema": 1, "reverb": true,')
        with pytest.raises(ValidationError, match="unknown fields"):
            scene_from_json(bad)

    def test_unknown_source_field_rejected(self):
        bad = MINIMAL_SCENE.replace('"kind": "tone",', '"kind": "tone", "gain": 2,')
        with pytest.raises(ValidationError, match=r"sources\[0\]"):
            scene_from_json(bad)

    def test_source_behind_camera_rejected(self):
        bad = MINIMAL_SCENE.replace("[0.0, 0.0, 1.5]", "[0.0, 0.0, -1.5]")
        with pytest.raises(ValidationError, match=r"position"):
            scene_from_json(bad)

    def test_wrong_schema_version(self):
        bad = MINIMAL_SCENE.replace('"schema": 1', '"schema": 2')
        with pytest.raises(ValidationError, match="schema"):
            scene_from_json(bad)

    def test_not_json(self):
        with pytest.raises(ValidationError, match="not valid JSON"):
            scene_from_json("{nope")


class TestSpecValidation:
    def test_tone_needs_frequency(self):
        with pytest.raises(ValidationError):
            SourceSpec(position=(0, 0, 1), kind="tone", level_dbfs=-6.0)

    def test_band_needs_ordered_edges(self):
        with pytest.raises(ValidationError):
            SourceSpec(position=(0, 0, 1), kind="band_noise", level_dbfs=-6.0,
                       lo_hz=3000.0, hi_hz=1000.0, seed=0)

    def test_level_must_be_nonpositive(self):
        with pytest.raises(ValidationError):
            SourceSpec(position=(0, 0, 1), kind="tone", level_dbfs=1.0, freq_hz=440.0)

    def test_duration_positive(self):
        with pytest.raises(ValidationError):
            SceneSpec(sources=(), duration_s=0.0)
