"""Bundle stacked frames, stereo audio, and a question into a model request.

Ends with a round trip through the mock transport, which is the shipped
stand-in for a hosted multimodal model: one fresh session per request,
canned answers keyed by question.
"""

from pathlib import Path

from afv import (
    MockTransport,
    PipelineConfig,
    extract_stereo,
    load_default_geometry,
    manifest_to_json,
    package_request,
    run_pipeline,
    simulate,
    write_wav,
)

OUT = Path(__file__).parent / "output" / "request_demo"

geom = load_default_geometry()
scene = simulate.SceneSpec(
    sources=(
        simulate.SourceSpec(position=(0.4, 0.0, 1.5), kind="band_noise",
                            level_dbfs=-18.0, lo_hz=3500.0, hi_hz=4500.0, seed=3),
    ),
    duration_s=1.0,
    noise_floor_dbfs=-40.0,
    seed=8,
)
buffer = simulate.synth_scene(scene, geom)

config = PipelineConfig()
result = run_pipeline(config, buffer, out_dir=OUT / "frames")

# stereo pair: the upper-left/upper-right mics of the bundled lattice
stereo = extract_stereo(buffer, *config.stereo_channels)
stereo_path = OUT / "stereo.wav"
write_wav(stereo, stereo_path)

question = "What is the noise?"
request = package_request(
    "conventional_plus_af",
    OUT / "frames" / "manifest.json",
    stereo_path,
    question,
)
request_path = OUT / "request.json"
request_path.write_text(manifest_to_json(request))
print(f"request manifest written to {request_path}")
print("--- prompt ---")
print(request.prompt)
print("--------------")

transport = MockTransport(responses={question: "A fan-like hum on the right side."})
print(f"mock answer: {transport.dispatch(request)}")
print(f"sessions opened: {transport.sessions_opened}")
