"""Time every pipeline stage over repeated runs, serial and parallel bands.

The four per-band computations are independent, so the band loop can run on
a thread pool; determinism is asserted by hashing the rendered frames of
each repeat.
"""

from afv import PipelineConfig, load_default_geometry, run_bench, simulate

geom = load_default_geometry()
scene = simulate.SceneSpec(sources=(), duration_s=1.0, noise_floor_dbfs=-30.0, seed=4)
buffer = simulate.synth_scene(scene, geom)

for parallel in (False, True):
    label = "parallel" if parallel else "serial"
    report = run_bench(PipelineConfig(), buffer, repeats=3, parallel=parallel)
    last = report.runs[-1]
    print(f"\n=== {label} bands ===")
    print(last.table())
    print(f"identical frames across repeats: {report.deterministic}")
