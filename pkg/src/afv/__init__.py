"""afv: acoustic field video from microphone-array audio.

Turns multichannel recordings plus a camera model into per-frame spatial
maps of sound intensity aligned to camera pixels, rendered as jet-colormap
overlays. Ships a MUSIC beamformer with a delay-and-sum oracle, a synthetic
scene simulator for ground truth, and packaging for multimodal-model input.
"""

from .audio_io import (
    AudioChunk,
    MultichannelBuffer,
    chunk_stream,
    extract_stereo,
    read_wav,
    write_wav,
)
from .beamform import (
    FieldMap,
    bartlett_map,
    default_ref_power,
    music_map,
    noise_subspace,
    steering_matrix,
    steering_vector,
    to_spl,
)
from .errors import (
    AfvError,
    BehindCameraError,
    GeometryXmlError,
    PackagingError,
    ProcessingError,
    SceneError,
    ValidationError,
    WavFormatError,
)
from .fieldpipe import (
    BandConfig,
    MedianWindow,
    NormalizedField,
    clip_top,
    composite,
    floor_subtract,
    median_push,
    upsample,
)
from .geometry import (
    ArrayGeometry,
    CameraModel,
    SteeringGrid,
    build_grid,
    load_default_geometry,
    parse_geometry,
    project,
    serialize_geometry,
)
from .pipeline import (
    AcousticFieldPipeline,
    PipelineConfig,
    PipelineResult,
    StageTimings,
    config_dump,
    resolve_config,
    run_bench,
    run_pipeline,
)
from .render import grayscale, jet, overlay, stack_pair, write_frame_sequence
from .simulate import (
    SceneSpec,
    SourceSpec,
    ground_truth_pixel,
    scene_from_json,
    scene_to_json,
    synth_scene,
)
from .spectral import (
    CrossSpectralMatrix,
    SpectralSnapshots,
    band_bin,
    estimate_csm,
    stft_snapshots,
)
from .vlm_pack import (
    MockTransport,
    RequestManifest,
    Transport,
    build_prompt,
    manifest_from_json,
    manifest_to_json,
    package_request,
)

__version__ = "0.1.0"
