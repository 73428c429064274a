"""Prompt assembly and request packaging for the multimodal model boundary.

The artifact's contract ends at a request manifest: prompt text plus paths
to the stacked-frame manifest and the stereo WAV. Dispatch goes through a
pluggable transport; the only shipped implementation is a mock that replays
canned answers, one fresh session per request.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

from .errors import PackagingError, ValidationError

MANIFEST_SCHEMA_VERSION = 1

MODES = ("conventional", "conventional_plus_af", "live")

#: Instruction block sent in every mode.
PROMPT_PREAMBLE = (
    'Be definitive in your answers. Avoid hedging words like "potentially", '
    '"possibly", or "probably", and other speculative language. Also, answer '
    "concisely; one or a few sentences at most. I am giving you a video clip "
    "with audio of a scene."
)

#: Block describing the stacked sound-pressure-map visualization; only sent
#: when the acoustic field video accompanies the conventional stream.
PROMPT_FIELD_DESCRIPTION = (
    "The video clip has two synchronized visualizations of the same camera "
    "view. The top is the standard video of the scene. Bottom is the same "
    "video, but overlaid with a sound pressure map (jet color scheme, e.g., "
    "blue is no or low sound, and oranges and reds are louder sound sources). "
    "The sound pressure map shows where sounds are coming from. Your answer "
    "should not explicitly mention the video or the sound pressure map."
)

#: Final block for the two question-answering modes. Live mode drops it (the
#: user supplies a standing instruction instead of a question).
PROMPT_QUESTION_LEAD = (
    "Using this information, I want you to answer the following question:"
)

_MODE_BLOCKS = {
    "conventional": (PROMPT_PREAMBLE, PROMPT_QUESTION_LEAD),
    "conventional_plus_af": (PROMPT_PREAMBLE, PROMPT_FIELD_DESCRIPTION, PROMPT_QUESTION_LEAD),
    "live": (PROMPT_PREAMBLE, PROMPT_FIELD_DESCRIPTION),
}


@dataclass(frozen=True)
class RequestManifest:
    """One model request: mode, prompt, and the media it bundles."""

    mode: str
    prompt: str
    frames_manifest: str
    stereo_audio: str
    question: str


def build_prompt(mode: str, question: str) -> str:
    """Assemble the prompt for a mode, ending with the question.

    Blocks are joined with blank lines; the output is byte-stable and covered
    by golden tests. Conventional mode omits the sound-pressure-map block.
    """
    if mode not in MODES:
        raise ValidationError(f"mode must be one of {MODES}, got {mode!r}")
    if not question:
        raise ValidationError("question must be nonempty")
    return "\n\n".join(_MODE_BLOCKS[mode] + (question,))


def package_request(mode: str, frames_manifest, stereo_audio, question: str) -> RequestManifest:
    """Validate media paths and build the request manifest.

    Raises:
        PackagingError: a referenced media file does not exist.
    """
    prompt = build_prompt(mode, question)
    for path in (frames_manifest, stereo_audio):
        if not Path(path).is_file():
            raise PackagingError(f"missing media file: {path}")
    return RequestManifest(
        mode=mode,
        prompt=prompt,
        frames_manifest=str(frames_manifest),
        stereo_audio=str(stereo_audio),
        question=question,
    )


def manifest_to_json(manifest: RequestManifest) -> str:
    doc = {
        "schema": MANIFEST_SCHEMA_VERSION,
        "mode": manifest.mode,
        "prompt": manifest.prompt,
        "media": {
            "frames_manifest": manifest.frames_manifest,
            "stereo_audio": manifest.stereo_audio,
        },
        "question": manifest.question,
    }
    return json.dumps(doc, indent=2) + "\n"


def manifest_from_json(text: str) -> RequestManifest:
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as e:
        raise ValidationError(f"request manifest is not valid JSON: {e}") from e
    if doc.get("schema") != MANIFEST_SCHEMA_VERSION:
        raise ValidationError(f"request manifest schema must be {MANIFEST_SCHEMA_VERSION}")
    try:
        return RequestManifest(
            mode=doc["mode"],
            prompt=doc["prompt"],
            frames_manifest=doc["media"]["frames_manifest"],
            stereo_audio=doc["media"]["stereo_audio"],
            question=doc["question"],
        )
    except KeyError as e:
        raise ValidationError(f"request manifest missing field: {e}") from e


class Transport:
    """Dispatch interface. One fresh session per manifest, no shared state."""

    def dispatch(self, manifest: RequestManifest) -> str:
        session = self._open_session()
        try:
            return self._send(session, manifest)
        finally:
            self._close_session(session)

    def _open_session(self):
        raise NotImplementedError

    def _send(self, session, manifest: RequestManifest) -> str:
        raise NotImplementedError

    def _close_session(self, session):
        pass


class MockTransport(Transport):
    """Replays canned responses keyed by question text.

    Tracks the number of sessions opened so tests can assert the
    one-session-per-request contract.
    """

    def __init__(self, responses: dict[str, str] | None = None,
                 default_response: str = "(no canned answer)"):
        self.responses = dict(responses or {})
        self.default_response = default_response
        self.sessions_opened = 0
        self.log: list[RequestManifest] = []

    def _open_session(self):
        self.sessions_opened += 1
        return self.sessions_opened

    def _send(self, session, manifest: RequestManifest) -> str:
        self.log.append(manifest)
        return self.responses.get(manifest.question, self.default_response)
