"""Approaching-face capture protocol state machine.

The user aligns the face with a reference square (relative height 0.50,
roughly centered), then moves closer until the face passes relative
heights 0.625 and 0.75; the three crossing frames are the checkpoints.
Moving back past a hysteresis band or disappearing for too many frames
restarts the recording.
"""

from __future__ import annotations

import enum
import logging
import math
from dataclasses import dataclass, replace

from .geometry import FaceBox
from .imaging import ImageBuffer

__all__ = ["SessionState", "ProtocolConfig", "CaptureSession", "ProtocolError",
           "step", "extract_triplet"]

log = logging.getLogger(__name__)


class ProtocolError(ValueError):
    """Protocol precondition violated."""


class SessionState(str, enum.Enum):
    WAIT_ALIGN = "wait_align"
    RECORDING = "recording"
    DONE = "done"
    RESTARTED = "restarted"


@dataclass(frozen=True)
class ProtocolConfig:
    """Thresholds of the capture protocol, as fractions of frame height."""

    start_rel_height: float = 0.50
    mid_rel_height: float = 0.625
    end_rel_height: float = 0.75
    center_tolerance: float = 0.10
    retreat_hysteresis: float = 0.03
    max_missing_frames: int = 5

    def __post_init__(self):
        if not (0.0 < self.start_rel_height < self.mid_rel_height
                < self.end_rel_height < 1.0):
            raise ProtocolError("need 0 < start < mid < end < 1 relative heights")
        if self.center_tolerance <= 0 or self.retreat_hysteresis <= 0:
            raise ProtocolError("tolerances must be positive")
        if self.max_missing_frames < 1:
            raise ProtocolError("max_missing_frames must be >= 1")

    def to_json(self) -> dict:
        return {
            "start_rel_height": self.start_rel_height,
            "mid_rel_height": self.mid_rel_height,
            "end_rel_height": self.end_rel_height,
            "center_tolerance": self.center_tolerance,
            "retreat_hysteresis": self.retreat_hysteresis,
            "max_missing_frames": self.max_missing_frames,
        }

    @classmethod
    def from_json(cls, obj: dict) -> "ProtocolConfig":
        return cls(**obj)


@dataclass(frozen=True)
class CaptureSession:
    """Immutable protocol state; step() returns the successor."""

    state: SessionState = SessionState.WAIT_ALIGN
    running_max_height: float = 0.0
    missing_count: int = 0
    i1: int | None = None
    i2: int | None = None
    i3: int | None = None
    last_frame_index: int = -1

    @property
    def checkpoints(self) -> tuple[int, ...]:
        return tuple(i for i in (self.i1, self.i2, self.i3) if i is not None)

    @property
    def done(self) -> bool:
        return self.state is SessionState.DONE

    def to_json(self) -> dict:
        return {
            "state": self.state.value,
            "running_max_height": self.running_max_height,
            "missing_count": self.missing_count,
            "checkpoints": list(self.checkpoints),
            "last_frame_index": self.last_frame_index,
        }


def _centered(box: FaceBox, frame_h: float, frame_w: float | None,
              tol: float) -> bool:
    cx, cy = box.center()
    limit = tol * frame_h
    if frame_w is None:
        # Width unknown at this call site: only vertical centering checked.
        return abs(cy - frame_h / 2.0) <= limit
    return math.hypot(cx - frame_w / 2.0, cy - frame_h / 2.0) <= limit


def _restarted(session: CaptureSession, frame_index: int) -> CaptureSession:
    return CaptureSession(state=SessionState.RESTARTED,
                          last_frame_index=frame_index)


def step(session: CaptureSession, frame_index: int, detection: FaceBox | None,
         frame_h: float, cfg: ProtocolConfig,
         frame_w: float | None = None) -> CaptureSession:
    """Advance the session by one observed frame.

    detection is the client-side face box for this frame, or None when no
    face was found. Stepping a finished session is a no-op.
    """
    if session.state is SessionState.DONE:
        log.debug("step on finished session ignored (frame %d)", frame_index)
        return session
    if frame_index <= session.last_frame_index:
        raise ProtocolError(
            f"frame index must increase: got {frame_index} after {session.last_frame_index}")
    if frame_h <= 0:
        raise ProtocolError(f"nonpositive frame height {frame_h}")

    # A restart is visible for exactly one step; afterwards the session
    # behaves as a fresh wait-for-alignment state.
    if session.state is SessionState.RESTARTED:
        session = CaptureSession(last_frame_index=session.last_frame_index)

    if detection is None:
        missing = session.missing_count + 1
        if session.state is SessionState.RECORDING and missing > cfg.max_missing_frames:
            log.info("restart: face missing for %d frames", missing)
            return _restarted(session, frame_index)
        return replace(session, missing_count=missing, last_frame_index=frame_index)

    rel = detection.h / frame_h

    if session.state is SessionState.WAIT_ALIGN:
        if rel >= cfg.start_rel_height and _centered(detection, frame_h, frame_w,
                                                     cfg.center_tolerance):
            return CaptureSession(state=SessionState.RECORDING,
                                  running_max_height=rel, i1=frame_index,
                                  last_frame_index=frame_index)
        return replace(session, missing_count=0, last_frame_index=frame_index)

    # Recording: retreat check first, then at most one checkpoint per frame.
    if rel < session.running_max_height - cfg.retreat_hysteresis:
        log.info("restart: height %.3f retreated below max %.3f",
                 rel, session.running_max_height)
        return _restarted(session, frame_index)

    new = replace(session, missing_count=0,
                  running_max_height=max(session.running_max_height, rel),
                  last_frame_index=frame_index)
    if new.i2 is None:
        if rel >= cfg.mid_rel_height:
            new = replace(new, i2=frame_index)
    elif new.i3 is None and rel >= cfg.end_rel_height:
        new = replace(new, i3=frame_index, state=SessionState.DONE)
    return new


def extract_triplet(frames: list[ImageBuffer],
                    session: CaptureSession) -> tuple[ImageBuffer, ImageBuffer, ImageBuffer]:
    """The checkpoint frames of a finished session."""
    if not session.done:
        raise ProtocolError(f"session not done (state={session.state.value})")
    try:
        return frames[session.i1], frames[session.i2], frames[session.i3]
    except IndexError as exc:
        raise ProtocolError(f"checkpoint index outside frame list: {exc}") from exc
