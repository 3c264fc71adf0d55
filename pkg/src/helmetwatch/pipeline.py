"""Three-stage pipeline: motion segmentation -> pedestrian cascade -> helmet colour."""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass, field
from typing import Iterable, Iterator, List, Optional, Tuple

import numpy as np

from .classifier.models import CascadeModel
from .config import PipelineConfig
from .detector import Detection, nms, plan_search, scan
from .helmet import HelmetVerdict, annotate, verdict_for_detection
from .imagery import check_rgb, to_gray
from .motion import BackgroundModel, MotionRegion, extract_regions, init_model


@dataclass
class FrameResult:
    frame_id: int
    regions: List[MotionRegion] = field(default_factory=list)
    detections: List[Detection] = field(default_factory=list)
    verdicts: List[HelmetVerdict] = field(default_factory=list)
    mask: Optional[np.ndarray] = None
    windows: int = 0


def with_thresholds(model: CascadeModel, theta1: float, theta2: float) -> CascadeModel:
    linear = dataclasses.replace(model.linear, threshold=theta1)
    hik = dataclasses.replace(model.hik, threshold=theta2)
    return dataclasses.replace(model, linear=linear, hik=hik)


class HelmetPipeline:
    """Stateful per-video processor; frames must arrive in order.

    The first frame initialises the background model and yields no
    detections.
    """

    def __init__(self, model: Optional[CascadeModel], config: PipelineConfig | None = None,
                 detect_helmets: bool = True, keep_masks: bool = False):
        self.config = config or PipelineConfig()
        c = self.config.cascade
        self.model = with_thresholds(model, c.theta1, c.theta2) if model is not None else None
        self.detect_helmets = detect_helmets
        self.keep_masks = keep_masks
        self.background: Optional[BackgroundModel] = None

    def segment(self, gray: np.ndarray) -> Tuple[np.ndarray, List[MotionRegion]]:
        if self.background is None:
            self.background = init_model(gray, self.config.vibe)
            return np.zeros(gray.shape, dtype=bool), []
        mask = self.background.segment(gray)
        self.background.update(gray, mask)
        m = self.config.motion
        return mask, extract_regions(mask, m.min_area, m.morph_radius)

    def process(self, frame: np.ndarray, frame_id: int) -> FrameResult:
        if frame.ndim == 3:
            rgb = check_rgb(frame)
            gray = to_gray(rgb)
        else:
            gray = frame
            rgb = np.repeat(frame[..., None], 3, axis=2)
        mask, regions = self.segment(gray)
        result = FrameResult(frame_id, regions=regions, mask=mask if self.keep_masks else None)
        if self.model is None or not regions:
            return result
        plan = plan_search(regions, gray.shape, self.config.scan)
        result.windows = len(plan)
        dets = nms(scan(gray, self.model, plan), self.config.cascade.nms_iou)
        result.detections = dets
        if self.detect_helmets:
            h = self.config.helmet
            result.verdicts = [
                verdict_for_detection(rgb, d.bbox, h.ranges, h.min_ratio, h.v_floor,
                                      h.achromatic_white, h.head_fraction)
                for d in dets
            ]
        return result

    def annotate(self, frame: np.ndarray, result: FrameResult) -> np.ndarray:
        rgb = frame if frame.ndim == 3 else np.repeat(frame[..., None], 3, axis=2)
        verdicts = result.verdicts or [
            HelmetVerdict(False, None, 0.0, (d.x, d.y, d.w, max(1.0, d.h // 5)), 0)
            for d in result.detections
        ]
        return annotate(rgb, result.detections, verdicts)


def run_pipeline(frames: Iterable[Tuple[int, np.ndarray]], model: Optional[CascadeModel],
                 config: PipelineConfig | None = None, detect_helmets: bool = True) -> Iterator[FrameResult]:
    """Process ``(frame_id, frame)`` pairs strictly in the given order."""
    pipe = HelmetPipeline(model, config, detect_helmets)
    for frame_id, frame in frames:
        yield pipe.process(frame, frame_id)
