"""
Mask scoring: confusion counts, F-score and misclassified pixels, per frame
and pooled over a sequence.
"""

from __future__ import annotations

import csv
import logging
import pathlib
import sys
import typing
from typing import Iterable, Mapping, TextIO

import numpy as np
import numpy.typing as npt

from gflbs.datasets import ground_truth

logger = logging.getLogger(__name__)


class confusion_counts(typing.NamedTuple):

    """
    Pixel counts with foreground as the positive class. Ignored pixels are
    not counted.
    """

    tp: int
    fp: int
    fn: int
    tn: int

    @property
    def total(self) -> int:
        return self.tp + self.fp + self.fn + self.tn

    def __add__(self, other):  # type: ignore[override]
        return confusion_counts(*(a + b for a, b in zip(self, other)))


def confusion(
    mask: npt.ArrayLike,
    gt: npt.ArrayLike,
    ignore: npt.ArrayLike | None = None,
) -> confusion_counts:
    """
    Compare a predicted mask with a ground-truth mask.

    Args:
        mask: Predicted foreground.
        gt: True foreground, same shape as mask.
        ignore: Pixels to leave out, none if None.

    Returns:
        The confusion counts over the scored pixels.
    """
    m = np.asarray(mask, dtype=bool)
    g = np.asarray(gt, dtype=bool)
    if m.shape != g.shape:
        raise ValueError(
            "Mask of shape {} does not match ground truth of shape {}.".format(
                m.shape, g.shape
            )
        )
    keep = np.ones(m.shape, dtype=bool)
    if ignore is not None:
        i = np.asarray(ignore, dtype=bool)
        if i.shape != m.shape:
            raise ValueError(
                "Ignore mask of shape {} does not match {}.".format(i.shape, m.shape)
            )
        keep = ~i
    m, g = m[keep], g[keep]
    return confusion_counts(
        int(np.count_nonzero(m & g)),
        int(np.count_nonzero(m & ~g)),
        int(np.count_nonzero(~m & g)),
        int(np.count_nonzero(~m & ~g)),
    )


def f_score(c: confusion_counts) -> float:
    """
    ``2 tp / (2 tp + fp + fn)``, 1 when both the mask and the ground truth are
    empty.
    """
    denominator = 2 * c.tp + c.fp + c.fn
    if denominator == 0:
        return 1.0
    return 2 * c.tp / denominator


def misclassified(c: confusion_counts) -> int:
    """Number of false positives and false negatives."""
    return c.fp + c.fn


class frame_score(typing.NamedTuple):
    name: str
    counts: confusion_counts

    @property
    def f_score(self) -> float:
        return f_score(self.counts)

    @property
    def misclassified(self) -> int:
        return misclassified(self.counts)


class sequence_report:

    """
    Scores of the evaluated frames of one sequence.
    """

    _sequence: str
    _frames: list[frame_score]
    _unmatched: list[str]
    _runtime: float | None
    _iterations: int | None

    def __init__(
        self,
        sequence: str,
        frames: Iterable[frame_score],
        unmatched: Iterable[str] = (),
        runtime: float | None = None,
        iterations: int | None = None,
    ):
        self._sequence = sequence
        self._frames = list(frames)
        self._unmatched = list(unmatched)
        self._runtime = runtime
        self._iterations = iterations

    @property
    def sequence(self) -> str:
        return self._sequence

    @property
    def frames(self) -> list[frame_score]:
        return self._frames

    @property
    def unmatched(self) -> list[str]:
        """Ground-truth frames without a predicted mask."""
        return self._unmatched

    @property
    def runtime(self) -> float | None:
        return self._runtime

    @property
    def iterations(self) -> int | None:
        return self._iterations

    @property
    def counts(self) -> confusion_counts:
        """Confusion counts pooled over every evaluated frame."""
        total = confusion_counts(0, 0, 0, 0)
        for frame in self._frames:
            total = total + frame.counts
        return total

    @property
    def f_score(self) -> float:
        return f_score(self.counts)

    @property
    def misclassified(self) -> int:
        return misclassified(self.counts)

    def __repr__(self):
        return "{}: {} frames, F = {:.4f}, misclassified = {}".format(
            self._sequence, len(self._frames), self.f_score, self.misclassified
        )


def evaluate_sequence(
    masks: Mapping[str, npt.ArrayLike],
    truth: ground_truth,
    sequence: str = "",
    runtime: float | None = None,
    iterations: int | None = None,
) -> sequence_report:
    """
    Score predicted masks against the ground truth frames they match by name.

    Ground-truth frames without a mask are reported as unmatched, masks
    without ground truth are not scored.

    Args:
        masks: Predicted masks keyed by frame name.
        truth: Ground truth of the sequence.
        sequence: Name of the sequence, used in reports.
        runtime: Runtime of the decomposition in seconds, if known.
        iterations: Number of outer iterations, if known.

    Returns:
        The per-frame scores.
    """
    frames, unmatched = [], []
    for name in truth.names:
        if name not in masks:
            logger.warning("no predicted mask for ground-truth frame %s", name)
            unmatched.append(name)
            continue
        frames.append(
            frame_score(
                name, confusion(masks[name], truth.mask(name), truth.ignore(name))
            )
        )
    report = sequence_report(sequence, frames, unmatched, runtime, iterations)
    logger.info("%s", report)
    return report


COLUMNS = (
    "sequence",
    "frame",
    "frames",
    "tp",
    "fp",
    "fn",
    "tn",
    "f_score",
    "misclassified",
    "unmatched",
    "runtime",
    "iterations",
)


def write_report(
    reports: Iterable[sequence_report],
    path: str | pathlib.Path | TextIO | None = None,
):
    """
    Write a CSV report with one row per evaluated frame followed by one
    aggregate row (frame ``*``) per sequence.

    Args:
        reports: Reports to write.
        path: Output file, or an open text stream, standard output if None.
    """
    if path is None:
        path = sys.stdout
    if isinstance(path, (str, pathlib.Path)):
        with open(path, "w", newline="") as fp:
            write_report(reports, fp)
        return

    def optional(v):
        return "" if v is None else v

    writer = csv.writer(path)
    writer.writerow(COLUMNS)
    for report in reports:
        for frame in report.frames:
            writer.writerow(
                [report.sequence, frame.name, 1, *frame.counts]
                + ["{:.6f}".format(frame.f_score), frame.misclassified]
                + ["", "", ""]
            )
        writer.writerow(
            [report.sequence, "*", len(report.frames), *report.counts]
            + ["{:.6f}".format(report.f_score), report.misclassified]
            + [
                len(report.unmatched),
                optional(report.runtime),
                optional(report.iterations),
            ]
        )
