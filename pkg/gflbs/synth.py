"""
Synthetic sequences with known background and foreground.

The background is a sum of ``background_rank`` separable components, each
the outer product of low-frequency cosine profiles along x and y weighted by
per-frame coefficients, so its rank is exact by construction. Its values lie
in [0.1, 0.7]. Foreground objects are constant rectangles added on top.
"""

from __future__ import annotations

import dataclasses
import json
import logging
import pathlib
import typing
from typing import Any

import numpy as np
from PIL import Image

from gflbs.datasets import frame_sequence, ground_truth, to_levels, to_observation
from gflbs.matrices import matrix
from gflbs.problems import observation

logger = logging.getLogger(__name__)


class block(typing.NamedTuple):

    """
    Constant foreground rectangle ``[x, x + width) x [y, y + height)`` added
    to one frame.
    """

    frame: int
    x: int
    y: int
    width: int
    height: int
    amplitude: float


@dataclasses.dataclass(frozen=True)
class synth_spec:
    width: int = 32
    height: int = 32
    n_frames: int = 20
    background_rank: int = 2
    blocks: tuple[block, ...] = ()
    noise_std: float = 0.0
    seed: int = 0
    # Leading frames that hold no block, listed in the training manifest.
    training_frames: int = 0

    def __post_init__(self):
        object.__setattr__(
            self, "blocks", tuple(block(*b) for b in self.blocks)  # type: ignore
        )

    def validate(self) -> synth_spec:
        if self.width < 1 or self.height < 1 or self.n_frames < 1:
            raise ValueError(
                "Invalid sequence size {}x{}x{}.".format(
                    self.width, self.height, self.n_frames
                )
            )
        p = self.width * self.height
        if not 0 <= self.background_rank <= min(p, self.n_frames):
            raise ValueError(
                "Background rank {} out of [0, {}].".format(
                    self.background_rank, min(p, self.n_frames)
                )
            )
        if self.noise_std < 0:
            raise ValueError(
                "Noise level must be nonnegative, got {}.".format(self.noise_std)
            )
        if not 0 <= self.training_frames < self.n_frames:
            raise ValueError(
                "Invalid number of training frames {}.".format(self.training_frames)
            )
        for b in self.blocks:
            if not self.training_frames <= b.frame < self.n_frames:
                raise ValueError("Block {} is not on a mixed frame.".format(b))
            if (
                b.width < 1
                or b.height < 1
                or b.x < 0
                or b.y < 0
                or b.x + b.width > self.width
                or b.y + b.height > self.height
            ):
                raise ValueError("Block {} is not inside the frame.".format(b))
        return self

    @classmethod
    def from_dict(cls, values: dict[str, Any]) -> synth_spec:
        fields = {f.name for f in dataclasses.fields(cls)}
        unknown = set(values) - fields
        if unknown:
            raise ValueError(
                "Unknown synthetic spec fields: {}.".format(", ".join(sorted(unknown)))
            )
        values = dict(values)
        if "blocks" in values:
            values["blocks"] = tuple(
                block(**b) if isinstance(b, dict) else block(*b)
                for b in values["blocks"]
            )
        return cls(**values).validate()

    @classmethod
    def load(cls, path: str | pathlib.Path) -> synth_spec:
        """Read a spec from a JSON object with the field names as keys."""
        with open(path) as fp:
            try:
                values = json.load(fp)
            except ValueError as e:
                raise ValueError("Invalid JSON in {}: {}".format(path, e)) from e
        if not isinstance(values, dict):
            raise ValueError("{} does not hold a JSON object.".format(path))
        return cls.from_dict(values)


class synth_result(typing.NamedTuple):
    sequence: frame_sequence
    truth: ground_truth
    background: matrix
    foreground: matrix
    clamped: int
    training: list[str]

    def as_observation(self) -> observation:
        """The generated frames as an observation matrix."""
        return to_observation(self.sequence)


def _profiles(n: int, rank: int, phases: np.ndarray) -> matrix:
    # Column r: cos(pi (r + 1) t + phase), t in [0, 1). Column 0 is shifted to
    # (1 + cos) / 2, in [0, 1].
    t = np.arange(n) / n
    r = np.arange(1, rank + 1)
    out = np.cos(np.pi * np.outer(t, r) + phases)
    out[:, 0] = (1.0 + out[:, 0]) / 2
    return out


def generate(spec: synth_spec) -> synth_result:
    """
    Generate a sequence, deterministic given the spec.

    The first background component is static, the others are weighted by
    coefficients drawn in [-1, 1] per frame. The sum is mapped affinely onto
    [0.1, 0.7]; the constant shift is absorbed by the static component, so
    the rank stays ``background_rank``.

    Returns:
        The clamped frames, their ground truth, the true background and
        foreground matrices and the number of entries changed by clamping to
        [0, 1].
    """
    spec.validate()
    rng = np.random.default_rng(spec.seed)
    w, h, n, r = spec.width, spec.height, spec.n_frames, spec.background_rank

    px = _profiles(w, r, rng.uniform(0, np.pi, r))
    py = _profiles(h, r, rng.uniform(0, np.pi, r))
    coefficients = rng.uniform(-1.0, 1.0, (r, n))
    coefficients[:1] = 1.0
    # Column k of spatial is the row-major vectorization of py[:, k] px[:, k]^T.
    spatial = np.einsum("yk,xk->yxk", py, px).reshape(w * h, r)
    background = spatial @ coefficients
    if r:
        low, high = background.min(), background.max()
        if high > low:
            background = 0.1 + 0.6 * (background - low) / (high - low)
        else:
            background = np.full_like(background, 0.4)

    foreground = np.zeros((w * h, n))
    masks = np.zeros((n, h, w), dtype=bool)
    for b in spec.blocks:
        image = np.zeros((h, w))
        image[b.y : b.y + b.height, b.x : b.x + b.width] = b.amplitude
        foreground[:, b.frame] += image.ravel()
        if b.amplitude != 0:
            masks[b.frame, b.y : b.y + b.height, b.x : b.x + b.width] = True

    d = background + foreground
    if spec.noise_std > 0:
        d = d + rng.normal(0.0, spec.noise_std, d.shape)
    clamped = int(np.count_nonzero((d < 0) | (d > 1)))
    if clamped:
        logger.warning("%d synthetic pixel values clamped to [0, 1]", clamped)
    d = np.clip(d, 0.0, 1.0)

    names = ["f{:04d}".format(k) for k in range(n)]
    sequence = frame_sequence([d[:, k].reshape(h, w) for k in range(n)], names)
    truth = ground_truth({name: masks[k] for k, name in enumerate(names)})
    return synth_result(
        sequence,
        truth,
        background,
        foreground,
        clamped,
        names[: spec.training_frames],
    )


def write_dataset(result: synth_result, root: str | pathlib.Path):
    """
    Write a generated sequence in the generic layout: ``frames/`` as 8-bit
    PNG, ``gt/`` as 0 / 255 PNG masks and ``training.txt`` when the sequence
    has training frames.
    """
    root = pathlib.Path(root)
    frames, gt = root / "frames", root / "gt"
    frames.mkdir(parents=True, exist_ok=True)
    gt.mkdir(parents=True, exist_ok=True)
    for name, frame in zip(result.sequence.names, result.sequence.frames):
        Image.fromarray(to_levels(frame)).save(frames / "{}.png".format(name))
        levels = np.where(result.truth.mask(name), 255, 0).astype(np.uint8)
        Image.fromarray(levels).save(gt / "{}.png".format(name))
    if result.training:
        (root / "training.txt").write_text(
            "".join("{}.png\n".format(name) for name in result.training)
        )
    logger.info(
        "wrote synthetic sequence of %d frames to %s", len(result.sequence), root
    )
