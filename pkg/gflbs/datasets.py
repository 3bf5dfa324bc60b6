"""
Frame sequences and ground truth on disk.

A sequence is a directory of 8-bit grayscale or RGB images (PGM, PPM, PNG,
BMP) read in lexicographic order. Frames are identified by their file stem,
which is also how ground-truth masks, training manifests and written results
are matched to them.
"""

from __future__ import annotations

import abc
import concurrent.futures
import json
import logging
import pathlib
from typing import Iterable, Sequence

import numpy as np
import numpy.typing as npt
from PIL import Image, UnidentifiedImageError

from gflbs.problems import observation
from gflbs.results import decomposition, trace_record
from gflbs.solvers import extract_mask, solver_state

logger = logging.getLogger(__name__)

IMAGE_SUFFIXES = frozenset({".pgm", ".ppm", ".pnm", ".pbm", ".png", ".bmp"})

# Ground-truth gray levels: <= BACKGROUND_LEVEL is background,
# >= FOREGROUND_LEVEL is foreground, anything between is not scored.
BACKGROUND_LEVEL = 50
FOREGROUND_LEVEL = 200

LUMINANCE = np.array([0.299, 0.587, 0.114])


class DatasetError(OSError):

    """
    Base class of the errors raised while reading a dataset.
    """

    pass


class EmptySequenceError(DatasetError):
    pass


class UnreadableFrameError(DatasetError):
    pass


class GeometryMismatchError(DatasetError):
    pass


class ManifestError(DatasetError):
    pass


class frame_sequence:

    """
    Ordered frames of a common geometry, intensities in [0, 1].
    """

    _width: int
    _height: int
    _frames: list[npt.NDArray[np.float64]]
    _names: list[str]

    def __init__(
        self,
        frames: Iterable[npt.ArrayLike],
        names: Sequence[str] | None = None,
    ):
        """
        Args:
            frames: Non-empty sequence of ``height x width`` images.
            names: Identifier of each frame, defaults to the frame index.
        """
        self._frames = [np.asarray(f, dtype=np.float64) for f in frames]
        if not self._frames:
            raise ValueError("A frame sequence must hold at least one frame.")
        self._height, self._width = self._frames[0].shape
        for k, f in enumerate(self._frames):
            if f.shape != (self._height, self._width):
                raise ValueError(
                    "Frame {} is {}x{}, expected {}x{}.".format(
                        k, f.shape[1], f.shape[0], self._width, self._height
                    )
                )
        if names is None:
            names = [str(k) for k in range(len(self._frames))]
        self._names = list(names)
        if len(self._names) != len(self._frames):
            raise ValueError(
                "Got {} names for {} frames.".format(
                    len(self._names), len(self._frames)
                )
            )

    @property
    def width(self) -> int:
        return self._width

    @property
    def height(self) -> int:
        return self._height

    @property
    def frames(self) -> list[npt.NDArray[np.float64]]:
        return self._frames

    @property
    def names(self) -> list[str]:
        return self._names

    def subset(self, indices: Iterable[int]) -> frame_sequence:
        """Frames at the given indices, in that order."""
        indices = list(indices)
        return frame_sequence(
            [self._frames[k] for k in indices], [self._names[k] for k in indices]
        )

    def __len__(self) -> int:
        return len(self._frames)

    def __repr__(self):
        return "frame_sequence({} frames of {}x{})".format(
            len(self), self._width, self._height
        )


class ground_truth:

    """
    Per-frame binary masks (True on foreground) keyed by frame name, with
    pixels that are not scored flagged in a separate ignore mask.
    """

    _masks: dict[str, npt.NDArray[np.bool_]]
    _ignore: dict[str, npt.NDArray[np.bool_]]

    def __init__(
        self,
        masks: dict[str, npt.ArrayLike],
        ignore: dict[str, npt.ArrayLike] | None = None,
    ):
        self._masks = {k: np.asarray(v, dtype=bool) for k, v in masks.items()}
        ignore = ignore or {}
        self._ignore = {
            k: np.asarray(ignore[k], dtype=bool)
            if k in ignore
            else np.zeros(v.shape, dtype=bool)
            for k, v in self._masks.items()
        }
        for k, v in self._masks.items():
            if self._ignore[k].shape != v.shape:
                raise ValueError(
                    "Ignore mask of frame {} has the wrong shape.".format(k)
                )

    @classmethod
    def from_levels(cls, levels: dict[str, npt.ArrayLike]) -> ground_truth:
        """
        Build ground truth from 8-bit gray-level images.

        Args:
            levels: Images with values in [0, 255] keyed by frame name.
        """
        masks, ignore = {}, {}
        for k, v in levels.items():
            a = np.asarray(v, dtype=np.float64)
            masks[k] = a >= FOREGROUND_LEVEL
            ignore[k] = (a > BACKGROUND_LEVEL) & (a < FOREGROUND_LEVEL)
        return cls(masks, ignore)

    @property
    def names(self) -> list[str]:
        return sorted(self._masks)

    def mask(self, name: str) -> npt.NDArray[np.bool_]:
        return self._masks[name]

    def ignore(self, name: str) -> npt.NDArray[np.bool_]:
        return self._ignore[name]

    def __contains__(self, name: object) -> bool:
        return name in self._masks

    def __len__(self) -> int:
        return len(self._masks)

    def __repr__(self):
        return "ground_truth({} frames)".format(len(self))


def _image_files(directory: pathlib.Path) -> list[pathlib.Path]:
    if not directory.is_dir():
        raise EmptySequenceError("{} is not a directory.".format(directory))
    return sorted(
        p for p in directory.iterdir() if p.suffix.lower() in IMAGE_SUFFIXES
    )


def _downscale(a: npt.NDArray[np.float64], factor: int) -> npt.NDArray[np.float64]:
    # Box filter over factor x factor blocks, trailing rows / columns dropped.
    if factor == 1:
        return a
    h, w = a.shape[0] // factor, a.shape[1] // factor
    if h == 0 or w == 0:
        raise ValueError(
            "Cannot downscale a {}x{} image by {}.".format(
                a.shape[1], a.shape[0], factor
            )
        )
    a = a[: h * factor, : w * factor]
    return a.reshape(h, factor, w, factor).mean(axis=(1, 3))


def read_levels(path: str | pathlib.Path) -> npt.NDArray[np.float64]:
    """
    Read an image as gray levels in [0, 255].

    RGB images are converted with ``0.299 R + 0.587 G + 0.114 B``.

    Args:
        path: Image file.

    Returns:
        A ``height x width`` array.
    """
    path = pathlib.Path(path)
    try:
        with Image.open(path) as image:
            if image.mode in ("I;16", "I;16B", "I;16L", "I"):
                # 16-bit PGM, rescaled to 8-bit levels.
                return np.asarray(image, dtype=np.float64) * (255.0 / 65535.0)
            if image.mode in ("L", "1"):
                return np.asarray(image.convert("L"), dtype=np.float64)
            rgb = np.asarray(image.convert("RGB"), dtype=np.float64)
    except (OSError, UnidentifiedImageError, ValueError) as e:
        raise UnreadableFrameError("Cannot read image {}: {}".format(path, e)) from e
    return rgb @ LUMINANCE


def load_sequence(
    path: str | pathlib.Path,
    downscale: int = 1,
    exclude: Iterable[str] = (),
    workers: int = 1,
) -> frame_sequence:
    """
    Load a directory of frames.

    Args:
        path: Directory of image files.
        downscale: Integer box-filter factor.
        exclude: File names to skip (ground-truth files stored with frames).
        workers: Number of threads reading files.

    Returns:
        The frames, named by file stem, in lexicographic file order.
    """
    if downscale < 1:
        raise ValueError(
            "Downscale factor must be at least 1, got {}.".format(downscale)
        )
    directory = pathlib.Path(path)
    skip = set(exclude)
    files = [p for p in _image_files(directory) if p.name not in skip]
    if not files:
        raise EmptySequenceError("No image file found in {}.".format(directory))

    if workers > 1:
        with concurrent.futures.ThreadPoolExecutor(max_workers=workers) as pool:
            levels = list(pool.map(read_levels, files))
    else:
        levels = [read_levels(p) for p in files]

    shape = levels[0].shape
    for p, a in zip(files, levels):
        if a.shape != shape:
            raise GeometryMismatchError(
                "Frame {} is {}x{}, expected {}x{} as {}.".format(
                    p, a.shape[1], a.shape[0], shape[1], shape[0], files[0].name
                )
            )

    frames = [_downscale(a / 255.0, downscale) for a in levels]
    logger.info(
        "loaded %d frames of %dx%d from %s",
        len(frames),
        frames[0].shape[1],
        frames[0].shape[0],
        directory,
    )
    return frame_sequence(frames, [p.stem for p in files])


class layout(abc.ABC):

    """
    Abstract class representing a dataset directory convention.
    """

    @abc.abstractmethod
    def frames_directory(self, root: pathlib.Path) -> pathlib.Path:
        """Directory holding the frames of the sequence."""
        pass

    @abc.abstractmethod
    def ground_truth_files(self, root: pathlib.Path) -> dict[str, pathlib.Path]:
        """Ground-truth image of each evaluated frame, keyed by frame name."""
        pass

    def excluded_files(self, root: pathlib.Path) -> set[str]:
        """Names of files of the frames directory that are not frames."""
        return set()

    def load_sequence(
        self, root: str | pathlib.Path, downscale: int = 1, workers: int = 1
    ) -> frame_sequence:
        root = pathlib.Path(root)
        return load_sequence(
            self.frames_directory(root),
            downscale,
            exclude=self.excluded_files(root),
            workers=workers,
        )


class generic(layout):

    """
    ``frames/`` and ``gt/`` directories, ground truth named as its frame.
    """

    def frames_directory(self, root: pathlib.Path) -> pathlib.Path:
        return root / "frames"

    def ground_truth_files(self, root: pathlib.Path) -> dict[str, pathlib.Path]:
        gt = root / "gt"
        if not gt.is_dir():
            return {}
        return {p.stem: p for p in _image_files(gt)}


class wallflower(layout):

    """
    Frames ``b<index>`` stored with one ``hand_segmented_<index>`` ground-truth
    frame.
    """

    prefix = "hand_segmented_"

    def frames_directory(self, root: pathlib.Path) -> pathlib.Path:
        return root

    def _ground_truth(self, root: pathlib.Path) -> list[pathlib.Path]:
        return [
            p
            for p in _image_files(root)
            if p.stem.lower().startswith(self.prefix)
        ]

    def ground_truth_files(self, root: pathlib.Path) -> dict[str, pathlib.Path]:
        return {"b" + p.stem[len(self.prefix) :]: p for p in self._ground_truth(root)}

    def excluded_files(self, root: pathlib.Path) -> set[str]:
        return {p.name for p in self._ground_truth(root)}


class li(layout):

    """
    Frames stored with ground-truth files named ``gt_new_<frame>`` or
    ``gt_<frame>``.
    """

    prefixes = ("gt_new_", "gt_")

    def frames_directory(self, root: pathlib.Path) -> pathlib.Path:
        return root

    def _ground_truth(self, root: pathlib.Path) -> dict[str, pathlib.Path]:
        files: dict[str, pathlib.Path] = {}
        for p in _image_files(root):
            for prefix in self.prefixes:
                if p.stem.startswith(prefix):
                    files.setdefault(p.stem[len(prefix) :], p)
                    break
        return files

    def ground_truth_files(self, root: pathlib.Path) -> dict[str, pathlib.Path]:
        return self._ground_truth(root)

    def excluded_files(self, root: pathlib.Path) -> set[str]:
        return {p.name for p in self._ground_truth(root).values()}


class flat(layout):

    """
    A single directory of images named as their frames, used for ground
    truth or masks stored on their own.
    """

    def frames_directory(self, root: pathlib.Path) -> pathlib.Path:
        return root

    def ground_truth_files(self, root: pathlib.Path) -> dict[str, pathlib.Path]:
        return {p.stem: p for p in _image_files(root)}


layouts: dict[str, type[layout]] = {
    "generic": generic,
    "flat": flat,
    "wallflower": wallflower,
    "li": li,
}


def detect_layout(root: str | pathlib.Path) -> layout:
    """
    Guess the convention of a dataset directory.

    Args:
        root: Dataset directory.

    Returns:
        generic if root has a ``frames/`` or ``gt/`` directory, wallflower if
        it holds a ``hand_segmented_`` file, li if it holds ``gt_`` files and
        flat otherwise.
    """
    root = pathlib.Path(root)
    if (root / "frames").is_dir() or (root / "gt").is_dir():
        return generic()
    if not root.is_dir():
        return flat()
    if wallflower()._ground_truth(root):
        return wallflower()
    if li()._ground_truth(root):
        return li()
    return flat()


def load_ground_truth(
    root: str | pathlib.Path, layout: layout | None = None, downscale: int = 1
) -> ground_truth:
    """
    Load the ground truth of a dataset directory.

    Args:
        root: Dataset directory.
        layout: Directory convention, detected if None.
        downscale: Box-filter factor, same as the frames.

    Returns:
        The ground truth of every evaluated frame.
    """
    root = pathlib.Path(root)
    if layout is None:
        layout = detect_layout(root)
    levels = {
        name: _downscale(read_levels(p), downscale)
        for name, p in sorted(layout.ground_truth_files(root).items())
    }
    return ground_truth.from_levels(levels)


def load_masks(directory: str | pathlib.Path) -> dict[str, npt.NDArray[np.bool_]]:
    """
    Load binary masks written by write_results.

    Args:
        directory: Directory of mask images.

    Returns:
        Masks keyed by file stem, True where the level is above 127.
    """
    directory = pathlib.Path(directory)
    files = _image_files(directory)
    if not files:
        raise EmptySequenceError("No mask file found in {}.".format(directory))
    return {p.stem: read_levels(p) > 127 for p in files}


def read_manifest(path: str | pathlib.Path) -> list[str]:
    """
    Read a training manifest: one frame file name per line, blank lines and
    lines starting with ``#`` skipped.

    Args:
        path: Manifest file.

    Returns:
        The listed names.
    """
    path = pathlib.Path(path)
    try:
        lines = path.read_text().splitlines()
    except OSError as e:
        raise ManifestError("Cannot read manifest {}: {}".format(path, e)) from e
    names = [
        line.strip() for line in lines if line.strip() and not line.startswith("#")
    ]
    if not names:
        raise ManifestError("Manifest {} lists no frame.".format(path))
    return names


def split_training(
    seq: frame_sequence, manifest: Iterable[str]
) -> tuple[frame_sequence, frame_sequence]:
    """
    Split a sequence into background-only training frames and mixed frames.

    Args:
        seq: Full sequence.
        manifest: Training frame names, with or without file suffix.

    Returns:
        The training frames and the remaining frames, both in sequence order.
    """
    wanted = {pathlib.PurePath(name).stem for name in manifest}
    unknown = wanted - set(seq.names)
    if unknown:
        raise ManifestError(
            "Manifest lists frames not in the sequence: {}.".format(
                ", ".join(sorted(unknown))
            )
        )
    training = [k for k, name in enumerate(seq.names) if name in wanted]
    mixed = [k for k, name in enumerate(seq.names) if name not in wanted]
    if not mixed:
        raise ManifestError("Manifest lists every frame, nothing left to decompose.")
    return seq.subset(training), seq.subset(mixed)


def to_observation(seq: frame_sequence) -> observation:
    """
    Stack the frames of a sequence as the columns of an observation matrix,
    each frame vectorized in row-major order.
    """
    m = np.stack([f.ravel() for f in seq.frames], axis=1)
    return observation(m, seq.width, seq.height, seq.names)


def to_levels(column: npt.ArrayLike) -> npt.NDArray[np.uint8]:
    """Intensities to 8-bit levels, clamped to [0, 1] and rounded half up."""
    a = np.clip(np.asarray(column, dtype=np.float64), 0.0, 1.0)
    return np.floor(a * 255.0 + 0.5).astype(np.uint8)


def write_trace(trace: Iterable[trace_record], path: str | pathlib.Path):
    """
    Write a convergence trace as a JSON array with one object per iteration.
    """
    records = [r.todict() for r in trace]
    with open(path, "w") as fp:
        json.dump(records, fp, indent=1)
        fp.write("\n")


def read_trace(path: str | pathlib.Path) -> list[trace_record]:
    """Read a trace written by write_trace."""
    path = pathlib.Path(path)
    try:
        records = json.loads(path.read_text())
        return [trace_record(**r) for r in records]
    except (ValueError, TypeError) as e:
        raise DatasetError("Invalid trace file {}: {}".format(path, e)) from e


def write_results(
    result: decomposition,
    geometry: observation,
    out_dir: str | pathlib.Path,
    mask_eps: float = 0.0,
):
    """
    Write a decomposition to ``out_dir``: ``background/<frame>.png`` as 8-bit
    gray levels, ``masks/<frame>.png`` as 1-bit images and ``trace.json``.

    Args:
        result: Decomposition of the frames of geometry.
        geometry: Observation the decomposition was computed on.
        out_dir: Output directory, created if needed.
        mask_eps: Magnitude floor of the foreground masks.
    """
    if result.foreground.shape != geometry.shape:
        raise ValueError(
            "Result of shape {} does not match observation of shape {}.".format(
                result.foreground.shape, geometry.shape
            )
        )
    out = pathlib.Path(out_dir)
    backgrounds = out / "background"
    masks = out / "masks"
    backgrounds.mkdir(parents=True, exist_ok=True)
    masks.mkdir(parents=True, exist_ok=True)

    for k, name in enumerate(geometry.names):
        Image.fromarray(
            geometry.column_to_frame(to_levels(result.background[:, k]))
        ).save(backgrounds / "{}.png".format(name))
        mask = geometry.column_to_frame(
            extract_mask(result.foreground[:, k], mask_eps)
        )
        levels = np.where(mask, 255, 0).astype(np.uint8)
        Image.fromarray(levels).convert("1").save(masks / "{}.png".format(name))

    write_trace(result.trace, out / "trace.json")
    logger.info("wrote %d frames to %s", geometry.frame_count, out)


def write_snapshot(
    state: solver_state,
    geometry: observation,
    frame: int,
    out_dir: str | pathlib.Path,
):
    """
    Write one frame of an ALM iterate to ``out_dir/iterations/``, as
    ``<iteration>_background.png`` and ``<iteration>_foreground.png``. The
    foreground image holds the magnitude of F, clipped to [0, 1].
    """
    if not 0 <= frame < geometry.frame_count:
        raise ValueError(
            "Snapshot frame {} out of [0, {}).".format(frame, geometry.frame_count)
        )
    out = pathlib.Path(out_dir) / "iterations"
    out.mkdir(parents=True, exist_ok=True)
    for part, column in (
        ("background", state.background[:, frame]),
        ("foreground", np.abs(state.foreground[:, frame])),
    ):
        Image.fromarray(geometry.column_to_frame(to_levels(column))).save(
            out / "{:04d}_{}.png".format(state.iteration, part)
        )
