"""
Reading and writing multisub files.

Scheme files are JSON and parsed exactly: decimals become Decimal before they
reach the rational parser, so "0.1" means 1/10. Errors carry the JSON path of
the offending field. Point sets and point clouds are written as CSV through
pandas, rasters as binary PGM (P5).
"""

import json
import logging
import math
from decimal import Decimal
from pathlib import Path
from typing import Optional, Sequence

import numpy as np
import pandas as pd
from pydantic import ValidationError

from multisub.analysis import ConvergenceReport, PointCloud
from multisub.errors import SchemeFileError
from multisub.invariant_support import DifferenceSpaceReport, OmegaSet
from multisub.jsr import JsrEstimate
from multisub.lattice import LatticeSet, add
from multisub.models import (
    Certificate,
    CertificateLetter,
    ConvergenceReportModel,
    MaskEntry,
    OmegaSummary,
    OperatorEntry,
    SchemeFile,
    StageRecord,
    TransitionDump,
    TransitionEntry,
)
from multisub.rational import format_rational
from multisub.scheme import SchemeSet, SubdivisionOp
from multisub.transition import TransitionMatrix

logger = logging.getLogger(__name__)

BBox = tuple[float, float, float, float]


def json_path(loc: Sequence) -> str:
    """Render a pydantic error location as ``operators[0].mask[2].value``."""
    path = ""
    for part in loc:
        if isinstance(part, int):
            path += f"[{part}]"
        else:
            path += f".{part}" if path else str(part)
    return path


# Scheme files
def parse_scheme(text: str) -> SchemeSet:
    """
    Parse a scheme file from a JSON string.

    Raises:
        SchemeFileError: On JSON syntax errors, schema violations and
            inconsistent dimensions (with the JSON path of the field)
    """
    try:
        raw = json.loads(text, parse_float=Decimal)
    except json.JSONDecodeError as e:
        raise SchemeFileError(f"Invalid JSON at line {e.lineno}, column {e.colno}: {e.msg}") from e
    try:
        model = SchemeFile.model_validate(raw)
    except ValidationError as e:
        first = e.errors()[0]
        raise SchemeFileError(first["msg"], path=json_path(first["loc"])) from e
    return scheme_from_model(model)


def scheme_from_model(model: SchemeFile) -> SchemeSet:
    """Build a SchemeSet, checking every shape against ``model.dimension``."""
    s = model.dimension
    ops = []
    for i, entry in enumerate(model.operators):
        base = f"operators[{i}]"
        if len(entry.dilation) != s or any(len(row) != s for row in entry.dilation):
            raise SchemeFileError(f"expected a {s}x{s} integer matrix", path=f"{base}.dilation")
        if entry.digits is not None:
            for k, digit in enumerate(entry.digits):
                if len(digit) != s:
                    raise SchemeFileError(f"expected {s} coordinates", path=f"{base}.digits[{k}]")
        mask = {}
        for k, item in enumerate(entry.mask):
            point = tuple(item.point)
            if len(point) != s:
                raise SchemeFileError(f"expected {s} coordinates", path=f"{base}.mask[{k}].point")
            if point in mask:
                raise SchemeFileError(f"duplicate mask point {list(point)}", path=f"{base}.mask[{k}].point")
            mask[point] = item.value
        ops.append(
            SubdivisionOp.build(
                mask,
                entry.dilation,
                digits=entry.digits,
                label=entry.label or str(i + 1),
                shift_mask=entry.shift_mask,
            )
        )
    return SchemeSet.of(ops)


def load_scheme(path: str | Path) -> SchemeSet:
    """
    Load a scheme file from disk.

    Raises:
        SchemeFileError: If the file cannot be read or parsed
    """
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as e:
        raise SchemeFileError(f"Cannot read {path}: {e.strerror}") from e
    scheme = parse_scheme(text)
    logger.info("Loaded %d operators of dimension %d from %s", len(scheme), scheme.dim, path)
    return scheme


def _file_mask(op: SubdivisionOp) -> tuple[list[MaskEntry], bool]:
    """Mask entries as originally given: a normalized mask is translated back by its shift."""
    shift = op.mask.shift or (0,) * op.dim
    entries = [MaskEntry(point=list(add(p, shift)), value=v) for p, v in op.mask.coefficients]
    return entries, op.mask.contains_origin or any(shift)


def scheme_to_model(scheme: SchemeSet) -> SchemeFile:
    masks = [_file_mask(op) for op in scheme]
    return SchemeFile(
        dimension=scheme.dim,
        operators=[
            OperatorEntry(
                label=op.label,
                dilation=op.dilation.as_lists(),
                digits=[list(d) for d in op.digits],
                mask=entries,
                shift_mask=shift_mask,
            )
            for op, (entries, shift_mask) in zip(scheme, masks)
        ],
    )


def dump_scheme(scheme: SchemeSet) -> str:
    """Serialize a scheme set; values are written as exact "p/q" strings."""
    return json.dumps(scheme_to_model(scheme).model_dump(), indent=2) + "\n"


# Point sets
def _coordinate_columns(dim: int) -> list[str]:
    return [f"x{i + 1}" for i in range(dim)]


def omega_frame(points: LatticeSet) -> pd.DataFrame:
    return pd.DataFrame(list(points.points), columns=_coordinate_columns(points.dim), dtype="int64")


def write_omega_csv(points: LatticeSet | OmegaSet, path: str | Path) -> None:
    """One integer row per point, in canonical order."""
    lattice = points.points if isinstance(points, OmegaSet) else points
    omega_frame(lattice).to_csv(path, index=False)


def read_omega_csv(path: str | Path) -> LatticeSet:
    """
    Read a point set written by :func:`write_omega_csv`.

    Raises:
        SchemeFileError: If the file is missing columns or holds non-integers
    """
    try:
        frame = pd.read_csv(path)
    except (OSError, pd.errors.ParserError, pd.errors.EmptyDataError) as e:
        raise SchemeFileError(f"Cannot read point set {path}: {e}") from e
    if frame.empty or not all(pd.api.types.is_integer_dtype(t) for t in frame.dtypes):
        raise SchemeFileError(f"{path}: expected a header row and integer coordinates")
    return LatticeSet.of(frame.itertuples(index=False, name=None), frame.shape[1])


def point_cloud_frame(cloud: PointCloud) -> pd.DataFrame:
    frame = pd.DataFrame(cloud.points, columns=_coordinate_columns(cloud.points.shape[1]))
    if cloud.values is not None:
        frame["value"] = cloud.values
    return frame


def write_point_cloud_csv(cloud: PointCloud, path: str | Path) -> None:
    """Columns x1..xs and, when present, value; floats in round-trip precision."""
    point_cloud_frame(cloud).to_csv(path, index=False, float_format="%.17g")


# Rasters
def bounding_box(points: np.ndarray, pad: float = 0.05) -> BBox:
    """(xmin, xmax, ymin, ymax) of 2-D points with a relative margin."""
    if len(points) == 0:
        return (0.0, 1.0, 0.0, 1.0)
    lo = points.min(axis=0)
    hi = points.max(axis=0)
    span = np.maximum(hi - lo, 1e-12)
    lo, hi = lo - pad * span, hi + pad * span
    return (float(lo[0]), float(hi[0]), float(lo[1]), float(hi[1]))


def rasterize(points: np.ndarray, width: int, height: int, bbox: Optional[BBox] = None) -> np.ndarray:
    """
    8-bit raster of 2-D points: white background, black pixels at points.

    Row 0 is the top of the box (y = ymax). Points outside ``bbox`` are dropped.

    Raises:
        ValueError: If the points are not 2-D or the box is degenerate
    """
    if points.ndim != 2 or points.shape[1] != 2:
        raise ValueError("Rasters need 2-D points")
    if width < 1 or height < 1:
        raise ValueError("Raster size must be positive")
    xmin, xmax, ymin, ymax = bbox or bounding_box(points)
    if not (xmax > xmin and ymax > ymin):
        raise ValueError(f"Degenerate bounding box {(xmin, xmax, ymin, ymax)}")
    image = np.full((height, width), 255, dtype=np.uint8)
    inside = (
        (points[:, 0] >= xmin) & (points[:, 0] <= xmax) & (points[:, 1] >= ymin) & (points[:, 1] <= ymax)
    )
    pts = points[inside]
    cols = np.minimum(((pts[:, 0] - xmin) / (xmax - xmin) * width).astype(np.int64), width - 1)
    rows = np.minimum(((ymax - pts[:, 1]) / (ymax - ymin) * height).astype(np.int64), height - 1)
    image[rows, cols] = 0
    return image


def write_pgm(image: np.ndarray, path: str | Path) -> None:
    """Binary PGM: ``P5``, width height, maxval 255, row-major bytes."""
    height, width = image.shape
    with open(path, "wb") as f:
        f.write(f"P5\n{width} {height}\n255\n".encode("ascii"))
        f.write(np.ascontiguousarray(image, dtype=np.uint8).tobytes())


def read_pgm(path: str | Path) -> np.ndarray:
    data = Path(path).read_bytes()
    magic, size, maxval, body = data.split(b"\n", 3)
    if magic != b"P5" or maxval != b"255":
        raise ValueError(f"{path} is not an 8-bit binary PGM")
    width, height = (int(x) for x in size.split())
    return np.frombuffer(body, dtype=np.uint8).reshape(height, width)


# Transition matrices and reports
def transition_dump(transitions: Sequence[TransitionMatrix], omega: OmegaSet) -> TransitionDump:
    return TransitionDump(
        omega=[list(p) for p in omega.points],
        provenance=omega.provenance.value,
        matrices=[
            TransitionEntry(
                op_label=t.op_label,
                op_index=t.op_index,
                digit=list(t.digit),
                rows=[[format_rational(x) for x in row] for row in t.entries],
            )
            for t in transitions
        ],
    )


def _finite(value: float) -> Optional[float]:
    return value if math.isfinite(value) else None


def certificate(estimate: JsrEstimate, word: Sequence[dict] = ()) -> Certificate:
    return Certificate(
        lower=estimate.lower,
        upper=_finite(estimate.upper),
        status=estimate.status.value,
        method=estimate.upper_certificate.get("method"),
        word=[CertificateLetter(**letter) for letter in word],
        depth=estimate.depth,
        vertices=estimate.vertices,
    )


def omega_summary(omega: OmegaSet, space: DifferenceSpaceReport) -> OmegaSummary:
    seeded = None if omega.seeded_from == omega.points else [list(p) for p in omega.seeded_from]
    return OmegaSummary(
        provenance=omega.provenance.value,
        size=len(omega),
        seeded_from=seeded,
        dim_v=space.dim_v,
        dim_vtilde=space.dim_vtilde,
        components=space.components,
    )


def report_model(report: ConvergenceReport) -> ConvergenceReportModel:
    """Report without timestamps, so equal runs give equal bytes."""
    omega = None
    if report.omega is not None and report.difference_space is not None:
        omega = omega_summary(report.omega, report.difference_space)
    cert = certificate(report.jsr, report.certificate_word()) if report.jsr is not None else None
    return ConvergenceReportModel(
        verdict=report.verdict.value,
        power=report.power,
        assumptions=report.assumptions,
        omega=omega,
        certificate=cert,
        trail=[StageRecord(stage=e.stage, status=e.status.value, detail=e.detail, data=e.data) for e in report.trail],
    )


def dump_model(model) -> str:
    return model.model_dump_json(indent=2) + "\n"


def decay_frame(table: Sequence[tuple[int, float]]) -> pd.DataFrame:
    """Columns n, m_n and m_n^(1/n) (empty for n = 0)."""
    frame = pd.DataFrame(table, columns=["n", "m_n"])
    frame["rate"] = [m ** (1.0 / n) if n > 0 else float("nan") for n, m in table]
    return frame
