"""Utility functions for CLI commands."""

import functools
import logging
import re
import sys
from typing import Optional

import click

from multisub.analysis import OperatorSequence
from multisub.errors import MultisubError, SchemeFileError, StageError
from multisub.lattice import Point

EXIT_OK = 0
EXIT_FAILURE = 1
EXIT_PARSE = 2
EXIT_NOT_CONVERGENT = 3
EXIT_INCONCLUSIVE = 4

_INT_LIST = re.compile(r"^\s*-?\d+(\s*,\s*-?\d+)*\s*$")


def setup_logging(verbose: bool, debug: bool) -> None:
    level = logging.DEBUG if debug else logging.INFO if verbose else logging.WARNING
    logging.basicConfig(level=level, format="%(levelname)s %(name)s: %(message)s", force=True)


def success(message: str) -> None:
    click.echo(click.style(f"✓ {message}", fg="green"))


def warn(message: str) -> None:
    click.echo(click.style(f"! {message}", fg="yellow"))


def fail(message: str, code: int = EXIT_FAILURE) -> None:
    click.echo(click.style(f"✗ {message}", fg="red"), err=True)
    sys.exit(code)


def exit_on_error(func):
    """Map library errors to exit codes: 2 for unreadable input, 1 otherwise."""

    @functools.wraps(func)
    def wrapper(*args, **kwargs):
        try:
            return func(*args, **kwargs)
        except SchemeFileError as e:
            fail(str(e), code=EXIT_PARSE)
        except StageError as e:
            if e.witness is not None:
                click.echo(f"  witness: {e.witness}", err=True)
            fail(str(e))
        except (MultisubError, ValueError, OSError) as e:
            fail(str(e))

    return wrapper


def _int_list(text: str, what: str) -> list[int]:
    cleaned = text.strip().strip("[]()")
    if not _INT_LIST.match(cleaned):
        raise click.BadParameter(f"{what} must be comma-separated integers, got {text!r}")
    return [int(x) for x in cleaned.split(",")]


def parse_sequence(text: str) -> OperatorSequence:
    """
    Parse an operator sequence with 1-based operator numbers.

    "1,2,2" repeats the word forever; "1,2,2;2" is the prefix 1,2,2 followed
    by 2 repeated.
    """
    if ";" in text:
        head, tail = text.split(";", 1)
        prefix = _int_list(head, "Sequence prefix") if head.strip().strip("[]()") else []
        period = _int_list(tail, "Sequence period")
    else:
        prefix, period = [], _int_list(text, "Sequence")
    if any(j < 1 for j in prefix + period):
        raise click.BadParameter("Operator numbers start at 1")
    return OperatorSequence(tuple(j - 1 for j in prefix), tuple(j - 1 for j in period))


def parse_point(text: str) -> Point:
    return tuple(_int_list(text, "Point"))


def parse_bbox(text: Optional[str]) -> Optional[tuple[float, float, float, float]]:
    """"xmin,xmax,ymin,ymax" -> tuple."""
    if text is None:
        return None
    try:
        values = tuple(float(x) for x in text.split(","))
    except ValueError:
        raise click.BadParameter(f"Bounding box must be four numbers, got {text!r}")
    if len(values) != 4 or not (values[1] > values[0] and values[3] > values[2]):
        raise click.BadParameter("Bounding box must be xmin,xmax,ymin,ymax with xmin < xmax and ymin < ymax")
    return values


def parse_raster(text: str) -> tuple[int, int]:
    """"WxH" -> (width, height)."""
    match = re.fullmatch(r"\s*(\d+)\s*[xX]\s*(\d+)\s*", text)
    if not match or int(match.group(1)) < 1 or int(match.group(2)) < 1:
        raise click.BadParameter(f"Raster size must look like 512x512, got {text!r}")
    return int(match.group(1)), int(match.group(2))


def sequence_callback(ctx, param, value):
    return None if value is None else parse_sequence(value)


def points_callback(ctx, param, value):
    return tuple(parse_point(v) for v in value)


def bbox_callback(ctx, param, value):
    return parse_bbox(value)


def raster_callback(ctx, param, value):
    return parse_raster(value)
