"""CSV ingestion: covariates always present, responses possibly missing.

Missing responses are an empty cell or the literal ``NA``.  An explicit 0/1
indicator column may accompany the response; it must agree with response
presence exactly.
"""

import csv
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from .errors import IndicatorConflict, MissingCovariate, ParseError
from .regression import CompleteCaseSample

MISSING_MARKERS = ("", "NA")


@dataclass(frozen=True)
class Dataset:
    covariate_names: tuple
    response_name: str
    indicator_name: Optional[str]
    sample: CompleteCaseSample
    path: Optional[str] = None


def _parse_float(cell, row, col_name, kind):
    text = cell.strip()
    try:
        return float(text)
    except ValueError:
        exc = MissingCovariate if kind == "covariate" else ParseError
        raise exc(f"row {row}, column {col_name!r}: "
                  f"cannot parse {cell!r} as a number",
                  row=row, column=col_name) from None


def load_csv(path, response: str = "y",
             covariates: Optional[Sequence[str]] = None,
             indicator: Optional[str] = None,
             missing_markers: Sequence[str] = MISSING_MARKERS) -> Dataset:
    """Read an RFC-4180-style CSV with a header row into a sample.

    Row numbers in errors count the header as row 1.
    """
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise ParseError("empty file: a header row is required",
                             row=1) from None
        header = [h.strip() for h in header]
        if response not in header:
            raise ParseError(f"response column {response!r} not in header "
                             f"{header}", row=1, column=response)
        if indicator is not None and indicator not in header:
            raise ParseError(f"indicator column {indicator!r} not in "
                             f"header", row=1, column=indicator)
        if covariates is None:
            covariates = [h for h in header
                          if h not in (response, indicator)]
        else:
            covariates = list(covariates)
            for name in covariates:
                if name not in header:
                    raise MissingCovariate(
                        f"covariate column {name!r} not in header",
                        row=1, column=name)
        if not covariates:
            raise ParseError("no covariate columns", row=1)
        pos = {name: header.index(name) for name in header}
        xs, ys, inds = [], [], []
        for rownum, cells in enumerate(reader, start=2):
            if not cells or all(not c.strip() for c in cells):
                continue
            if len(cells) != len(header):
                raise ParseError(
                    f"row {rownum}: expected {len(header)} cells, "
                    f"found {len(cells)}", row=rownum)
            xs.append([_parse_float(cells[pos[name]], rownum, name,
                                    "covariate") for name in covariates])
            ycell = cells[pos[response]].strip()
            if ycell in missing_markers:
                ys.append(np.nan)
            else:
                ys.append(_parse_float(ycell, rownum, response, "response"))
            if indicator is not None:
                icell = cells[pos[indicator]].strip()
                if icell not in ("0", "1"):
                    raise ParseError(
                        f"row {rownum}, column {indicator!r}: indicator "
                        f"must be 0 or 1, found {icell!r}",
                        row=rownum, column=indicator)
                inds.append(int(icell))
    x = np.asarray(xs, dtype=np.float64)
    y = np.asarray(ys, dtype=np.float64)
    present = np.isfinite(y)
    if indicator is not None:
        a = np.asarray(inds, dtype=bool)
        bad = np.flatnonzero(a != present)
        if bad.size:
            rownum = int(bad[0]) + 2
            state = ("observed response with indicator 0"
                     if present[bad[0]] else
                     "missing response with indicator 1")
            raise IndicatorConflict(f"row {rownum}: {state}",
                                    row=rownum, column=indicator)
    sample = CompleteCaseSample(x=x, y=y, a=present)
    return Dataset(covariate_names=tuple(covariates),
                   response_name=response, indicator_name=indicator,
                   sample=sample, path=str(path))
