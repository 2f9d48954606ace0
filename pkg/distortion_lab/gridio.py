"""QCGRID node files and CSV export of dilatation fields.

    QCGRID v1 n=<n> res=<r1,...,rn> box=<lo1,hi1;...;lon,hin>\n
followed by (r1+1)*...*(rn+1)*n little-endian float64 node values, row-major.
"""
import csv
import logging
import re
from pathlib import Path
from typing import Union

import numpy as np

from .errors import GridFormatError
from .field import DilatationField, GridMapping, SampledNodes, map_nodes
from .reports import format_float

logger = logging.getLogger(__name__)

HEADER_RE = re.compile(r"^QCGRID v1 n=(\d+) res=([\d,]+) box=([^\s]+)$")


def write_grid(m: GridMapping, path: Union[str, Path]) -> None:
    """Write the node values of m (analytic sources are sampled at their grid)"""
    nodes = np.ascontiguousarray(map_nodes(m), dtype="<f8")
    res = ",".join(str(r) for r in m.resolution)
    box = ";".join(f"{format_float(lo)},{format_float(hi)}" for lo, hi in m.box)
    with open(path, "wb") as f:
        f.write(f"QCGRID v1 n={m.n} res={res} box={box}\n".encode("ascii"))
        f.write(nodes.tobytes(order="C"))
    logger.info(f"Wrote {m!r} to {path}")


def read_grid(path: Union[str, Path]) -> GridMapping:
    """Read a QCGRID file into a sampled GridMapping"""
    with open(path, "rb") as f:
        header = f.readline()
        payload = f.read()
    try:
        text = header.decode("ascii").rstrip("\n")
    except UnicodeDecodeError:
        raise GridFormatError("header is not ASCII", path=str(path))
    match = HEADER_RE.match(text)
    if not match:
        raise GridFormatError(f"bad header {text[:80]!r}", path=str(path))

    n = int(match.group(1))
    res = tuple(int(r) for r in match.group(2).split(","))
    try:
        box = tuple(tuple(float(v) for v in part.split(",")) for part in match.group(3).split(";"))
    except ValueError:
        raise GridFormatError(f"cannot parse box {match.group(3)!r}", path=str(path))
    if len(res) != n or len(box) != n or any(len(b) != 2 for b in box):
        raise GridFormatError(f"header declares n={n} but res/box have other lengths", path=str(path))

    shape = tuple(r + 1 for r in res) + (n,)
    expected = int(np.prod(shape)) * 8
    if len(payload) != expected:
        raise GridFormatError(f"payload has {len(payload)} bytes, expected {expected}", path=str(path))
    nodes = np.frombuffer(payload, dtype="<f8").reshape(shape).astype(float)
    if not np.all(np.isfinite(nodes)):
        raise GridFormatError("node values must be finite", path=str(path))
    logger.debug(f"Read QCGRID n={n} res={res} from {path}")
    return GridMapping(SampledNodes(nodes), box, label=Path(path).stem)


def export_field_csv(field: DilatationField, path: Union[str, Path]) -> None:
    """One row per cell: index columns, J, op_norm, K, P"""
    index_cols = [f"i{k}" for k in range(field.n)]
    idx = field.cell_indices().reshape(-1, field.n)
    J, op, K, P = (a.ravel() for a in (field.J, field.op_norm, field.K, field.P))
    with open(path, "w", newline="") as f:
        writer = csv.writer(f, lineterminator="\n")
        writer.writerow(index_cols + ["J", "op_norm", "K", "P"])
        for row in range(len(idx)):
            writer.writerow([str(i) for i in idx[row]]
                            + [format_float(J[row]), format_float(op[row]), format_float(K[row]), format_float(P[row])])
    logger.info(f"Wrote dilatation field ({len(idx)} cells) to {path}")
