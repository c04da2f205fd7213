"""CSV helpers shared by the experiment bundle and the command line.

Every file starts with ``# config-hash: <sha256>`` so outputs can be tied
back to the inputs that produced them. Numbers use 9 significant digits.
"""
import hashlib
import json
import os

import numpy as np


def fmt(v):
    return f"{float(v):.9g}"


def config_hash(config):
    """SHA-256 of the canonical JSON encoding of ``config``."""
    blob = json.dumps(config, sort_keys=True, separators=(",", ":"), default=_jsonable)
    return hashlib.sha256(blob.encode("utf-8")).hexdigest()


def _jsonable(obj):
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    if isinstance(obj, np.generic):
        return obj.item()
    raise TypeError(f"cannot encode {type(obj).__name__}")


def hash_comment(digest):
    return f"config-hash: {digest}"


def table_csv(header, rows, digest=None):
    lines = [] if digest is None else [f"# {hash_comment(digest)}"]
    lines.append(",".join(header))
    for row in rows:
        lines.append(",".join(v if isinstance(v, str) else fmt(v) for v in row))
    return "\n".join(lines) + "\n"


def write_text(path, text):
    os.makedirs(os.path.dirname(os.path.abspath(path)), exist_ok=True)
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(text)
    return path


def steady_state_rows(ss, residuals):
    rows = []
    for name, vec in (("x_bar", ss.x_bar), ("u_bar", ss.u_bar), ("lambda_bar", ss.lambda_bar)):
        rows.extend((name, str(i + 1), v) for i, v in enumerate(vec))
    for name, r in zip(("kkt_residual_x", "kkt_residual_u", "kkt_residual_feas"), residuals):
        rows.append((name, "0", r))
    return rows


def steady_state_csv(ss, residuals, digest=None):
    return table_csv(("quantity", "index", "value"), steady_state_rows(ss, residuals), digest)


def synthesis_csv(K, P, are_residual, abscissa_closed_loop, abscissa_S=None, digest=None):
    """Long-format table: matrix entries as ``(name, row, col, value)`` plus scalar margins."""
    rows = []
    for name, M in (("K", K), ("P_star", P)):
        for (i, j), v in np.ndenumerate(M):
            rows.append((name, str(i + 1), str(j + 1), v))
    rows.append(("are_residual", "0", "0", are_residual))
    rows.append(("abscissa_A_minus_BK", "0", "0", abscissa_closed_loop))
    if abscissa_S is not None:
        rows.append(("abscissa_S", "0", "0", abscissa_S))
    return table_csv(("quantity", "row", "col", "value"), rows, digest)
