"""
File formats: CSV matrices, vectors and flat experiment configs.

Matrix CSV: one matrix row per line, comma separated. Lines starting with
``#`` are metadata and ignored on read. An empty field marks an unobserved
entry. An optional header row is skipped when requested.

Config: ``section.key = value`` lines, ``#`` comments. Values are Python
literals (numbers, booleans, nested lists) or bare strings.
"""

import ast
import csv
import io as _io
import sys

import numpy as np

from .errors import ConfigError, InvalidInputError
from .matrix import Coupling

__all__ = [
    "ParseError",
    "read_matrix",
    "read_coupling",
    "read_vector",
    "write_matrix",
    "format_matrix",
    "parse_config",
    "read_config",
    "CONFIG_KEYS",
]


class ParseError(InvalidInputError):
    """Malformed input file."""


def _rows(text, header):
    rows = []
    skipped_header = not header
    for lineno, line in enumerate(text.splitlines(), start=1):
        stripped = line.strip()
        if not stripped or stripped.startswith("#"):
            continue
        if not skipped_header:
            skipped_header = True
            continue
        fields = next(csv.reader([stripped]))
        rows.append((lineno, fields))
    return rows


def _read_text(path):
    if path == "-":
        return sys.stdin.read()
    with open(path, encoding="utf-8") as fh:
        return fh.read()


def read_matrix(path, header=False, allow_missing=False):
    """Parse a matrix CSV.

    Returns
    -------
    (ndarray, ndarray of bool)
        Values (NaN where missing) and the missing mask.

    Raises
    ------
    ParseError
        Ragged rows, non-numeric fields, empty file, or missing entries when
        ``allow_missing`` is false.
    """
    rows = _rows(_read_text(path), header)
    if not rows:
        raise ParseError(f"{path}: no matrix rows found")
    width = len(rows[0][1])
    values = np.empty((len(rows), width))
    mask = np.zeros((len(rows), width), dtype=bool)
    for r, (lineno, fields) in enumerate(rows):
        if len(fields) != width:
            raise ParseError(f"{path}: line {lineno}: expected {width} fields, got {len(fields)}")
        for c, f in enumerate(fields):
            f = f.strip()
            if f == "":
                if not allow_missing:
                    raise ParseError(f"{path}: line {lineno}: empty field in column {c + 1}")
                mask[r, c] = True
                values[r, c] = np.nan
                continue
            try:
                values[r, c] = float(f)
            except ValueError:
                raise ParseError(f"{path}: line {lineno}: cannot parse {f!r} as a number") from None
            if not np.isfinite(values[r, c]):
                raise ParseError(f"{path}: line {lineno}: non-finite value {f!r}")
    return values, mask


def read_coupling(path, header=False, allow_missing=True):
    values, mask = read_matrix(path, header, allow_missing)
    return Coupling(values, mask if mask.any() else None)


def read_vector(path, header=False):
    """A single row or single column of numbers."""
    values, _ = read_matrix(path, header)
    if values.shape[0] != 1 and values.shape[1] != 1:
        raise ParseError(f"{path}: expected one row or one column, got shape {values.shape}")
    return values.ravel()


def format_matrix(M, meta=None):
    """CSV text for ``M`` with optional ``# key: value`` lines; NaN becomes an empty field."""
    out = _io.StringIO()
    for key, val in (meta or {}).items():
        out.write(f"# {key}: {val}\n")
    for row in np.atleast_2d(np.asarray(M, dtype=np.float64)):
        out.write(",".join("" if np.isnan(v) else format(float(v), ".17g") for v in row) + "\n")
    return out.getvalue()


def write_matrix(path, M, meta=None):
    text = format_matrix(M, meta)
    if path == "-" or path is None:
        sys.stdout.write(text)
        return
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(text)


# key -> (type, description); used for validation and documentation
CONFIG_KEYS = {
    "sampler.kind": (str, "metromc or mhmc"),
    "prior.kind": (str, "p1, p2 or gibbs"),
    "prior.alpha": (object, "scalar or nested list of Dirichlet concentrations"),
    "prior.alpha_file": (str, "CSV matrix of concentrations"),
    "prior.beta": (float, "Gibbs strength"),
    "prior.gamma_weight": (float, "Gibbs asymmetry weight"),
    "prior.cost_sum": (float, "required total of lam * C under p1"),
    "chain.sigma": (float, "MetroMC proposal scale"),
    "chain.sigma0": (float, "MHMC sigma0"),
    "chain.gamma": (float, "MHMC gamma"),
    "chain.delta": (float, "MHMC delta"),
    "chain.burn_in": (int, "discarded steps"),
    "chain.n_samples": (int, "recorded samples"),
    "chain.lag": (int, "steps between samples"),
    "chain.seed": (int, "root seed"),
    "chain.constrained_p1": (bool, "fix the cost total"),
    "chain.reject_kernel_ge_one": (bool, "reject kernels with entries >= 1"),
    "chain.preserve_diagonal": (bool, "keep diagonal kernel entries fixed"),
    "chain.lam": (float, "entropic regularization"),
    "chain.n_chains": (int, "independent chains (stream indices 0..n-1)"),
    "output.dir": (str, "output directory"),
    "output.format": (str, "csv or jsonl"),
    "output.what": (str, "kernel or cost"),
    "output.max_lag": (int, "largest autocorrelation lag"),
    "noise.idx": (object, "1-based (row, col) of the noisy entry"),
    "noise.sigma": (float, "noise standard deviation"),
    "noise.n_mix": (int, "mixture components"),
    "noise.values": (object, "explicit perturbations"),
    "fill.low": (float, "lower end of fill range"),
    "fill.high": (float, "upper end of fill range"),
    "fill.n": (int, "number of fills"),
    "predict.truth_file": (str, "ground-truth coupling CSV"),
}


def _coerce(raw, typ, lineno, key):
    try:
        val = ast.literal_eval(raw)
    except (ValueError, SyntaxError):
        val = raw
    try:
        if typ is bool:
            if isinstance(val, str) and val.lower() in ("true", "yes", "on"):
                return True
            if isinstance(val, str) and val.lower() in ("false", "no", "off"):
                return False
            if isinstance(val, (bool, int)) and val in (0, 1):
                return bool(val)
            raise ValueError
        if typ is int:
            if isinstance(val, bool) or not float(val).is_integer():
                raise ValueError
            return int(float(val))
        if typ is float:
            if isinstance(val, bool):
                raise ValueError
            return float(val)
        if typ is str:
            return str(val)
        return val
    except (TypeError, ValueError):
        raise ConfigError(f"invalid value {raw!r} (expected {typ.__name__})", line=lineno, key=key) from None


def parse_config(text, source="<config>"):
    """Parse flat dotted ``key = value`` text into a dict.

    Raises
    ------
    ConfigError
        Unknown key, duplicate key, missing ``=``, or a value of the wrong
        type; the message names the line and key.
    """
    cfg = {}
    lines = {}
    for lineno, line in enumerate(text.splitlines(), start=1):
        stripped = line.split("#", 1)[0].strip()
        if not stripped:
            continue
        if "=" not in stripped:
            raise ConfigError(f"{source}: expected 'key = value'", line=lineno)
        key, raw = (s.strip() for s in stripped.split("=", 1))
        if key not in CONFIG_KEYS:
            raise ConfigError(f"{source}: unknown key", line=lineno, key=key)
        if key in cfg:
            raise ConfigError(f"{source}: duplicate key (first on line {lines[key]})", line=lineno, key=key)
        cfg[key] = _coerce(raw, CONFIG_KEYS[key][0], lineno, key)
        lines[key] = lineno
    cfg["__lines__"] = lines
    return cfg


def read_config(path):
    return parse_config(_read_text(path), source=str(path))
