"""Plain-text file formats, experiment bundles and report emission.

Formats (all UTF-8 text, ``#`` starts a comment, blank lines ignored):

* squeezing file: one decimal ``r`` per line;
* transmission file: header ``M K``, then M lines of K ``re im`` pairs;
* samples file: one M-character ``0``/``1`` string per line;
* covariance file: header ``2M``, then 2M lines of 2M decimals (xxpp order);
* manifest: ``key = value`` lines with keys ``name``, ``squeezing``,
  ``transmission``, ``samples`` (repeatable), ``covariance_sque``,
  ``covariance_squa`` and ``note`` (repeatable). Paths are relative to the
  manifest's directory.

Numbers are written with 17 significant digits so that write-then-read is exact.
"""

from __future__ import annotations

import csv
import json
import platform
import sys
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .errors import InputError
from .gaussian import SqueezeSpec, check_transmission, validate_covariance
from .sampler import SampleSet

FMT = ".17g"


def _fmt(x: float) -> str:
    return format(float(x), FMT)


def _lines(path) -> list[tuple[int, str]]:
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except FileNotFoundError:
        raise InputError(f"file not found: {path}") from None
    except OSError as exc:
        raise InputError(f"cannot read {path}: {exc}") from None
    out = []
    for no, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if line:
            out.append((no, line))
    return out


def _float(tok: str, path, no: int) -> float:
    try:
        v = float(tok)
    except ValueError:
        raise InputError(f"{path}:{no}: cannot parse number {tok!r}") from None
    if not np.isfinite(v):
        raise InputError(f"{path}:{no}: non-finite value {tok!r}")
    return v


# -- squeezing ---------------------------------------------------------------


def read_squeezing(path) -> SqueezeSpec:
    vals = []
    for no, line in _lines(path):
        toks = line.split()
        if len(toks) != 1:
            raise InputError(f"{path}:{no}: expected one squeezing value per line")
        v = _float(toks[0], path, no)
        if v < 0:
            raise InputError(f"{path}:{no}: squeezing parameter {v!r} is negative")
        vals.append(v)
    if not vals:
        raise InputError(f"{path}: no squeezing parameters")
    return SqueezeSpec(np.array(vals))


def write_squeezing(path, spec) -> None:
    r = spec.r if isinstance(spec, SqueezeSpec) else np.asarray(spec, dtype=float)
    Path(path).write_text("".join(_fmt(v) + "\n" for v in r), encoding="utf-8")


# -- transmission ------------------------------------------------------------


def read_transmission(path) -> np.ndarray:
    lines = _lines(path)
    if not lines:
        raise InputError(f"{path}: empty transmission file")
    no, head = lines[0]
    toks = head.split()
    if len(toks) != 2:
        raise InputError(f"{path}:{no}: header must be 'M K'")
    try:
        M, K = int(toks[0]), int(toks[1])
    except ValueError:
        raise InputError(f"{path}:{no}: header must hold two integers") from None
    if M < 1 or K < 1:
        raise InputError(f"{path}:{no}: M and K must be positive")
    rows = lines[1:]
    if len(rows) != M:
        raise InputError(f"{path}: header says {M} rows, found {len(rows)}")
    T = np.empty((M, K), dtype=complex)
    for i, (no, line) in enumerate(rows):
        toks = line.split()
        if len(toks) != 2 * K:
            raise InputError(f"{path}:{no}: expected {K} 're im' pairs, found {len(toks)} numbers")
        vals = [_float(t, path, no) for t in toks]
        T[i] = np.array(vals[0::2]) + 1j * np.array(vals[1::2])
    return check_transmission(T)


def write_transmission(path, T) -> None:
    T = np.asarray(T, dtype=complex)
    M, K = T.shape
    out = [f"{M} {K}\n"]
    for row in T:
        out.append(" ".join(f"{_fmt(z.real)} {_fmt(z.imag)}" for z in row) + "\n")
    Path(path).write_text("".join(out), encoding="utf-8")


# -- samples -----------------------------------------------------------------


def read_samples(path, M: int | None = None, source: str = "file") -> SampleSet:
    rows = []
    for no, line in _lines(path):
        if len(line.split()) != 1 or set(line) - {"0", "1"}:
            raise InputError(f"{path}:{no}: sample must be a single string of 0/1 characters")
        if M is None:
            M = len(line)
        if len(line) != M:
            raise InputError(f"{path}:{no}: sample has {len(line)} bits, expected {M}")
        rows.append(line)
    if M is None:
        return SampleSet(np.zeros((0, 0), dtype=np.uint8), source)
    arr = np.frombuffer("".join(rows).encode("ascii"), dtype=np.uint8).reshape(len(rows), M) - ord("0")
    return SampleSet(arr.copy(), source)


def write_samples(path, samples) -> None:
    P = samples.patterns if isinstance(samples, SampleSet) else np.asarray(samples, dtype=np.uint8)
    chars = (P.astype(np.uint8) + ord("0")).tobytes()
    M = P.shape[1] if P.ndim == 2 else 0
    lines = [chars[i * M : (i + 1) * M].decode("ascii") + "\n" for i in range(P.shape[0])]
    Path(path).write_text("".join(lines), encoding="utf-8")


# -- covariance --------------------------------------------------------------


def read_covariance(path) -> np.ndarray:
    lines = _lines(path)
    if not lines:
        raise InputError(f"{path}: empty covariance file")
    no, head = lines[0]
    try:
        n = int(head)
    except ValueError:
        raise InputError(f"{path}:{no}: header must be the matrix size 2M") from None
    if n < 2 or n % 2:
        raise InputError(f"{path}:{no}: matrix size must be a positive even number")
    rows = lines[1:]
    if len(rows) != n:
        raise InputError(f"{path}: header says {n} rows, found {len(rows)}")
    S = np.empty((n, n))
    for i, (no, line) in enumerate(rows):
        toks = line.split()
        if len(toks) != n:
            raise InputError(f"{path}:{no}: expected {n} values, found {len(toks)}")
        S[i] = [_float(t, path, no) for t in toks]
    try:
        return validate_covariance(S)
    except InputError as exc:
        raise InputError(f"{path}: {exc}") from None


def write_covariance(path, sigma) -> None:
    sigma = np.asarray(sigma, dtype=float)
    out = [f"{len(sigma)}\n"] + [" ".join(_fmt(v) for v in row) + "\n" for row in sigma]
    Path(path).write_text("".join(out), encoding="utf-8")


# -- bundles -----------------------------------------------------------------


@dataclass
class ExperimentBundle:
    name: str
    spec: SqueezeSpec
    T: np.ndarray
    sample_paths: list[Path] = field(default_factory=list)
    covariances: dict[str, np.ndarray] = field(default_factory=dict)
    notes: list[str] = field(default_factory=list)
    manifest: Path | None = None

    @property
    def M(self) -> int:
        return self.T.shape[0]

    @property
    def K(self) -> int:
        return self.T.shape[1]

    def samples(self, index: int = 0) -> SampleSet:
        if not self.sample_paths:
            raise InputError(f"bundle {self.name!r} lists no sample files")
        return read_samples(self.sample_paths[index], self.M, source="experimental")


_KEYS = {"name", "squeezing", "transmission", "samples", "covariance_sque", "covariance_squa", "note"}


def parse_manifest(path) -> dict[str, list[str]]:
    out: dict[str, list[str]] = {}
    for no, line in _lines(path):
        if "=" not in line:
            raise InputError(f"{path}:{no}: expected 'key = value'")
        key, value = (s.strip() for s in line.split("=", 1))
        if key not in _KEYS:
            raise InputError(f"{path}:{no}: unknown key {key!r}")
        if not value:
            raise InputError(f"{path}:{no}: empty value for {key!r}")
        out.setdefault(key, []).append(value)
    return out


def load_bundle(manifest) -> ExperimentBundle:
    """Parse a manifest and every file it references."""
    manifest = Path(manifest)
    if not manifest.is_file():
        raise InputError(f"manifest not found: {manifest}")
    kv = parse_manifest(manifest)
    base = manifest.parent
    for key in ("squeezing", "transmission"):
        if key not in kv:
            raise InputError(f"{manifest}: missing required key {key!r}")
    spec = read_squeezing(base / kv["squeezing"][-1])
    T = read_transmission(base / kv["transmission"][-1])
    if T.shape[1] != spec.K:
        raise InputError(
            f"{manifest}: transmission has {T.shape[1]} columns but {len(spec.r)} squeezers expand to {spec.K} inputs"
        )
    paths = [base / p for p in kv.get("samples", [])]
    for p in paths:
        read_samples(p, T.shape[0])
    covs = {}
    for kind in ("sque", "squa"):
        key = f"covariance_{kind}"
        if key in kv:
            S = read_covariance(base / kv[key][-1])
            if S.shape != (2 * T.shape[0],) * 2:
                raise InputError(f"{manifest}: {key} has size {len(S)}, expected {2 * T.shape[0]}")
            covs[kind.upper()] = S
    name = kv.get("name", [manifest.stem])[-1]
    return ExperimentBundle(name, spec, T, paths, covs, kv.get("note", []), manifest)


def write_bundle(directory, name: str, spec, T, samples: SampleSet | None = None) -> Path:
    """Write a bundle (manifest plus data files) and return the manifest path."""
    d = Path(directory)
    d.mkdir(parents=True, exist_ok=True)
    write_squeezing(d / "squeezing.txt", spec)
    write_transmission(d / "transmission.txt", T)
    lines = [f"name = {name}\n", "squeezing = squeezing.txt\n", "transmission = transmission.txt\n"]
    if samples is not None:
        write_samples(d / "samples.txt", samples)
        lines.append("samples = samples.txt\n")
    path = d / "manifest.txt"
    path.write_text("".join(lines), encoding="utf-8")
    return path


# -- reports -----------------------------------------------------------------


def versions() -> dict[str, str]:
    import scipy

    from . import __version__

    return {"gbsval": __version__, "numpy": np.__version__, "scipy": scipy.__version__, "python": platform.python_version()}


def write_csv(path, header: Sequence[str], rows: Iterable[Sequence]) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([_fmt(v) if isinstance(v, (float, np.floating)) else v for v in row])


def emit_report(out_dir, tables: dict | None = None, summary: dict | None = None) -> list[Path]:
    """Write each ``name -> (header, rows)`` table as CSV plus ``summary.json``.

    CSV content depends only on the results; timing and version information
    goes to the JSON summary.
    """
    out = Path(out_dir)
    try:
        out.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise InputError(f"cannot create output directory {out}: {exc}") from None
    written = []
    try:
        for name, (header, rows) in (tables or {}).items():
            p = out / f"{name}.csv"
            write_csv(p, header, rows)
            written.append(p)
        doc = dict(summary or {})
        doc.setdefault("versions", versions())
        doc.setdefault("argv", sys.argv[1:])
        p = out / "summary.json"
        p.write_text(json.dumps(doc, indent=2, sort_keys=True, default=_json_default) + "\n", encoding="utf-8")
        written.append(p)
    except OSError as exc:
        raise InputError(f"cannot write to {out}: {exc}") from None
    return written


def _json_default(o):
    if isinstance(o, np.ndarray):
        return o.tolist()
    if isinstance(o, (np.integer,)):
        return int(o)
    if isinstance(o, (np.floating,)):
        return float(o)
    if isinstance(o, Path):
        return str(o)
    return str(o)
