"""CSV and text serialization for matrices, orbits, verdicts and linear-system pairs.

Floats are written with a fixed ``%.12e`` format so that re-running the same
configuration produces byte-identical files.
"""
from __future__ import annotations

import csv
import json
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .errors import InputError

FLOAT_FMT = "{:.12e}"


def fmt(v) -> str:
    if isinstance(v, (bool, np.bool_)):
        return "1" if v else "0"
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        return FLOAT_FMT.format(float(v))
    if isinstance(v, complex):
        return f"{FLOAT_FMT.format(v.real)}{FLOAT_FMT.format(v.imag)}j"
    if v is None:
        return ""
    return str(v)


def write_csv(path: str | Path, header: Sequence[str], rows: Iterable[Sequence]) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for r in rows:
            w.writerow([fmt(v) for v in r])
    return path


def write_dict_rows(path: str | Path, rows: Sequence[dict]) -> Path:
    """Rows of dicts; the header is the union of keys in first-seen order."""
    header: list[str] = []
    for r in rows:
        for k in r:
            if k not in header:
                header.append(k)
    return write_csv(path, header, ([r.get(k) for k in header] for r in rows))


def read_csv(path: str | Path) -> tuple[list[str], list[list[str]]]:
    with Path(path).open() as fh:
        rows = list(csv.reader(fh))
    if not rows:
        raise InputError(f"{path} is empty")
    return rows[0], rows[1:]


# ---------------------------------------------------------------------------
# matrices


def write_matrix(path: str | Path, M) -> Path:
    M = np.atleast_2d(np.asarray(M, dtype=float))
    return write_csv(path, [f"c{j}" for j in range(M.shape[1])], M.tolist())


def read_matrix(path: str | Path) -> np.ndarray:
    _, rows = read_csv(path)
    return np.array([[float(v) for v in r] for r in rows])


def parse_matrix_text(text: str) -> np.ndarray:
    """Whitespace/comma separated rows, one matrix row per line; ``#`` starts a comment."""
    rows = []
    for line in text.splitlines():
        line = line.split("#", 1)[0].strip()
        if line:
            rows.append([float(v) for v in line.replace(",", " ").split()])
    if not rows or len({len(r) for r in rows}) != 1:
        raise InputError("matrix text must have rows of equal length")
    return np.array(rows)


def format_matrix_text(M) -> str:
    M = np.atleast_2d(np.asarray(M, dtype=float))
    return "\n".join(" ".join(FLOAT_FMT.format(v) for v in row) for row in M) + "\n"


# ---------------------------------------------------------------------------
# orbits and related samples


def orbit_rows(orbit, samples: int = 400):
    """Rows ``t, q..., p..., H`` on a uniform grid of one period."""
    from .hamsys import total_energy
    for t in np.linspace(0.0, orbit.period, samples + 1):
        x = orbit.state(t) if t < orbit.period else orbit.segment(orbit.period)
        yield [t, *x, total_energy(orbit.H, orbit.u, x)]


def orbit_header(n: int) -> list[str]:
    return ["t", *[f"q{i}" for i in range(n)], *[f"p{i}" for i in range(n)], "H"]


def write_orbit(path, orbit, samples: int = 400) -> Path:
    n = orbit.base_point.q.size
    return write_csv(path, orbit_header(n), orbit_rows(orbit, samples))


def write_segment(path, segment, t_end: float, H, u, samples: int = 400) -> Path:
    from .hamsys import total_energy
    n = segment(0.0).size // 2
    rows = ([t, *segment(t), total_energy(H, u, segment(t))]
            for t in np.linspace(0.0, t_end, samples + 1))
    return write_csv(path, orbit_header(n), rows)


def read_orbit(path) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Return ``(t, states, H)`` from an orbit CSV."""
    header, rows = read_csv(path)
    data = np.array([[float(v) for v in r] for r in rows])
    return data[:, 0], data[:, 1:-1], data[:, -1]


def write_sigma(path, sigma, samples: int = 400) -> Path:
    ts = np.linspace(sigma.nu0, sigma.nu0 + sigma.period, samples + 1)
    return write_csv(path, ["t", "sigma", "sigma_rate"],
                     ([t, float(sigma(t)), sigma.derivative(t)] for t in ts))


def write_chords(path, chords) -> Path:
    rows = []
    for c in chords:
        rows.append({
            "duration": c.duration,
            **{f"start_q{i}": v for i, v in enumerate(c.start.q)},
            **{f"start_p{i}": v for i, v in enumerate(c.start.p_star)},
            **{f"end_q{i}": v for i, v in enumerate(c.end.q)},
            "minimal": c.minimal,
            "sigma_min": c.transversality_sigma_min,
            "transverse": c.transverse,
            "verified": c.verified,
            "end_residual": c.end_residual,
        })
    if not rows:
        return write_csv(path, ["duration"], [])
    return write_dict_rows(path, rows)


def eigen_rows(M):
    lam = np.linalg.eigvals(np.asarray(M, dtype=float))
    lam = lam[np.lexsort((lam.imag, lam.real))]
    for z in lam:
        yield [z.real, z.imag, abs(z), np.angle(z)]


def write_eigenvalues(path, M) -> Path:
    return write_csv(path, ["re", "im", "abs", "arg"], eigen_rows(M))


# ---------------------------------------------------------------------------
# linear-system pairs


def write_pair_bundle(directory, pair, grid: np.ndarray | None = None) -> Path:
    """Grid, block curves and scalar curves of a pair as CSV files in one directory."""
    from .sympmat import hamiltonian_blocks
    directory = Path(directory)
    grid = pair.grid if grid is None else grid
    d = pair.d
    for tag, Lc, a in (("L", pair.L, pair.a), ("Ltilde", pair.L_tilde, pair.a_tilde)):
        header = ["t", "a"]
        for blk in "ABC":
            header += [f"{blk}{i}{j}" for i in range(d) for j in range(d)]
        rows = []
        for t in grid:
            A, B, C = hamiltonian_blocks(Lc.value(t))
            rows.append([t, a.value(t), *A.ravel(), *B.ravel(), *C.ravel()])
        write_csv(directory / f"{tag}.csv", header, rows)
    return directory


def read_pair_bundle(directory) -> dict:
    """Node values ``{'L': (t, a, L), 'Ltilde': (t, a, L)}`` from a bundle."""
    from .sympmat import hamiltonian_block_matrix
    out = {}
    for tag in ("L", "Ltilde"):
        header, rows = read_csv(Path(directory) / f"{tag}.csv")
        data = np.array([[float(v) for v in r] for r in rows])
        d = int(round(np.sqrt((data.shape[1] - 2) / 3)))
        k = d * d
        Ls = np.array([hamiltonian_block_matrix(r[2:2 + k].reshape(d, d), r[2 + k:2 + 2 * k].reshape(d, d),
                                                r[2 + 2 * k:].reshape(d, d)) for r in data])
        out[tag] = (data[:, 0], data[:, 1], Ls)
    return out


# ---------------------------------------------------------------------------
# reports


def write_json(path, obj) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(obj, indent=2, sort_keys=True, default=_json_default) + "\n")
    return path


def _json_default(o):
    if isinstance(o, np.ndarray):
        return o.tolist()
    if isinstance(o, (np.floating, np.integer)):
        return o.item()
    if isinstance(o, np.bool_):
        return bool(o)
    if isinstance(o, Path):
        return str(o)
    return str(o)
