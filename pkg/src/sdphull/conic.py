"""Solver-ready conic form and its text-format exchange.

A ConicProblem is ``min c'z + const`` subject to ``A z = b``, ``G z <= h``,
box bounds on z, and one PSD constraint on a square matrix whose entries are
picked out of z by an index map (entry -1 stands for the constant 1 in the
top-left corner of the moment matrix).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp

from .model import EQ, ModelError
from .lift import MomentIndex, SdpRelaxation
from .hull import HullReformulation, xc, Xc


@dataclass
class ConicProblem:
    c: np.ndarray
    const: float
    A: sp.csr_matrix
    b: np.ndarray
    G: sp.csr_matrix
    h: np.ndarray
    lb: np.ndarray
    ub: np.ndarray
    psd_order: int
    psd_map: np.ndarray          # (order, order) of z indices, -1 = constant 1
    integer_ids: list[int] = field(default_factory=list)
    names: list[str] = field(default_factory=list)

    @property
    def nvars(self) -> int:
        return self.c.shape[0]

    def validate(self):
        N = self.nvars
        for M, v in ((self.A, self.b), (self.G, self.h)):
            if M.shape[1] != N or M.shape[0] != v.shape[0]:
                raise ModelError("constraint dimensions inconsistent")
        if self.lb.shape != (N,) or self.ub.shape != (N,):
            raise ModelError("box dimensions inconsistent")
        o = self.psd_order
        if self.psd_map.shape != (o, o):
            raise ModelError("psd map shape inconsistent")
        if (self.psd_map != self.psd_map.T).any():
            raise ModelError("psd map must be symmetric-consistent")
        seen = {}
        for r in range(o):
            for cc in range(r, o):
                k = int(self.psd_map[r, cc])
                if k == -1:
                    continue
                if k < 0 or k >= N:
                    raise ModelError(f"psd map entry {k} out of range")
                if k in seen:
                    raise ModelError(f"psd map reuses variable {k}")
                seen[k] = (r, cc)

    def moment_from_z(self, z: np.ndarray) -> np.ndarray:
        o = self.psd_order
        M = np.empty((o, o))
        for r in range(o):
            for cc in range(o):
                k = int(self.psd_map[r, cc])
                M[r, cc] = 1.0 if k == -1 else z[k]
        return M

    def objective_value(self, z: np.ndarray) -> float:
        return float(self.c @ z + self.const)


@dataclass
class Layout:
    """Mapping between named coordinates and flat z indices."""

    n: int
    coord_index: dict[tuple, int]
    names: list[str]

    @property
    def nvars(self) -> int:
        return len(self.names)

    def x_index(self, i: int) -> int:
        return self.coord_index[xc(i)]

    def X_index(self, i: int, j: int) -> int:
        return self.coord_index[Xc(i, j)]

    def lam_index(self, i: int, k: int) -> int:
        return self.coord_index[("lam", i, k)]

    def extract(self, z: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        """Recover (x, X) from a solution vector."""
        n = self.n
        x = np.array([z[self.x_index(i)] for i in range(n)])
        X = np.empty((n, n))
        for i in range(n):
            for j in range(i, n):
                X[i, j] = X[j, i] = z[self.X_index(i, j)]
        return x, X

    def lam_values(self, z: np.ndarray) -> dict[tuple[int, int], float]:
        return {c[1:]: float(z[idx]) for c, idx in self.coord_index.items()
                if c[0] == "lam"}


def assemble(relax: SdpRelaxation,
             hull: HullReformulation | None = None) -> tuple[ConicProblem, Layout]:
    """Flatten a relaxation (plus an optional hull reformulation) into a
    ConicProblem.  z = [x, upper-triangle X, lambda..., u...]."""
    n = relax.n
    mi = MomentIndex(n)
    coord_index: dict[tuple, int] = {}
    names: list[str] = []

    def add(coord: tuple, name: str) -> int:
        coord_index[coord] = len(names)
        names.append(name)
        return coord_index[coord]

    for i in range(n):
        add(xc(i), f"x{i}")
    for i, j in mi.pairs():
        add(Xc(i, j), f"X{i}_{j}")
    integer_ids: list[int] = []
    if hull is not None:
        for (i, k) in hull.lam_ids:
            integer_ids.append(add(("lam", i, k), f"lam{i}_{k}"))
        for (i, k), comps in hull.aux_components.items():
            for ci in range(len(comps)):
                add(("u", i, k, ci), f"u{i}_{k}_{ci}")
    else:
        integer_ids = [coord_index[xc(i)] for i in relax.integer_ids]

    N = len(names)
    lb = np.full(N, -np.inf)
    ub = np.full(N, np.inf)
    lb[:n] = relax.lower
    ub[:n] = relax.upper
    if hull is not None:
        for (i, k) in hull.lam_ids:
            idx = coord_index[("lam", i, k)]
            lb[idx], ub[idx] = 0.0, 1.0

    c = np.zeros(N)
    for i, v in relax.obj_x.items():
        c[coord_index[xc(i)]] += v
    for (i, j), v in relax.obj_X.items():
        c[coord_index[Xc(i, j)]] += v

    eq_rows, eq_rhs, in_rows, in_rhs = [], [], [], []

    def push(coefs: dict[tuple, float], rhs: float, sense: str):
        row = {coord_index[cd]: v for cd, v in coefs.items() if v != 0.0}
        if sense == EQ:
            eq_rows.append(row)
            eq_rhs.append(rhs)
        else:
            in_rows.append(row)
            in_rhs.append(rhs)

    for row in relax.rows:
        coefs: dict[tuple, float] = {xc(i): v for i, v in row.x_coefs.items()}
        for (i, j), v in row.X_coefs.items():
            coefs[Xc(i, j)] = coefs.get(Xc(i, j), 0.0) + v
        push(coefs, row.rhs, row.sense)
    if hull is not None:
        for hrow in hull.rows:
            push(hrow.coefs, hrow.rhs, hrow.sense)

    def to_csr(rows, m):
        data, ri, ci = [], [], []
        for r, row in enumerate(rows):
            for k, v in row.items():
                ri.append(r)
                ci.append(k)
                data.append(v)
        return sp.csr_matrix((data, (ri, ci)), shape=(m, N))

    psd_map = np.empty((n + 1, n + 1), dtype=int)
    psd_map[0, 0] = -1
    for i in range(n):
        psd_map[0, i + 1] = psd_map[i + 1, 0] = coord_index[xc(i)]
        for j in range(i, n):
            psd_map[i + 1, j + 1] = psd_map[j + 1, i + 1] = coord_index[Xc(i, j)]

    prob = ConicProblem(
        c=c, const=relax.obj_const,
        A=to_csr(eq_rows, len(eq_rows)), b=np.array(eq_rhs, dtype=float),
        G=to_csr(in_rows, len(in_rows)), h=np.array(in_rhs, dtype=float),
        lb=lb, ub=ub, psd_order=n + 1, psd_map=psd_map,
        integer_ids=integer_ids, names=names,
    )
    prob.validate()
    return prob, Layout(n, coord_index, names)


# ----------------------------------------------------------- text exchange

_FMT = "%.17g"


def _num(v: float) -> str:
    if v == math.inf:
        return "inf"
    if v == -math.inf:
        return "-inf"
    return _FMT % v


def write_conic(prob: ConicProblem, path):
    """Write the documented sparse conic text format (see docs/formats.md)."""
    with open(path, "w") as fh:
        w = fh.write
        w("CONIC 1\n")
        w(f"nvars {prob.nvars}\n")
        w(f"objconst {_num(prob.const)}\n")
        for i, v in enumerate(prob.c):
            if v != 0.0:
                w(f"obj {i} {_num(v)}\n")
        Acoo = prob.A.tocoo()
        for r, i, v in zip(Acoo.row, Acoo.col, Acoo.data):
            w(f"eq {r} {i} {_num(v)}\n")
        for r, v in enumerate(prob.b):
            w(f"eqrhs {r} {_num(v)}\n")
        Gcoo = prob.G.tocoo()
        for r, i, v in zip(Gcoo.row, Gcoo.col, Gcoo.data):
            w(f"ineq {r} {i} {_num(v)}\n")
        for r, v in enumerate(prob.h):
            w(f"ineqrhs {r} {_num(v)}\n")
        for i in range(prob.nvars):
            if prob.lb[i] != -math.inf or prob.ub[i] != math.inf:
                w(f"bound {i} {_num(prob.lb[i])} {_num(prob.ub[i])}\n")
        w(f"psd {prob.psd_order}\n")
        for r in range(prob.psd_order):
            for cc in range(r, prob.psd_order):
                w(f"psdmap {r} {cc} {prob.psd_map[r, cc]}\n")
        for i in prob.integer_ids:
            w(f"integer {i}\n")
        for i, name in enumerate(prob.names):
            w(f"name {i} {name}\n")
        w("end\n")


def read_conic(path) -> ConicProblem:
    nvars = None
    const = 0.0
    obj, eq, eqrhs, ineq, ineqrhs = {}, {}, {}, {}, {}
    bounds = {}
    psd_order = 0
    psd_entries = []
    integer_ids = []
    names = {}
    with open(path) as fh:
        header = fh.readline().strip()
        if header != "CONIC 1":
            raise ModelError(f"unrecognized conic file header {header!r}")
        for lineno, line in enumerate(fh, start=2):
            parts = line.split()
            if not parts:
                continue
            kw = parts[0]
            try:
                if kw == "nvars":
                    nvars = int(parts[1])
                elif kw == "objconst":
                    const = float(parts[1])
                elif kw == "obj":
                    obj[int(parts[1])] = float(parts[2])
                elif kw == "eq":
                    eq[(int(parts[1]), int(parts[2]))] = float(parts[3])
                elif kw == "eqrhs":
                    eqrhs[int(parts[1])] = float(parts[2])
                elif kw == "ineq":
                    ineq[(int(parts[1]), int(parts[2]))] = float(parts[3])
                elif kw == "ineqrhs":
                    ineqrhs[int(parts[1])] = float(parts[2])
                elif kw == "bound":
                    bounds[int(parts[1])] = (float(parts[2]), float(parts[3]))
                elif kw == "psd":
                    psd_order = int(parts[1])
                elif kw == "psdmap":
                    psd_entries.append((int(parts[1]), int(parts[2]), int(parts[3])))
                elif kw == "integer":
                    integer_ids.append(int(parts[1]))
                elif kw == "name":
                    names[int(parts[1])] = parts[2]
                elif kw == "end":
                    break
                else:
                    raise ModelError(f"unknown keyword {kw!r}")
            except (IndexError, ValueError) as exc:
                raise ModelError(f"line {lineno}: {exc}") from exc
    if nvars is None:
        raise ModelError("missing nvars record")

    c = np.zeros(nvars)
    for i, v in obj.items():
        c[i] = v

    def build(entries, rhs):
        m = len(rhs)
        data = [((r, i), v) for (r, i), v in entries.items()]
        rows = [k[0] for k, _ in data]
        cols = [k[1] for k, _ in data]
        vals = [v for _, v in data]
        M = sp.csr_matrix((vals, (rows, cols)), shape=(m, nvars))
        v = np.array([rhs[r] for r in range(m)])
        return M, v

    A, b = build(eq, eqrhs)
    G, h = build(ineq, ineqrhs)
    lb = np.full(nvars, -np.inf)
    ub = np.full(nvars, np.inf)
    for i, (lo, hi) in bounds.items():
        lb[i], ub[i] = lo, hi
    psd_map = np.full((psd_order, psd_order), -2, dtype=int)
    for r, cc, k in psd_entries:
        psd_map[r, cc] = psd_map[cc, r] = k
    if psd_order and (psd_map == -2).any():
        raise ModelError("incomplete psd map")
    name_list = [names.get(i, f"z{i}") for i in range(nvars)]
    prob = ConicProblem(c, const, A, b, G, h, lb, ub, psd_order, psd_map,
                        integer_ids, name_list)
    prob.validate()
    return prob
