"""Plain-text instance files.

Layout, one item per line group::

    pgrpd-instance v1
    d n nbar
    <A, row-major>
    <b>
    <Abar, row-major>
    <bbar>
    L1 <beta>                      | POLY <ell> followed by ell rows "C_i d_i"
    QUAD [<L_f> [<rho>]]
    <Q, row-major>
    [LIN]
    [<c>]

Numbers are written with 17 significant digits so a round trip is exact.
"""

from __future__ import annotations

import numpy as np

from .model import (
    ConfigurationError,
    L1Norm,
    PolyhedralSupport,
    ProblemData,
    QuadraticObjective,
)

__all__ = ["write_instance", "read_instance", "dumps_instance", "loads_instance"]

HEADER = "pgrpd-instance v1"


def _row(v):
    return " ".join(format(float(t), ".17g") for t in np.ravel(v))


def dumps_instance(data, g):
    f0 = data.f0
    if not isinstance(f0, QuadraticObjective):
        raise ConfigurationError("only quadratic f0 can be serialized")
    lines = [HEADER, f"{data.d} {data.n} {data.nbar}"]
    lines += [_row(r) for r in data.A]
    lines.append(_row(data.b))
    lines += [_row(r) for r in data.Abar]
    lines.append(_row(data.bbar))
    if isinstance(g, L1Norm):
        lines.append(f"L1 {float(g.beta):.17g}")
    elif isinstance(g, PolyhedralSupport):
        lines.append(f"POLY {g.C.shape[0]}")
        lines += [_row(np.append(c, dv)) for c, dv in zip(g.C, g.dvec)]
    else:
        raise ConfigurationError(f"cannot serialize g of type {type(g).__name__}")
    head = f"QUAD {data.L_f:.17g}"
    if data.rho_wc is not None:
        head += f" {float(data.rho_wc):.17g}"
    lines.append(head)
    lines += [_row(r) for r in f0.Q]
    if f0.c is not None:
        lines.append("LIN")
        lines.append(_row(f0.c))
    return "\n".join(lines) + "\n"


def write_instance(path, data, g):
    with open(path, "w") as fh:
        fh.write(dumps_instance(data, g))


class _Lines:
    def __init__(self, text):
        self.lines = [ln.strip() for ln in text.splitlines()
                      if ln.strip() and not ln.lstrip().startswith("#")]
        self.pos = 0

    def next(self):
        if self.pos >= len(self.lines):
            raise ConfigurationError("instance file ended early")
        ln = self.lines[self.pos]
        self.pos += 1
        return ln

    def peek(self):
        return self.lines[self.pos] if self.pos < len(self.lines) else None

    def floats(self, count):
        """Read ``count`` numbers spanning as many lines as needed."""
        out = []
        while len(out) < count:
            out.extend(float(t) for t in self.next().split())
        if len(out) != count:
            raise ConfigurationError("row length does not match the declared size")
        return np.array(out)


def loads_instance(text, L_f=None):
    """Parse an instance; ``L_f`` overrides or supplies the Lipschitz constant."""
    src = _Lines(text)
    if src.next() != HEADER:
        raise ConfigurationError("not a pgrpd instance file")
    try:
        d, n, nbar = (int(t) for t in src.next().split())
    except ValueError as exc:
        raise ConfigurationError("bad size line") from exc
    A = src.floats(n * d).reshape(n, d)
    b = src.floats(n)
    Abar = src.floats(nbar * d).reshape(nbar, d)
    bbar = src.floats(nbar)
    gline = src.next().split()
    if gline[0] == "L1":
        g = L1Norm(float(gline[1]), nbar)
    elif gline[0] == "POLY":
        ell = int(gline[1])
        rows = src.floats(ell * (nbar + 1)).reshape(ell, nbar + 1)
        g = PolyhedralSupport(rows[:, :nbar], rows[:, nbar])
    else:
        raise ConfigurationError(f"unknown g spec {gline[0]!r}")
    fline = src.next().split()
    if fline[0] != "QUAD":
        raise ConfigurationError(f"unknown f0 spec {fline[0]!r}")
    Q = src.floats(d * d).reshape(d, d)
    c = None
    if src.peek() == "LIN":
        src.next()
        c = src.floats(d)
    f0 = QuadraticObjective(Q, c)
    rho = float(fline[2]) if len(fline) > 2 else f0.weak_convexity()
    if L_f is None:
        L_f = float(fline[1]) if len(fline) > 1 else f0.lipschitz()
    data = ProblemData(A=A, b=b, Abar=Abar, bbar=bbar, f0=f0, L_f=L_f, rho_wc=rho)
    return data, g


def read_instance(path, L_f=None):
    with open(path) as fh:
        return loads_instance(fh.read(), L_f=L_f)
