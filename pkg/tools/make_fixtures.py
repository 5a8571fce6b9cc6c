"""Regenerate the protocol fixtures under src/ftsynth/fixtures/.

Usage: python3 tools/make_fixtures.py [--check]

With --check the files are compared instead of written (exit 1 on drift).
"""

import argparse
import itertools
import sys
from pathlib import Path

import numpy as np

OUT = Path(__file__).resolve().parents[1] / "src" / "ftsynth" / "fixtures"

# Goto-style Steane |0>_L encoder: H qubits and three CNOT layers
ZERO_H = (0, 1, 3)
ZERO_CX = ((0, 4), (1, 2), (3, 6), (0, 2), (3, 4), (1, 5), (3, 5), (2, 6))
ZERO_CHECK = (4, 0, 3)  # support of a logical Z, copied onto the checkup qubit
PLUS_H = (2, 4, 5, 6)
PLUS_CX = ((4, 0), (2, 1), (6, 3), (2, 0), (4, 3), (5, 1), (5, 3), (6, 2))
PLUS_CHECK = (4, 5, 2)

GOLAY_N = 23
GOLAY_GEN = (1, 0, 1, 0, 1, 1, 1, 0, 0, 0, 1, 1)  # 1 + x^2 + x^4 + x^5 + x^6 + x^10 + x^11


def header(name, regs, distance=3):
    lines = [f"protocol {name} distance={distance};"]
    for reg, size, role, *flag in regs:
        extra = f" {flag[0]}" if flag else ""
        lines.append(f"qreg {reg}[{size}] role={role}{extra};")
    return lines


def steane_zero(r, c):
    out = [f"prepz {r}[{i}];" for i in range(7)] + [f"prepz {c};"]
    out += [f"h {r}[{i}];" for i in ZERO_H]
    out += [f"cx {r}[{a}], {r}[{b}];" for a, b in ZERO_CX]
    out += [f"cx {r}[{i}], {c};" for i in ZERO_CHECK]
    out.append(f"measz {c};")
    return out


def steane_plus(r, c):
    out = [f"prepz {r}[{i}];" for i in range(7)] + [f"prepz {c};"]
    out += [f"h {r}[{i}];" for i in PLUS_H]
    out += [f"cx {r}[{a}], {r}[{b}];" for a, b in PLUS_CX]
    out.append(f"h {c};")
    out += [f"cx {c}, {r}[{i}];" for i in PLUS_CHECK]
    out.append(f"measz {c};")
    return out


def steane_sm_body(d, s, c, split=True):
    """Steane-EC: |+>_L ancilla for X errors, |0>_L ancilla for Z errors."""
    body = steane_plus(s, c)
    if split:
        body.append("barrier;")
    body += [f"cx {d}[{i}], {s}[{i}];" for i in range(7)]
    body += [f"measz {s}[{i}];" for i in range(7)]
    body.append("barrier;")
    body += steane_zero(s, c)
    body.append("barrier;")
    body += [f"cx {s}[{i}], {d}[{i}];" for i in range(7)]
    body += [f"h {s}[{i}];" for i in range(7)]
    body += [f"measz {s}[{i}];" for i in range(7)]
    return body


def steane_sm():
    lines = header("steane_sm", [("data", 7, "data"), ("syndrome", 7, "ancilla"), ("checkup", 1, "checkup")])
    return lines + steane_sm_body("data", "syndrome", "checkup[0]")


def encoder():
    lines = header("encoder", [("data", 7, "data"), ("checkup", 1, "checkup")])
    return lines + steane_zero("data", "checkup[0]")


def cat_prep(a, c):
    out = [f"prepz {a}[{i}];" for i in range(7)] + [f"prepz {c};", f"h {a}[0];"]
    out += [f"cx {a}[{x}], {a}[{y}];" for x, y in ((0, 1), (0, 2), (1, 3), (2, 4), (1, 5), (3, 6))]
    out += [f"cx {a}[0], {c};", f"cx {a}[6], {c};", f"measz {c};"]
    return out


def magic_state_prep():
    lines = header("magic_state_prep", [("magic", 7, "magic"), ("anc", 7, "ancilla"), ("checkup", 1, "checkup")])
    body = steane_zero("magic", "checkup[0]")
    for _ in range(2):
        body.append("barrier;")
        body += cat_prep("anc", "checkup[0]")
        body.append("barrier;")
        for i in range(7):
            body += [f"tdg magic[{i}];", f"cx anc[{i}], magic[{i}];", f"t magic[{i}];"]
        body += [f"h anc[{i}];" for i in range(7)]
        body += [f"measz anc[{i}];" for i in range(7)]
        body.append("barrier;")
        body += steane_sm_body("magic", "anc", "checkup[0]", split=False)
    return lines + body


def transversal(name, gate, regs=(("data", 7, "data"),)):
    lines = header(name, list(regs))
    return lines + [f"{gate} data[{i}];" for i in range(7)]


def cnot():
    lines = header("cnot", [("ctrl", 7, "data"), ("trgt", 7, "data")])
    return lines + [f"cx ctrl[{i}], trgt[{i}];" for i in range(7)]


def t_gate():
    lines = header("t_gate", [("data", 7, "data"), ("magic", 7, "magic")])
    body = [f"cx data[{i}], magic[{i}];" for i in range(7)]
    body += [f"measz magic[{i}];" for i in range(7)]
    body.append("barrier;")
    body += [f"s data[{i}];" for i in range(7)]
    return lines + body


# Golay [[23,1,7]]

def golay_generator():
    g = np.zeros((12, GOLAY_N), dtype=np.int64)
    for i in range(12):
        g[i, i:i + 12] = GOLAY_GEN
    return g


def rref(m):
    m = m.copy() % 2
    r, piv = 0, []
    for c in range(m.shape[1]):
        rows = [i for i in range(r, m.shape[0]) if m[i, c]]
        if not rows:
            continue
        m[[r, rows[0]]] = m[[rows[0], r]]
        for i in range(m.shape[0]):
            if i != r and m[i, c]:
                m[i] ^= m[r]
        piv.append(c)
        r += 1
        if r == m.shape[0]:
            break
    return m[:r], piv


def golay_even_basis():
    words = np.array([np.array(c) @ golay_generator() % 2 for c in itertools.product((0, 1), repeat=12)])
    even = words[words.sum(1) % 2 == 0]
    return rref(even)


def golay_prep_cnots(basis, piv, max_sources=3):
    """Greedy CNOT network writing each non-pivot column from finished qubits."""
    k = basis.shape[0]
    goal = {q: basis[:, q] for q in range(GOLAY_N)}
    done = {q: goal[q] for q in piv}
    todo = [q for q in range(GOLAY_N) if q not in piv]
    out = []
    while todo:
        best = None
        for t in todo:
            found = None
            for size in range(1, max_sources + 1):
                for comb in itertools.combinations(sorted(done), size):
                    v = np.zeros(k, dtype=np.int64)
                    for s in comb:
                        v ^= done[s]
                    if (v == goal[t]).all():
                        found = comb
                        break
                if found:
                    break
            if found is None:
                found = tuple(p for j, p in enumerate(piv) if goal[t][j])
            if best is None or len(found) < len(best[1]):
                best = (t, found)
        t, comb = best
        out += [(s, t) for s in comb]
        done[t] = goal[t]
        todo.remove(t)
    return out


def golay_prep():
    basis, piv = golay_even_basis()
    lines = header("golay_prep", [("q", GOLAY_N, "data")], distance=7)
    body = [f"prepz q[{i}];" for i in range(GOLAY_N)]
    body += [f"h q[{i}];" for i in piv]
    body += [f"cx q[{a}], q[{b}];" for a, b in golay_prep_cnots(basis, piv)]
    return lines + body


def golay_verify():
    regs = [("b1", GOLAY_N, "data"), ("b2", GOLAY_N, "ancilla", "active"),
            ("b3", GOLAY_N, "ancilla", "active"), ("b4", GOLAY_N, "ancilla", "active")]
    lines = header("golay_verify", regs, distance=7)
    r = range(GOLAY_N)
    body = [f"cx b1[{i}], b2[{i}];" for i in r] + [f"cx b3[{i}], b4[{i}];" for i in r]
    body += [f"measz b2[{i}];" for i in r] + [f"measz b4[{i}];" for i in r]
    body += [f"cx b3[{i}], b1[{i}];" for i in r] + [f"h b3[{i}];" for i in r]
    body += [f"measz b3[{i}];" for i in r]
    return lines + body


def golay_sm():
    lines = header("golay_sm", [("data", GOLAY_N, "data"), ("anc", GOLAY_N, "ancilla", "active")], distance=7)
    r = range(GOLAY_N)
    body = [f"cx data[{i}], anc[{i}];" for i in r] + [f"measz anc[{i}];" for i in r]
    body.append("barrier;")
    # a fresh logical ancilla block arrives from the factory
    body += [f"prepz anc[{i}];" for i in r]
    body += [f"cx anc[{i}], data[{i}];" for i in r] + [f"h anc[{i}];" for i in r]
    body += [f"measz anc[{i}];" for i in r]
    return lines + body


FIXTURES = {
    "steane_sm": steane_sm,
    "encoder": encoder,
    "magic_state_prep": magic_state_prep,
    "cnot": cnot,
    "t_gate": t_gate,
    "h": lambda: transversal("h", "h"),
    "s": lambda: transversal("s", "s"),
    "measz": lambda: transversal("measz", "measz"),
    "golay_prep": golay_prep,
    "golay_verify": golay_verify,
    "golay_sm": golay_sm,
}


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--check", action="store_true")
    args = ap.parse_args(argv)
    drift = []
    OUT.mkdir(parents=True, exist_ok=True)
    for name, make in FIXTURES.items():
        text = "\n".join(make()) + "\n"
        path = OUT / f"{name}.qasm"
        if args.check:
            if not path.exists() or path.read_text() != text:
                drift.append(name)
        else:
            path.write_text(text)
    if drift:
        print("out of date:", ", ".join(drift))
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
