import random

import pytest

from ftsynth.ir import parse_protocol

ONE_QUBIT = ("h", "x", "z", "s", "t", "tdg", "prepz", "measz")

# lines collected by the acceptance module, printed in the terminal summary
ACCEPTANCE_LINES = []


def random_protocol_text(rng: random.Random, max_qubits=6, max_instr=15, max_barriers=2, distance=3):
    """A small random protocol: one data register, optionally an ancilla register."""
    nq = rng.randint(2, max_qubits)
    nd = rng.randint(1, nq)
    lines = [f"protocol rand distance={distance};", f"qreg d[{nd}] role=data;"]
    names = [f"d[{i}]" for i in range(nd)]
    if nq > nd:
        lines.append(f"qreg a[{nq - nd}] role=ancilla;")
        names += [f"a[{i}]" for i in range(nq - nd)]
    barriers = rng.randint(0, max_barriers)
    body = []
    for _ in range(rng.randint(1, max_instr - barriers)):
        if rng.random() < 0.5:
            a, b = rng.sample(names, 2)
            body.append(f"{'swap' if rng.random() < 0.1 else 'cx'} {a}, {b};")
        else:
            body.append(f"{rng.choice(ONE_QUBIT)} {rng.choice(names)};")
    for _ in range(barriers):
        body.insert(rng.randint(0, len(body)), "barrier;")
    return "\n".join(lines + body) + "\n"


def random_protocol(rng, **kw):
    return parse_protocol(random_protocol_text(rng, **kw))


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)


@pytest.fixture(scope="session")
def steane_set():
    """One synthesis of the shipped Steane protocol set on 5x7."""
    from ftsynth.layout import QubitLayout
    from ftsynth.mapper import SynthesisConfig
    from ftsynth.workflow import ProtocolSet, synthesize_set

    return synthesize_set(ProtocolSet.steane(), QubitLayout(5, 7), SynthesisConfig(iterations=2, seed=7))
