"""Shipped protocol fixtures."""

from importlib import resources

from .ir import Protocol, parse_protocol

FIXTURE_NAMES = (
    "steane_sm", "encoder", "magic_state_prep", "cnot", "t_gate", "h", "s", "measz",
    "golay_prep", "golay_verify", "golay_sm",
)


def fixture_text(name: str) -> str:
    if name not in FIXTURE_NAMES:
        raise KeyError(f"no fixture named {name!r}; choose from {', '.join(FIXTURE_NAMES)}")
    return resources.files("ftsynth").joinpath("fixtures").joinpath(f"{name}.qasm").read_text()


def load_fixture(name: str) -> Protocol:
    return parse_protocol(fixture_text(name))
