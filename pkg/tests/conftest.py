from __future__ import annotations

from pathlib import Path

import pytest

from eqsat_ir import NotKeyable, structural_key
from eqsat_ir.eqsat import eclass_users, egraphs_in

DATA = Path(__file__).parent / "data"


@pytest.fixture
def data_dir() -> Path:
    return DATA


def read(name: str) -> str:
    return (DATA / name).read_text()


def hashcons_violations(root) -> list[str]:
    """Duplicate structural keys or values feeding several eclasses."""
    problems = []
    for g in egraphs_in(root):
        seen = {}
        for op in g.nodes():
            try:
                key = structural_key(op)
            except NotKeyable:
                continue
            if key in seen:
                problems.append(f"{op.name}#{op.id} duplicates {seen[key].name}#{seen[key].id}")
            seen[key] = op
        for ec in g.eclasses():
            for v in ec.operands:
                n = len(set(map(id, eclass_users(v))))
                if n != 1:
                    problems.append(f"value {v!r} feeds {n} eclasses")
    return problems


def pytest_terminal_summary(terminalreporter):
    from test_acceptance import RESULTS

    if RESULTS:
        terminalreporter.section("acceptance criteria")
        for n in sorted(RESULTS):
            terminalreporter.write_line(RESULTS[n])
