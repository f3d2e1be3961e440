from __future__ import annotations

import pytest

from sheetlint.services.structure import infer_structure
from tests.support import constant_total_d4, header_d3_removed, running_example


@pytest.fixture(scope="session")
def example():
    return running_example()


@pytest.fixture(scope="session")
def model(example):
    return infer_structure(example)


@pytest.fixture(scope="session")
def constant_d4_model(example):
    return infer_structure(constant_total_d4(example))


@pytest.fixture(scope="session")
def missing_header_model(example):
    return infer_structure(header_d3_removed(example))
