from __future__ import annotations

import pytest

from solid.backend import MockBackend
from solid.cli import fixture_corpus_path
from solid.seeder import SequenceCorpus, import_sequence_corpus

from helpers import ScriptedBackend, make_dialog, make_seed


@pytest.fixture
def mock_backend():
    return MockBackend()


@pytest.fixture(scope="session")
def fixture_corpus() -> SequenceCorpus:
    return import_sequence_corpus(fixture_corpus_path())


@pytest.fixture
def scripted_backend():
    return ScriptedBackend


@pytest.fixture
def dialog_factory():
    return make_dialog


@pytest.fixture
def seed_factory():
    return make_seed
