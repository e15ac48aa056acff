from __future__ import annotations

import pytest

from helpers import make_corpus, make_scene


@pytest.fixture
def scene():
    return make_scene()


@pytest.fixture
def corpus():
    return make_corpus()
