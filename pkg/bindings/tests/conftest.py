import json

import pytest

from binding_fixtures import GT_OBJECT, ROOM


@pytest.fixture
def scene_json():
    return json.dumps(ROOM)


@pytest.fixture
def gt_json():
    return json.dumps(GT_OBJECT)
