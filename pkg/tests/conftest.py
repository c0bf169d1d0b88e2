import numpy as np
import pytest

from ssrkit import Scene, parse_ssr

from scene_fixtures import BEDROOM_SSR


@pytest.fixture
def bedroom_scene() -> Scene:
    return parse_ssr(BEDROOM_SSR)


@pytest.fixture
def l_shape_corners() -> np.ndarray:
    # two fused rectangles: 2x1 with a 1x1 extension, six true corners
    return np.array([[0.0, 0.0], [2.0, 0.0], [2.0, 1.0],
                     [1.0, 1.0], [1.0, 2.0], [0.0, 2.0]])
