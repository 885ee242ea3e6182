import numpy as np
import pytest

from quadcurl.reference import reference_basis


@pytest.fixture(scope="session")
def ref():
    return reference_basis()


@pytest.fixture(scope="session")
def rng():
    return np.random.default_rng(20240531)


def random_tet_vertices(rng, min_quality=0.05):
    """Random non-degenerate tet: |det B| >= min_quality * (longest edge)^3.

    The Kuhn mesh tets have quality ~0.19; the floor keeps slivers out, for
    which the direct-solve fallback path exists.
    """
    while True:
        verts = rng.uniform(-1, 1, (4, 3))
        det = np.linalg.det(np.column_stack([verts[i] - verts[0]
                                             for i in (1, 2, 3)]))
        hmax = max(np.linalg.norm(verts[i] - verts[j])
                   for i in range(4) for j in range(i))
        if abs(det) > min_quality * hmax ** 3:
            return verts
