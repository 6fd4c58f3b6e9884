import numpy as np
import pytest
import scipy.sparse as sp

from photosr import synth
from photosr.core import CameraIntrinsics, ScalarGrid

# lines reported by the acceptance tests, echoed in the terminal summary
ACCEPTANCE_LINES = {}


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for k in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(ACCEPTANCE_LINES[k])


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def small_dataset(n=5, size=(32, 24), sf=2, seed=0, sigma_I=0.0, alpha_z=0.0, albedo="checker"):
    """Bumpy scene (32x24 by default) for fast solver tests."""
    bumps = [(10.0, 9.0, 0.8, 4.0), (22.0, 14.0, 1.1, 5.0), (16.0, 6.0, -0.4, 2.5)]
    z = ScalarGrid.from_array(synth.gaussian_bumps(size, bumps, base=10.0))
    rho = synth.make_albedo(albedo, {"cell": 4} if albedo == "checker" else {}, size)
    lights = synth.sample_lighting(n, seed)
    cam = CameraIntrinsics(40.0, ((size[0] - 1) / 2, (size[1] - 1) / 2))
    return synth.generate_dataset(z, rho, lights, sf, synth.NoiseParams(sigma_I, alpha_z, seed), cam)


def dense_operator(coef, ex, ey):
    """Dense residual rows C G, row p*m + k for pixel p; G stacks (dx, dy, identity)."""
    h, w, m, _ = coef.shape
    npx = h * w
    idx = np.arange(npx).reshape(h, w)
    dx = sp.lil_matrix((npx, npx))
    dy = sp.lil_matrix((npx, npx))
    for y in range(h):
        for x in range(w):
            i = idx[y, x]
            if ex[y, x]:
                dx[i, i], dx[i, idx[y, x + 1]] = -1, 1
            if ey[y, x]:
                dy[i, i], dy[i, idx[y + 1, x]] = -1, 1
    g = [dx.toarray(), dy.toarray(), np.eye(npx)]
    rows = np.zeros((npx * m, npx))
    for k in range(m):
        for j in range(3):
            rows[k::m] += coef[:, :, k, j].reshape(-1, 1) * g[j]
    return rows
