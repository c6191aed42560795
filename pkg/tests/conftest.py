import math
import sys
from importlib import resources
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))


def fixture_path(name):
    return Path(str(resources.files("orbithick") / "fixtures" / f"{name}.json"))


def build(name, word_length, mu, eps_n=None, **cover_kw):
    """Lattice, inventory and cover for a bundled fixture."""
    from orbithick.build import CoverConfig, build_cover
    from orbithick.cover import MuCascade
    from orbithick.groups import enumerate_elements, load_lattice
    from orbithick.thickthin import ThinPart, levels

    spec = load_lattice(fixture_path(name))
    if eps_n is not None:
        spec = spec.with_epsilon(eps_n)
    inv = enumerate_elements(spec, word_length)
    lv = levels(spec)
    thin = ThinPart(inv, lv)
    cfg = CoverConfig(**{"seed": 1, **cover_kw})
    return build_cover(spec, inv, lv, MuCascade.override(mu), thin=thin, config=cfg)


EPS_MODULAR = 4 * math.asinh(1 / 3.6)


@pytest.fixture(scope="session")
def trivial_cover():
    return build("trivial", 2, [0.4, 0.3, 0.2, 0.1], basepoint=((0.0,), 1.0), window_radius=0.6)


@pytest.fixture(scope="session")
def coarse_modular_cover():
    """A small cover of the modular orbifold; too coarse to be a good cover."""
    return build("psl2z", 10, [0.28, 0.25, 0.05, 0.04], eps_n=EPS_MODULAR)


@pytest.fixture(scope="session")
def modular_cover():
    """The cover used by the end-to-end run (radii of the bundled config)."""
    return build("psl2z", 10, [0.119, 0.119, 0.05, 0.017], eps_n=EPS_MODULAR)
