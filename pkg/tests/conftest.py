import numpy as np
import pytest
import sympy as sy

from pdeltaflow.constitutive import PDeltaModel, estimate_characteristics
from pdeltaflow.discretization import RectDomain, build_space, estimate_embedding_constants
from pdeltaflow.lifting import BoundaryData, lift


@pytest.fixture(scope="session")
def unit_domain():
    return RectDomain()


@pytest.fixture(scope="session")
def space4(unit_domain):
    return build_space(unit_domain, 4, 4)


@pytest.fixture(scope="session")
def space8(unit_domain):
    return build_space(unit_domain, 8, 8)


@pytest.fixture(scope="session")
def space16(unit_domain):
    return build_space(unit_domain, 16, 16)


@pytest.fixture(scope="session")
def space32(unit_domain):
    return build_space(unit_domain, 32, 32)


def tangential_g2(amp):
    """Tangential boundary velocity on the unit square (zero normal flux)."""
    return (
        lambda x, y: amp * np.pi * np.sin(np.pi * x) * np.cos(np.pi * y),
        lambda x, y: -amp * np.pi * np.cos(np.pi * x) * np.sin(np.pi * y),
    )


def asymmetric_divfree():
    """Divergence-free zero-boundary field without mirror symmetries."""
    x, y = sy.symbols("x y")
    psi = (x * (1 - x) * y * (1 - y)) ** 2 * sy.exp(2 * x - y) * 30
    return (
        sy.lambdify((x, y), sy.diff(psi, y), "numpy"),
        sy.lambdify((x, y), -sy.diff(psi, x), "numpy"),
    )


def manufactured_case(p, delta, mu0, mu, amp=0.3, convective=True):
    """Manufactured divergence-free solution and its matching body force."""
    x, y = sy.symbols("x y")
    psi = amp * sy.sin(sy.pi * x) ** 2 * sy.sin(sy.pi * y) ** 2 / sy.pi
    ue = sy.Matrix([sy.diff(psi, y), -sy.diff(psi, x)])
    pe = sy.sin(sy.pi * x) * sy.cos(sy.pi * y)
    du = sy.Matrix(
        [
            [sy.diff(ue[0], x), (sy.diff(ue[0], y) + sy.diff(ue[1], x)) / 2],
            [(sy.diff(ue[0], y) + sy.diff(ue[1], x)) / 2, sy.diff(ue[1], y)],
        ]
    )
    mag = sy.sqrt(du[0, 0] ** 2 + 2 * du[0, 1] ** 2 + du[1, 1] ** 2)
    stress = mu0 * du + mu * (delta + mag) ** (p - 2) * du
    f0 = -(sy.diff(stress[0, 0], x) + sy.diff(stress[0, 1], y)) + sy.diff(pe, x)
    f1 = -(sy.diff(stress[1, 0], x) + sy.diff(stress[1, 1], y)) + sy.diff(pe, y)
    if convective:
        f0 += ue[0] * sy.diff(ue[0], x) + ue[1] * sy.diff(ue[0], y)
        f1 += ue[0] * sy.diff(ue[1], x) + ue[1] * sy.diff(ue[1], y)
    lam = lambda e: sy.lambdify((x, y), e, "numpy")
    return {
        "u": (lam(ue[0]), lam(ue[1])),
        "pi": lam(pe),
        "f": (lam(f0), lam(f1)),
        "model": PDeltaModel(p=p, delta=delta, mu0=mu0, mu=mu),
    }


@pytest.fixture(scope="session")
def model18():
    return PDeltaModel(p=1.8, delta=0.01)


@pytest.fixture(scope="session")
def chars18(model18):
    return estimate_characteristics(model18, samples=30000, seed=11)


@pytest.fixture(scope="session")
def pipeline8(space8, model18, chars18):
    """Small certified pipeline shared by certifier and solver tests."""
    emb = estimate_embedding_constants(space8, model18.p, 1.8, iters=60, seed=4)
    lf = lift(BoundaryData(g1=0.0, g2=tangential_g2(0.01)), space8, model18.p, 1.8)
    return {"model": model18, "space": space8, "chars": chars18, "emb": emb, "lift": lf, "s": 1.8}
