import pytest

from qtopo import fem, qae, qsvt


@pytest.fixture(scope="session")
def domain22():
    return fem.MbbDomain.mbb(2, 2)


@pytest.fixture(scope="session")
def domain33():
    return fem.MbbDomain.mbb(3, 3)


@pytest.fixture(scope="session")
def spec_2x2():
    return qsvt.PolySpec(1e-3, 0.3, 1e-3)


@pytest.fixture(scope="session")
def spec_3x3():
    return qsvt.PolySpec(1e-5, 0.3, 1e-3)


@pytest.fixture(scope="session")
def poly_2x2(spec_2x2):
    return qsvt.fit_even_poly(spec_2x2)


@pytest.fixture(scope="session")
def poly_3x3(spec_3x3):
    return qsvt.fit_even_poly(spec_3x3)


@pytest.fixture(scope="session")
def table22_poly(domain22, spec_2x2):
    return fem.enumerate_thetas(domain22, spec_2x2, mode="polynomial")


@pytest.fixture(scope="session")
def table33_k5_poly(domain33, spec_3x3):
    return fem.enumerate_thetas(domain33, spec_3x3, volume_k=5, mode="polynomial")


@pytest.fixture(scope="session")
def constants22(domain22, poly_2x2):
    return qae.calibrated_constants(domain22, poly_2x2)
