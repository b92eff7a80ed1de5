"""Shared fixtures: the three published case setups and small-net helpers."""

import numpy as np
import pytest

from memform import (
    AiryField,
    BoundaryProfile,
    DomainSpec,
    FourierProfile,
    LoadModel,
    Mlp,
    Normalization,
    PointLoad,
    init_mlp,
)


def rectangle_case():
    """Compression rectangle: l=13, b=8, arch 2.0, self-weight + point load."""
    domain = DomainSpec.rectangle(13.0, 8.0)
    airy = AiryField(2.0, 0.0, 2.0, "compression")
    loads = LoadModel(
        rho=18.0,
        t=0.1,
        point_loads=(PointLoad(5.0, (-1.5, 0.0), 0.5),),
        alpha_h=0.5,
        theta_h=np.pi / 4,
        ref=(-6.5, -4.0),
    )
    profile = BoundaryProfile.rect_arch(2.0)
    return domain, airy, loads, profile


def three_leg_case():
    """Compression annulus with a three-lobed outer rim profile."""
    domain = DomainSpec.annulus(0.6, 6.0)
    airy = AiryField(3.0, 0.0, 3.0, "compression")
    loads = LoadModel(rho=18.0, t=0.1, alpha_h=0.3, theta_h=np.pi / 2, ref=(0.0, -6.0))
    profile = BoundaryProfile.annulus_fourier(
        FourierProfile(1.25, (0.0, 0.0, 1.25)), FourierProfile(2.0)
    )
    return domain, airy, loads, profile


def four_leg_case():
    """Tension disk with a four-lobed rim profile and an off-center point load."""
    domain = DomainSpec.disk(6.0)
    airy = AiryField(5.0, 0.0, 5.0, "tension")
    loads = LoadModel(
        rho=10.0,
        t=0.1,
        point_loads=(PointLoad(15.0, (-2.5, -2.5), 0.75),),
        alpha_h=0.5,
        theta_h=0.0,
        ref=(-6.0, 0.0),
    )
    profile = BoundaryProfile.disk_fourier(FourierProfile(1.25, (0.0, 0.0, 0.0, 1.25)))
    return domain, airy, loads, profile


ALL_CASES = {
    "rectangle": rectangle_case,
    "annulus": three_leg_case,
    "disk": four_leg_case,
}


def small_mlp(seed=0, n_hidden=2, width=16, half_widths=(1.0, 1.0)) -> Mlp:
    rng = np.random.default_rng(seed)
    return init_mlp(n_hidden, width, rng, Normalization((0.0, 0.0), half_widths))


@pytest.fixture
def rect_case():
    return rectangle_case()


@pytest.fixture
def annulus_case():
    return three_leg_case()


@pytest.fixture
def disk_case():
    return four_leg_case()


@pytest.fixture(params=sorted(ALL_CASES))
def any_case(request):
    return ALL_CASES[request.param]()
