import os

import pytest

from link_modeling import LinkParams, SensingModel
from scheme_analyzing import NetworkEnv

CONFIG_DIR = os.path.join(os.path.dirname(__file__), "..", "configs")
GOLDEN_DIR = os.path.join(os.path.dirname(__file__), "golden")


def make_link(snr=10.0, bits=1000.0, slot=1e-3, bandwidth=1e6, gain=1.0):
    return LinkParams(
        bits_per_packet=bits,
        slot_duration=slot,
        bandwidth=bandwidth,
        snr=snr,
        mean_gain=gain,
    )


def constant_env(p_ppd=0.9, p_ssd=0.8, p_md=0.3, p_fa=0.2):
    return NetworkEnv(
        primary_link=make_link(),
        secondary_link=make_link(),
        sensing=SensingModel(mode="exogenous", p_fa=p_fa, p_md_exogenous=p_md),
        success_mode="constant",
        constant_success_p=p_ppd,
        constant_success_s=p_ssd,
    )


def physical_env(snr_p=10.0, snr_s=5.0, p_md=0.3, p_fa=0.2):
    # b / (T W) = 1, so success is exp(-(2^(1/(1 - tau/T)) - 1)/snr)
    return NetworkEnv(
        primary_link=make_link(snr=snr_p),
        secondary_link=make_link(snr=snr_s),
        sensing=SensingModel(mode="exogenous", p_fa=p_fa, p_md_exogenous=p_md),
        success_mode="physical",
    )


def roc_env(p_fa=0.1, sampling_freq=1e6, sensing_snr=0.1, snr_p=10.0, snr_s=5.0):
    return NetworkEnv(
        primary_link=make_link(snr=snr_p),
        secondary_link=make_link(snr=snr_s),
        sensing=SensingModel(
            mode="roc",
            p_fa=p_fa,
            p_md_exogenous=None,
            sampling_freq=sampling_freq,
            sensing_snr=sensing_snr,
        ),
        success_mode="physical",
    )


@pytest.fixture
def baseline_env():
    """P_MD = 0.3, P_FA = 0.2, primary success 0.9, secondary success 0.8."""
    return constant_env()


@pytest.fixture
def perfect_env():
    return constant_env(p_md=0.0, p_fa=0.0)


@pytest.fixture
def crossover_env():
    return physical_env()


@pytest.fixture
def sensing_env():
    return roc_env()
