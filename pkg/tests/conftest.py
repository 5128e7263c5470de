import json
import math
import os

import numpy as np
import pytest

import framelab as fl
from framelab.eigen import EigenBasis

HERE = os.path.dirname(__file__)


@pytest.fixture(scope="session")
def baselines():
    with open(os.path.join(HERE, "baselines.json")) as fh:
        return json.load(fh)


class Battery:
    """Domain + operator + eigenbasis + filter ladder + calibrated frame."""

    def __init__(self, kind, params, h, delta=0.5, max_level=None, m="auto", seed=0):
        self.dom = fl.build_domain(kind, params, h)
        self.op = fl.assemble(self.dom, fl.identity_coefficient())
        lam_cap = 4.0 ** (max_level + 1) if max_level is not None else None
        self.basis = fl.solve_lowest(self.op, self.dom, m=m, seed=seed, lambda_cap=lam_cap)
        self.bank = fl.make_filter_bank(self.basis, max_level=max_level)
        self.delta = delta
        self.a0 = fl.calibrate_a0(self.dom, self.basis, delta, list(self.bank.levels), seed=seed)
        self.fs = fl.build_frame(self.basis, self.bank, self.dom, delta, self.a0)

    def sample(self, seed, omega=None):
        omega = self.bank.certified_lambda if omega is None else omega
        return fl.sample_bandlimited(self.basis, omega, seed)


@pytest.fixture(scope="session")
def interval_battery():
    return Battery("interval", {"a": 0.0, "b": 1.0}, 1.0 / 256)


@pytest.fixture(scope="session")
def square_battery():
    return Battery("rectangle", {"x0": 0.0, "x1": 1.0, "y0": 0.0, "y1": 1.0}, 1.0 / 64)


def make_mock_basis(eigenvalues, lambda_reliable=None):
    """Synthetic basis with prescribed eigenvalues on a placeholder domain.

    Vectors are scaled unit columns, discretely orthonormal, so spectral
    operations behave exactly like coefficients over the given eigenvalues.
    """
    eigenvalues = np.asarray(eigenvalues, dtype=float)
    n = eigenvalues.size
    dom = fl.build_domain("interval", {"a": 0.0, "b": 1.0}, 1.0 / (n + 1))
    assert dom.n_nodes == n
    if lambda_reliable is None:
        lambda_reliable = float(eigenvalues[-1]) * 4.0
    return EigenBasis(
        eigenvalues=eigenvalues,
        vectors=np.eye(n) / math.sqrt(dom.weight),
        dom=dom,
        lambda_reliable=lambda_reliable,
        residual_tol=1e-12,
        max_residual=0.0,
        fingerprint="mock",
    )
