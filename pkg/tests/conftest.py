import numpy as np
import pytest
import torch

from coverplan.instance import Instance, generate_instance
from coverplan.model import ModelConfig, Policy


def small_config(**overrides):
    base = dict(dim=4, layers=1, heads=2, corner_dim=4, pattern_dim=4)
    base.update(overrides)
    return ModelConfig(**base)


def central_differences(fn, params, step=1e-6):
    """Finite-difference gradient of scalar ``fn()`` w.r.t. each tensor in ``params``."""
    grads = []
    with torch.no_grad():
        for p in params:
            g = torch.zeros_like(p)
            flat, gflat = p.view(-1), g.view(-1)
            for i in range(flat.numel()):
                orig = flat[i].item()
                flat[i] = orig + step
                up = fn().item()
                flat[i] = orig - step
                down = fn().item()
                flat[i] = orig
                gflat[i] = (up - down) / (2 * step)
            grads.append(g)
    return grads


def max_relative_error(analytic, numeric, floor=1e-5):
    """max |a - f| / max(|a|, |f|, floor) over all entries; the floor absorbs entries that are exactly zero."""
    worst = 0.0
    for a, f in zip(analytic, numeric):
        denom = torch.maximum(torch.maximum(a.abs(), f.abs()), torch.full_like(a, floor))
        worst = max(worst, float(((a - f).abs() / denom).max()))
    return worst


@pytest.fixture
def tiny_policy():
    return Policy(small_config(), seed=3).double()


@pytest.fixture
def inst_3_1():
    return generate_instance(11, 3, 1)


def line_instance():
    """One agent at the origin corner region, two areas far apart on a horizontal line."""
    return Instance(agents=[[0.05, 0.5]], centers=[[0.3, 0.5], [0.8, 0.5]], radii=[0.02, 0.02])


def pytest_terminal_summary(terminalreporter):
    try:
        from test_acceptance import RESULTS
    except ImportError:
        return
    if RESULTS:
        terminalreporter.section("acceptance criteria")
        for line in RESULTS:
            terminalreporter.write_line(line)
