import pytest

from delaychain import chain
from delaychain.dataio import make_synthetic
from delaychain.neuro import MismatchModel


@pytest.fixture(scope="session")
def synthetic_ds():
    return make_synthetic(200, seed=11)


@pytest.fixture(scope="session")
def calibrated(request):
    """Full 256-neuron calibration at cv=0.2, shared across the session."""
    records = chain.calibrate_pool(256, mm=MismatchModel(cv=0.2, seed=0), required=90)
    assignment, report = chain.select_matched(records, 6, 15)
    net = chain.build_network(assignment, records)
    return records, assignment, report, net
