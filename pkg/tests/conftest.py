import numpy as np
import pytest

from coniclpv import conic

# every (view, certificate) pair produced during the session, re-checked by
# the acceptance suite
CERTIFICATES = []
# one summary line per acceptance criterion
ACCEPTANCE = {}

_certify = conic.certify_cone


def _recording_certify(view, *args, **kwargs):
    cert = _certify(view, *args, **kwargs)
    if not isinstance(view, conic.ConicChannelView):
        view = view.conic_view()
    CERTIFICATES.append((view, cert))
    return cert


def pytest_sessionstart(session):
    conic.certify_cone = _recording_certify


def pytest_collection_modifyitems(session, config, items):
    # acceptance runs last so it can re-check certificates from every test
    items.sort(key=lambda item: item.fspath.basename == "test_acceptance.py")


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE:
        terminalreporter.section("acceptance criteria")
        for k in sorted(ACCEPTANCE):
            terminalreporter.write_line(ACCEPTANCE[k])


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)
