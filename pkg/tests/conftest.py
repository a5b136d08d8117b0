import pytest

from nadash.bandwidth import (
    PAPER_CORE_MATRIX,
    PAPER_CORE_RATES,
    PAPER_EDGE_MATRIX,
    PAPER_EDGE_RATES,
    BandwidthTimeline,
    MarkovBandwidthModel,
)
from nadash.manifest import VideoManifest
from nadash.simcore import MarkovSource, Scenario


@pytest.fixture
def worked_core():
    return BandwidthTimeline.constant(300, 4)


@pytest.fixture
def worked_edge():
    return BandwidthTimeline.from_rates([100, 500], 2)


def case1_scenario(segments=150, **kw):
    return Scenario(
        manifest=VideoManifest(segments, (100.0, 400.0, 1000.0)),
        core=MarkovSource(MarkovBandwidthModel(PAPER_CORE_MATRIX, PAPER_CORE_RATES)),
        edge=MarkovSource(MarkovBandwidthModel(PAPER_EDGE_MATRIX, PAPER_EDGE_RATES)),
        **kw,
    )


@pytest.fixture
def case1():
    return case1_scenario()
