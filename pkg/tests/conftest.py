import csv
import io

import pytest
from hypothesis import HealthCheck, settings

from invrmt.marketdata import HEADER

settings.register_profile("repo", deadline=None, max_examples=60,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("repo")


def trade_csv(rows, header=HEADER) -> bytes:
    """CSV bytes for ``rows`` of (stock, ts, buyer, btype, seller, stype, price, size)."""
    out = io.StringIO()
    w = csv.writer(out, lineterminator="\n")
    w.writerow(header)
    for r in rows:
        w.writerow(r)
    return out.getvalue().encode("utf-8")


@pytest.fixture
def make_log():
    return trade_csv
