import pytest
from hypothesis import given
from hypothesis import strategies as st

from smooth_trajectron import config as flatconfig
from smooth_trajectron.exceptions import ConfigurationError

values = st.one_of(st.booleans(), st.integers(-10**6, 10**6), st.floats(allow_nan=False, allow_infinity=False),
                   st.text(max_size=10))


@given(st.dictionaries(st.from_regex(r"[a-z][a-z_]{0,8}", fullmatch=True), values, max_size=6))
def test_round_trip(cfg):
    assert flatconfig.loads(flatconfig.dumps(cfg)) == cfg


def test_none_omitted_and_sorted():
    assert flatconfig.dumps({"b": 1, "a": None, "c": 0.5}) == "b = 1\nc = 0.5\n"


def test_tables_rejected():
    with pytest.raises(ConfigurationError):
        flatconfig.loads("[section]\nx = 1\n")


def test_parse_error():
    with pytest.raises(ConfigurationError):
        flatconfig.loads("x = = 1")
