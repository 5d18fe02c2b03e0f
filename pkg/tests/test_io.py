from datetime import date

import pytest
from hypothesis import given, strategies as st

from capflows.core import Quarter
from capflows.episodes import Episode, FlowLabel
from capflows.errors import InputError, ParseError
from capflows.io import episode_rows, load_flows, load_index, read_episodes, write_episodes

q = Quarter.parse


def write(tmp_path, name, text):
    p = tmp_path / name
    p.write_text(text)
    return p


def test_flow_row_parses(tmp_path):
    p = write(tmp_path, "f.csv", "country,quarter,net_flow_pct_gdp\nCHL,2006Q1,4.2\nCHL,2006Q2,-1\n")
    s = load_flows(p)["CHL"]
    assert s.quarters == (q("2006Q1"), q("2006Q2"))
    assert s.values.tolist() == [4.2, -1.0]


def test_flow_rows_may_be_unordered(tmp_path):
    p = write(tmp_path, "f.csv", "country,quarter,net_flow_pct_gdp\nCHL,2006Q2,1\nCHL,2006Q1,2\n")
    assert load_flows(p)["CHL"].values.tolist() == [2.0, 1.0]


def test_assets_minus_liabilities_is_negated(tmp_path):
    p = write(tmp_path, "f.csv", "country,quarter,assets_minus_liabilities_pct_gdp\nCHL,2006Q1,4.2\n")
    assert load_flows(p)["CHL"].values.tolist() == [-4.2]


def test_ambiguous_flow_columns_need_a_choice(tmp_path):
    p = write(tmp_path, "f.csv",
              "country,quarter,net_flow_pct_gdp,assets_minus_liabilities_pct_gdp\nCHL,2006Q1,1,2\n")
    with pytest.raises(ParseError):
        load_flows(p)
    assert load_flows(p, "assets_minus_liabilities_pct_gdp")["CHL"].values.tolist() == [-2.0]
    with pytest.raises(InputError):
        load_flows(p, "gross")


def test_duplicate_names_both_lines(tmp_path):
    p = write(tmp_path, "f.csv", "country,quarter,net_flow_pct_gdp\nCHL,2006Q1,1\nCHL,2006Q2,1\nCHL,2006Q1,2\n")
    with pytest.raises(ParseError, match="lines 2 and 4") as e:
        load_flows(p)
    assert e.value.line == 4


def test_gap_is_rejected(tmp_path):
    p = write(tmp_path, "f.csv", "country,quarter,net_flow_pct_gdp\nCHL,2006Q1,1\nCHL,2006Q3,1\n")
    with pytest.raises(ParseError, match="missing 2006Q2") as e:
        load_flows(p)
    assert e.value.line == 3


@pytest.mark.parametrize("row", ["CHL,2006Q5,1", "CHL,06Q1,1", "CHL,2006Q1,abc", "CHL,2006Q1,nan", "CHL,2006Q1"])
def test_malformed_flow_rows_carry_line(tmp_path, row):
    p = write(tmp_path, "f.csv", f"country,quarter,net_flow_pct_gdp\nCHL,2005Q4,1\n{row}\n")
    with pytest.raises(ParseError) as e:
        load_flows(p)
    assert e.value.line == 3


def test_missing_file_and_header(tmp_path):
    with pytest.raises(InputError):
        load_flows(tmp_path / "absent.csv")
    with pytest.raises(ParseError):
        load_flows(write(tmp_path, "f.csv", "country,when,value\n"))
    with pytest.raises(ParseError):
        load_flows(write(tmp_path, "g.csv", ""))


def test_index_row_parses(tmp_path):
    p = write(tmp_path, "i.csv", "country,date,close\nCHL,2006-10-31,2250.5\nCHL,2006-11-01,2251\n")
    s = load_index(p)["CHL"]
    assert s.dates[0] == date(2006, 10, 31)
    assert s.values[0] == 2250.5


@pytest.mark.parametrize("close", ["0", "-3"])
def test_index_nonpositive_close(tmp_path, close):
    p = write(tmp_path, "i.csv", f"country,date,close\nCHL,2006-10-31,{close}\nCHL,2006-11-01,1\n")
    with pytest.raises(ParseError, match="positive") as e:
        load_index(p)
    assert e.value.line == 2


def test_index_out_of_order_names_pair(tmp_path):
    p = write(tmp_path, "i.csv", "country,date,close\nCHL,2006-11-02,1\nCHL,2006-11-01,1\n")
    with pytest.raises(ParseError, match="2006-11-01 on line 3 does not follow 2006-11-02 on line 2"):
        load_index(p)


def test_index_countries_are_independent(tmp_path):
    p = write(tmp_path, "i.csv", "country,date,close\nA,2006-11-02,1\nA,2006-11-03,2\nB,2006-11-01,1\nB,2006-11-02,3\n")
    assert sorted(load_index(p)) == ["A", "B"]


episode_st = st.builds(
    lambda y, qq, length, kind: Episode(Quarter(y, qq), Quarter(y, qq) + (length - 1), kind),
    st.integers(1990, 2030), st.integers(1, 4), st.integers(2, 20),
    st.sampled_from([FlowLabel.SURGE, FlowLabel.OUTFLOW]),
)


@given(st.lists(episode_st, max_size=10))
def test_episode_round_trip(tmp_path_factory, eps):
    p = tmp_path_factory.mktemp("ep") / "episodes.csv"
    write_episodes(p, episode_rows("Korea, Rep.", "threshold", eps))
    got = read_episodes(p)
    assert got.get(("Korea, Rep.", "threshold"), []) == eps


def test_episode_quarters_column_checked(tmp_path):
    p = write(tmp_path, "e.csv", "country,approach,kind,start,end,quarters\nCHL,threshold,surge,2006Q1,2006Q3,4\n")
    with pytest.raises(ParseError, match="disagrees") as e:
        read_episodes(p)
    assert e.value.line == 2
