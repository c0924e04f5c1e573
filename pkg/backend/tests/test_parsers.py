import io

import numpy as np
import pytest

from pairrank.errors import InputError
from pairrank.parsers.citation_parser import parse_citation_csv
from pairrank.parsers.match_parser import parse_match_csv


class TestCitationParser:
    def test_fixture(self, fixtures_dir):
        m = parse_citation_csv(fixtures_dir / "citations_small.csv")
        assert m.labels == ("Econometrica", "JASA", "AnnStat", "JRSSB")
        assert m.counts[0, 1] == 40
        assert m.counts[1, 0] == 10
        assert m.counts.shape == (4, 4)

    def test_columns_follow_rows(self):
        m = parse_citation_csv(io.StringIO("j,B,A\nA,1,2\nB,3,4\n"))
        assert m.labels == ("A", "B")
        np.testing.assert_array_equal(m.counts, [[2, 1], [4, 3]])

    def test_non_integer_count_reports_line(self):
        with pytest.raises(InputError) as err:
            parse_citation_csv(io.StringIO("j,A,B\nA,1,2\nB,x,4\n"))
        assert err.value.line == 3
        assert err.value.detail.startswith("line 3:")

    def test_negative_count(self):
        with pytest.raises(InputError, match="negative"):
            parse_citation_csv(io.StringIO("j,A,B\nA,1,-2\nB,3,4\n"))

    def test_label_mismatch(self):
        with pytest.raises(InputError) as err:
            parse_citation_csv(io.StringIO("j,A,B\nA,1,2\nC,3,4\n"))
        assert err.value.label in ("B", "C")

    def test_duplicate_row(self):
        with pytest.raises(InputError, match="duplicate"):
            parse_citation_csv(io.StringIO("j,A,B\nA,1,2\nA,3,4\n"))


class TestMatchParser:
    def test_labels_in_first_appearance_order(self, fixtures_dir):
        records, labels = parse_match_csv(fixtures_dir / "matches_small.csv")
        assert labels == ["alice", "bob", "carol", "dave"]
        assert len(records) == 10
        assert (records[0].i, records[0].j, records[0].outcome) == (0, 1, 1)

    def test_integer_indices(self):
        records, labels = parse_match_csv(io.StringIO("winner,loser\n2,0\n1,2\n"))
        assert labels == ["0", "1", "2"]
        assert (records[0].i, records[0].j) == (2, 0)

    def test_zero_padded_indices(self):
        records, labels = parse_match_csv(io.StringIO("winner,loser\n010,02\n2,10\n"))
        assert len(labels) == 11
        assert [(r.i, r.j) for r in records] == [(10, 2), (2, 10)]

    def test_unknown_label_names_label_and_line(self):
        source = io.StringIO("winner,loser\nalice,bob\nbob,mallory\n")
        with pytest.raises(InputError) as err:
            parse_match_csv(source, labels=["alice", "bob"])
        assert err.value.label == "mallory"
        assert err.value.line == 3
        assert "mallory" in err.value.detail

    def test_missing_column(self):
        with pytest.raises(InputError, match="missing columns"):
            parse_match_csv(io.StringIO("home,away\na,b\n"))

    def test_self_match(self):
        with pytest.raises(InputError, match="itself"):
            parse_match_csv(io.StringIO("winner,loser\na,a\n"))
