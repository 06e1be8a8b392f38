import io

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from dpslide.streams import (
    MAGIC, GeneratorSpec, StreamInputError, generate_stream, parse_bytes, parse_stream,
    planted_stream, to_bytes, write_stream, zipf_stream,
)


def test_text_example():
    assert parse_bytes(b"3\n3\n1\n").tolist() == [3, 3, 1]


def test_empty_input():
    assert parse_bytes(b"").size == 0


def test_malformed_line_reports_line_number():
    with pytest.raises(StreamInputError, match="line 2"):
        parse_bytes(b"1\nabc\n3\n")


def test_out_of_range_reports_line():
    with pytest.raises(StreamInputError, match="line 3"):
        parse_bytes(b"1\n2\n9\n", n=5)
    with pytest.raises(StreamInputError):
        parse_bytes(b"0\n", n=5)


def test_binary_bad_magic_and_length():
    with pytest.raises(StreamInputError, match="magic"):
        parse_bytes(b"DPHHxxxx\x01\x00\x00\x00")
    with pytest.raises(StreamInputError):
        parse_bytes(MAGIC + b"\x01\x00")


def test_binary_out_of_range_position():
    with pytest.raises(StreamInputError, match="position 2"):
        parse_bytes(to_bytes([1, 7], binary=True), n=3)


@given(st.lists(st.integers(1, 2**32 - 1), max_size=200), st.booleans())
def test_round_trip(items, binary):
    assert parse_bytes(to_bytes(items, binary=binary)).tolist() == items


def test_file_and_object_sources(tmp_path):
    path = tmp_path / "s.bin"
    write_stream(str(path), [5, 6, 7], binary=True)
    assert parse_stream(str(path)).tolist() == [5, 6, 7]
    assert parse_stream(io.BytesIO(b"4\n")).tolist() == [4]
    assert parse_stream(io.StringIO("4\n2\n")).tolist() == [4, 2]
    with pytest.raises(StreamInputError):
        parse_stream(str(tmp_path / "missing"))


def test_write_rejects_bad_ids():
    with pytest.raises(ValueError):
        to_bytes([0])


class TestGenerators:
    def test_planted_all_mass(self):
        spec = GeneratorSpec("planted", m=10, n=20, item=5, rho=1.0)
        assert generate_stream(spec).tolist() == [5] * 10

    @given(st.integers(1, 500), st.floats(0, 1), st.integers(0, 100))
    def test_planted_count_at_least_ceil(self, m, rho, seed):
        s = planted_stream(m, 50, 3, rho, seed)
        assert (s == 3).sum() >= int(np.ceil(rho * m))
        assert s.min() >= 1 and s.max() <= 50

    @pytest.mark.parametrize("kind", ["uniform", "zipf", "planted", "all-distinct"])
    def test_same_spec_same_stream(self, kind):
        spec = GeneratorSpec(kind, m=500, n=1000, seed=4)
        assert np.array_equal(generate_stream(spec), generate_stream(spec))
        other = GeneratorSpec(kind, m=500, n=1000, seed=5)
        assert not np.array_equal(generate_stream(spec), generate_stream(other))

    def test_zipf_rank_frequency_slope(self):
        s = 1.1
        counts = np.bincount(zipf_stream(100_000, 1000, s, seed=0))[1:]
        ranks = np.arange(1, 101)
        top = np.sort(counts)[::-1][:100]
        slope = np.polyfit(np.log(ranks), np.log(top), 1)[0]
        assert abs(slope + s) <= 0.2

    def test_all_distinct(self):
        s = generate_stream(GeneratorSpec("all-distinct", m=300, n=300, seed=1))
        assert len(set(s.tolist())) == 300

    @pytest.mark.parametrize("kw", [dict(kind="planted", rho=1.5), dict(kind="uniform", n=0),
                                    dict(kind="nope"), dict(kind="all-distinct", m=20, n=10),
                                    dict(kind="planted", item=99)])
    def test_invalid_specs(self, kw):
        base = dict(m=10, n=20)
        base.update(kw)
        with pytest.raises(ValueError):
            generate_stream(GeneratorSpec(**base))

    def test_parse_spec_text(self):
        spec = GeneratorSpec.parse("planted:item=7,rho=0.05", 100, 50, 3)
        assert (spec.kind, spec.item, spec.rho, spec.seed) == ("planted", 7, 0.05, 3)
        assert GeneratorSpec.parse("zipf:s=1.3", 10, 10).s == 1.3
        with pytest.raises(ValueError):
            GeneratorSpec.parse("zipf:q=1", 10, 10)
