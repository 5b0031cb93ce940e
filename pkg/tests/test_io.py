import math

import numpy as np
import pytest

from indelphy.estimator import DistanceMatrix
from indelphy.io import (FormatError, format_matrix, parse_matrix, read_ancestry, read_config, read_sequences,
                         write_ancestry, write_sequences)
from indelphy.model import SubstitutionModel


def test_sequence_round_trip(tmp_path):
    jc = SubstitutionModel.jukes_cantor()
    seqs = {"a": jc.encode("ACGT"), "long name": jc.encode("TTTTGA")}
    write_sequences(tmp_path / "s.fa", seqs, jc)
    text, alphabet = read_sequences(tmp_path / "s.fa")
    assert alphabet == "ACGT"
    assert text == {"a": "ACGT", "long name": "TTTTGA"}


def test_sequence_errors(tmp_path):
    p = tmp_path / "bad.fa"
    p.write_text("ACGT\n")
    with pytest.raises(FormatError):
        read_sequences(p)
    p.write_text(">a\nACGN\n")
    with pytest.raises(FormatError):
        read_sequences(p)
    p.write_text(">a\n01\n>a\n10\n")
    with pytest.raises(FormatError):
        read_sequences(p)


def test_ancestry_round_trip(tmp_path):
    labels = {"a": np.array([1, 2, 1 << 41]), "b": np.array([3])}
    write_ancestry(tmp_path / "anc.tsv", labels)
    back = read_ancestry(tmp_path / "anc.tsv")
    assert all(np.array_equal(back[k], labels[k]) for k in labels)


def test_matrix_round_trip_is_exact():
    v = np.array([[0, 0.1, math.inf], [0.1, 0, 1 / 3], [math.inf, 1 / 3, 0]])
    D = DistanceMatrix(["x", "y", "z"], v, {"variant": "clock", "k0": 100})
    text = format_matrix(D)
    back = parse_matrix(text)
    assert back.names == D.names and np.array_equal(back.values, D.values)
    assert back.meta == {"variant": "clock", "k0": 100}
    assert format_matrix(back) == text


def test_matrix_malformed():
    with pytest.raises(FormatError):
        parse_matrix("a\tb\na\nb\t1\nc\t2\n")
    with pytest.raises(FormatError):
        parse_matrix("")


def test_config(tmp_path):
    p = tmp_path / "c.cfg"
    p.write_text("# comment\nk-r = 1000, 10000  # trailing\nn=4\n\n")
    assert read_config(p) == {"k_r": "1000, 10000", "n": "4"}
    p.write_text("novalue\n")
    with pytest.raises(FormatError):
        read_config(p)
