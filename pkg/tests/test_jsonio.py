import math

import numpy as np

from critlab.jsonio import document, dumps, format_float, loads, to_csv


def test_float_format_round_trips():
    for x in (0.1, 1 / 3, 1e-300, -2.5e17, math.pi):
        assert float(format_float(x)) == x


def test_non_finite_as_strings():
    doc = loads(dumps({"a": math.inf, "b": [1.0, -math.inf, math.nan]}))
    assert doc == {"a": "inf", "b": [1.0, "-inf", "nan"]}


def test_numpy_values_and_nesting():
    obj = {"v": np.array([1.5, 2.0]), "n": np.int64(3), "t": (1, 2), "x": None, "ok": True,
           "rows": [{"k": np.float64(0.25)}]}
    back = loads(dumps(obj))
    assert back == {"v": [1.5, 2.0], "n": 3, "t": [1, 2], "x": None, "ok": True,
                    "rows": [{"k": 0.25}]}


def test_document_envelope():
    d = document("green", {"a": 1}, {"b": 2})
    assert d["schema"] == "critlab/1" and d["command"] == "green"


def test_csv():
    assert to_csv(["a", "b"], [[1, 0.1], [2, math.inf]]) == "a,b\n1,0.10000000000000001\n2,inf\n"
