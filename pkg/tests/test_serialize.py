import json
from dataclasses import dataclass

import numpy as np

from halfscatter.serialize import dumps, rows_to_csv, to_jsonable


@dataclass
class _Record:
    value: complex
    _hidden: int = 0


def test_nested_conversion():
    obj = {"a": np.array([1 + 1j, 2.0]), (1, 2): [np.float64(np.inf), np.int64(3), np.bool_(True)], "r": _Record(1j)}
    out = to_jsonable(obj)
    assert out["a"] == [[1.0, 1.0], [2.0, 0.0]]
    assert out["1,2"] == ["inf", 3, True]
    assert out["r"] == {"value": [0.0, 1.0]}
    json.loads(dumps(obj))


def test_csv_cells():
    text = rows_to_csv([("k", "s"), (1, 0.5 - 2j), (2, [1.0, 2.0])])
    lines = text.splitlines()
    assert lines[0] == "k,s"
    assert lines[1] == "1,0.5-2j"
    assert lines[2] == "2,1 2"
