import operator

from chemdist.core.runner import (
    CsvSink,
    format_value,
    map_replicates,
    read_csv_rows,
    replicate_seed,
    write_table,
)
from chemdist.core.seeding import mix_seed


def test_replicate_seed():
    assert replicate_seed(7, 3) == mix_seed(7, 3)
    assert replicate_seed(7, 3) == replicate_seed(7, 3)
    assert replicate_seed(7, 3) != replicate_seed(7, 4)
    assert replicate_seed(7, 3, 1) != replicate_seed(7, 3)


def test_map_replicates_in_order():
    assert list(map_replicates(operator.neg, range(5), workers=1)) == [0, -1, -2, -3, -4]
    assert list(map_replicates(operator.neg, range(40), workers=2)) == [-i for i in range(40)]
    assert list(map_replicates(operator.neg, [])) == []


def test_format_value():
    assert format_value(0.1) == "0.10000000000000001"
    assert format_value(True) == "1"
    assert format_value(False) == "0"
    assert format_value(None) == ""
    assert format_value(3) == "3"


def test_sink_writes_header_and_rows(tmp_path):
    path = str(tmp_path / "out" / "rows.csv")
    with CsvSink(path, ["replicate", "value"], buffer_size=2) as sink:
        for i in range(3):
            sink.write({"replicate": i, "value": i / 2})
    lines = open(path).read().splitlines()
    assert lines[0].startswith("# generated ")
    assert lines[1] == "replicate,value"
    assert lines[2:] == ["0,0", "1,0.5", "2,1"]
    rows = read_csv_rows(path)
    assert rows[1] == {"replicate": "1", "value": "0.5"}


def test_sink_resume_keeps_rows(tmp_path):
    path = str(tmp_path / "rows.csv")
    with CsvSink(path, ["m", "replicate", "found"], key_fields=("m", "replicate")) as sink:
        sink.write({"m": 8, "replicate": 0, "found": True})
        sink.write({"m": 8, "replicate": 1, "found": False})
    sink = CsvSink(path, ["m", "replicate", "found"], resume=True, key_fields=("m", "replicate"))
    assert sink.completed == {("8", "0"), ("8", "1")}
    assert sink.key({"m": 8, "replicate": 1}) in sink.completed
    assert len(sink.existing_rows()) == 2

    CsvSink(path, ["m", "replicate", "found"])
    assert read_csv_rows(path) == []


def test_write_table(tmp_path):
    path = write_table(str(tmp_path / "summary.csv"), ["a", "b"], [{"a": 1, "b": None}])
    assert read_csv_rows(path) == [{"a": "1", "b": ""}]
