import json

import numpy as np
import pytest

from core.container import decode_array, encode_array, file_digest, read_container, write_container
from core.errors import FormatError


MAGIC = "PN2V-TEST"


class TestContainerRoundTrip:

    def test_header_and_payload_survive(self, tmp_path):
        path = tmp_path / "a.bin"
        values = np.arange(6, dtype=np.float32).reshape(2, 3)
        write_container(path, MAGIC, {"version": 1, "shape": [2, 3]}, encode_array(values, "f4"))

        header, payload = read_container(path, MAGIC, 1)
        assert header["shape"] == [2, 3]
        assert header["byte_order"] == "little"
        np.testing.assert_array_equal(decode_array(payload, "f4", (2, 3), "a"), values)

    def test_header_line_is_sorted_json(self, tmp_path):
        path = tmp_path / "a.bin"
        write_container(path, MAGIC, {"version": 1, "b": 2, "a": 1}, b"")
        line = path.read_bytes().split(b"\n")[1].decode()
        assert list(json.loads(line)) == sorted(json.loads(line))

    def test_digest_tracks_content(self, tmp_path):
        a, b = tmp_path / "a.bin", tmp_path / "b.bin"
        write_container(a, MAGIC, {"version": 1}, b"\x00\x01")
        write_container(b, MAGIC, {"version": 1}, b"\x00\x02")
        assert file_digest(a) == file_digest(a)
        assert file_digest(a) != file_digest(b)

    def test_unwritable_location(self, tmp_path):
        blocker = tmp_path / "file.txt"
        blocker.write_text("x")
        with pytest.raises(FormatError, match="cannot write"):
            write_container(blocker / "sub" / "a.bin", MAGIC, {"version": 1}, b"")


class TestContainerCorruption:

    @pytest.fixture
    def stored(self, tmp_path):
        path = tmp_path / "c.bin"
        write_container(path, MAGIC, {"version": 1}, encode_array(np.ones(8), "f8"))
        return path

    def test_missing_file(self, tmp_path):
        with pytest.raises(FormatError, match="cannot read"):
            read_container(tmp_path / "nope.bin", MAGIC, 1)

    def test_wrong_magic(self, stored):
        with pytest.raises(FormatError, match="expected"):
            read_container(stored, "PN2V-OTHER", 1)

    def test_version_mismatch(self, stored):
        with pytest.raises(FormatError, match="version mismatch"):
            read_container(stored, MAGIC, 2)

    def test_truncated_payload(self, stored):
        stored.write_bytes(stored.read_bytes()[:-5])
        with pytest.raises(FormatError, match="truncated payload"):
            read_container(stored, MAGIC, 1)

    def test_truncated_header(self, stored):
        stored.write_bytes(stored.read_bytes()[:12])
        with pytest.raises(FormatError, match="truncated header"):
            read_container(stored, MAGIC, 1)

    def test_corrupt_header(self, stored):
        raw = stored.read_bytes().split(b"\n", 2)
        stored.write_bytes(raw[0] + b"\n{not json\n" + raw[2])
        with pytest.raises(FormatError, match="corrupt header"):
            read_container(stored, MAGIC, 1)

    def test_decode_length_checked(self):
        with pytest.raises(FormatError):
            decode_array(b"\x00" * 7, "f8", (1,), "x")
