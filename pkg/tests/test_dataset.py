import json
import struct
import zlib
from pathlib import Path

import jsonschema
import numpy as np
import pytest

from hqradar import dataset as D
from hqradar.errors import ChecksumError, MagicError, ParameterError, TruncationError, VersionError
from hqradar.radar import RadarConfig

SHORT = RadarConfig(duration=0.0064)  # 64 samples -> 7 frames keeps these tests fast


def small(task="detection", counts=3, seed=0, **kw):
    return D.generate(task, -5.0, counts, seed=seed, radar=SHORT, **kw)


def test_builtin_profiles_table():
    rows = [(p.name, p.n_blades, p.l1, p.l2, p.f_rot) for p in D.builtin_profiles()]
    assert rows == [
        ("DJI Mavic Air 2", 2, 0.005, 0.070, 91.66),
        ("DJI Mavic Mini 2", 2, 0.005, 0.035, 160.0),
        ("DJI Matrice 300 RTK", 2, 0.050, 0.2665, 70.0),
        ("DJI Phantom 4", 2, 0.006, 0.050, 116.0),
        ("Parrot Disco", 2, 0.010, 0.104, 40.0),
    ]
    assert D.builtin_profiles()[4].f_rot == 40.0


def test_label_maps():
    assert D.class_names("detection") == ("noise", "drone")
    names = D.class_names("classification")
    assert names[0] == "DJI Matrice 300 RTK" and names[4] == "Parrot Disco"
    for p in D.profiles_by_label():
        assert names[p.label].startswith(p.name[:14])


def test_counts_and_shapes():
    data, man = small("classification", {"DJI Matrice 300 RTK": 2, "DJI Mavic Air 2": 1, "DJI Mavic Mini": 3,
                                         "DJI Phantom 4": 1, "Parrot Disco": 2})
    assert data.x.shape == (9, 2, 16, 7) and data.x.dtype == np.float32
    assert np.bincount(data.y, minlength=5).tolist() == [2, 1, 3, 1, 2]
    assert man.n_examples == 9 and man.example_shape == (2, 16, 7)


def test_reference_example_shape():
    data, _ = D.generate("detection", -5.0, 1)
    assert data.x.shape == (2, 2, 16, 249)


def test_split_counts():
    assert D.split_counts(2000, "detection") == {"noise": 1000, "drone": 1000}
    c = D.split_counts(1001, "classification")
    assert sum(c.values()) == 1001 and max(c.values()) - min(c.values()) <= 1


def test_bad_counts():
    with pytest.raises(ParameterError):
        small(counts={"noise": 0, "drone": 3})
    with pytest.raises(ParameterError):
        small(counts={"cat": 3})
    with pytest.raises(ParameterError):
        D.generate("tracking", 0.0, 1)


def test_determinism_and_seed_sensitivity():
    a, ma = small(seed=5)
    b, mb = small(seed=5)
    c, _ = small(seed=6)
    assert a == b and ma == mb
    assert D.to_bytes(a, ma) == D.to_bytes(b, mb)
    assert not np.array_equal(a.x, c.x)


def test_threads_do_not_change_output():
    a, _ = small(counts=4, seed=1)
    b, _ = small(counts=4, seed=1, threads=3)
    assert a == b


def test_standardization_statistics():
    data, man = small(counts=10)
    x = data.x.astype(np.float64)
    np.testing.assert_allclose(x.mean(axis=(0, 2, 3)), 0, atol=1e-5)
    np.testing.assert_allclose(x.std(axis=(0, 2, 3)), 1, atol=1e-4)
    assert len(man.standardization["mean"]) == 2


def test_supplied_standardization_is_used_verbatim():
    _, train_man = small(counts=10)
    test, test_man = small(counts=10, seed=9, standardization=train_man.standardization)
    assert test_man.standardization == train_man.standardization
    assert not np.allclose(test.x.astype(np.float64).mean(axis=(0, 2, 3)), 0, atol=1e-7)


def test_noise_examples_differ_in_power_from_drones_before_standardization():
    ident = {"mean": [0.0, 0.0], "std": [1.0, 1.0]}
    data, _ = D.generate("detection", 20.0, 20, seed=0, radar=SHORT, standardization=ident)
    p = (data.x.astype(np.float64) ** 2).mean(axis=(1, 2, 3))
    # at 20 dB the noise class carries ~1% of unit power
    assert p[data.y == 0].mean() < 0.1 * p[data.y == 1].mean()


def test_roundtrip_bytes_and_file(tmp_path):
    data, man = small("classification", 2)
    blob = D.to_bytes(data, man)
    assert blob[:4] == b"MDQD"
    back, man2 = D.from_bytes(blob)
    assert back == data and man2 == man
    path = tmp_path / "d.mdqd"
    D.save(data, man, path)
    assert path.read_bytes() == blob
    loaded, _ = D.load(path)
    assert loaded == data


def test_manifest_is_json_with_declared_fields():
    data, man = small()
    blob = D.to_bytes(data, man)
    n = int.from_bytes(blob[8:12], "little")
    doc = json.loads(blob[12 : 12 + n])
    schema = json.loads((Path(__file__).parents[1] / "docs" / "manifest_schema.json").read_text())
    jsonschema.validate(doc, schema)


def test_corrupt_files_are_rejected():
    data, man = small()
    blob = D.to_bytes(data, man)
    with pytest.raises(MagicError):
        D.from_bytes(b"NOPE" + blob[4:])
    with pytest.raises(VersionError):
        D.from_bytes(blob[:4] + (9).to_bytes(4, "little") + blob[8:])
    with pytest.raises(TruncationError):
        D.from_bytes(blob[:-100])
    with pytest.raises(ChecksumError):
        D.from_bytes(blob + b"\0")
    flipped = bytearray(blob)
    flipped[-50] ^= 0xFF
    with pytest.raises(ChecksumError):
        D.from_bytes(bytes(flipped))


def test_label_tampering_detected_even_with_fixed_crc():
    data, man = small(counts=2)
    blob = bytearray(D.to_bytes(data, man))
    n = int.from_bytes(blob[8:12], "little")
    first_label = 12 + n
    blob[first_label] ^= 1
    body = bytes(blob[:-4])
    with pytest.raises(ChecksumError):
        D.from_bytes(body + struct.pack("<I", zlib.crc32(body)))


def test_iteration_yields_labeled_spectrograms():
    data, _ = small(counts=2)
    items = list(data)
    assert len(items) == 4
    assert items[0].spectrogram.data.shape == (2, 16, 7)
    assert {e.label for e in items} == {0, 1}


def test_fingerprint_changes_with_content():
    a, _ = small(seed=1)
    b, _ = small(seed=2)
    assert D.fingerprint(a) == D.fingerprint(a) != D.fingerprint(b)


def test_sampler_bounds_and_roundtrip():
    s = D.GeometrySampler()
    rng = np.random.default_rng(0)
    thetas = [s.sample(rng).theta for _ in range(500)]
    assert min(abs(t) for t in thetas) >= 0.05 and max(abs(t) for t in thetas) <= 1.3
    assert any(t < 0 for t in thetas) and any(t > 0 for t in thetas)
    assert D.GeometrySampler.from_dict(s.to_dict()) == s
    with pytest.raises(ParameterError):
        D.GeometrySampler(theta_range=(0.0, 1.0))
    with pytest.raises(ParameterError):
        D.GeometrySampler(phi_p_range=(0.3, 0.1))


def test_label_integrity_against_per_example_regeneration():
    ident = {"mean": [0.0, 0.0], "std": [1.0, 1.0]}
    data, man = D.generate("classification", 0.0, 2, seed=4, radar=SHORT, standardization=ident)
    labels = np.concatenate([np.full(c, i) for i, c in enumerate(man.counts.values())])
    by_digest = {}
    for i, label in enumerate(labels):
        raw = D._raw_example("classification", int(label), i, 4, 0.0, D.GeometrySampler(), SHORT, 16, 8)
        packed = np.stack([raw.real, raw.imag]).astype(np.float32)
        by_digest[packed.tobytes()] = int(label)
    back, _ = D.from_bytes(D.to_bytes(data, man))
    for ex in back:
        assert by_digest[ex.spectrogram.data.astype(np.float32).tobytes()] == ex.label


def test_single_byte_truncation_and_manifest_version():
    data, man = small()
    with pytest.raises(TruncationError):
        D.from_bytes(D.to_bytes(data, man)[:-1])
    man.format_version += 1
    with pytest.raises(VersionError):
        D.from_bytes(D.to_bytes(data, man))
