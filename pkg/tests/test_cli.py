import os
import subprocess
import sys

import numpy as np
import pytest

from towersite import CumulativeShed, SiteParams, Viewshed, site
from towersite.cli import RunConfig, main, power_schedule, render_cumshed, render_snapshots, run_pipeline


def read_pgm(path):
    raw = open(path, "rb").read()
    magic, dims, maxval, payload = raw.split(b"\n", 3)
    w, h = map(int, dims.split())
    assert magic == b"P5" and maxval == b"255"
    return np.frombuffer(payload, np.uint8).reshape(h, w)


def test_pgm_empty_and_full(tmp_path):
    render_cumshed(CumulativeShed(2, 2), tmp_path / "e.pgm")
    assert (tmp_path / "e.pgm").read_bytes() == b"P5\n2 2\n255\n\x00\x00\x00\x00"
    render_cumshed(CumulativeShed.from_mask(np.ones((2, 2), bool)), tmp_path / "f.pgm")
    assert (tmp_path / "f.pgm").read_bytes().endswith(b"\xff" * 4)


def test_pgm_checkerboard(tmp_path):
    words = np.array([0b1010010110100101], dtype=np.uint64)  # rows alternate phase
    cum = CumulativeShed(4, 4, words)
    render_cumshed(cum, tmp_path / "c.pgm")
    img = read_pgm(tmp_path / "c.pgm")
    want = np.array([[255, 0, 255, 0], [0, 255, 0, 255], [255, 0, 255, 0], [0, 255, 0, 255]])
    assert np.array_equal(img, want)


def test_pgm_non_square_orientation(tmp_path):
    m = np.zeros((3, 5), bool)
    m[0, 4] = True
    render_cumshed(CumulativeShed.from_mask(m), tmp_path / "o.pgm")
    img = read_pgm(tmp_path / "o.pgm")
    assert img.shape == (3, 5) and img[0, 4] == 255 and img.sum() == 255


def pair():
    a = Viewshed.from_mask((5, 5), 50, 0, 0, np.ones((10, 10), bool))
    b = Viewshed.from_mask((30, 30), 50, 25, 25, np.ones((6, 10), bool))
    res = site([a, b], 50, 50, SiteParams(roi=50, target_coverage=1.0))
    return [a, b], res


def test_snapshots_grow(tmp_path):
    sheds, res = pair()
    paths = render_snapshots(res, sheds, (50, 50), [1, 2], tmp_path)
    one, two = (read_pgm(p) for p in paths)
    assert ((one == 255) <= (two == 255)).all()
    assert (one == 255).sum() == 100
    assert (two == 255).sum() == 160


def test_snapshot_clamp_warns(tmp_path):
    sheds, res = pair()
    with pytest.warns(UserWarning):
        paths = render_snapshots(res, sheds, (50, 50), [1, 2, 4], tmp_path)
    assert open(paths[1], "rb").read() == open(paths[2], "rb").read()


def test_snapshot_schedule_must_ascend(tmp_path):
    sheds, res = pair()
    with pytest.raises(ValueError):
        render_snapshots(res, sheds, (50, 50), [2, 1], tmp_path)


def test_power_schedule():
    assert power_schedule(683) == [1, 2, 4, 8, 16, 32, 64, 128, 256, 512, 683]
    assert power_schedule(4) == [1, 2, 4]
    assert power_schedule(0) == []


def small_cfg(out, **kw):
    params = kw.pop("params", SiteParams(roi=9))
    return RunConfig(params=params, synth=True, nrows=90, ncols=70, seed=3, out_dir=str(out), **kw)


def test_pipeline_outputs(tmp_path):
    rep = run_pipeline(small_cfg(tmp_path, dump_vix=True, dump_candidates=True, dump_viewsheds=True))
    for name in ("sites.csv", "report.txt", "cumshed.pgm", "vix.u8", "candidates.csv", "viewsheds.bin"):
        assert (tmp_path / name).exists(), name
    assert set(rep.timings) == {"read", "vix", "findmax", "viewshed", "site"}
    assert all(t >= 0 for t in rep.timings.values())
    assert rep.total_time >= sum(rep.timings.values()) * 0.999
    text = (tmp_path / "report.txt").read_text()
    assert "candidates: 6300" in text and "time.viewshed: " in text
    assert rep.candidates == 90 * 70  # 3x3 blocks hold fewer than 20 posts
    lines = (tmp_path / "sites.csv").read_text().splitlines()
    assert lines[0] == "rank,row,col,marginal_gain,cumulative_coverage"
    assert len(lines) - 1 == len(rep.result.selected)
    assert os.path.getsize(tmp_path / "vix.u8") == 90 * 70
    snaps = sorted(os.listdir(tmp_path / "snapshots"))
    assert snaps[-1] == f"cumshed_{len(rep.result.selected):06d}.pgm"


def test_flat_run_stops_at_target(tmp_path):
    flat = tmp_path / "flat.bin"
    np.full(60 * 60, 100, dtype="<i2").tofile(flat)
    cfg = RunConfig(params=SiteParams(roi=12), input=str(flat), nrows=60, ncols=60,
                    out_dir=str(tmp_path / "o"), images=False)
    res = run_pipeline(cfg).result
    covs = [s.cumulative_coverage for s in res.selected]
    assert covs[-1] >= 0.95 and all(c < 0.95 for c in covs[:-1])
    assert res.stop_reason == "target-reached"


def test_main_exit_codes(tmp_path, capsys):
    assert main(["--synth", "--nrows", "40", "--ncols", "40", "--roi", "6",
                 "--out-dir", str(tmp_path / "ok"), "--no-images"]) == 0
    assert "stop_reason" in capsys.readouterr().out
    assert main(["--input", str(tmp_path / "missing.bin"), "--nrows", "4", "--ncols", "4",
                 "--roi", "3", "--out-dir", str(tmp_path / "bad")]) == 1
    assert "[read]" in capsys.readouterr().err
    assert main(["--synth", "--nrows", "40", "--ncols", "40", "--roi", "6",
                 "--coverage", "1.5"]) == 2


def test_ascii_input(tmp_path):
    p = tmp_path / "t.asc"
    rows = "\n".join(" ".join("5" for _ in range(12)) for _ in range(10))
    p.write_text(f"nrows 10 ncols 12\n{rows}\n")
    assert main(["--input", str(p), "--roi", "4", "--out-dir", str(tmp_path / "o"),
                 "--snapshots", "1,2"]) == 0
    assert sorted(os.listdir(tmp_path / "o" / "snapshots")) == ["cumshed_000001.pgm",
                                                                 "cumshed_000002.pgm"]


def test_rerun_is_byte_identical(tmp_path):
    a, b = tmp_path / "a", tmp_path / "b"
    ra = run_pipeline(small_cfg(a, threads=1))
    rb = run_pipeline(small_cfg(b, threads=3))
    for name in ["sites.csv", "cumshed.pgm", *(f"snapshots/{f}" for f in os.listdir(a / "snapshots"))]:
        assert (a / name).read_bytes() == (b / name).read_bytes(), name
    assert ra.summary_lines() == rb.summary_lines()


def test_module_entry_point(tmp_path):
    out = subprocess.run([sys.executable, "-m", "towersite", "--synth", "--nrows", "30", "--ncols",
                          "30", "--roi", "5", "--out-dir", str(tmp_path), "--no-images"],
                         capture_output=True, text=True)
    assert out.returncode == 0 and "selected: " in out.stdout
