import json

import numpy as np
import pytest
from click.testing import CliRunner

from noise2filter.cli import main
from noise2filter.io import load_dataset, load_model


@pytest.fixture(scope="module")
def runner():
    return CliRunner()


@pytest.fixture(scope="module")
def clean_ds(runner, tmp_path_factory):
    out = tmp_path_factory.mktemp("cli") / "clean"
    r = runner.invoke(
        main,
        [
            "phantom", "gen", str(out),
            "--size", "32", "--angles", "48", "--balls", "60", "--seed", "3",
        ],
    )
    assert r.exit_code == 0, r.output
    return out


@pytest.fixture(scope="module")
def noisy_ds(runner, clean_ds, tmp_path_factory):
    out = tmp_path_factory.mktemp("cli") / "noisy"
    r = runner.invoke(
        main,
        ["noise", "apply", str(clean_ds), str(out), "--i0", "1000", "--seed", "7"],
    )
    assert r.exit_code == 0, r.output
    return out


@pytest.fixture(scope="module")
def model_file(runner, noisy_ds, tmp_path_factory):
    out = tmp_path_factory.mktemp("cli") / "model.json"
    r = runner.invoke(
        main,
        [
            "train", "n2f", str(noisy_ds), str(out),
            "--splits", "3", "--ntrain", "6000", "--seed", "0",
        ],
    )
    assert r.exit_code == 0, r.output
    return out


class TestPhantomGen:
    def test_writes_loadable_dataset(self, clean_ds):
        s, manifest = load_dataset(clean_ds)
        assert s.data.shape == (48, 32, 48)
        assert manifest.phantom["n_balls"] == 60
        assert manifest.phantom["seed"] == 3

    def test_deterministic(self, runner, clean_ds, tmp_path):
        out = tmp_path / "again"
        r = runner.invoke(
            main,
            [
                "phantom", "gen", str(out),
                "--size", "32", "--angles", "48", "--balls", "60", "--seed", "3",
            ],
        )
        assert r.exit_code == 0
        a, _ = load_dataset(clean_ds)
        b, _ = load_dataset(out)
        assert np.array_equal(a.data, b.data)

    def test_cor_shift_recorded(self, runner, tmp_path):
        out = tmp_path / "shifted"
        r = runner.invoke(
            main,
            [
                "phantom", "gen", str(out),
                "--size", "16", "--angles", "8", "--balls", "0",
                "--cor-shift", "2.0",
            ],
        )
        assert r.exit_code == 0, r.output
        s, _ = load_dataset(out)
        assert s.geometry.cor_shift == 2.0


class TestNoiseApply:
    def test_changes_data_preserves_manifest(self, clean_ds, noisy_ds):
        clean, cm = load_dataset(clean_ds)
        noisy, nm = load_dataset(noisy_ds)
        assert not np.array_equal(clean.data, noisy.data)
        assert nm.phantom == cm.phantom
        assert nm.noise == {"i0": 1000.0, "seed": 7}

    def test_missing_dataset_fails(self, runner, tmp_path):
        r = runner.invoke(
            main, ["noise", "apply", str(tmp_path / "nope"), "x", "--i0", "100"]
        )
        assert r.exit_code != 0


class TestTrain:
    def test_n2f_model_loadable(self, model_file):
        model = load_model(model_file)
        assert model.metadata["mode"] == "self-supervised"
        assert model.n_splits == 3

    def test_nnfbp_needs_phantom(self, runner, tmp_path, noisy_ds):
        # Strip the phantom from the manifest: supervised training must fail.
        import shutil

        bare = tmp_path / "bare"
        shutil.copytree(noisy_ds, bare)
        raw = json.loads((bare / "manifest.json").read_text())
        raw["phantom"] = None
        (bare / "manifest.json").write_text(json.dumps(raw))
        r = runner.invoke(
            main, ["train", "nnfbp", str(bare), str(tmp_path / "m.json")]
        )
        assert r.exit_code == 1
        assert "error:" in r.output

    def test_nnfbp_trains(self, runner, noisy_ds, tmp_path):
        out = tmp_path / "sup.json"
        r = runner.invoke(
            main,
            ["train", "nnfbp", str(noisy_ds), str(out), "--ntrain", "2200"],
        )
        assert r.exit_code == 0, r.output
        assert load_model(out).metadata["mode"] == "supervised"

    def test_oversampling_reports_error(self, runner, noisy_ds, tmp_path):
        r = runner.invoke(
            main,
            [
                "train", "n2f", str(noisy_ds), str(tmp_path / "m.json"),
                "--ntrain", "10000000",
            ],
        )
        assert r.exit_code == 1
        assert "error:" in r.output


class TestRecon:
    @pytest.mark.parametrize("method", ["fbp", "fbp-g", "fbp-sc"])
    def test_baseline_methods(self, runner, noisy_ds, tmp_path, method):
        out = tmp_path / f"slice_{method}"
        r = runner.invoke(
            main, ["recon", str(noisy_ds), str(out), "--method", method]
        )
        assert r.exit_code == 0, r.output
        raw = np.frombuffer(out.with_suffix(".raw").read_bytes(), dtype="<f4")
        assert raw.shape == (32 * 32,)
        assert out.with_suffix(".png").exists()

    def test_n2f_method(self, runner, noisy_ds, model_file, tmp_path):
        out = tmp_path / "slice_n2f"
        r = runner.invoke(
            main,
            [
                "recon", str(noisy_ds), str(out),
                "--method", "n2f", "--model", str(model_file),
                "--slice", "frontal",
            ],
        )
        assert r.exit_code == 0, r.output
        assert out.with_suffix(".png").exists()

    def test_n2f_without_model_fails(self, runner, noisy_ds, tmp_path):
        r = runner.invoke(
            main,
            ["recon", str(noisy_ds), str(tmp_path / "x"), "--method", "n2f"],
        )
        assert r.exit_code == 1
        assert "error:" in r.output

    def test_custom_orientation(self, runner, noisy_ds, tmp_path):
        spec = {
            "origin": [0, 0, 0],
            "u": [1, 0, 0],
            "v": [0, 0, 1],
            "width": 20,
            "height": 24,
        }
        out = tmp_path / "custom"
        r = runner.invoke(
            main,
            [
                "recon", str(noisy_ds), str(out),
                "--slice", "custom", "--orientation-json", json.dumps(spec),
            ],
        )
        assert r.exit_code == 0, r.output
        meta = json.loads(out.with_suffix(".json").read_text())
        assert meta["shape"] == [24, 20]

    def test_custom_without_json_fails(self, runner, noisy_ds, tmp_path):
        r = runner.invoke(
            main,
            ["recon", str(noisy_ds), str(tmp_path / "x"), "--slice", "custom"],
        )
        assert r.exit_code == 1

    def test_matches_library_reconstruction(self, runner, noisy_ds, tmp_path):
        from noise2filter.fbp import fbp_slice
        from noise2filter.filters import ram_lak
        from noise2filter.geometry import ortho_slices

        out = tmp_path / "check"
        r = runner.invoke(main, ["recon", str(noisy_ds), str(out)])
        assert r.exit_code == 0
        raw = np.frombuffer(out.with_suffix(".raw").read_bytes(), dtype="<f4")
        s, _ = load_dataset(noisy_ds)
        o = ortho_slices((32, 32, 32))[0]
        want = fbp_slice(s, ram_lak(47), o).data
        assert np.allclose(raw.reshape(32, 32), want, atol=1e-5)


class TestBench:
    def test_timing_report(self, runner):
        r = runner.invoke(
            main,
            [
                "bench", "timing",
                "--size", "32", "--angles", "48", "--balls", "60",
                "--requests", "5",
            ],
        )
        assert r.exit_code == 0, r.output
        assert "slice ratio" in r.output

    def test_voxels_csv(self, runner, tmp_path):
        out = tmp_path / "voxels.csv"
        r = runner.invoke(
            main,
            [
                "bench", "voxels", str(out),
                "--size", "32", "--angles", "48", "--balls", "60",
                "--ntrain-list", "3000,6000", "--trials", "1",
            ],
        )
        assert r.exit_code == 0, r.output
        lines = out.read_text().strip().splitlines()
        assert len(lines) == 3  # header + two sweep points
        assert "psnr" in lines[0]


class TestHelp:
    def test_top_level_help(self, runner):
        r = runner.invoke(main, ["--help"])
        assert r.exit_code == 0
        for cmd in ("phantom", "noise", "train", "recon", "bench", "serve"):
            assert cmd in r.output
