"""End-to-end command-line behavior via main() with real files."""

import json

import pytest

from heatdec.cli import main


def run_cli(capsys, *argv):
    code = main(list(argv))
    captured = capsys.readouterr()
    return code, captured.out, captured.err


class TestGen:
    def test_writes_manifest_and_maps(self, tmp_path, capsys):
        out_dir = tmp_path / "corpus"
        code, out, err = run_cli(
            capsys, "--seed", "3", "gen", str(out_dir),
            "--count", "5", "--image-size", "128", "--resolution", "16",
        )
        assert code == 0, err
        info = json.loads(out)
        assert info["items"] == 5
        manifest = json.loads((out_dir / "manifest.json").read_text())
        assert len(manifest["items"]) == 5
        assert manifest["cfg"]["lambda"] == 8
        assert (out_dir / manifest["items"][0]["files"][0]).exists()

    def test_indivisible_resolution_fails(self, tmp_path, capsys):
        code, _, err = run_cli(
            capsys, "gen", str(tmp_path / "x"), "--image-size", "100", "--resolution", "16"
        )
        assert code == 2
        assert "divisible" in err


class TestDecode:
    @pytest.fixture()
    def corpus_dir(self, tmp_path, capsys):
        out_dir = tmp_path / "corpus"
        code, _, _ = run_cli(
            capsys, "--seed", "5", "gen", str(out_dir),
            "--count", "3", "--image-size", "256", "--resolution", "16",
        )
        assert code == 0
        return out_dir

    def test_every_decoder_produces_json(self, corpus_dir, capsys):
        target = next(corpus_dir.glob("*.hmap"))
        for decoder in ("onehot", "twohot", "taylor", "lsq", "igno", "pppsc"):
            code, out, err = run_cli(capsys, "decode", str(target), "--decoder", decoder)
            assert code == 0, err
            payload = json.loads(out)
            assert payload["decoder"] == decoder
            assert "u" in payload and "v" in payload

    def test_objective_and_iterations_fields(self, corpus_dir, capsys):
        target = next(corpus_dir.glob("*.hmap"))
        _, out, _ = run_cli(capsys, "decode", str(target), "--decoder", "igno")
        payload = json.loads(out)
        assert "objective" in payload and "iterations" in payload

    def test_out_flag_writes_file(self, corpus_dir, tmp_path, capsys):
        target = next(corpus_dir.glob("*.hmap"))
        dest = tmp_path / "landmark.json"
        code, out, _ = run_cli(capsys, "--out", str(dest), "decode", str(target))
        assert code == 0
        assert out == ""
        assert json.loads(dest.read_text())["decoder"] == "pppsc"

    def test_missing_file_exits_nonzero(self, tmp_path, capsys):
        code, _, err = run_cli(capsys, "decode", str(tmp_path / "nope.hmap"))
        assert code == 2
        assert err


class TestSweepAndBench:
    def write_spec(self, tmp_path, **overrides):
        spec = {
            "resolutions": [[8, 8], [16, 16]],
            "decoders": ["onehot", "pppsc"],
            "corpus": {"count": 40, "noise": {"kind": "none"}, "seed": 9},
            "decode_cfg": {"k": 10, "tau": 10, "window": 1.0, "sigma": 2.0},
            "repetitions": 3,
            "image_size": 256,
        }
        spec.update(overrides)
        path = tmp_path / "spec.json"
        path.write_text(json.dumps(spec))
        return path

    def test_sweep_report_json(self, tmp_path, capsys):
        spec = self.write_spec(tmp_path)
        code, out, err = run_cli(capsys, "--config", str(spec), "sweep")
        assert code == 0, err
        report = json.loads(out)
        assert len(report["rows"]) == 4
        assert report["environment"]["normalizer"] == "image_width"

    def test_sweep_csv_format(self, tmp_path, capsys):
        spec = self.write_spec(tmp_path, resolutions=[[8, 8]])
        code, out, _ = run_cli(capsys, "--config", str(spec), "--format", "csv", "sweep")
        assert code == 0
        lines = out.strip().split("\n")
        assert lines[0].startswith("resolution,decoder")
        assert len(lines) == 3

    def test_bench_report(self, tmp_path, capsys):
        spec = self.write_spec(
            tmp_path,
            resolutions=[[16, 16]],
            decoders=["onehot", "pppsc", "igno"],
            corpus={"count": 60, "noise": {"kind": "additive_gaussian", "amplitude": 0.02, "seed": 9}, "seed": 9},
        )
        code, out, err = run_cli(capsys, "--config", str(spec), "bench")
        assert code == 0, err
        report = json.loads(out)
        assert {r["decoder"] for r in report["rows"]} == {"onehot", "pppsc", "igno"}
        assert all(r["throughput"] > 0 for r in report["rows"])

    def test_malformed_config_fails(self, tmp_path, capsys):
        path = tmp_path / "spec.json"
        path.write_text(json.dumps({"decoders": ["bogus"]}))
        code, _, err = run_cli(capsys, "--config", str(path), "sweep")
        assert code == 2
        assert "bogus" in err


class TestLosses:
    def test_corpus_pair_losses(self, tmp_path, capsys):
        clean = tmp_path / "clean"
        noisy = tmp_path / "noisy"
        for target, noise in ((clean, "none"), (noisy, "additive_gaussian")):
            code, _, _ = run_cli(
                capsys, "--seed", "11", "gen", str(target),
                "--count", "4", "--image-size", "128", "--resolution", "16",
                "--noise", noise, "--amplitude", "0.05",
            )
            assert code == 0
        code, out, err = run_cli(
            capsys, "losses", str(noisy), str(clean), "--k", "10", "--weight", "6",
        )
        assert code == 0, err
        payload = json.loads(out)
        assert payload["ma"] > 0
        assert payload["combined"]["value"] == pytest.approx(
            payload["mse"] + 6.0 * payload["ma"], rel=1e-12
        )

    def test_identical_corpora_zero_loss(self, tmp_path, capsys):
        corpus = tmp_path / "c"
        run_cli(capsys, "--seed", "13", "gen", str(corpus), "--count", "3",
                "--image-size", "128", "--resolution", "16")
        code, out, _ = run_cli(capsys, "losses", str(corpus), str(corpus))
        assert code == 0
        payload = json.loads(out)
        assert payload["mse"] == 0.0
        assert payload["ma"] == 0.0
