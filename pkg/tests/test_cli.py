import socket
import threading
import time

import pytest

from fallkit.cli import main


@pytest.fixture(scope="module")
def small_corpus(tmp_path_factory):
    root = tmp_path_factory.mktemp("cli")
    corpus = root / "corpus"
    rc = main(
        [
            "synth",
            "--out-dir",
            str(corpus),
            "--count",
            "6",
            "--width",
            "64",
            "--height",
            "48",
            "--frames-min",
            "14",
            "--frames-max",
            "16",
            "--seed",
            "4",
        ]
    )
    assert rc == 0
    return {"root": root, "manifest": corpus / "manifest.tsv"}


class TestBasicCommands:
    def test_synth_then_full_flow(self, small_corpus, capsys):
        root = small_corpus["root"]
        manifest = str(small_corpus["manifest"])

        assert main(["augment", "--manifest", manifest, "--mode", "dynamic", "--seed", "1"]) == 0
        out = capsys.readouterr().out
        assert "written: 60" in out

        assert (
            main(
                [
                    "segment",
                    "--manifest",
                    manifest,
                    "--out-splits",
                    str(root / "splits.tsv"),
                    "--out-segments",
                    str(root / "segments.tsv"),
                ]
            )
            == 0
        )
        assert (root / "splits.tsv").exists()

        assert (
            main(
                [
                    "extract",
                    "--manifest",
                    manifest,
                    "--splits",
                    str(root / "splits.tsv"),
                    "--out-dir",
                    str(root / "feat"),
                    "--resolution",
                    "32x24",
                    "--pos-step",
                    "8",
                    "--scales",
                    "8",
                ]
            )
            == 0
        )

        assert (
            main(
                [
                    "train",
                    "--matrix",
                    str(root / "feat" / "features_train.bin"),
                    "--bank",
                    str(root / "feat" / "bank.txt"),
                    "--out-dir",
                    str(root / "run"),
                    "--lambda",
                    "0.6",
                    "--features",
                    "6",
                ]
            )
            == 0
        )

        assert (
            main(
                [
                    "eval",
                    "--pipeline",
                    str(root / "run"),
                    "--matrix",
                    str(root / "feat" / "features_test.bin"),
                ]
            )
            == 0
        )
        out = capsys.readouterr().out
        assert "overall" in out
        assert "slice,n,accuracy" in out  # machine rows

        assert (
            main(
                [
                    "pca",
                    "--matrix",
                    str(root / "feat" / "features_train.bin"),
                    "--out-csv",
                    str(root / "proj.csv"),
                ]
            )
            == 0
        )

    def test_sweep_lambda_table(self, small_corpus, capsys):
        root = small_corpus["root"]
        rc = main(
            [
                "sweep-lambda",
                "--train-matrix",
                str(root / "feat" / "features_train.bin"),
                "--val-matrix",
                str(root / "feat" / "features_val.bin"),
                "--bank",
                str(root / "feat" / "bank.txt"),
                "--grid",
                "0,0.6",
                "--features",
                "3",
            ]
        )
        assert rc == 0
        out = capsys.readouterr().out
        assert "lambda" in out and "val_accuracy" in out


class TestExitCodes:
    def test_validation_error_is_2(self, capsys):
        rc = main(["augment", "--manifest", "/does/not/exist.tsv"])
        assert rc == 2
        assert "error:" in capsys.readouterr().err

    def test_bad_flag_value_is_2(self, tmp_path, capsys):
        rc = main(["synth", "--out-dir", str(tmp_path / "c"), "--fall-fraction", "2.0"])
        assert rc == 2

    def test_success_is_0(self, tmp_path):
        rc = main(
            [
                "synth",
                "--out-dir",
                str(tmp_path / "c"),
                "--count",
                "1",
                "--frames-min",
                "12",
                "--frames-max",
                "12",
            ]
        )
        assert rc == 0


class TestConfigOverride:
    def test_config_overrides_flags(self, tmp_path, capsys):
        config = tmp_path / "exp.cfg"
        config.write_text("count=3\nseed=8\n")
        rc = main(
            [
                "synth",
                "--out-dir",
                str(tmp_path / "c"),
                "--count",
                "1",
                "--frames-min",
                "12",
                "--frames-max",
                "12",
                "--config",
                str(config),
            ]
        )
        assert rc == 0
        assert "videos: 3" in capsys.readouterr().out

    def test_unknown_config_key_is_2(self, tmp_path, capsys):
        config = tmp_path / "exp.cfg"
        config.write_text("nonsense=1\n")
        rc = main(
            ["synth", "--out-dir", str(tmp_path / "c"), "--config", str(config)]
        )
        assert rc == 2


class TestRemoteServer:
    def test_cli_talks_to_live_server(self, tmp_path, capsys):
        import uvicorn

        from fallkit.service import create_app

        with socket.socket() as s:
            s.bind(("127.0.0.1", 0))
            port = s.getsockname()[1]
        config = uvicorn.Config(create_app(), host="127.0.0.1", port=port, log_level="error")
        server = uvicorn.Server(config)
        thread = threading.Thread(target=server.run, daemon=True)
        thread.start()
        try:
            deadline = time.time() + 15
            while not server.started:
                if time.time() > deadline:
                    pytest.fail("server did not start")
                time.sleep(0.05)
            rc = main(
                [
                    "synth",
                    "--server",
                    f"http://127.0.0.1:{port}",
                    "--out-dir",
                    str(tmp_path / "remote"),
                    "--count",
                    "1",
                    "--frames-min",
                    "12",
                    "--frames-max",
                    "12",
                ]
            )
            assert rc == 0
            assert "videos: 1" in capsys.readouterr().out
            assert (tmp_path / "remote" / "manifest.tsv").exists()
            # remote validation failure also maps to exit 2
            rc = main(
                [
                    "augment",
                    "--server",
                    f"http://127.0.0.1:{port}",
                    "--manifest",
                    "/does/not/exist.tsv",
                ]
            )
            assert rc == 2
        finally:
            server.should_exit = True
            thread.join(timeout=10)
