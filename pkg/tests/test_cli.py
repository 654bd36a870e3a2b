import json

import numpy as np
import pytest

from deartifact import container, nn, weights_io
from deartifact.cli import main
from deartifact.ppm import read_ppm, write_ppm
from deartifact.toycodec import ToyCodec

from conftest import textured_image


@pytest.fixture
def corpus_dir(tmp_path):
    d = tmp_path / "corpus"
    d.mkdir()
    for seed in range(8):
        write_ppm(d / f"img{seed:02d}.ppm", textured_image(seed, 32))
    return d


class TestPpm:
    def test_round_trip(self, tmp_path):
        img = textured_image(0, 20)
        path = tmp_path / "x.ppm"
        write_ppm(path, img)
        assert np.array_equal(read_ppm(path), img)

    def test_comment_in_header(self, tmp_path):
        path = tmp_path / "c.ppm"
        path.write_bytes(b"P6\n# a comment\n1 1\n255\n\x01\x02\x03")
        img = read_ppm(path)
        assert img.shape == (3, 1, 1)
        assert img[2, 0, 0] == 3

    def test_wrong_magic(self, tmp_path):
        path = tmp_path / "b.ppm"
        path.write_bytes(b"P3\n1 1\n255\n1 2 3\n")
        with pytest.raises(ValueError):
            read_ppm(path)


class TestTrainCommand:
    def test_tiny_training_run(self, corpus_dir, tmp_path):
        out = tmp_path / "model.weights"
        rc = main([
            "train", str(corpus_dir), "--out", str(out),
            "--blocks", "1", "--features", "4", "--batch-size", "4",
            "--crop", "16", "--epochs", "3", "--quality", "25", "--seed", "1",
        ])
        assert rc == 0
        weights, network_id = weights_io.load_weights(out)
        assert network_id == 0
        assert sum(p.size for p in nn.iter_params(weights)) == nn.parameter_count(
            nn.NetworkConfig(1, 4)
        )
        history = out.with_suffix(".history.jsonl").read_text().splitlines()
        assert len(history) == 3
        rec = json.loads(history[0])
        assert set(rec) == {"epoch", "lr", "train_loss", "val_psnr"}
        assert out.with_suffix(".training.png").exists()

    def test_empty_dataset_fails(self, tmp_path):
        empty = tmp_path / "empty"
        empty.mkdir()
        rc = main(["train", str(empty), "--out", str(tmp_path / "w.weights")])
        assert rc == 3

    def test_same_seed_identical_weights_file(self, corpus_dir, tmp_path):
        args = [
            "train", str(corpus_dir), "--blocks", "1", "--features", "4",
            "--batch-size", "4", "--crop", "16", "--epochs", "2",
            "--quality", "25", "--seed", "9",
        ]
        a, b = tmp_path / "a.weights", tmp_path / "b.weights"
        assert main(args + ["--out", str(a)]) == 0
        assert main(args + ["--out", str(b)]) == 0
        assert a.read_bytes() == b.read_bytes()


class TestEncodeDecodeCommands:
    def test_passthrough_round_trip(self, corpus_dir, tmp_path):
        src = corpus_dir / "img00.ppm"
        stream = tmp_path / "img.mvgl"
        out = tmp_path / "out.ppm"
        assert main(["encode", str(src), "--out", str(stream),
                     "--quality", "12", "--network-id", "0xFF"]) == 0
        assert main(["decode", str(stream), "--out", str(out)]) == 0
        codec = ToyCodec()
        want = codec.decode(codec.encode(read_ppm(src), 12.0))
        assert np.array_equal(read_ppm(out), want)

    def test_decode_with_model(self, corpus_dir, tmp_path):
        wdir = tmp_path / "weights"
        wdir.mkdir()
        weights = nn.init_weights(nn.NetworkConfig(1, 4), 0)
        weights_io.save_weights(wdir / "00.weights", weights, network_id=0)
        src = corpus_dir / "img01.ppm"
        stream = tmp_path / "img.mvgl"
        out = tmp_path / "out.ppm"
        assert main(["encode", str(src), "--out", str(stream),
                     "--quality", "12", "--network-id", "0"]) == 0
        assert main(["decode", str(stream), "--out", str(out),
                     "--weights-dir", str(wdir), "--grid", "2x2"]) == 0
        img = read_ppm(out)
        assert img.shape == read_ppm(src).shape

    def test_decode_empty_container_fails(self, tmp_path):
        empty = tmp_path / "empty.mvgl"
        empty.write_bytes(b"")
        rc = main(["decode", str(empty), "--out", str(tmp_path / "o.ppm")])
        assert rc == 3

    def test_decode_missing_weights_fails(self, corpus_dir, tmp_path):
        stream = tmp_path / "img.mvgl"
        assert main(["encode", str(corpus_dir / "img00.ppm"), "--out", str(stream),
                     "--quality", "12", "--network-id", "1"]) == 0
        rc = main(["decode", str(stream), "--out", str(tmp_path / "o.ppm")])
        assert rc == 3

    def test_mem_budget_picks_grid(self, corpus_dir, tmp_path):
        wdir = tmp_path / "weights"
        wdir.mkdir()
        weights = nn.init_weights(nn.NetworkConfig(1, 4), 0)
        weights_io.save_weights(wdir / "00.weights", weights, network_id=0)
        stream = tmp_path / "img.mvgl"
        assert main(["encode", str(corpus_dir / "img00.ppm"), "--out", str(stream),
                     "--quality", "12", "--network-id", "0"]) == 0
        assert main(["decode", str(stream), "--out", str(tmp_path / "o.ppm"),
                     "--weights-dir", str(wdir), "--mem-budget", "100000000"]) == 0


class TestAllocateCommand:
    def test_instance_file(self, tmp_path, capsys):
        inst = tmp_path / "inst.txt"
        inst.write_text("2 2 9\n3:10 5:4\n4:8 6:2\n")
        assert main(["allocate", "--instance", str(inst)]) == 0
        out = capsys.readouterr().out
        assert "choices: 0 1" in out
        assert "objective: 12" in out
        assert "total_size: 9" in out

    def test_single_option_forced(self, tmp_path, capsys):
        inst = tmp_path / "inst.txt"
        inst.write_text("2 1 100\n3:7\n4:2\n")
        assert main(["allocate", "--instance", str(inst)]) == 0
        assert "choices: 0 0" in capsys.readouterr().out

    def test_infeasible_budget(self, tmp_path, capsys):
        inst = tmp_path / "inst.txt"
        inst.write_text("1 1 1\n5:3\n")
        assert main(["allocate", "--instance", str(inst)]) == 4
        assert "minimum achievable" in capsys.readouterr().err

    def test_corpus_mode_matches_recomputed_matrices(self, corpus_dir, tmp_path, capsys):
        out = tmp_path / "assign.txt"
        figs = tmp_path / "figs"
        qualities = [10.0, 20.0, 40.0]
        codec = ToyCodec()
        sizes = []
        for p in sorted(corpus_dir.glob("*.ppm")):
            img = read_ppm(p)
            sizes.append([len(codec.encode(img, q)) + 1 for q in qualities])
        limit = float(sum(row[1] for row in sizes))
        assert main([
            "allocate", "--corpus", str(corpus_dir),
            "--qualities", "10,20,40", "--limit", str(limit),
            "--out", str(out), "--figures-dir", str(figs),
        ]) == 0
        text = out.read_text()
        choices = [int(c) for c in text.splitlines()[0].split()[1:]]
        total = sum(sizes[i][c] for i, c in enumerate(choices))
        assert f"total_size: {total:g}" in text
        assert total <= limit
        assert (figs / "allocation.png").exists()


class TestEvaluateCommand:
    def test_identical_lists(self, corpus_dir, tmp_path, capsys):
        assert main(["evaluate", "--originals", str(corpus_dir),
                     "--decoded", str(corpus_dir)]) == 0
        out = capsys.readouterr().out
        assert "inf" in out.lower()
        agg = out.strip().splitlines()[-1]
        assert agg.startswith("__aggregate__")
        assert ",1.0," in agg  # MS-SSIM 1 for identical corpora

    def test_count_mismatch_fails(self, corpus_dir, tmp_path):
        other = tmp_path / "other"
        other.mkdir()
        write_ppm(other / "only.ppm", textured_image(0, 32))
        rc = main(["evaluate", "--originals", str(corpus_dir), "--decoded", str(other)])
        assert rc == 3

    def test_json_lines_and_figures(self, corpus_dir, tmp_path):
        report = tmp_path / "report.jsonl"
        figs = tmp_path / "figs"
        streams = tmp_path / "streams"
        streams.mkdir()
        for i, p in enumerate(sorted(corpus_dir.glob("*.ppm"))):
            (streams / f"{p.stem}.mvgl").write_bytes(b"x" * (100 + i))
        assert main(["evaluate", "--originals", str(corpus_dir),
                     "--decoded", str(corpus_dir), "--streams", str(streams),
                     "--format", "json-lines", "--out", str(report),
                     "--figures-dir", str(figs)]) == 0
        rows = [json.loads(line) for line in report.read_text().splitlines()]
        assert len(rows) == 9  # 8 images + aggregate
        assert rows[0]["bpp"] == pytest.approx(8 * 100 / (32 * 32))
        assert (figs / "quality.png").exists()


class TestUsage:
    def test_allocate_needs_inputs(self, capsys):
        with pytest.raises(SystemExit) as exc:
            main(["allocate"])
        assert exc.value.code == 2

    def test_unknown_command(self):
        with pytest.raises(SystemExit) as exc:
            main(["frobnicate"])
        assert exc.value.code == 2
