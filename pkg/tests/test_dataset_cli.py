import numpy as np
import pytest
from PIL import Image

from vesselseg.cli import main
from vesselseg.dataset import DatasetError, index_drive
from vesselseg.raster import load_mask
from synthdata import synthetic_fundus, write_drive_tree

FAST_CFG = """
preprocess.pad_width = 8
filter.rho_list = 0,2,4
filter.n_orientations = 6
"""


@pytest.fixture()
def mini_drive(tmp_path):
    root = tmp_path / "drive"
    write_drive_tree(root, "test", ["01", "02", "03"], size=96)
    write_drive_tree(root, "train", ["21", "22"], size=96)
    return root


@pytest.fixture()
def fast_config(tmp_path):
    path = tmp_path / "fast.conf"
    path.write_text(FAST_CFG)
    return path


class TestIndexDrive:
    def test_counts_and_order(self, mini_drive):
        cases = index_drive(mini_drive, "test")
        assert [c.case_id for c in cases] == ["01", "02", "03"]
        assert all(c.gt_second is not None for c in cases)
        train = index_drive(mini_drive, "train")
        assert [c.case_id for c in train] == ["21", "22"]
        assert all(c.gt_second is None for c in train)

    def test_missing_mask_names_case(self, mini_drive):
        (mini_drive / "test" / "mask" / "02_test_mask.png").unlink()
        with pytest.raises(DatasetError, match="02"):
            index_drive(mini_drive, "test")

    def test_empty_root_missing_directory(self, tmp_path):
        with pytest.raises(DatasetError, match="missing directory"):
            index_drive(tmp_path / "empty", "test")

    def test_gt_observer_selection(self, mini_drive):
        case = index_drive(mini_drive, "test")[0]
        assert case.gt_for(1).name == "01_manual1.png"
        assert case.gt_for(2).name == "01_manual2.png"
        train_case = index_drive(mini_drive, "train")[0]
        with pytest.raises(DatasetError):
            train_case.gt_for(2)


class TestSegmentCommand:
    def test_segment_with_mask(self, tmp_path, mini_drive, fast_config):
        img = mini_drive / "test" / "images" / "01_test.png"
        mask = mini_drive / "test" / "mask" / "01_test_mask.png"
        out = tmp_path / "out.png"
        rc = main(["segment", str(img), str(out), "--mask", str(mask),
                   "--config", str(fast_config)])
        assert rc == 0
        seg = load_mask(out)
        fov = load_mask(mask)
        assert seg.any()
        assert not (seg & ~fov).any()

    def test_segment_derives_fov(self, tmp_path, fast_config):
        rgb, fov, _ = synthetic_fundus(96, 96, n_strokes=3, seed=42)
        img_path = tmp_path / "img.png"
        Image.fromarray(rgb, mode="RGB").save(img_path)
        out = tmp_path / "seg.png"
        rc = main(["segment", str(img_path), str(out), "--config", str(fast_config)])
        assert rc == 0
        assert out.exists()

    def test_dump_intermediates(self, tmp_path, mini_drive, fast_config):
        img = mini_drive / "test" / "images" / "01_test.png"
        mask = mini_drive / "test" / "mask" / "01_test_mask.png"
        out = tmp_path / "out.png"
        dump = tmp_path / "stages"
        rc = main(["segment", str(img), str(out), "--mask", str(mask),
                   "--config", str(fast_config), "--dump-intermediates", str(dump)])
        assert rc == 0
        for suffix in ("green", "inverted", "padded", "tophat", "clahe", "response", "binary"):
            assert (dump / f"01_test_{suffix}.png").exists(), suffix

    def test_all_black_image_empty_mask(self, tmp_path, fast_config):
        img_path = tmp_path / "black.png"
        Image.fromarray(np.zeros((64, 64, 3), np.uint8), mode="RGB").save(img_path)
        mask_path = tmp_path / "full.png"
        Image.fromarray(np.full((64, 64), 255, np.uint8), mode="L").save(mask_path)
        out = tmp_path / "seg.png"
        rc = main(["segment", str(img_path), str(out), "--mask", str(mask_path),
                   "--config", str(fast_config)])
        assert rc == 0
        assert not load_mask(out).any()

    def test_unreadable_config_no_output(self, tmp_path, mini_drive):
        img = mini_drive / "test" / "images" / "01_test.png"
        out = tmp_path / "never.png"
        rc = main(["segment", str(img), str(out), "--config", str(tmp_path / "nope.conf")])
        assert rc == 1
        assert not out.exists()

    def test_bad_config_value_exit_one(self, tmp_path, mini_drive):
        cfg = tmp_path / "bad.conf"
        cfg.write_text("filter.t = 9\n")
        img = mini_drive / "test" / "images" / "01_test.png"
        out = tmp_path / "never.png"
        rc = main(["segment", str(img), str(out), "--config", str(cfg)])
        assert rc == 1
        assert not out.exists()

    def test_missing_image_exit_two(self, tmp_path, fast_config):
        rc = main(["segment", str(tmp_path / "no.png"), str(tmp_path / "o.png"),
                   "--config", str(fast_config)])
        assert rc == 2

    def test_usage_error_exit_one(self):
        assert main(["segment"]) == 1


class TestEvaluateCommand:
    def test_evaluate_writes_csv(self, tmp_path, mini_drive, fast_config, capsys):
        csv_out = tmp_path / "metrics.csv"
        rc = main(["evaluate", str(mini_drive), "--split", "test",
                   "--csv-out", str(csv_out), "--config", str(fast_config), "--with-auc"])
        assert rc == 0
        lines = csv_out.read_text().strip().split("\n")
        assert lines[0] == "image,sen,spe,acc,auc,kappa,mcc"
        assert len(lines) == 1 + 3 + 2  # header + cases + mean + std
        assert lines[1].split(",")[0] == "01"
        assert "mean over 3 images" in capsys.readouterr().out

    def test_gt_observer_changes_metrics_not_segmentation(self, tmp_path, mini_drive, fast_config):
        base = tmp_path / "a.csv"
        rc = main(["evaluate", str(mini_drive), "--split", "test",
                   "--csv-out", str(base), "--config", str(fast_config)])
        assert rc == 0
        cfg2 = tmp_path / "obs2.conf"
        cfg2.write_text(FAST_CFG + "evaluation.gt_observer = 2\n")
        other = tmp_path / "b.csv"
        rc = main(["evaluate", str(mini_drive), "--split", "test",
                   "--csv-out", str(other), "--config", str(cfg2)])
        assert rc == 0
        assert base.read_text() != other.read_text()

    def test_missing_root_exit_two(self, tmp_path, fast_config):
        rc = main(["evaluate", str(tmp_path / "nothing"), "--split", "test",
                   "--csv-out", str(tmp_path / "m.csv"), "--config", str(fast_config)])
        assert rc == 2


class TestSweepCommand:
    def test_sweep_rows_sorted_by_mcc(self, tmp_path, mini_drive, fast_config):
        grid = tmp_path / "grid.conf"
        grid.write_text("filter.t = 0, 0.9\n")
        csv_out = tmp_path / "sweep.csv"
        rc = main(["sweep", str(mini_drive), "--split", "train", "--grid", str(grid),
                   "--csv-out", str(csv_out), "--config", str(fast_config)])
        assert rc == 0
        lines = csv_out.read_text().strip().split("\n")
        assert lines[0].startswith("filter.t,")
        assert len(lines) == 3
        mccs = [float(row.split(",")[-2]) for row in lines[1:]]
        assert mccs == sorted(mccs, reverse=True)

    def test_empty_grid_single_row(self, tmp_path, mini_drive, fast_config):
        grid = tmp_path / "grid.conf"
        grid.write_text("# nothing\n")
        csv_out = tmp_path / "sweep.csv"
        rc = main(["sweep", str(mini_drive), "--split", "train", "--grid", str(grid),
                   "--csv-out", str(csv_out), "--config", str(fast_config)])
        assert rc == 0
        assert len(csv_out.read_text().strip().split("\n")) == 2

    def test_oversized_grid_rejected(self, tmp_path, mini_drive, fast_config):
        grid = tmp_path / "grid.conf"
        grid.write_text("filter.t = 0, 0.1, 0.2\nfilter.sigma0 = 1, 2\n")
        rc = main(["sweep", str(mini_drive), "--split", "train", "--grid", str(grid),
                   "--csv-out", str(tmp_path / "s.csv"), "--config", str(fast_config),
                   "--max-combos", "5"])
        assert rc == 1
        assert not (tmp_path / "s.csv").exists()

    def test_best_row_reproduced_by_evaluate(self, tmp_path, mini_drive, fast_config):
        grid = tmp_path / "grid.conf"
        grid.write_text("filter.t = 0, 0.9\n")
        csv_out = tmp_path / "sweep.csv"
        main(["sweep", str(mini_drive), "--split", "train", "--grid", str(grid),
              "--csv-out", str(csv_out), "--config", str(fast_config)])
        header, best = csv_out.read_text().strip().split("\n")[:2]
        keys = header.split(",")
        vals = best.split(",")
        t_value = vals[keys.index("filter.t")]
        cfg2 = tmp_path / "best.conf"
        cfg2.write_text(FAST_CFG + f"filter.t = {t_value}\n")
        ev_csv = tmp_path / "ev.csv"
        rc = main(["evaluate", str(mini_drive), "--split", "train",
                   "--csv-out", str(ev_csv), "--config", str(cfg2)])
        assert rc == 0
        lines = ev_csv.read_text().strip().split("\n")
        mean_row = [row for row in lines if row.startswith("mean,")][0]
        # mean mcc from evaluate equals the sweep row's mean_mcc
        assert mean_row.split(",")[-1] == vals[keys.index("mean_mcc")]
