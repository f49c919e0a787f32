import numpy as np
import pytest

import stableconv as sc
from stableconv.cli import main
from stableconv.config import load_config

TINY_CONFIG = """
[network]
alpha = 1.5
sigma_w = 1.0
sigma_b = 1.0
channels = 8
activation = tanh
seed = 7

[input]
channels = 1
spatial = 4
num_inputs = 2
kind = gaussian

[layer.1]
filter = 3
stride = 1
padding = 1

[layer.2]
filter = 3
stride = 1
padding = 1

[limit]
mc_samples = 2000
seed = 3

[verify]
channel_counts = 2 8 32
n_replicas = 3000
n_probes = 20
max_sup_dist = 0.2
require_decreasing = false

[oracle]
mc_samples = 2000
max_diag_rel_err = 0.1
"""


@pytest.fixture
def config_file(tmp_path):
    path = tmp_path / "toy.ini"
    path.write_text(TINY_CONFIG)
    return path


def run_dir_of(cfg_path, out):
    return out / load_config(cfg_path).config_hash


class TestConfig:
    def test_round_trip_fields(self, config_file):
        cfg = load_config(config_file)
        assert cfg.alpha == 1.5
        assert cfg.channel_counts == (2, 8, 32)
        assert cfg.layers[0].filter_shape == (3,)
        spec = cfg.build_spec()
        assert spec.n_layers == 2
        assert spec.inputs.shape == (1, 4, 2)

    def test_hash_stable_and_sensitive(self, config_file, tmp_path):
        cfg = load_config(config_file)
        assert cfg.config_hash == load_config(config_file).config_hash
        other = tmp_path / "other.ini"
        other.write_text(TINY_CONFIG.replace("seed = 7", "seed = 8"))
        assert load_config(other).config_hash != cfg.config_hash

    def test_inputs_reproducible(self, config_file):
        cfg = load_config(config_file)
        assert np.array_equal(cfg.make_inputs().data, cfg.make_inputs().data)

    def test_file_inputs(self, config_file, tmp_path):
        arr = np.random.default_rng(0).standard_normal((1, 4, 2))
        np.save(tmp_path / "x.npy", arr)
        text = TINY_CONFIG.replace(
            "kind = gaussian", f"kind = file\npath = {tmp_path / 'x.npy'}"
        )
        path = tmp_path / "file.ini"
        path.write_text(text)
        cfg = load_config(path)
        assert np.array_equal(cfg.make_inputs().data, arr)

    def test_missing_config_is_usage_error(self, tmp_path):
        assert main(["limit", "-c", str(tmp_path / "nope.ini"), "-o", str(tmp_path)]) == 2


class TestCommands:
    def test_limit_writes_loadable_measures(self, config_file, tmp_path):
        out = tmp_path / "runs"
        assert main(["limit", "-c", str(config_file), "-o", str(out)]) == 0
        run = run_dir_of(config_file, out)
        assert (run / "resolved.ini").exists()
        m1 = sc.read_measure(run / "measures" / "layer_01.txt")
        m2 = sc.read_measure(run / "measures" / "layer_02.txt")
        assert m1.dimension == m2.dimension == 8
        assert m1.bias_index == 0

    def test_simulate_cache_round_trip(self, config_file, tmp_path):
        out = tmp_path / "runs"
        assert main(["simulate", "-c", str(config_file), "-o", str(out),
                     "--channels", "4", "--replicas", "50"]) == 0
        run = run_dir_of(config_file, out)
        reps = sc.load_replicas(run / "replicas_C4.bin")
        assert reps.outputs.shape == (50, 2, 8)

    def test_verify_passes_and_is_reproducible(self, config_file, tmp_path):
        out_a, out_b = tmp_path / "a", tmp_path / "b"
        assert main(["verify", "-c", str(config_file), "-o", str(out_a)]) == 0
        assert main(["verify", "-c", str(config_file), "-o", str(out_b)]) == 0
        run_a, run_b = run_dir_of(config_file, out_a), run_dir_of(config_file, out_b)
        sweep_a = (run_a / "sweep.csv").read_bytes()
        assert sweep_a == (run_b / "sweep.csv").read_bytes()
        assert sweep_a.decode().splitlines()[0] == "C,n_replicas,M,sup_cf_dist,mean_cf_dist,seconds"
        probes_a = (run_a / "probes.csv").read_text()
        assert probes_a == (run_b / "probes.csv").read_text()
        # the zero probe reports a theoretical CF of exactly 1
        first = probes_a.splitlines()[1].split(",")
        assert first[1] == "0" and first[2] == "1"

    def test_verify_uses_cached_measures(self, config_file, tmp_path):
        out = tmp_path / "runs"
        assert main(["limit", "-c", str(config_file), "-o", str(out)]) == 0
        assert main(["verify", "-c", str(config_file), "-o", str(out)]) == 0

    def test_verify_consumes_replica_cache_for_independence(self, config_file, tmp_path):
        out = tmp_path / "runs"
        assert main(["simulate", "-c", str(config_file), "-o", str(out),
                     "--channels", "32", "--replicas", "4000"]) == 0
        assert main(["verify", "-c", str(config_file), "-o", str(out)]) == 0
        run = run_dir_of(config_file, out)
        lines = (run / "independence.csv").read_text().splitlines()
        assert lines[0] == "metric,value"
        values = dict(ln.split(",") for ln in lines[1:])
        assert float(values["max_control_defect"]) > float(
            values["max_factorization_defect"]
        )

    def test_verify_fails_on_impossible_threshold(self, config_file, tmp_path):
        strict = config_file.parent / "strict.ini"
        strict.write_text(TINY_CONFIG.replace("max_sup_dist = 0.2", "max_sup_dist = 1e-9"))
        assert main(["verify", "-c", str(strict), "-o", str(config_file.parent / "r")]) == 1

    def test_oracle_requires_alpha_two(self, config_file, tmp_path):
        assert main(["oracle", "-c", str(config_file), "-o", str(tmp_path / "r")]) == 2
        gauss = config_file.parent / "gauss.ini"
        gauss.write_text(TINY_CONFIG.replace("alpha = 1.5", "alpha = 2"))
        out = tmp_path / "runs"
        assert main(["oracle", "-c", str(gauss), "-o", str(out)]) == 0
        run = run_dir_of(gauss, out)
        assert (run / "oracle.csv").read_text().splitlines()[0] == "metric,value"

    def test_report_needs_a_sweep(self, config_file, tmp_path):
        out = tmp_path / "runs"
        assert main(["report", "-c", str(config_file), "-o", str(out)]) == 2
        assert main(["verify", "-c", str(config_file), "-o", str(out)]) == 0
        assert main(["report", "-c", str(config_file), "-o", str(out)]) == 0
        run = run_dir_of(config_file, out)
        plot = (run / "plot_sweep.csv").read_text().splitlines()
        assert plot[0] == "C,sup_cf_dist,mean_cf_dist"
        assert len(plot) == 4
