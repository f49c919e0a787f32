import numpy as np
import pytest

import stableconv as sc

from conftest import toy_inputs, toy_layer, toy_spec


class TestActivationSpec:
    def test_envelope_violation_caught(self):
        with pytest.raises(ValueError):
            sc.ActivationSpec("identity", lambda s: s, a=1.0, b=1.0, beta=0.0)

    def test_shipped_activations_satisfy_their_envelopes(self):
        # construction runs the empirical check; also probe a few values
        assert sc.get_activation("tanh")(np.array([0.0]))[0] == 0.0
        assert sc.get_activation("hard_clip")(np.array([9.0]))[0] == 1.0
        s = np.array([-8.0])
        assert sc.get_activation("signed_power")(s)[0] == pytest.approx(-(8**0.9))
        assert sc.get_activation("relu")(s)[0] == 0.0

    def test_bad_constants_rejected(self):
        with pytest.raises(ValueError):
            sc.ActivationSpec("x", np.tanh, a=0.0, b=1.0, beta=0.0)

    def test_unknown_name(self):
        with pytest.raises(KeyError):
            sc.get_activation("swish")


class TestNetworkSpec:
    def test_relu_rejected_below_alpha_two(self):
        with pytest.raises(ValueError):
            toy_spec(alpha=1.5, activation="relu")

    def test_relu_allowed_at_alpha_two(self):
        spec = toy_spec(alpha=2.0, activation="relu")
        assert spec.activation.name == "relu"

    def test_non_chaining_layers_rejected(self):
        l1 = sc.ConvLayerConfig(spatial_in=4, filter_shape=3, stride=2, padding=1)
        l2 = sc.ConvLayerConfig(spatial_in=4, filter_shape=3, stride=1, padding=1)
        with pytest.raises(ValueError):
            sc.NetworkSpec(
                alpha=1.5, sigma_w=1.0, sigma_b=1.0, layers=(l1, l2),
                activation=sc.get_activation("tanh"), channels=4,
                inputs=toy_inputs(), seed=0,
            )

    def test_input_shape_must_match_first_layer(self):
        with pytest.raises(ValueError):
            sc.NetworkSpec(
                alpha=1.5, sigma_w=1.0, sigma_b=1.0, layers=(toy_layer(),),
                activation=sc.get_activation("tanh"), channels=4,
                inputs=toy_inputs(spatial=(5,)), seed=0,
            )

    def test_declared_channel_counts_validated(self):
        annotated = sc.ConvLayerConfig(
            spatial_in=4, filter_shape=3, stride=1, padding=1, channels_in=2
        )
        with pytest.raises(ValueError):
            sc.NetworkSpec(
                alpha=1.5, sigma_w=1.0, sigma_b=1.0, layers=(annotated,),
                activation=sc.get_activation("tanh"), channels=4,
                inputs=toy_inputs(), seed=0,
            )
        ok = sc.ConvLayerConfig(
            spatial_in=4, filter_shape=3, stride=1, padding=1, channels_in=1
        )
        sc.NetworkSpec(
            alpha=1.5, sigma_w=1.0, sigma_b=1.0, layers=(ok,),
            activation=sc.get_activation("tanh"), channels=4,
            inputs=toy_inputs(), seed=0,
        )

    def test_out_dim(self):
        assert toy_spec().out_dim == 4 * 2


class TestForwardFinite:
    def test_layer_one_independent_of_channel_count(self):
        spec = toy_spec(n_layers=1)
        a = sc.forward_finite(spec.with_channels(4), 3, np.random.default_rng(7))
        b = sc.forward_finite(spec.with_channels(64), 3, np.random.default_rng(7))
        assert np.array_equal(a.fields, b.fields)

    def test_zero_scales_give_zero_outputs(self):
        spec = toy_spec(sigma_w=0.0, sigma_b=0.0)
        out = sc.forward_finite(spec, 2, np.random.default_rng(0))
        assert np.all(out.fields == 0.0)

    def test_zero_input_single_layer_is_bias_broadcast(self):
        spec = sc.NetworkSpec(
            alpha=1.5, sigma_w=1.0, sigma_b=1.0, layers=(toy_layer(),),
            activation=sc.get_activation("tanh"), channels=4,
            inputs=sc.input_tensor(np.zeros((1, 4, 2))), seed=0,
        )
        out = sc.forward_finite(spec, 3, np.random.default_rng(5))
        for c in range(3):
            assert np.all(out.fields[c] == out.last_biases[c])

    def test_channel_accessor(self):
        out = sc.forward_finite(toy_spec(), 2, np.random.default_rng(0))
        chan = out.channel(1)
        assert chan.shape == (4, 2)
        assert np.array_equal(chan.data, out.fields[1])

    def test_bad_channel_count(self):
        with pytest.raises(ValueError):
            sc.forward_finite(toy_spec(), 0, np.random.default_rng(0))


class TestSampleReplicas:
    def test_reproducible_from_seed(self):
        spec = toy_spec(channels=8)
        a = sc.sample_replicas(spec, 16)
        b = sc.sample_replicas(spec, 16)
        assert np.array_equal(a.outputs, b.outputs)
        assert np.array_equal(a.biases, b.biases)

    def test_single_replica_shape(self):
        reps = sc.sample_replicas(toy_spec(channels=4), 1)
        assert reps.outputs.shape == (1, 1, 8)

    def test_replicas_are_prefix_stable(self):
        # per-replica streams: the first k replicas do not depend on the total
        spec = toy_spec(channels=4)
        small = sc.sample_replicas(spec, 4)
        large = sc.sample_replicas(spec, 8)
        assert np.array_equal(small.outputs, large.outputs[:4])

    def test_worker_pool_matches_serial(self):
        spec = toy_spec(channels=4)
        serial = sc.sample_replicas(spec, 12, n_channels=2)
        pooled = sc.sample_replicas(spec, 12, n_channels=2, workers=3)
        assert np.array_equal(serial.outputs, pooled.outputs)
        assert np.array_equal(serial.biases, pooled.biases)

    def test_layer_one_law_matches_exact_measure(self):
        # the first layer's law is exact at any channel count
        spec = toy_spec(n_layers=1, channels=3, seed=21)
        reps = sc.sample_replicas(spec, 10_000)
        measure = sc.gamma_first(spec.inputs, spec.layers[0], spec.alpha,
                                 spec.sigma_w, spec.sigma_b)
        probes = sc.generate_probes(measure, n_probes=20, seed=4)
        emp = sc.empirical_cf(reps.channel_samples(0), probes.probes)
        theo = sc.cf_multivariate(measure, probes.probes)
        sup, _ = sc.cf_distance(emp, theo)
        assert sup < 0.03

    def test_exchangeability_of_channels(self):
        spec = toy_spec(channels=16, seed=3)
        reps = sc.sample_replicas(spec, 8_000, n_channels=2)
        measure = sc.limit_measures(spec, sc.LimitConfig(mc_samples=2_000, seed=9))[-1]
        probes = sc.generate_probes(measure, n_probes=20, seed=8)
        e1 = sc.empirical_cf(reps.channel_samples(0), probes.probes)
        e2 = sc.empirical_cf(reps.channel_samples(1), probes.probes)
        budget = 4 * sc.cf_standard_error(reps.n_replicas)
        assert np.abs(e1 - e2).max() < budget

    def test_gaussian_endpoint_variance_matches_kernel(self):
        # at alpha = 2 the first layer is a Gaussian CNN; spot-check variances
        spec = toy_spec(alpha=2.0, n_layers=1, seed=17)
        reps = sc.sample_replicas(spec, 20_000)
        pm = sc.patch_map_for(spec.layers[0])
        patches = pm.gather(spec.inputs.data.reshape(1, 4, 2), axis=1)
        slices = patches.reshape(3, 8)
        expected = 2 * spec.sigma_b**2 + 2 * spec.sigma_w**2 * np.sum(
            slices**2, axis=0
        )
        observed = reps.channel_samples(0).var(axis=0)
        assert np.allclose(observed, expected, rtol=0.08)


class TestChannelMixture:
    def test_single_channel_strips_bias(self, rng):
        outputs = rng.standard_normal((2, 8))
        biases = rng.standard_normal(2)
        mix = sc.channel_mixture(outputs, [1.0], biases)
        assert np.allclose(mix, outputs[0] - biases[0], rtol=0, atol=0)

    def test_zero_weights(self, rng):
        outputs = rng.standard_normal((5, 2, 8))
        biases = rng.standard_normal((5, 2))
        mix = sc.channel_mixture(outputs, [0.0, 0.0], biases)
        assert np.all(mix == 0.0)

    def test_index_out_of_range(self, rng):
        outputs = rng.standard_normal((2, 8))
        with pytest.raises(IndexError):
            sc.channel_mixture(outputs, [1.0], rng.standard_normal(2), channels=[5])

    def test_batch_shape(self, rng):
        outputs = rng.standard_normal((7, 3, 8))
        biases = rng.standard_normal((7, 3))
        mix = sc.channel_mixture(outputs, [1.0, -1.0], biases, channels=[0, 2])
        assert mix.shape == (7, 8)
        manual = (outputs[:, 0] - biases[:, 0, None]) - (
            outputs[:, 2] - biases[:, 2, None]
        )
        assert np.allclose(mix, manual, rtol=0, atol=1e-15)


class TestReplicaCache:
    def test_round_trip(self, tmp_path):
        reps = sc.sample_replicas(toy_spec(channels=4), 10, n_channels=2)
        path = tmp_path / "replicas.bin"
        sc.save_replicas(path, reps)
        again = sc.load_replicas(path)
        assert np.array_equal(again.outputs, reps.outputs)
        assert np.array_equal(again.biases, reps.biases)
        assert again.alpha == reps.alpha
        assert again.seed == reps.seed

    def test_bad_magic_rejected(self, tmp_path):
        path = tmp_path / "junk.bin"
        path.write_bytes(b"not a cache")
        with pytest.raises(ValueError):
            sc.load_replicas(path)
