"""Tests for the auto-encoder: forward passes, KL, analytic gradients, training."""

import numpy as np
import pytest
from _oracles import mc_kl_estimate

from encvar import vae


def zeroed(params, names):
    out = params.copy()
    for name, arr in out.blocks():
        if any(name.startswith(p) for p in names):
            arr[...] = 0.0
    return out


@pytest.fixture
def small_params():
    arch = vae.VaeArch(input_dim=4, hidden=(8,), latent_dim=2)
    return vae.init_params(arch, seed=11)


# ---------------------------------------------------------------------------
# init


class TestInitParams:
    def test_deterministic(self):
        arch = vae.VaeArch(input_dim=4, hidden=(8,), latent_dim=2)
        a = vae.init_params(arch, seed=5)
        b = vae.init_params(arch, seed=5)
        np.testing.assert_array_equal(a.flatten(), b.flatten())

    def test_seed_changes_weights(self):
        arch = vae.VaeArch(input_dim=4, hidden=(8,), latent_dim=2)
        a = vae.init_params(arch, seed=5)
        b = vae.init_params(arch, seed=6)
        assert not np.array_equal(a.flatten(), b.flatten())

    def test_shapes(self):
        arch = vae.VaeArch(input_dim=4, hidden=(8,), latent_dim=2)
        p = vae.init_params(arch, seed=0)
        assert p.enc_w[0].shape == (4, 8)
        assert p.mu_w.shape == (8, 2)
        assert p.logsig_w.shape == (8, 2)
        assert p.dec_w[0].shape == (2, 8)
        assert p.dec_w[1].shape == (8, 4)
        assert all(np.all(b == 0) for b in p.enc_b + p.dec_b)

    def test_latent_must_be_smaller(self):
        with pytest.raises(ValueError):
            vae.VaeArch(input_dim=3, hidden=(4,), latent_dim=3)


# ---------------------------------------------------------------------------
# encode / reparameterize / decode


class TestForward:
    def test_zero_heads_standard_latent(self, small_params):
        p = zeroed(small_params, ("mu_", "logsig_"))
        lat = vae.encode(p, np.array([0.3, -0.2, 1.0, 0.5]))
        np.testing.assert_array_equal(lat.mu, np.zeros(2))
        np.testing.assert_array_equal(lat.sigma, np.ones(2))

    def test_encode_deterministic(self, small_params):
        x = np.array([0.1, 0.2, -0.3, 0.4])
        a = vae.encode(small_params, x)
        b = vae.encode(small_params, x)
        np.testing.assert_array_equal(a.mu, b.mu)
        np.testing.assert_array_equal(a.sigma, b.sigma)

    def test_sigma_positive(self, small_params):
        lat = vae.encode(small_params, np.array([1.0, -1.0, 0.5, -0.5]))
        assert np.all(lat.sigma > 0.0)

    def test_non_finite_input_rejected(self, small_params):
        with pytest.raises(ValueError):
            vae.encode(small_params, np.array([np.nan, 0, 0, 0]))

    def test_reparameterize_eps_zero(self):
        lat = vae.LatentGaussian(mu=np.array([1.0, -2.0]), sigma=np.array([0.5, 2.0]))
        np.testing.assert_array_equal(vae.reparameterize(lat, np.zeros(2)), lat.mu)

    def test_reparameterize_standard(self):
        lat = vae.LatentGaussian(mu=np.zeros(3), sigma=np.ones(3))
        eps = np.array([0.3, -0.1, 2.0])
        np.testing.assert_array_equal(vae.reparameterize(lat, eps), eps)

    def test_reparameterize_hand_value(self):
        lat = vae.LatentGaussian(mu=np.array([2.0]), sigma=np.array([3.0]))
        assert vae.reparameterize(lat, np.array([1.0]))[0] == 5.0

    def test_zero_decoder_outputs_zero(self, small_params):
        p = zeroed(small_params, ("dec_",))
        out = vae.decode(p, np.array([1.3, -0.7]))
        np.testing.assert_array_equal(out, np.zeros(4))

    def test_decode_deterministic(self, small_params):
        z = np.array([0.2, -0.4])
        np.testing.assert_array_equal(vae.decode(small_params, z),
                                      vae.decode(small_params, z))

    def test_decode_continuity(self, small_params):
        z = np.array([0.5, -0.5])
        base = vae.decode(small_params, z)
        moved = vae.decode(small_params, z + 1e-6)
        assert np.linalg.norm(moved - base) < 1e-4


# ---------------------------------------------------------------------------
# KL divergence


class TestKlGaussian:
    def test_prior_matches_posterior(self):
        lat = vae.LatentGaussian(mu=np.zeros(3), sigma=np.ones(3))
        assert vae.kl_gaussian(lat) == pytest.approx(0.0, abs=1e-15)

    def test_unit_shift(self):
        lat = vae.LatentGaussian(mu=np.array([1.0]), sigma=np.array([1.0]))
        assert vae.kl_gaussian(lat) == pytest.approx(0.5)

    def test_sigma_e(self):
        # 0.5 * (e^2 + 0 - 1 - ln e^2) = 0.5 * (e^2 - 3)
        lat = vae.LatentGaussian(mu=np.array([0.0]), sigma=np.array([np.e]))
        assert vae.kl_gaussian(lat) == pytest.approx(0.5 * (np.e ** 2 - 3.0))

    def test_nonnegative_and_zero_iff_standard(self):
        rng = np.random.default_rng(12)
        for _ in range(200):
            mu = rng.uniform(-2, 2, size=3)
            sigma = rng.uniform(0.2, 3.0, size=3)
            kl = vae.kl_gaussian(vae.LatentGaussian(mu, sigma))
            assert kl >= -1e-12
            if kl < 1e-12:
                np.testing.assert_allclose(mu, 0.0, atol=1e-6)
                np.testing.assert_allclose(sigma, 1.0, atol=1e-6)

    def test_matches_monte_carlo(self):
        rng = np.random.default_rng(13)
        for k in range(5):
            mu = rng.uniform(-2, 2, size=2)
            sigma = rng.uniform(0.5, 2.0, size=2)
            kl = vae.kl_gaussian(vae.LatentGaussian(mu, sigma))
            mc = mc_kl_estimate(mu, sigma, n_draws=1_000_000, seed=100 + k)
            assert kl == pytest.approx(mc, rel=0.01)


# ---------------------------------------------------------------------------
# loss and gradient


class TestElboLoss:
    def test_zero_network_zero_batch(self):
        arch = vae.VaeArch(input_dim=3, hidden=(4,), latent_dim=2)
        p = zeroed(vae.init_params(arch, seed=0), ("enc_", "mu_", "logsig_", "dec_"))
        total, recon, kl = vae.elbo_loss(p, np.zeros((5, 3)), np.zeros((5, 2)), 10.0)
        assert total == recon == kl == 0.0

    def test_doubling_c_doubles_recon(self, small_params):
        rng = np.random.default_rng(14)
        batch = rng.standard_normal((6, 4))
        eps = rng.standard_normal((6, 2))
        t1, r1, k1 = vae.elbo_loss(small_params, batch, eps, 7.0)
        t2, r2, k2 = vae.elbo_loss(small_params, batch, eps, 14.0)
        assert r2 == pytest.approx(2 * r1, rel=1e-12)
        assert k2 == pytest.approx(k1, rel=1e-12)

    def test_matches_straight_line_reimplementation(self):
        arch = vae.VaeArch(input_dim=3, hidden=(5,), latent_dim=2)
        p = vae.init_params(arch, seed=21)
        rng = np.random.default_rng(22)
        batch = rng.standard_normal((4, 3))
        eps = rng.standard_normal((4, 2))
        c = 3.5
        total, recon, kl = vae.elbo_loss(p, batch, eps, c)

        # independent straight-line evaluation
        recon_ref = kl_ref = 0.0
        for row in range(4):
            h = np.tanh(batch[row] @ p.enc_w[0] + p.enc_b[0])
            mu = h @ p.mu_w + p.mu_b
            ls = h @ p.logsig_w + p.logsig_b
            z = mu + np.exp(ls) * eps[row]
            g = np.tanh(z @ p.dec_w[0] + p.dec_b[0])
            xh = g @ p.dec_w[1] + p.dec_b[1]
            recon_ref += c * np.sum((batch[row] - xh) ** 2)
            kl_ref += 0.5 * np.sum(np.exp(2 * ls) + mu ** 2 - 1.0 - 2 * ls)
        assert recon == pytest.approx(recon_ref / 4, abs=1e-12)
        assert kl == pytest.approx(kl_ref / 4, abs=1e-12)
        assert total == pytest.approx((recon_ref + kl_ref) / 4, abs=1e-12)

    def test_row_permutation_invariance(self, small_params):
        rng = np.random.default_rng(23)
        batch = rng.standard_normal((8, 4))
        eps = rng.standard_normal((8, 2))
        perm = rng.permutation(8)
        t1, _, _ = vae.elbo_loss(small_params, batch, eps, 5.0)
        t2, _, _ = vae.elbo_loss(small_params, batch[perm], eps[perm], 5.0)
        assert t1 == pytest.approx(t2, rel=1e-12)


def finite_difference_grad(params, batch, eps, c, h=1e-5):
    flat = params.flatten()
    out = np.empty_like(flat)
    for i in range(flat.size):
        up = flat.copy()
        up[i] += h
        dn = flat.copy()
        dn[i] -= h
        lu, _, _ = vae.elbo_loss(params.with_flat(up), batch, eps, c)
        ld, _, _ = vae.elbo_loss(params.with_flat(dn), batch, eps, c)
        out[i] = (lu - ld) / (2 * h)
    return out


class TestGrad:
    def test_matches_finite_differences(self):
        arch = vae.VaeArch(input_dim=4, hidden=(6,), latent_dim=2)
        for seed in range(3):
            p = vae.init_params(arch, seed=seed)
            rng = np.random.default_rng(30 + seed)
            batch = rng.standard_normal((8, 4))
            eps = rng.standard_normal((8, 2))
            analytic = vae.grad(p, batch, eps, 2.0).flatten()
            numeric = finite_difference_grad(p, batch, eps, 2.0)
            rel = np.abs(analytic - numeric) / np.maximum(np.abs(numeric), 1e-8)
            assert rel.max() < 1e-4

    def test_recon_gradient_linear_in_c(self, small_params):
        rng = np.random.default_rng(33)
        batch = rng.standard_normal((5, 4))
        eps = rng.standard_normal((5, 2))
        # decoder weights receive only the reconstruction signal
        g1 = vae.grad(small_params, batch, eps, 1.0)
        g2 = vae.grad(small_params, batch, eps, 2.0)
        np.testing.assert_allclose(g2.dec_w[-1], 2.0 * g1.dec_w[-1], rtol=1e-12)

    def test_stationary_point(self):
        # zero-initialized network on zero data sits at a gradient zero
        arch = vae.VaeArch(input_dim=3, hidden=(4,), latent_dim=2)
        p = zeroed(vae.init_params(arch, seed=0), ("enc_", "mu_", "logsig_", "dec_"))
        g = vae.grad(p, np.zeros((6, 3)), np.zeros((6, 2)), 5.0)
        assert np.max(np.abs(g.flatten())) < 1e-14


# ---------------------------------------------------------------------------
# train


class TestTrain:
    def data(self, n=96):
        rng = np.random.default_rng(40)
        cov = np.array([[1.0, 0.7, 0.2, 0.0],
                        [0.7, 1.0, 0.2, 0.0],
                        [0.2, 0.2, 1.0, 0.1],
                        [0.0, 0.0, 0.1, 1.0]])
        return rng.multivariate_normal(np.zeros(4), cov, size=n)

    def test_zero_epochs_identity(self, small_params):
        cfg = vae.TrainConfig(epochs=0, batch_size=16)
        out, hist = vae.train(small_params, self.data(), cfg)
        np.testing.assert_array_equal(out.flatten(), small_params.flatten())
        assert len(hist) == 0

    def test_loss_decreases(self, small_params):
        cfg = vae.TrainConfig(epochs=60, batch_size=32, learning_rate=1e-3,
                              optimizer="adam", recon_coefficient=10.0, seed=2)
        _, hist = vae.train(small_params, self.data(), cfg)
        assert hist.train_loss[-1] < hist.train_loss[0]

    def test_deterministic(self, small_params):
        cfg = vae.TrainConfig(epochs=5, batch_size=32, seed=9)
        a, ha = vae.train(small_params, self.data(), cfg)
        b, hb = vae.train(small_params, self.data(), cfg)
        np.testing.assert_array_equal(a.flatten(), b.flatten())
        np.testing.assert_array_equal(ha.train_loss, hb.train_loss)

    def test_validation_recorded(self, small_params):
        cfg = vae.TrainConfig(epochs=3, batch_size=16, validation_fraction=0.25)
        _, hist = vae.train(small_params, self.data(), cfg)
        assert np.all(np.isfinite(hist.val_loss))

    def test_too_few_rows(self, small_params):
        cfg = vae.TrainConfig(epochs=1, batch_size=64)
        with pytest.raises(ValueError):
            vae.train(small_params, self.data(32), cfg)

    def test_history_lengths(self, small_params):
        cfg = vae.TrainConfig(epochs=4, batch_size=16)
        _, hist = vae.train(small_params, self.data(), cfg)
        assert len(hist.train_loss) == len(hist.val_loss) == len(hist.kl) \
            == len(hist.recon) == 4


# ---------------------------------------------------------------------------
# sampling and serialization


class TestSampleStandardized:
    def test_single_draw_is_decoded_eps(self, small_params):
        out = vae.sample_standardized(small_params, 1, seed=77)
        eps = np.random.default_rng(77).standard_normal((1, 2))
        lat = vae.LatentGaussian(mu=np.zeros(2), sigma=np.ones(2))
        z = vae.reparameterize(lat, eps[0])
        np.testing.assert_array_equal(out[0], vae.decode(small_params, z))

    def test_zero_decoder_gives_zero_rows(self, small_params):
        p = zeroed(small_params, ("dec_",))
        out = vae.sample_standardized(p, 5, seed=1)
        np.testing.assert_array_equal(out, np.zeros((5, 4)))

    def test_n_zero_rejected(self, small_params):
        with pytest.raises(ValueError):
            vae.sample_standardized(small_params, 0, seed=1)

    def test_learns_two_asset_correlation(self):
        # a 1-D latent can only match the data correlation by bending the
        # decoder manifold, which takes real training time at this size
        rng = np.random.default_rng(50)
        cov = np.array([[1.0, 0.8], [0.8, 1.0]])
        data = rng.multivariate_normal(np.zeros(2), cov, size=3000)
        arch = vae.VaeArch(input_dim=2, hidden=(32, 32), latent_dim=1)
        params = vae.init_params(arch, seed=3)
        cfg = vae.TrainConfig(epochs=400, batch_size=32, learning_rate=3e-3,
                              optimizer="adam", recon_coefficient=100.0, seed=4)
        trained, _ = vae.train(params, data, cfg)
        sample = vae.sample_standardized(trained, 10_000, seed=5)
        corr = np.corrcoef(sample, rowvar=False)[0, 1]
        assert abs(corr - 0.8) < 0.1


class TestSerialization:
    def test_round_trip(self, small_params, tmp_path):
        path = tmp_path / "params.json"
        vae.save_params(small_params, path)
        loaded = vae.load_params(path)
        np.testing.assert_array_equal(loaded.flatten(), small_params.flatten())
        assert loaded.arch == small_params.arch

    def test_version_checked(self, small_params, tmp_path):
        import json
        path = tmp_path / "params.json"
        vae.save_params(small_params, path)
        doc = json.loads(path.read_text())
        doc["format_version"] = 99
        path.write_text(json.dumps(doc))
        with pytest.raises(ValueError):
            vae.load_params(path)
