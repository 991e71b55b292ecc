import numpy as np
import pytest

from efgn.autodiff import Tensor
from efgn.autodiff.params import ModelParams
from efgn.exceptions import ConfigError, NonFiniteLossError, ShapeError, SpectralNormError
from efgn.model import Discriminator, DiscriminatorConfig, discriminator_forward, spectral_normalize


@pytest.fixture
def micro_discriminator():
    return Discriminator(DiscriminatorConfig.micro(), ModelParams(), np.random.default_rng(0))


def test_scores_are_in_unit_interval(micro_discriminator, rng):
    clean = rng.uniform(0, 1, (3, 33, 9))
    other = rng.uniform(0, 1, (3, 33, 9))
    scores = discriminator_forward(clean, other, micro_discriminator)
    assert scores.shape == (3,)
    assert np.all(scores.data >= 0) and np.all(scores.data <= 1)


def test_eval_mode_is_deterministic(micro_discriminator, rng):
    clean = rng.uniform(0, 1, (2, 20, 9))
    first = discriminator_forward(clean, clean, micro_discriminator).data
    second = discriminator_forward(clean, clean, micro_discriminator).data
    np.testing.assert_array_equal(first, second)


def test_eval_mode_does_not_advance_power_iteration(micro_discriminator, rng):
    u_before = {k: b.copy() for k, b in micro_discriminator.params.buffers.items()}
    discriminator_forward(rng.uniform(0, 1, (1, 12, 9)), rng.uniform(0, 1, (1, 12, 9)), micro_discriminator)
    for name, value in micro_discriminator.params.buffers.items():
        np.testing.assert_array_equal(value, u_before[name])


def test_training_updates_converge_normalized_sigma(micro_discriminator, rng):
    x = rng.uniform(0, 1, (1, 12, 9))
    for _ in range(50):
        micro_discriminator(x, x, training=True, update_sn=True, rng=rng)
    for sigma in micro_discriminator.normalized_sigmas().values():
        assert sigma == pytest.approx(1.0, abs=1e-3)
    assert all(s > 0 for s in micro_discriminator.sigmas().values())


def test_discriminator_rejects_mismatched_inputs(micro_discriminator):
    with pytest.raises(ShapeError):
        micro_discriminator(np.ones((1, 12, 9)), np.ones((1, 12, 8)))
    with pytest.raises(ShapeError):
        micro_discriminator(np.ones((12, 9)), np.ones((12, 9)))


def test_spectral_normalize_known_matrix():
    weight = Tensor(np.diag([3.0, 1.0, 0.5]).reshape(3, 3, 1, 1))
    u = np.array([1.0, 1.0, 1.0]) / np.sqrt(3)
    sn = spectral_normalize(weight, u, iters=40)
    assert sn.sigma == pytest.approx(3.0, rel=1e-9)
    assert not sn.degenerate
    assert np.linalg.norm(sn.weight.data.reshape(3, 3), 2) == pytest.approx(1.0, rel=1e-9)


def test_spectral_normalize_without_update_keeps_vectors():
    weight = Tensor(np.arange(6.0).reshape(2, 3, 1, 1))
    u = np.array([0.6, 0.8])
    spectral_normalize(weight, u, update=False)
    np.testing.assert_array_equal(u, [0.6, 0.8])


def test_spectral_normalize_zero_weight_is_flagged():
    weight = Tensor(np.zeros((2, 3, 1, 1)))
    sn = spectral_normalize(weight, np.array([1.0, 0.0]))
    assert sn.degenerate
    assert sn.weight is weight
    with pytest.raises(ShapeError):
        spectral_normalize(weight, np.ones(3))


def test_discriminator_config_validation():
    with pytest.raises(ConfigError):
        DiscriminatorConfig(channels=(4,)).validate()
    with pytest.raises(ConfigError):
        DiscriminatorConfig(dropout=1.0).validate()
    assert DiscriminatorConfig.micro().output_extent(33, 9) == (9, 3)


def test_check_spectral_norms_reconverges_stale_vectors(micro_discriminator):
    conv = micro_discriminator.stages[0][0]
    conv.v[...] = -conv.v
    assert conv.normalized_sigma() < 0

    sigmas = micro_discriminator.check_spectral_norms()
    assert set(sigmas) == {"discriminator.conv.0", "discriminator.conv.1"}
    assert all(s == pytest.approx(1.0, abs=1e-2) for s in sigmas.values())
    assert conv.normalized_sigma() == pytest.approx(1.0, abs=1e-2)


def test_check_spectral_norms_errors(micro_discriminator, monkeypatch):
    conv = micro_discriminator.stages[1][0]
    conv.v[...] = -conv.v
    monkeypatch.setattr(conv, "reconverge", lambda iters=0: None)
    with pytest.raises(SpectralNormError, match="discriminator.conv.1"):
        micro_discriminator.check_spectral_norms()

    conv.u[...] = np.nan
    with pytest.raises(NonFiniteLossError, match="discriminator.conv.1.sigma"):
        micro_discriminator.check_spectral_norms()
