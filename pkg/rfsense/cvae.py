# -*- coding: utf-8 -*-

"""
Conditional variational autoencoder emulating the diffraction prior.

The encoder maps (normalized profile, normalized condition) to the mean and
log-variance of a Gaussian over the latent code z; the decoder maps
(z, condition) back to a normalized profile. The latent prior is N(0, I_Z)
for every condition. Training minimizes the negative beta-weighted ELBO
with a Gaussian decoder likelihood of fixed scale recon_sigma.
"""

import math
import logging
import warnings
from dataclasses import dataclass, asdict

import numpy as np

from .errors import *
from .nn import Network, Dense, Conv1d, ConvTranspose1d, Activation, Reshape, OptimizerState, optimizer_step
from .geometry import TargetState
from .diffraction import AttenuationProfile

logger = logging.getLogger(__name__)

CONDITION_SIZE = len(TargetState.FIELDS)
LOG_VAR_LIMIT = 10.0


def build_encoder(F, Z, activation='relu', rng=None, zero_head=True):
    return Network([
        Dense(F + CONDITION_SIZE, 256, rng), Activation(activation),
        Reshape((16, 16)),
        Conv1d(16, 32, 3, stride=2, pad=1, rng=rng), Activation(activation),
        Conv1d(32, 64, 3, stride=2, pad=1, rng=rng), Activation(activation),
        Reshape((-1,)),
        Dense(256, 128, rng), Activation(activation),
        Dense(128, 2 * Z, rng, init='zeros' if zero_head else 'glorot'),
    ])


def build_decoder(F, Z, activation='relu', rng=None):
    return Network([
        Dense(Z + CONDITION_SIZE, 64, rng), Activation(activation),
        Reshape((16, 4)),
        ConvTranspose1d(16, 16, 3, stride=2, pad=1, output_padding=1, rng=rng), Activation(activation),
        ConvTranspose1d(16, 8, 3, stride=2, pad=1, output_padding=1, rng=rng), Activation(activation),
        Reshape((-1,)),
        Dense(128, F, rng),
    ])


class CvaeModel:

    """ encoder/decoder pair with latent size Z, KL weight beta and the training-set normalization """

    def __init__(self, F, Z=16, beta=0.05, normalization=None, recon_sigma=0.1, activation='relu',
                 rng=None, encoder=None, decoder=None, zero_head=True):
        if F < 1 or Z < 1:
            raise DomainError("model needs F >= 1 and Z >= 1, got F={} Z={}".format(F, Z))
        if beta < 0:
            raise DomainError("beta must be >= 0")
        if not recon_sigma > 0:
            raise DomainError("recon_sigma must be positive")
        if normalization is not None and normalization.F != F:
            raise DataError("normalization is for F={}, model has F={}".format(normalization.F, F))
        self.F, self.Z = int(F), int(Z)
        self.beta = float(beta)
        self.recon_sigma = float(recon_sigma)
        self.activation = activation
        self.normalization = normalization
        rng = rng if rng is not None else np.random.default_rng(0)
        self.encoder = encoder or build_encoder(self.F, self.Z, activation, rng, zero_head)
        self.decoder = decoder or build_decoder(self.F, self.Z, activation, rng)

    def params(self):
        return self.encoder.params() + self.decoder.params()

    @property
    def parameter_counts(self):
        return dict(encoder=self.encoder.parameter_count, decoder=self.decoder.parameter_count)

    def update(self, grads, state):
        optimizer_step(self.params(), grads, state)
        self.encoder.version += 1
        self.decoder.version += 1

    def load_params(self, arrays):
        n = len(self.encoder.params())
        self.encoder.load_params(arrays[:n])
        self.decoder.load_params(arrays[n:])

    def _check_batch(self, x, c):
        x = np.atleast_2d(np.asarray(x, dtype=float))
        c = np.atleast_2d(np.asarray(c, dtype=float))
        if x.shape[1] != self.F:
            raise ShapeError("profile length {} does not match model F={}".format(x.shape[1], self.F))
        if c.shape[1] != CONDITION_SIZE or c.shape[0] != x.shape[0]:
            raise ShapeError("conditions must be ({}, {}), got {}".format(x.shape[0], CONDITION_SIZE, c.shape))
        return x, c

    def encode(self, x, c):
        """ normalized batch -> (mu, clamped log-variance, raw log-variance, encoder cache) """
        x, c = self._check_batch(x, c)
        out, cache = self.encoder.forward(np.concatenate([x, c], axis=1))
        mu, raw = out[:, :self.Z], out[:, self.Z:]
        return mu, np.clip(raw, -LOG_VAR_LIMIT, LOG_VAR_LIMIT), raw, cache

    def decode(self, z, c):
        z = np.atleast_2d(np.asarray(z, dtype=float))
        c = np.atleast_2d(np.asarray(c, dtype=float))
        if z.shape[1] != self.Z:
            raise ShapeError("latent size {} does not match model Z={}".format(z.shape[1], self.Z))
        if c.shape[0] != z.shape[0]:
            c = np.broadcast_to(c, (z.shape[0], CONDITION_SIZE))
        return self.decoder(np.concatenate([z, c], axis=1))

    def reconstruct(self, x, c):
        """ decode(mu) for a normalized batch """
        mu, _, _, _ = self.encode(x, c)
        return self.decode(mu, c)

    def _normalized_condition(self, condition):
        if isinstance(condition, TargetState):
            condition = condition.as_vector()
        condition = np.asarray(condition, dtype=float)
        if self.normalization is None:
            return condition
        return self.normalization.condition(condition)

    def sample(self, condition, n, rng):
        """ (n, F) generated profiles in dB for a physical condition """
        if n <= 0:
            return np.empty((0, self.F))
        if self.normalization is None:
            raise DataError("model has no normalization statistics, it cannot emit profiles in dB")
        c = self._normalized_condition(condition).reshape(1, CONDITION_SIZE)
        z = rng.standard_normal((n, self.Z))
        return self.normalization.denormalize_profile(self.decode(z, c))

    def generate(self, condition, n, rng):
        state = condition if isinstance(condition, TargetState) else TargetState.from_vector(condition)
        return [AttenuationProfile(row, condition=state) for row in self.sample(condition, n, rng)]

    def descriptor(self):
        return dict(F=self.F, Z=self.Z, beta=self.beta, recon_sigma=self.recon_sigma, activation=self.activation,
                    encoder=self.encoder.describe(), decoder=self.decoder.describe())

    @classmethod
    def from_descriptor(cls, descriptor, normalization=None):
        return cls(descriptor['F'], descriptor['Z'], descriptor['beta'], normalization,
                   descriptor['recon_sigma'], descriptor['activation'],
                   encoder=Network.from_description(descriptor['encoder']),
                   decoder=Network.from_description(descriptor['decoder']))

    def __str__(self):
        counts = self.parameter_counts
        return "C-VAE F={} Z={} beta={:g} ({} encoder / {} decoder parameters)".format(
            self.F, self.Z, self.beta, counts['encoder'], counts['decoder'])


def reparameterize(mu, log_var, eps):
    """ z = mu + exp(log_var / 2) * eps """
    return np.asarray(mu) + np.exp(np.asarray(log_var) / 2) * np.asarray(eps)


def kl_standard_normal(mu, log_var):
    """ KL(N(mu, exp(log_var)) || N(0, I)) summed over the last axis """
    mu = np.asarray(mu, dtype=float)
    log_var = np.asarray(log_var, dtype=float)
    return 0.5 * np.sum(mu ** 2 + np.exp(log_var) - 1 - log_var, axis=-1)


def encode(model, profile, condition=None):
    """
    (mu, log_var) for one record or a batch; an AttenuationProfile and a
    TargetState are normalized with the model statistics, arrays are taken
    as normalized. Without a condition the profile's own state is used.
    """
    if isinstance(profile, AttenuationProfile):
        if condition is None:
            condition = profile.condition
        profile = model.normalization.profile(profile.values) if model.normalization is not None else profile.values
    if condition is None:
        raise DataError("no condition given for the profile")
    if isinstance(condition, TargetState):
        condition = model._normalized_condition(condition)
    single = np.ndim(profile) == 1
    mu, log_var, _, _ = model.encode(profile, condition)
    if single:
        return mu[0], log_var[0]
    return mu, log_var


def _loss_terms(model, x, c, eps):
    mu, log_var, raw, enc_cache = model.encode(x, c)
    eps = np.asarray(eps, dtype=float).reshape(mu.shape)
    z = reparameterize(mu, log_var, eps)
    xhat, dec_cache = model.decoder.forward(np.concatenate([z, c], axis=1))
    sigma = model.recon_sigma
    reconstruction = np.sum((x - xhat) ** 2, axis=1) / (2 * sigma ** 2) + model.F * math.log(sigma * math.sqrt(2 * math.pi))
    kl = kl_standard_normal(mu, log_var)
    loss = float(np.mean(reconstruction + model.beta * kl))
    return loss, (mu, log_var, raw, eps, xhat, enc_cache, dec_cache)


def loss(model, x, c, eps):
    """ negative beta-ELBO averaged over a normalized batch, no gradients """
    x, c = model._check_batch(x, c)
    return _loss_terms(model, x, c, eps)[0]


def elbo(model, x, c, eps):
    """
    negative beta-ELBO averaged over the batch and its gradients, aligned
    with model.params(); x and c are normalized, eps holds one standard
    normal Z-vector per record
    """
    x, c = model._check_batch(x, c)
    if x.shape[0] == 0:
        raise DataError("empty batch")
    value, (mu, log_var, raw, eps, xhat, enc_cache, dec_cache) = _loss_terms(model, x, c, eps)
    B = x.shape[0]

    g_xhat = -(x - xhat) / (model.recon_sigma ** 2 * B)
    dec_grads, g_in = model.decoder.backward(dec_cache, g_xhat)
    g_z = g_in[:, :model.Z]

    std = np.exp(log_var / 2)
    g_mu = g_z + model.beta * mu / B
    g_log_var = g_z * eps * std / 2 + model.beta * (np.exp(log_var) - 1) / (2 * B)
    g_log_var = g_log_var * ((raw > -LOG_VAR_LIMIT) & (raw < LOG_VAR_LIMIT))

    enc_grads, _ = model.encoder.backward(enc_cache, np.concatenate([g_mu, g_log_var], axis=1))
    return value, enc_grads + dec_grads


@dataclass
class TrainConfig:

    epochs: int = 200
    batch_size: int = 64
    learning_rate: float = 1e-3
    seed: int = 0
    beta: float = 0.05
    Z: int = 16
    patience: int = 20
    recon_sigma: float = 0.1
    activation: str = 'relu'
    validation_fraction: float = 0.1
    check_finite: bool = False

    def __post_init__(self):
        for name in ('epochs', 'batch_size', 'Z', 'patience'):
            if getattr(self, name) < 1:
                raise DomainError("{} must be a positive count".format(name))
        if not self.learning_rate > 0:
            raise DomainError("learning_rate must be positive")
        if self.beta < 0:
            raise DomainError("beta must be >= 0")
        if not 0 <= self.validation_fraction < 1:
            raise DomainError("validation_fraction must lie in [0, 1)")

    def to_dict(self):
        return asdict(self)


@dataclass(frozen=True)
class LossRecord:

    epoch: int
    train: float
    validation: float
    best: float


def train(dataset, cfg):
    """ fit a model on a TrainingSet; returns (model with best validation loss, loss history) """
    n = len(dataset)
    if n == 0:
        raise DataError("training set is empty")
    init_rng, split_rng, shuffle_rng, eps_rng, val_rng = np.random.default_rng(cfg.seed).spawn(5)

    model = CvaeModel(dataset.F, cfg.Z, cfg.beta, dataset.normalization, cfg.recon_sigma, cfg.activation, init_rng)
    model.encoder.check_finite = model.decoder.check_finite = cfg.check_finite
    logger.info("training {}".format(model))

    x, c = dataset.normalized()
    order = split_rng.permutation(n)
    n_val = int(n * cfg.validation_fraction) if n >= 10 else 0
    val_idx, train_idx = order[:n_val], order[n_val:]
    if n_val == 0:
        val_idx = train_idx
    val_eps = val_rng.standard_normal((val_idx.size, cfg.Z))

    batch_size = cfg.batch_size
    if batch_size > train_idx.size:
        warnings.warn("batch size {} exceeds the {} training records, using {}".format(
            batch_size, train_idx.size, train_idx.size), DataWarning)
        batch_size = train_idx.size

    state = OptimizerState.fresh(model.params(), cfg.learning_rate)
    best = math.inf
    best_params = [p.copy() for p in model.params()]
    history = []
    stale = 0

    for epoch in range(1, cfg.epochs + 1):
        perm = shuffle_rng.permutation(train_idx)
        total = 0.0
        for start in range(0, perm.size, batch_size):
            b = perm[start:start + batch_size]
            value, grads = elbo(model, x[b], c[b], eps_rng.standard_normal((b.size, cfg.Z)))
            if not math.isfinite(value):
                raise NumericalError("training loss diverged at epoch {}".format(epoch), epoch=epoch)
            model.update(grads, state)
            total += value * b.size
        train_loss = total / perm.size
        val_loss = loss(model, x[val_idx], c[val_idx], val_eps)
        if not math.isfinite(val_loss):
            raise NumericalError("validation loss diverged at epoch {}".format(epoch), epoch=epoch)

        if val_loss < best:
            best = val_loss
            best_params = [p.copy() for p in model.params()]
            stale = 0
        else:
            stale += 1
        history.append(LossRecord(epoch, train_loss, val_loss, best))
        logger.debug("epoch {}: train {:.4f} val {:.4f} best {:.4f}".format(epoch, train_loss, val_loss, best))

        if stale >= cfg.patience:
            logger.info("early stop at epoch {} (no improvement for {} epochs)".format(epoch, cfg.patience))
            break

    model.load_params(best_params)
    logger.info("best validation loss {:.4f} after {} epochs".format(best, len(history)))
    return model, history


def generate(model, condition, n, rng):
    """ n profiles for a physical condition: z ~ N(0, I), decoded and de-normalized to dB """
    return model.generate(condition, n, rng)
