# -*- coding: utf-8 -*-

"""
Small sequential network substrate on numpy: dense, 1-D convolution and 1-D
transposed convolution layers, activations, exact backpropagation and an
adaptive-moment optimizer. Tensors carry a leading batch axis: (B, n) for
flat data and (B, channels, length) for sequences. All math is float64.
"""

import math
import logging
from dataclasses import dataclass

import numpy as np

from .errors import *

logger = logging.getLogger(__name__)


def _glorot(rng, shape, fan_in, fan_out):
    limit = math.sqrt(6.0 / (fan_in + fan_out))
    return rng.uniform(-limit, limit, size=shape)


class Layer:

    """ base layer: parameter-free identity """

    kind = 'layer'

    def params(self):
        return []

    def forward(self, x):
        return x, None

    def backward(self, cache, gy):
        return [], gy

    def describe(self):
        return dict(kind=self.kind)

    def __str__(self):
        return self.kind


class Dense (Layer):

    kind = 'dense'

    def __init__(self, n_in, n_out, rng=None, init='glorot'):
        self.n_in, self.n_out, self.init = int(n_in), int(n_out), init
        self.b = np.zeros(self.n_out)
        if init == 'zeros':
            self.W = np.zeros((self.n_in, self.n_out))
        else:
            self.W = _glorot(rng, (self.n_in, self.n_out), self.n_in, self.n_out)

    def params(self):
        return [self.W, self.b]

    def forward(self, x):
        if x.ndim != 2 or x.shape[1] != self.n_in:
            raise ShapeError("expects (B, {}), got {}".format(self.n_in, x.shape))
        return x @ self.W + self.b, x

    def backward(self, x, gy):
        return [x.T @ gy, gy.sum(axis=0)], gy @ self.W.T

    def describe(self):
        return dict(kind=self.kind, n_in=self.n_in, n_out=self.n_out, init=self.init)

    def __str__(self):
        return "dense({}->{})".format(self.n_in, self.n_out)


class Conv1d (Layer):

    """ y[o, l] = b[o] + sum_{c,k} W[o, c, k] * x_padded[c, stride*l + k] """

    kind = 'conv1d'

    def __init__(self, in_ch, out_ch, kernel, stride=1, pad=0, rng=None, init='glorot'):
        self.in_ch, self.out_ch, self.kernel = int(in_ch), int(out_ch), int(kernel)
        self.stride, self.pad, self.init = int(stride), int(pad), init
        self.b = np.zeros(self.out_ch)
        shape = (self.out_ch, self.in_ch, self.kernel)
        if init == 'zeros':
            self.W = np.zeros(shape)
        else:
            self.W = _glorot(rng, shape, self.in_ch * self.kernel, self.out_ch * self.kernel)

    def params(self):
        return [self.W, self.b]

    def output_length(self, length):
        return (length + 2 * self.pad - self.kernel) // self.stride + 1

    def forward(self, x):
        if x.ndim != 3 or x.shape[1] != self.in_ch:
            raise ShapeError("expects (B, {}, L), got {}".format(self.in_ch, x.shape))
        length = x.shape[2]
        n_out = self.output_length(length)
        if n_out < 1:
            raise ShapeError("input length {} too short for kernel {}".format(length, self.kernel))
        xp = np.pad(x, ((0, 0), (0, 0), (self.pad, self.pad)))
        index = self.stride * np.arange(n_out)[:, None] + np.arange(self.kernel)[None, :]
        patches = xp[:, :, index]
        y = np.einsum('bclk,ock->bol', patches, self.W) + self.b[None, :, None]
        return y, (length, patches)

    def backward(self, cache, gy):
        length, patches = cache
        n_out = gy.shape[2]
        gW = np.einsum('bol,bclk->ock', gy, patches)
        gb = gy.sum(axis=(0, 2))
        gpatches = np.einsum('bol,ock->bclk', gy, self.W)
        gxp = np.zeros((gy.shape[0], self.in_ch, length + 2 * self.pad))
        span = self.stride * (n_out - 1) + 1
        for k in range(self.kernel):
            gxp[:, :, k:k + span:self.stride] += gpatches[:, :, :, k]
        return [gW, gb], gxp[:, :, self.pad:self.pad + length]

    def describe(self):
        return dict(kind=self.kind, in_ch=self.in_ch, out_ch=self.out_ch, kernel=self.kernel,
                    stride=self.stride, pad=self.pad, init=self.init)

    def __str__(self):
        return "conv1d({}->{}, k{}, s{})".format(self.in_ch, self.out_ch, self.kernel, self.stride)


class ConvTranspose1d (Layer):

    """
    adjoint of Conv1d as a linear map: W has shape (in_ch, out_ch, kernel) and
    equals the weight of the conv1d(out_ch -> in_ch) it transposes;
    output_padding extends the output at the end
    """

    kind = 'deconv1d'

    def __init__(self, in_ch, out_ch, kernel, stride=1, pad=0, output_padding=0, rng=None, init='glorot'):
        self.in_ch, self.out_ch, self.kernel = int(in_ch), int(out_ch), int(kernel)
        self.stride, self.pad, self.output_padding, self.init = int(stride), int(pad), int(output_padding), init
        self.b = np.zeros(self.out_ch)
        shape = (self.in_ch, self.out_ch, self.kernel)
        if init == 'zeros':
            self.W = np.zeros(shape)
        else:
            self.W = _glorot(rng, shape, self.in_ch * self.kernel, self.out_ch * self.kernel)

    def params(self):
        return [self.W, self.b]

    def output_length(self, length):
        return self.stride * (length - 1) + self.kernel - 2 * self.pad + self.output_padding

    def forward(self, x):
        if x.ndim != 3 or x.shape[1] != self.in_ch:
            raise ShapeError("expects (B, {}, L), got {}".format(self.in_ch, x.shape))
        length = x.shape[2]
        n_out = self.output_length(length)
        if n_out < 1:
            raise ShapeError("output length would be {}".format(n_out))
        full = np.zeros((x.shape[0], self.out_ch, self.stride * (length - 1) + self.kernel + self.output_padding))
        span = self.stride * (length - 1) + 1
        for k in range(self.kernel):
            full[:, :, k:k + span:self.stride] += np.einsum('bcl,co->bol', x, self.W[:, :, k])
        y = full[:, :, self.pad:self.pad + n_out] + self.b[None, :, None]
        return y, (x, full.shape[2])

    def backward(self, cache, gy):
        x, full_length = cache
        length = x.shape[2]
        gfull = np.zeros((gy.shape[0], self.out_ch, full_length))
        gfull[:, :, self.pad:self.pad + gy.shape[2]] = gy
        span = self.stride * (length - 1) + 1
        gW = np.empty_like(self.W)
        gx = np.zeros_like(x)
        for k in range(self.kernel):
            g = gfull[:, :, k:k + span:self.stride]
            gW[:, :, k] = np.einsum('bcl,bol->co', x, g)
            gx += np.einsum('bol,co->bcl', g, self.W[:, :, k])
        return [gW, gy.sum(axis=(0, 2))], gx

    def describe(self):
        return dict(kind=self.kind, in_ch=self.in_ch, out_ch=self.out_ch, kernel=self.kernel,
                    stride=self.stride, pad=self.pad, output_padding=self.output_padding, init=self.init)

    def __str__(self):
        return "deconv1d({}->{}, k{}, s{})".format(self.in_ch, self.out_ch, self.kernel, self.stride)


class Activation (Layer):

    kind = 'activation'
    FUNCTIONS = ('relu', 'tanh', 'identity')

    def __init__(self, name):
        if name not in self.FUNCTIONS:
            raise DataError("unknown activation [{}]".format(name))
        self.name = name

    def forward(self, x):
        if self.name == 'relu':
            return np.maximum(x, 0.0), x > 0
        if self.name == 'tanh':
            y = np.tanh(x)
            return y, y
        return x, None

    def backward(self, cache, gy):
        if self.name == 'relu':
            return [], gy * cache
        if self.name == 'tanh':
            return [], gy * (1 - cache ** 2)
        return [], gy

    def describe(self):
        return dict(kind=self.kind, name=self.name)

    def __str__(self):
        return self.name


class Reshape (Layer):

    """ reshape the non-batch axes; (-1,) flattens """

    kind = 'reshape'

    def __init__(self, shape):
        self.shape = tuple(int(s) for s in shape)

    def forward(self, x):
        try:
            return x.reshape((x.shape[0],) + self.shape), x.shape
        except ValueError:
            raise ShapeError("cannot reshape {} to (B, {})".format(x.shape, self.shape))

    def backward(self, shape, gy):
        return [], gy.reshape(shape)

    def describe(self):
        return dict(kind=self.kind, shape=list(self.shape))

    def __str__(self):
        return "reshape{}".format(self.shape)


LAYERS = {cls.kind: cls for cls in (Dense, Conv1d, ConvTranspose1d, Activation, Reshape)}


class Cache:

    """ intermediates of one forward pass; valid for a single backward on the same parameters """

    def __init__(self, network, entries):
        self.network = network
        self.version = network.version
        self.entries = entries
        self.consumed = False


class Network:

    """ fixed sequence of layers with exact reverse-mode gradients """

    def __init__(self, layers, check_finite=False):
        self.layers = list(layers)
        self.check_finite = check_finite
        self.version = 0

    def params(self):
        return [p for layer in self.layers for p in layer.params()]

    @property
    def parameter_count(self):
        return int(sum(p.size for p in self.params()))

    def forward(self, x):
        entries = []
        for i, layer in enumerate(self.layers):
            try:
                x, cache = layer.forward(x)
            except ShapeError as e:
                raise ShapeError("layer {} ({}): {}".format(i, layer, e)) from None
            if self.check_finite and not np.all(np.isfinite(x)):
                raise NumericalError("non-finite output at layer {} ({})".format(i, layer))
            entries.append(cache)
        return x, Cache(self, entries)

    def backward(self, cache, gy):
        """ returns (gradients aligned with params(), input gradient) """
        if cache.network is not self or cache.version != self.version or cache.consumed:
            raise StaleCacheError("cache does not belong to the current parameters of this network")
        cache.consumed = True
        grads = []
        for layer, entry in zip(reversed(self.layers), reversed(cache.entries)):
            layer_grads, gy = layer.backward(entry, gy)
            grads = layer_grads + grads
        return grads, gy

    def __call__(self, x):
        return self.forward(x)[0]

    def update(self, grads, state):
        optimizer_step(self.params(), grads, state)
        self.version += 1

    def load_params(self, arrays):
        params = self.params()
        if len(arrays) != len(params):
            raise ShapeError("expected {} parameter arrays, got {}".format(len(params), len(arrays)))
        for p, a in zip(params, arrays):
            if p.shape != np.shape(a):
                raise ShapeError("parameter shape {} does not match {}".format(np.shape(a), p.shape))
            p[...] = a
        self.version += 1

    def describe(self):
        return [layer.describe() for layer in self.layers]

    @classmethod
    def from_description(cls, description, rng=None):
        layers = []
        for entry in description:
            entry = dict(entry)
            kind = entry.pop('kind')
            if kind not in LAYERS:
                raise FormatError("unknown layer kind [{}]".format(kind))
            if kind in ('dense', 'conv1d', 'deconv1d'):
                entry['rng'] = rng if rng is not None else np.random.default_rng(0)
            layers.append(LAYERS[kind](**entry))
        return cls(layers)

    def __str__(self):
        return " -> ".join(str(layer) for layer in self.layers)


def forward(net, x):
    return net.forward(x)


def backward(net, cache, output_gradient):
    return net.backward(cache, output_gradient)


@dataclass
class OptimizerState:

    """ adaptive-moment accumulators shaped like the parameters """

    m: list
    v: list
    step: int = 0
    learning_rate: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    epsilon: float = 1e-8

    @classmethod
    def fresh(cls, params, learning_rate=1e-3, **kwargs):
        return cls([np.zeros_like(p) for p in params], [np.zeros_like(p) for p in params],
                   learning_rate=learning_rate, **kwargs)


def optimizer_step(params, grads, state):
    """ bias-corrected adaptive-moment update, applied in place """
    if len(params) != len(grads) or len(params) != len(state.m):
        raise ShapeError("parameters, gradients and optimizer state do not line up")
    state.step += 1
    correction1 = 1 - state.beta1 ** state.step
    correction2 = 1 - state.beta2 ** state.step
    for p, g, m, v in zip(params, grads, state.m, state.v):
        if p.shape != g.shape:
            raise ShapeError("gradient shape {} does not match parameter {}".format(g.shape, p.shape))
        m *= state.beta1
        m += (1 - state.beta1) * g
        v *= state.beta2
        v += (1 - state.beta2) * g * g
        p -= state.learning_rate * (m / correction1) / (np.sqrt(v / correction2) + state.epsilon)
    return params, state
