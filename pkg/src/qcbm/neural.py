"""Small feed-forward networks with hand-written backprop, plus Adam.

Two architectures are used: a scorer (discriminator) ending in a sigmoid,
and a feature mapper that stops at a 2-unit BatchNorm. The scorer's
penultimate output is the same 2-unit feature layer.
"""

import json
from pathlib import Path

import numpy as np

NET_FORMAT_VERSION = 1
BN_EPS = 1e-5
BN_MOMENTUM = 0.1


class Linear:
    kind = "linear"

    def __init__(self, n_in, n_out, rng=None):
        rng = np.random.default_rng(rng)
        bound = 1.0 / np.sqrt(n_in)
        self.W = rng.uniform(-bound, bound, size=(n_in, n_out))
        self.b = np.zeros(n_out)
        self._x = None

    @property
    def params(self):
        return [self.W, self.b]

    def forward(self, x, train):
        self._x = x
        return x @ self.W + self.b

    def backward(self, grad):
        self.grads = [self._x.T @ grad, grad.sum(axis=0)]
        return grad @ self.W.T


class BatchNorm:
    kind = "batchnorm"

    def __init__(self, dim):
        self.gamma = np.ones(dim)
        self.beta = np.zeros(dim)
        self.running_mean = np.zeros(dim)
        self.running_var = np.ones(dim)
        self._cache = None

    @property
    def params(self):
        return [self.gamma, self.beta]

    def forward(self, x, train):
        if train:
            m = x.shape[0]
            mu = x.mean(axis=0)
            var = x.var(axis=0)
            inv_std = 1.0 / np.sqrt(var + BN_EPS)
            self.running_mean = (1 - BN_MOMENTUM) * self.running_mean + BN_MOMENTUM * mu
            unbiased = var * m / (m - 1) if m > 1 else var
            self.running_var = (1 - BN_MOMENTUM) * self.running_var + BN_MOMENTUM * unbiased
        else:
            mu = self.running_mean
            inv_std = 1.0 / np.sqrt(self.running_var + BN_EPS)
        xhat = (x - mu) * inv_std
        self._cache = (xhat, inv_std, train)
        return self.gamma * xhat + self.beta

    def backward(self, grad):
        xhat, inv_std, train = self._cache
        self.grads = [(grad * xhat).sum(axis=0), grad.sum(axis=0)]
        gx = grad * self.gamma
        if not train:
            return gx * inv_std
        m = grad.shape[0]
        return inv_std / m * (m * gx - gx.sum(axis=0) - xhat * (gx * xhat).sum(axis=0))


class ReLU:
    kind = "relu"
    params = []

    def forward(self, x, train):
        self._mask = x > 0
        return x * self._mask

    def backward(self, grad):
        self.grads = []
        return grad * self._mask


class Sigmoid:
    kind = "sigmoid"
    params = []

    def forward(self, x, train):
        self._y = 0.5 * (1.0 + np.tanh(0.5 * x))
        return self._y

    def backward(self, grad):
        self.grads = []
        return grad * self._y * (1.0 - self._y)


class MlpNet:
    """Sequential network. ``head`` is ``"scorer"`` or ``"features"``."""

    def __init__(self, input_dim, head="scorer", hidden=4, feature_dim=2, rng=None):
        if head not in ("scorer", "features"):
            raise ValueError(f"unknown head {head!r}")
        rng = np.random.default_rng(rng)
        self.input_dim = input_dim
        self.head = head
        self.hidden = hidden
        self.feature_dim = feature_dim
        self.layers = [
            Linear(input_dim, hidden, rng), BatchNorm(hidden), ReLU(),
            Linear(hidden, hidden, rng), BatchNorm(hidden), ReLU(),
            Linear(hidden, feature_dim, rng), BatchNorm(feature_dim),
        ]
        self.n_feature_layers = len(self.layers)
        if head == "scorer":
            self.layers += [Linear(feature_dim, 1, rng), Sigmoid()]
        self._stop = None

    def parameters(self):
        return [p for layer in self.layers for p in layer.params]

    def gradients(self):
        if self._stop is None or any(not hasattr(l, "grads") for l in self.layers[: self._stop]):
            raise RuntimeError("backward() must follow a forward() pass")
        return [g for layer in self.layers[: self._stop] for g in layer.grads] + [
            np.zeros_like(p) for layer in self.layers[self._stop :] for p in layer.params
        ]

    def forward(self, x, train=False, features=False):
        """Run the net on an ``(m, input_dim)`` batch.

        ``features=True`` stops at the 2-unit BatchNorm output. Scorer output
        is flattened to shape ``(m,)``.
        """
        x = np.asarray(x, dtype=np.float64)
        if x.ndim != 2 or x.shape[1] != self.input_dim:
            raise ValueError(f"expected input of shape (m, {self.input_dim}), got {x.shape}")
        stop = self.n_feature_layers if (features or self.head == "features") else len(self.layers)
        for layer in self.layers:
            if hasattr(layer, "grads"):
                del layer.grads
        out = x
        for layer in self.layers[:stop]:
            out = layer.forward(out, train)
        self._stop = stop
        return out[:, 0] if stop == len(self.layers) and self.head == "scorer" else out

    def features(self, x, train=False):
        return self.forward(x, train=train, features=True)

    def backward(self, upstream):
        """Backpropagate ``dL/d(output)`` of the last forward; returns dL/d(input)."""
        if self._stop is None:
            raise RuntimeError("backward() called before forward()")
        grad = np.asarray(upstream, dtype=np.float64)
        if grad.ndim == 1:
            grad = grad[:, None]
        for layer in reversed(self.layers[: self._stop]):
            grad = layer.backward(grad)
        return grad

    # -- persistence -------------------------------------------------------

    def state_arrays(self):
        arrays = {}
        for i, layer in enumerate(self.layers):
            if isinstance(layer, Linear):
                arrays[f"{i}.W"], arrays[f"{i}.b"] = layer.W, layer.b
            elif isinstance(layer, BatchNorm):
                arrays[f"{i}.gamma"], arrays[f"{i}.beta"] = layer.gamma, layer.beta
                arrays[f"{i}.running_mean"] = layer.running_mean
                arrays[f"{i}.running_var"] = layer.running_var
        return arrays

    def save(self, path):
        meta = {
            "version": NET_FORMAT_VERSION, "input_dim": self.input_dim, "head": self.head,
            "hidden": self.hidden, "feature_dim": self.feature_dim,
            "layers": [layer.kind for layer in self.layers],
        }
        with open(path, "wb") as fh:
            np.savez(fh, __meta__=np.array(json.dumps(meta)), **self.state_arrays())

    @classmethod
    def load(cls, path):
        with np.load(Path(path), allow_pickle=False) as data:
            meta = json.loads(str(data["__meta__"]))
            if meta.get("version") != NET_FORMAT_VERSION:
                raise ValueError(f"unsupported network format version {meta.get('version')}")
            net = cls(meta["input_dim"], meta["head"], meta["hidden"], meta["feature_dim"])
            for i, layer in enumerate(net.layers):
                for name in ("W", "b", "gamma", "beta", "running_mean", "running_var"):
                    key = f"{i}.{name}"
                    if key in data:
                        expected = getattr(layer, name).shape
                        if data[key].shape != expected:
                            raise ValueError(f"{key}: shape {data[key].shape} != {expected}")
                        setattr(layer, name, data[key].copy())
        return net

    def copy(self):
        clone = MlpNet(self.input_dim, self.head, self.hidden, self.feature_dim)
        for src, dst in zip(self.layers, clone.layers):
            for name in ("W", "b", "gamma", "beta", "running_mean", "running_var"):
                if hasattr(src, name):
                    setattr(dst, name, getattr(src, name).copy())
        return clone


def scorer_net(input_dim, rng=None):
    return MlpNet(input_dim, "scorer", rng=rng)


def feature_net(input_dim, rng=None):
    return MlpNet(input_dim, "features", rng=rng)


class Adam:
    """Adam with bias correction; updates a list of arrays in place."""

    def __init__(self, params, lr=1e-3, beta1=0.9, beta2=0.999, eps=1e-8):
        self.params = list(params)
        self.lr, self.beta1, self.beta2, self.eps = lr, beta1, beta2, eps
        self.m = [np.zeros_like(p) for p in self.params]
        self.v = [np.zeros_like(p) for p in self.params]
        self.t = 0

    def step(self, grads):
        grads = list(grads)
        if len(grads) != len(self.params):
            raise ValueError(f"expected {len(self.params)} gradients, got {len(grads)}")
        self.t += 1
        bc1 = 1.0 - self.beta1**self.t
        bc2 = 1.0 - self.beta2**self.t
        for p, g, m, v in zip(self.params, grads, self.m, self.v):
            g = np.asarray(g, dtype=np.float64)
            if g.shape != p.shape:
                raise ValueError(f"gradient shape {g.shape} != parameter shape {p.shape}")
            m *= self.beta1
            m += (1.0 - self.beta1) * g
            v *= self.beta2
            v += (1.0 - self.beta2) * g * g
            p -= self.lr * (m / bc1) / (np.sqrt(v / bc2) + self.eps)
        return self.params
