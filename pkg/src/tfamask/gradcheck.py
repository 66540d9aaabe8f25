"""Finite-difference verification cases for every differentiable layer.

Each case packs a layer's inputs and parameters into one flat float64
vector, rebuilds them inside the probed function, and reduces the layer
output to a scalar through a fixed random projection, so grad_check
exercises the gradient with respect to every leaf at once. The full toy
network is probed at its actual initialization (anything else saturates
the sigmoids and makes the check vacuous) on a sampled coordinate subset
to bound runtime.
"""

from __future__ import annotations

import numpy as np

from . import attention, layers, model
from . import autodiff as ad
from .attention import TfaSpec
from .autodiff import Tensor

TOLERANCE = 1e-4


def _pack(rng, fn, leaves, out_shape, sample=None):
    """Concatenate float64 leaf arrays into one probe tensor; `fn` receives
    the rebuilt leaves and must return a Tensor of `out_shape`."""
    leaves = [np.asarray(a, dtype=np.float64) for a in leaves]
    shapes = [a.shape for a in leaves]
    sizes = [a.size for a in leaves]
    offsets = np.concatenate([[0], np.cumsum(sizes)])
    flat = np.concatenate([a.ravel() for a in leaves])
    proj = rng.standard_normal(out_shape)

    def f(x: Tensor) -> Tensor:
        pieces = [ad.reshape(ad.narrow(x, 0, int(offsets[i]), sizes[i]), shapes[i])
                  for i in range(len(leaves))]
        return ad.reduce_sum(ad.mul(fn(*pieces), Tensor(proj)))

    x0 = Tensor(flat, requires_grad=True, dtype=np.float64)
    return f, x0, sample


def _normal_leaves(rng, shapes):
    return [rng.standard_normal(s) for s in shapes]


def _conv_case(dilation, taps=3):
    def build(rng):
        L, c_in, c_out = 7 + int(rng.integers(4)), 3, 4
        shapes = [(L, c_in), (taps, c_in, c_out), (c_out,)]
        fn = lambda x, w, b: layers.conv1d_causal(x, w, b, dilation)
        return _pack(rng, fn, _normal_leaves(rng, shapes), (L, c_out))
    return build


def _conv_same_case(rng):
    L, c_in, c_out, taps = 9, 1, 2, 5
    fn = lambda x, w, b: layers.conv1d_same(x, w, b)
    shapes = [(L, c_in), (taps, c_in, c_out), (c_out,)]
    return _pack(rng, fn, _normal_leaves(rng, shapes), (L, c_out))


def _layer_norm_case(rng):
    L, c = 6, 5
    return _pack(rng, layers.layer_norm, _normal_leaves(rng, [(L, c), (c,), (c,)]), (L, c))


def _affine_case(rng):
    L, c_in, c_out = 5, 4, 3
    shapes = [(L, c_in), (c_in, c_out), (c_out,)]
    return _pack(rng, layers.affine, _normal_leaves(rng, shapes), (L, c_out))


def _pool_time_case(rng):
    L, c = 6, 4
    return _pack(rng, lambda x: ad.mean_over_axis(x, 0), _normal_leaves(rng, [(L, c)]), (1, c))


def _pool_channel_case(rng):
    L, c = 6, 4
    return _pack(rng, lambda x: ad.mean_over_axis(x, 1), _normal_leaves(rng, [(L, c)]), (L, 1))


def _branch_shapes(k, mid):
    return [(k, 1, mid), (mid,), (k, mid, 1), (1,)]


def _branch_case(which):
    def build(rng):
        L, d, k, mid = 6, 8, 5, 2
        shapes = [(L, d)] + _branch_shapes(k, mid)
        names = [".conv1.W", ".conv1.b", ".conv2.W", ".conv2.b"]

        def fn(y, *branch):
            params = {f"p.{which}{n}": t for n, t in zip(names, branch)}
            run = attention.ta_branch if which == "ta" else attention.fa_branch
            return run(y, params, "p")

        out_shape = (L, 1) if which == "ta" else (1, d)
        return _pack(rng, fn, _normal_leaves(rng, shapes), out_shape)
    return build


def _apply_case(rng):
    L, d, k, mid = 6, 8, 5, 1
    spec = TfaSpec(d_model=d, kernel_size=k, mid_channels=mid, variant="tfa")
    shapes = [(L, d)] + _branch_shapes(k, mid) * 2
    names = [f"p.tfa.{br}.conv{i}.{wb}" for br in ("ta", "fa")
             for i in (1, 2) for wb in ("W", "b")]

    def fn(y, *rest):
        params = dict(zip(names, rest))
        return attention.apply(y, spec, params, "p.tfa")

    return _pack(rng, fn, _normal_leaves(rng, shapes), (L, d))


def _toy_network_case(rng):
    cfg = model.ModelConfig(num_blocks=4, d_model=32, bottleneck=16,
                            attn=TfaSpec(d_model=32, variant="tfa"),
                            input_bins=257, output_bins=257)
    params = model.init_params(cfg, seed=int(rng.integers(2 ** 31)), dtype=np.float64)
    names = list(params)
    L = 6
    mag = np.abs(rng.standard_normal((L, 257)))
    leaves = [mag] + [params[n].data for n in names]

    def fn(x, *rest):
        return model.network_forward(x, cfg, dict(zip(names, rest)))

    return _pack(rng, fn, leaves, (L, 257), sample=200)


CASES = [
    ("conv1d_causal", _conv_case(dilation=1)),
    ("conv1d_causal_dilated", _conv_case(dilation=4)),
    ("conv1d_pointwise", _conv_case(dilation=1, taps=1)),
    ("conv1d_same", _conv_same_case),
    ("layer_norm", _layer_norm_case),
    ("affine", _affine_case),
    ("pool_time_axis", _pool_time_case),
    ("pool_channel_axis", _pool_channel_case),
    ("ta_branch", _branch_case("ta")),
    ("fa_branch", _branch_case("fa")),
    ("attention_apply", _apply_case),
    ("toy_network", _toy_network_case),
]


def run_case(build, seed: int, draws: int = 20) -> float:
    """Worst relative error across `draws` fresh random instances."""
    worst = 0.0
    for i in range(draws):
        rng = np.random.default_rng([seed, i])
        f, x0, sample = build(rng)
        err = ad.grad_check(f, x0, sample=sample,
                            rng=np.random.default_rng([seed, i, 1]))
        worst = max(worst, err)
    return worst


def run_all(seed: int = 0, draws: int = 20):
    """[(name, max_rel_err, passed)] for every case."""
    rows = []
    for name, build in CASES:
        err = run_case(build, seed, draws)
        rows.append((name, err, err < TOLERANCE))
    return rows
