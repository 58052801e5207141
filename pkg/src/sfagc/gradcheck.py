"""Finite-difference verification of the backward pass.

Three scopes: "layer" checks one graph-convolution layer with every one
of its parameter tensors (biases enabled so those appear too), "pool"
checks the pooling, propagation, and set-abstraction layers, and
"model" checks complete classification and segmentation networks end to
end through their training losses.  Layer scope perturbs every element;
the wider scopes spot-check a fixed random subset of elements per
tensor, which keeps the whole suite well under a minute.

Comparisons use central differences (h = 1e-5) against tape gradients;
a tensor passes when the worst relative error stays below the
tolerance.  The corrupt hook deliberately biases one named analytic
gradient so the failure path itself is testable.
"""

from __future__ import annotations

import time
from dataclasses import dataclass

import numpy as np

from .autodiff import Tensor, backward
from .errors import InvalidArgument
from .graphs import PointSet
from .layer import SfagcConfig, SfagcLayer
from .models import Network, hierarchical_loss, micro_classification_spec, micro_segmentation_spec
from .pooling import FpsPoolLayer, PropagationLayer, ScorePoolLayer, SetAbstractionLayer

__all__ = ["CheckRow", "run_gradcheck", "format_report", "GRADCHECK_SCOPES"]

GRADCHECK_SCOPES = ("layer", "pool", "model")

_H = 1e-5
_REL_FLOOR = 1e-6


@dataclass
class CheckRow:
    """One parameter tensor's comparison result."""

    name: str
    max_rel_err: float
    checked: int
    ok: bool


def _rel_err(num: float, ana: float) -> float:
    return abs(num - ana) / max(abs(num), abs(ana), _REL_FLOOR)


def _fd_at(f, theta: Tensor, flat_idx: int) -> float:
    flat = theta.data.reshape(-1)
    orig = flat[flat_idx]
    flat[flat_idx] = orig + _H
    fp = f()
    flat[flat_idx] = orig - _H
    fm = f()
    flat[flat_idx] = orig
    return (fp - fm) / (2.0 * _H)


def _check_params(f, params, tol, limit, rng, corrupt):
    """Compare tape gradients of scalar f() against central differences.

    limit caps the elements perturbed per tensor (None = all); corrupt
    names one tensor whose analytic gradient is biased first.
    """
    loss = f.loss()
    backward(loss, params)
    corrupted = False
    rows = []
    for p in params:
        grad = p.grad.copy()
        if corrupt is not None and p.name == corrupt:
            grad = grad + 0.05 * (1.0 + np.abs(grad))
            corrupted = True
        size = p.data.size
        if limit is None or size <= limit:
            idxs = np.arange(size)
        else:
            idxs = rng.choice(size, size=limit, replace=False)
        flat = grad.reshape(-1)
        worst = 0.0
        for i in idxs:
            worst = max(worst, _rel_err(_fd_at(f, p, int(i)), flat[int(i)]))
        rows.append(CheckRow(name=p.name, max_rel_err=worst, checked=len(idxs), ok=worst < tol))
    if corrupt is not None and not corrupted:
        raise InvalidArgument(f"gradcheck: no parameter named {corrupt!r} in this scope")
    return rows


class _Loss:
    """Scalar objective re-evaluated on demand; () gives the float."""

    def __init__(self, fn):
        self.loss = fn

    def __call__(self):
        return self.loss().item()


def _projection_loss(run, seed):
    # fixed projections make the loss sensitive to every output entry
    consts = {}

    def fn():
        out = run()
        total = None
        for key, t in out.items():
            if key not in consts:
                consts[key] = Tensor(np.random.default_rng(seed + len(consts)).standard_normal(t.shape))
            term = (t * consts[key]).sum()
            total = term if total is None else total + term
        return total

    return _Loss(fn)


def _layer_cases():
    rng = np.random.default_rng(101)
    cfg = SfagcConfig(
        c_in=3, f_in=5, f_out=6, k=4, c_out=4, coord_update="mlp", bias=True
    )
    layer = SfagcLayer(cfg, rng, prefix="layer.")
    xyz = rng.standard_normal((12, 3))
    feats = rng.standard_normal((12, 5))
    pts = PointSet(coords=xyz, feats=feats)

    def run():
        out = layer(pts)
        return {"feats": out.feats, "coords": out.coords}

    yield _projection_loss(run, 7), layer.parameters()


def _pool_cases():
    rng = np.random.default_rng(202)
    xyz = rng.standard_normal((12, 3))

    cfg = SfagcConfig(c_in=5, f_in=5, f_out=6, k=4, c_out=4, coord_update="mlp")
    score = ScorePoolLayer(cfg, t=6, rng=rng, merge_width=6, prefix="score_pool.")
    feats = rng.standard_normal((12, 5))
    sp_in = PointSet(coords=feats, feats=feats)

    def run_score():
        out = score(sp_in)
        return {"feats": out.feats, "coords": out.coords}

    yield _projection_loss(run_score, 11), score.parameters()

    fcfg = SfagcConfig(c_in=3, f_in=5, f_out=6, k=4, coord_update="identity")
    fps = FpsPoolLayer(fcfg, t=6, rng=rng, prefix="fps_pool.")
    fp_in = PointSet(coords=xyz, feats=rng.standard_normal((12, 5)))

    def run_fps():
        out = fps(fp_in)
        return {"feats": out.feats}

    yield _projection_loss(run_fps, 13), fps.parameters()

    prop = PropagationLayer(4, 3, 5, rng, prefix="propagation.")
    src = PointSet(coords=rng.standard_normal((5, 3)), feats=Tensor(rng.standard_normal((5, 4)), requires_grad=True, name="propagation.src_feats"))
    dst_xyz = rng.standard_normal((12, 3))
    skip = Tensor(rng.standard_normal((12, 3)), requires_grad=True, name="propagation.skip_feats")

    def run_prop():
        return {"feats": prop(src, dst_xyz, skip)}

    yield _projection_loss(run_prop, 17), prop.parameters() + [src.feats, skip]

    sa = SetAbstractionLayer(4, 3, ((0.8, 6, (3, 5)), (1.6, 8, (3, 4))), rng, prefix="set_abstraction.")
    sa_in = PointSet(coords=xyz, feats=xyz.copy())

    def run_sa():
        out = sa(sa_in)
        return {"feats": out.feats}

    yield _projection_loss(run_sa, 19), sa.parameters()


def _model_cases():
    rng = np.random.default_rng(303)
    xyz = rng.standard_normal((12, 3))
    pts = PointSet(coords=xyz, feats=xyz.copy())

    cls = Network(micro_classification_spec(), np.random.default_rng(31))
    yield _Loss(lambda: hierarchical_loss(cls.forward(pts, label=1))), cls.parameters()

    seg = Network(micro_segmentation_spec(), np.random.default_rng(32))
    labels = np.random.default_rng(33).integers(0, 2, size=12)
    yield _Loss(lambda: hierarchical_loss(seg.forward(pts, label=labels))), seg.parameters()


_SCOPE_CASES = {"layer": (_layer_cases, None), "pool": (_pool_cases, 24), "model": (_model_cases, 12)}


def run_gradcheck(scope: str, tol: float = 1e-4, corrupt: str | None = None):
    """Run one scope's comparisons; returns (rows, all_ok, seconds)."""
    if scope not in GRADCHECK_SCOPES:
        raise InvalidArgument(f"gradcheck: scope must be one of {GRADCHECK_SCOPES}, got {scope!r}")
    cases, limit = _SCOPE_CASES[scope]
    rng = np.random.default_rng(42)
    started = time.monotonic()
    rows = []
    seen_corrupt = None
    for f, params in cases():
        names = {p.name for p in params}
        hook = corrupt if corrupt in names else None
        if hook:
            seen_corrupt = hook
        rows += _check_params(f, params, tol, limit, rng, hook)
    if corrupt is not None and seen_corrupt is None:
        raise InvalidArgument(f"gradcheck: no parameter named {corrupt!r} in scope {scope!r}")
    elapsed = time.monotonic() - started
    return rows, all(r.ok for r in rows), elapsed


def format_report(scope: str, rows, ok: bool, elapsed: float) -> str:
    width = max(len(r.name) for r in rows)
    lines = [f"gradient check, scope {scope}: {len(rows)} parameter tensors"]
    for r in rows:
        status = "PASS" if r.ok else "FAIL"
        lines.append(
            f"  {status}  {r.name:<{width}}  max rel err {r.max_rel_err:.3e}  ({r.checked} elements)"
        )
    lines.append(f"{'all passed' if ok else 'FAILURES PRESENT'} in {elapsed:.1f}s")
    return "\n".join(lines)
