import json

from hypothesis import given, settings
from hypothesis import strategies as st
import numpy as np
import pytest

from affbench.errors import ShapeError
from affbench.gradkit import (
    MLP,
    AdamW,
    EarlyStopping,
    ParamSet,
    ReduceLROnPlateau,
    Tensor,
    backward,
    concat,
    current_tape,
    div,
    exp,
    gather,
    gradcheck,
    load_checkpoint,
    matmul,
    mean,
    mul,
    no_grad,
    save_checkpoint,
    scatter_sum,
    sigmoid,
    silu,
    sqrt,
    square,
    sub,
    sum_,
    transpose,
)


def leaf(rng, *shape, positive=False):
    v = rng.normal(size=shape)
    return Tensor(np.abs(v) + 0.5 if positive else v, requires_grad=True)


def test_silu_at_zero():
    x = Tensor(np.array([0.0]), requires_grad=True)
    y = silu(x)
    assert y.data[0] == 0.0
    backward(sum_(y))
    assert x.grad[0] == 0.5


def test_scatter_sum_example():
    out = scatter_sum(Tensor(np.array([1.0, 2.0, 3.0])), np.array([0, 0, 1]), 2)
    assert out.data.tolist() == [3.0, 3.0]


def test_square_gradient():
    x = Tensor(np.array(3.0), requires_grad=True)
    backward(square(x))
    assert x.grad == 6.0


def test_non_scalar_loss_raises():
    x = Tensor(np.ones(3), requires_grad=True)
    with pytest.raises(ShapeError):
        backward(mul(x, 2.0))
    current_tape().clear()


def test_non_grad_input_gets_no_buffer():
    x = Tensor(np.ones(3), requires_grad=True)
    c = Tensor(np.ones(3))
    backward(sum_(mul(x, c)))
    assert x.grad is not None and c.grad is None


def test_no_grad_records_nothing():
    x = Tensor(np.ones(3), requires_grad=True)
    with no_grad():
        y = mul(x, 2.0)
    assert not y.requires_grad and len(current_tape()) == 0


PRIMITIVES = {
    "add": lambda a, b: sum_(square(a + b)),
    "sub": lambda a, b: sum_(square(sub(a, b))),
    "mul": lambda a, b: sum_(mul(a, b)),
    "div": lambda a, b: sum_(div(a, b)),
    "matmul": lambda a, b: sum_(square(matmul(a, transpose(b)))),
    "concat": lambda a, b: sum_(square(concat([a, b], axis=-1))),
    "silu": lambda a, b: sum_(mul(silu(a), b)),
    "sigmoid": lambda a, b: sum_(mul(sigmoid(a), b)),
    "exp": lambda a, b: sum_(mul(exp(a), b)),
    "sqrt": lambda a, b: sum_(mul(sqrt(b), a)),
    "mean": lambda a, b: mean(square(mul(a, b))),
    "broadcast": lambda a, b: sum_(square(a + sum_(b, axis=0, keepdims=True))),
}


@pytest.mark.parametrize("name", sorted(PRIMITIVES))
def test_primitive_gradcheck(name, rng):
    a, b = leaf(rng, 4, 3), leaf(rng, 4, 3, positive=True)
    f = PRIMITIVES[name]
    assert gradcheck(lambda: f(a, b), [a, b]) < 1e-6


def test_gather_scatter_gradcheck(rng):
    a = leaf(rng, 5, 3)
    w = leaf(rng, 3, 3)
    idx = np.array([0, 2, 2, 4, 1, 0])
    seg = np.array([1, 0, 1, 2, 2, 0])

    def f():
        return sum_(square(scatter_sum(gather(a, idx) @ w, seg, 3)))

    assert gradcheck(f, [a, w]) < 1e-6


def test_mlp_gradcheck(rng):
    params = ParamSet()
    net = MLP(params, "mlp", [3, 5, 1], rng)
    for t in params.tensors():
        t.data = t.data + rng.normal(size=t.shape) * 0.1  # non-zero biases too
    x = Tensor(rng.normal(size=(6, 3)))
    y = rng.normal(size=(6, 1))
    assert gradcheck(lambda: mean(square(net(x) - y)), params.tensors(), step=1e-5) < 1e-6


def test_backward_deterministic(rng):
    a = leaf(rng, 8, 4)
    idx = rng.integers(0, 3, size=8)
    grads = []
    for _ in range(3):
        a.grad = None
        backward(sum_(square(scatter_sum(silu(a), idx, 3))))
        grads.append(a.grad.tobytes())
    assert len(set(grads)) == 1


# --- optimizer -------------------------------------------------------------


def _single(value=1.0, grad=1.0):
    p = Tensor(np.array([value]), requires_grad=True)
    p.grad = np.array([grad]) if grad is not None else None
    return ParamSet({"p": p}), p


def test_adamw_zero_grad_no_change():
    ps, p = _single(grad=0.0)
    AdamW(ps, lr=1e-3).step()
    assert p.data[0] == 1.0


def test_adamw_first_step():
    ps, p = _single()
    AdamW(ps, lr=1e-3).step()
    assert p.data[0] == pytest.approx(0.999, abs=1e-9)


def test_adamw_decoupled_decay():
    ps, p = _single()
    AdamW(ps, lr=1e-3, weight_decay=0.1).step()
    assert p.data[0] == pytest.approx(0.999 - 1e-3 * 0.1 * 1.0, abs=1e-9)


def test_adamw_rejects_bad_lr():
    ps, _ = _single()
    for lr in (0.0, -1e-3):
        with pytest.raises(ValueError):
            AdamW(ps, lr=lr)


def _adam_oracle(p, grads, lr, b1=0.9, b2=0.999, eps=1e-8):
    m = v = 0.0
    for t, g in enumerate(grads, start=1):
        m = b1 * m + (1 - b1) * g
        v = b2 * v + (1 - b2) * g * g
        p = p - lr * (m / (1 - b1**t)) / (np.sqrt(v / (1 - b2**t)) + eps)
    return p


@settings(max_examples=30)
@given(st.lists(st.floats(-5, 5, allow_nan=False), min_size=1, max_size=10), st.floats(-3, 3))
def test_adamw_without_decay_is_adam(grads, p0):
    ps, p = _single(value=p0)
    opt = AdamW(ps, lr=1e-2)
    for g in grads:
        p.grad = np.array([g])
        opt.step()
    assert p.data[0] == pytest.approx(_adam_oracle(p0, grads, 1e-2), abs=1e-12)


def test_plateau_single_reduction():
    ps, _ = _single()
    opt = AdamW(ps, lr=1.0)
    sched = ReduceLROnPlateau(opt, factor=0.5, patience=10)
    for _ in range(11):
        sched.step(1.0)
    assert sched.reductions == 1 and opt.lr == 0.5


def test_plateau_two_reductions():
    ps, _ = _single()
    opt = AdamW(ps, lr=1.0)
    sched = ReduceLROnPlateau(opt, factor=0.5, patience=10)
    for _ in range(21):
        sched.step(1.0)
    assert opt.lr == 0.25


def test_early_stopping():
    es = EarlyStopping(patience=3)
    stops = [es.step(v, k) for k, v in enumerate([3.0, 2.0, 2.0, 2.5, 2.1])]
    assert stops == [False, False, False, False, True]
    assert es.best_epoch == 1


# --- checkpoints -----------------------------------------------------------


def test_checkpoint_round_trip(tmp_path, rng):
    params = ParamSet()
    MLP(params, "m", [2, 3, 1], rng)
    manifest, blob = save_checkpoint(tmp_path / "ck", params, {"hidden": 3})
    state, hyper = load_checkpoint(tmp_path / "ck.json")
    assert hyper == {"hidden": 3}
    for k, t in params.items():
        assert state[k].tobytes() == t.data.tobytes()
    meta = json.loads(manifest.read_text())
    assert [e["name"] for e in meta["tensors"]] == params.names()
    raw = blob.read_bytes()
    assert len(raw) == 8 * params.num_values()
    first = params.tensors()[0].data.reshape(-1)[0]
    assert np.frombuffer(raw[:8], dtype="<f8")[0] == first


def test_load_state_shape_mismatch(rng):
    params = ParamSet()
    MLP(params, "m", [2, 3, 1], rng)
    state = params.state()
    state["m.0.weight"] = np.zeros((5, 5))
    with pytest.raises(ShapeError) as exc:
        params.load_state(state)
    assert "m.0.weight" in str(exc.value)
