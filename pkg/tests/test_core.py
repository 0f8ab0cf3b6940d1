"""Tests for `socialnav.core` package."""
import math
from unittest import TestCase

import numpy as np
import pytest
import torch
from torch import nn

from socialnav.core import (
    AttentionLayer, LrSchedule, NonFiniteGradientError, ParamStore, ResidualBlock, ResidualFFN,
    TrainingDivergedError, adamw_step, cosine_lr, cosine_similarity, grad_check, gru_step,
    load_checkpoint, save_checkpoint, softmax_ce, train_model)
from socialnav.core.checkpoint import load_module_tensors, module_tensors


def _weights(shape, seed=0):
    generator = torch.Generator().manual_seed(seed)
    return torch.randn(*shape, generator=generator, dtype=torch.float64)


class TestAttentionLayer(TestCase):

    def setUp(self):
        torch.manual_seed(0)
        self.layer = AttentionLayer(8, 2).double()

    def test_output_shape(self):
        queries = torch.randn(3, 8, dtype=torch.float64)
        keys = torch.randn(5, 8, dtype=torch.float64)

        assert self.layer(queries, keys).shape == (3, 8)
        assert self.layer(queries[None], keys[None]).shape == (1, 3, 8)

    def test_key_permutation_invariance(self):
        queries = torch.randn(2, 4, 8, dtype=torch.float64)
        keys = torch.randn(2, 6, 8, dtype=torch.float64)
        order = torch.randperm(6)

        expected = self.layer(queries, keys)
        permuted = self.layer(queries, keys[:, order])

        torch.testing.assert_close(permuted, expected)

    def test_padding_mask_ignores_padded_keys(self):
        queries = torch.randn(1, 2, 8, dtype=torch.float64)
        keys = torch.randn(1, 4, 8, dtype=torch.float64)
        mask = torch.tensor([[False, False, True, True]])

        masked = self.layer(queries, keys, mask)
        truncated = self.layer(queries, keys[:, :2])

        torch.testing.assert_close(masked, truncated)

    def test_heads_must_divide_channels(self):
        with pytest.raises(ValueError):
            AttentionLayer(10, 3)

    def test_width_mismatch(self):
        with pytest.raises(ValueError):
            self.layer(torch.randn(2, 8), torch.randn(2, 6))

    def test_gradients(self):
        queries = torch.randn(2, 3, 8, dtype=torch.float64, requires_grad=True)
        keys = torch.randn(2, 4, 8, dtype=torch.float64, requires_grad=True)
        weights = _weights((2, 3, 8))

        params = dict(self.layer.named_parameters(), queries=queries, keys=keys)
        report = grad_check(lambda: (self.layer(queries, keys) * weights).sum(), params)

        assert report.passed, report.failures()

    def test_zero_output_projection_is_layer_norm(self):
        nn.init.zeros_(self.layer.w_o.weight)
        nn.init.zeros_(self.layer.w_o.bias)
        queries = torch.randn(3, 8, dtype=torch.float64)
        keys = torch.randn(5, 8, dtype=torch.float64)

        expected = torch.nn.functional.layer_norm(queries, (8,), eps=1e-5)

        torch.testing.assert_close(self.layer(queries, keys), expected)

    def test_forward_is_deterministic(self):
        queries = torch.randn(2, 3, 8, dtype=torch.float64)
        keys = torch.randn(2, 4, 8, dtype=torch.float64)

        assert torch.equal(self.layer(queries, keys), self.layer(queries, keys))


def test_residual_ffn_zero_weights_is_layer_norm():
    ffn = ResidualFFN(6).double()
    nn.init.zeros_(ffn.w_2.weight)
    nn.init.zeros_(ffn.w_2.bias)
    inputs = torch.randn(4, 6, dtype=torch.float64)

    expected = torch.nn.functional.layer_norm(inputs, (6,), eps=1e-5)

    torch.testing.assert_close(ffn(inputs), expected)


def test_residual_ffn_is_deterministic():
    torch.manual_seed(3)
    ffn = ResidualFFN(6).double()
    inputs = torch.randn(4, 6, dtype=torch.float64)

    assert torch.equal(ffn(inputs), ffn(inputs))


def test_residual_ffn_gradients():
    torch.manual_seed(1)
    ffn = ResidualFFN(6).double()
    inputs = torch.randn(4, 6, dtype=torch.float64, requires_grad=True)
    weights = _weights((4, 6), 1)

    params = dict(ffn.named_parameters(), inputs=inputs)
    report = grad_check(lambda: (ffn(inputs) * weights).sum(), params)

    assert report.passed, report.failures()


def test_residual_block_shape():
    block = ResidualBlock(5)

    assert block(torch.randn(3, 5)).shape == (3, 5)


def test_gru_step_gradients():
    torch.manual_seed(2)
    cell = nn.GRUCell(3, 4).double()
    hidden = torch.randn(4, dtype=torch.float64, requires_grad=True)
    inputs = torch.randn(3, dtype=torch.float64, requires_grad=True)
    weights = _weights((4,), 2)

    params = dict(cell.named_parameters(), hidden=hidden, inputs=inputs)
    report = grad_check(lambda: (gru_step(cell, hidden, inputs) * weights).sum(), params)

    assert report.passed, report.failures()
    assert gru_step(cell, hidden, inputs).shape == (4,)


def test_gru_step_zero_parameters_keep_zero_state():
    cell = nn.GRUCell(3, 4).double()
    for param in cell.parameters():
        nn.init.zeros_(param)

    hidden = gru_step(cell, torch.zeros(4, dtype=torch.float64),
                      torch.randn(3, dtype=torch.float64))

    assert torch.equal(hidden, torch.zeros(4, dtype=torch.float64))


def test_gru_step_width_mismatch():
    cell = nn.GRUCell(3, 4)

    with pytest.raises(ValueError):
        gru_step(cell, torch.zeros(5), torch.zeros(3))


def test_softmax_ce_uniform_logits():
    loss = softmax_ce(torch.zeros(4, 5, dtype=torch.float64), [0, 1, 2, 3])

    assert loss.item() == pytest.approx(math.log(5), abs=1e-9)


def test_softmax_ce_confident_logit():
    logits = torch.zeros(2, 4, dtype=torch.float64)
    logits[0, 1] = 50.0
    logits[1, 3] = 50.0

    assert softmax_ce(logits, [1, 3]).item() < 1e-10


def test_softmax_ce_gradient():
    logits = _weights((3, 4), 4).requires_grad_()
    labels = [2, 0, 3]

    softmax_ce(logits, labels).backward()

    one_hot = torch.zeros(3, 4, dtype=torch.float64)
    one_hot[[0, 1, 2], labels] = 1.0
    expected = (torch.softmax(logits.detach(), dim=1) - one_hot) / 3
    torch.testing.assert_close(logits.grad, expected)


def test_softmax_ce_label_out_of_range():
    with pytest.raises(ValueError):
        softmax_ce(torch.zeros(2, 3), [0, 3])


def test_cosine_similarity():
    assert cosine_similarity(torch.tensor([1.0, 0.0]), torch.tensor([2.0, 0.0])).item() == 1.0

    with pytest.raises(ValueError):
        cosine_similarity(torch.zeros(2), torch.ones(2))


def test_cosine_lr_endpoints():
    schedule = LrSchedule(1e-3, 100, 1e-5)

    assert cosine_lr(schedule, 0) == pytest.approx(1e-3, abs=1e-15)
    assert cosine_lr(schedule, 100) == pytest.approx(1e-5, abs=1e-18)
    assert cosine_lr(schedule, 50) == pytest.approx(0.5 * (1e-3 + 1e-5))

    with pytest.raises(ValueError):
        cosine_lr(schedule, 101)


def test_adamw_step_rejects_non_finite_gradients():
    layer = nn.Linear(2, 1)
    store = ParamStore(layer, lr=0.1)
    before = layer.weight.detach().clone()
    layer.weight.grad = torch.full_like(layer.weight, float('nan'))

    with pytest.raises(NonFiniteGradientError):
        adamw_step(store, 0.1, 0.0)

    torch.testing.assert_close(layer.weight.detach(), before)


def test_adamw_step_decays_without_gradients():
    layer = nn.Linear(2, 1)
    nn.init.ones_(layer.weight)
    store = ParamStore(layer, lr=0.1, weight_decay=0.5)

    adamw_step(store, 0.1, 0.5)

    torch.testing.assert_close(layer.weight.detach(), torch.full((1, 2), 0.95))


def test_adamw_step_zero_gradient_without_decay():
    layer = nn.Linear(2, 1).double()
    before = [param.detach().clone() for param in layer.parameters()]
    store = ParamStore(layer, lr=0.1, weight_decay=0.0)
    for param in layer.parameters():
        param.grad = torch.zeros_like(param)

    adamw_step(store, 0.1, 0.0)

    for param, original in zip(layer.parameters(), before):
        assert torch.equal(param.detach(), original)


def test_adamw_step_single_scalar():
    theta = torch.ones(1, dtype=torch.float64, requires_grad=True)
    store = ParamStore({'theta': theta}, lr=0.1, weight_decay=0.01)
    theta.grad = torch.ones(1, dtype=torch.float64)

    adamw_step(store, 0.1, 0.01)

    # decay 1 - lr * wd, then m_hat = 1 and v_hat = 1 after bias correction
    decayed = 1.0 * (1 - 0.1 * 0.01)
    expected = decayed - 0.1 * 1.0 / (math.sqrt(1.0) + 1e-8)
    assert theta.item() == pytest.approx(expected, abs=1e-12)
    assert store.steps == 1


def test_grad_check_quadratic():
    theta = _weights((5,), 5).requires_grad_()

    report = grad_check(lambda: (theta ** 2).sum(), {'theta': theta})

    assert report.passed
    assert report.max_error < 1e-8


def test_grad_check_reports_wrong_gradients():
    theta = _weights((5,), 6).requires_grad_()

    def loss_fn():
        # the second term is zero, but adds 5 to every autograd gradient
        return (theta ** 2).sum() + (5 * (theta - theta.detach())).sum()

    report = grad_check(loss_fn, {'theta': theta})

    assert not report.passed
    assert list(report.failures()) == ['theta']


def test_grad_check_non_finite_loss():
    theta = torch.ones(2, dtype=torch.float64, requires_grad=True)

    with pytest.raises(ValueError):
        grad_check(lambda: (theta * float('inf')).sum(), {'theta': theta})


def test_param_store_is_sorted():
    module = nn.Sequential(nn.Linear(2, 2), nn.Linear(2, 1))
    names = [name for name, _ in ParamStore(module)]

    assert names == sorted(names)


def test_checkpoint_save_load(tmp_path):
    path = str(tmp_path / 'model.h5')
    module = nn.Linear(3, 2)

    save_checkpoint(path, module_tensors(module), {'width': 3}, {'words': ['a', 'b']})
    tensors, metadata, strings = load_checkpoint(path)

    assert metadata == {'width': 3}
    assert strings == {'words': ['a', 'b']}
    other = nn.Linear(3, 2)
    load_module_tensors(other, tensors)
    torch.testing.assert_close(other.weight, module.weight)


def test_checkpoint_missing(tmp_path):
    with pytest.raises(FileNotFoundError):
        load_checkpoint(str(tmp_path / 'missing.h5'))


def _regression_loss(model, batch):
    inputs = torch.tensor([[sample[0]] for sample in batch], dtype=torch.float32)
    targets = torch.tensor([[sample[1]] for sample in batch], dtype=torch.float32)
    return ((model(inputs) - targets) ** 2).mean()


def test_train_model_reduces_loss():
    torch.manual_seed(0)
    model = nn.Linear(1, 1)
    samples = [(x, 2.0 * x + 1.0) for x in np.linspace(-1, 1, 20)]

    history = train_model(model, _regression_loss, samples, epochs=200, batch_size=5,
                          lr=0.05, weight_decay=0.0)

    assert list(history.columns) == ['epoch', 'train_loss', 'val_loss', 'lr']
    assert history['val_loss'].min() < 0.01
    assert history['val_loss'].iloc[-1] < history['train_loss'].iloc[0]


def test_train_model_early_stopping():
    model = nn.Linear(1, 1)
    samples = [(0.0, 0.0)] * 4

    history = train_model(model, lambda model, batch: model.weight.sum() * 0.0, samples,
                          epochs=10, batch_size=2, patience=2)

    assert len(history) == 3


def test_train_model_divergence():
    model = nn.Linear(1, 1)

    def loss_fn(model, batch):
        return model.weight.sum() * float('nan')

    with pytest.raises(TrainingDivergedError):
        train_model(model, loss_fn, [0, 1], epochs=1)


def test_train_model_empty():
    with pytest.raises(ValueError):
        train_model(nn.Linear(1, 1), _regression_loss, [])
