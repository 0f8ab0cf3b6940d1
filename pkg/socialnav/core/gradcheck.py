# -*- coding: utf-8 -*-

"""Central finite difference checks against autograd."""

import logging
from dataclasses import dataclass, field

import torch
from torch import nn

LOGGER = logging.getLogger(__name__)


@dataclass
class GradCheckReport:
    tol: float
    errors: dict = field(default_factory=dict)

    @property
    def max_error(self):
        return max(self.errors.values(), default=0.0)

    @property
    def passed(self):
        return self.max_error < self.tol

    def failures(self):
        return {name: error for name, error in self.errors.items() if error >= self.tol}


def _named(params):
    if isinstance(params, nn.Module):
        return list(params.named_parameters())

    if isinstance(params, dict):
        return list(params.items())

    return [('param_{}'.format(index), param) for index, param in enumerate(params)]


def _loss_value(loss_fn):
    loss = loss_fn()
    if not torch.isfinite(loss).all():
        raise ValueError('Gradient check got a non-finite loss: {}'.format(loss))

    return loss


def relative_error(analytic, numeric, atol=1e-7):
    """``||a - n|| / max(||a||, ||n||)``, or 0 when both are negligible."""
    scale = max(analytic.norm().item(), numeric.norm().item())
    if scale < atol:
        return 0.0

    return (analytic - numeric).norm().item() / scale


def grad_check(loss_fn, params, tol=1e-4, eps=1e-5, atol=1e-7):
    """Compare autograd gradients of ``loss_fn`` with central differences.

    Args:
        loss_fn (callable):
            Zero-argument function returning a scalar tensor built from ``params``.
        params (nn.Module, dict or list):
            Tensors to perturb. Should be double precision.
        tol (float):
            Maximum accepted relative error per parameter tensor.
        eps (float):
            Finite difference step.

    Returns:
        GradCheckReport
    """
    named = _named(params)
    for name, param in named:
        if param.dtype != torch.float64:
            LOGGER.warning('Gradient check on %s in %s, expect loose agreement',
                           name, param.dtype)

    loss = _loss_value(loss_fn)
    tensors = [param for _, param in named]
    grads = torch.autograd.grad(loss, tensors, allow_unused=True)

    report = GradCheckReport(tol=tol)
    with torch.no_grad():
        for (name, param), grad in zip(named, grads):
            analytic = torch.zeros_like(param) if grad is None else grad.detach()
            numeric = torch.zeros_like(param)
            flat_param = param.data.view(-1)
            flat_numeric = numeric.view(-1)
            for index in range(flat_param.numel()):
                original = flat_param[index].item()
                flat_param[index] = original + eps
                plus = _loss_value(loss_fn).item()
                flat_param[index] = original - eps
                minus = _loss_value(loss_fn).item()
                flat_param[index] = original
                flat_numeric[index] = (plus - minus) / (2 * eps)

            report.errors[name] = relative_error(analytic, numeric, atol)

    if not report.passed:
        LOGGER.info('Gradient check failed for %s', sorted(report.failures()))

    return report
