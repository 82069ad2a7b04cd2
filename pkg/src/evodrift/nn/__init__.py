"""Minimal neural stack: parameter bundles, layers with hand-derived
gradients, Adam, perturbation, and the fixed training composites."""

from .composites import (WindowFrame, composite_grad, masked_ce_grad,
                         reconstruction_eval, reconstruction_grad,
                         window_eval, window_grad)
from .layers import (LstmState, attention_backward, attention_forward,
                     bce_with_logits, feature_decode, gat_embed, gcn_backward,
                     gcn_forward, loss_bce, loss_mse, lstm_step,
                     masked_cross_entropy, pair_logits, sigmoid, softplus,
                     structure_decode)
from .optim import AdamState, adam_update, perturb
from .params import (ParamBundle, decoder_bundle, extractor_bundle,
                     gcn_bundle, load_params, predictor_bundle, save_params,
                     split_components, uniform_init)

__all__ = [
    "ParamBundle", "LstmState", "AdamState", "WindowFrame",
    "uniform_init", "gcn_bundle", "extractor_bundle", "predictor_bundle",
    "decoder_bundle", "save_params", "load_params", "split_components",
    "gcn_forward", "gcn_backward", "attention_forward", "attention_backward",
    "gat_embed", "structure_decode", "pair_logits", "feature_decode",
    "lstm_step", "loss_mse", "loss_bce", "bce_with_logits",
    "masked_cross_entropy", "sigmoid", "softplus",
    "adam_update", "perturb",
    "reconstruction_grad", "reconstruction_eval", "window_grad",
    "window_eval", "masked_ce_grad", "composite_grad",
]
