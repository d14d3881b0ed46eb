#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include "senslab/rng.hpp"
#include "senslab/tensor.hpp"

namespace senslab {

enum class Activation { ReLU, Identity };

/// Fully connected layer, weights laid out [in x out] so that
/// weights.at(i, c) is the contribution of input i to output c.
struct DenseLayer {
    Tensor weights;
    Tensor bias;
    Activation activation = Activation::Identity;

    std::size_t in_width() const { return weights.dim(0); }
    std::size_t out_width() const { return weights.dim(1); }
};

/// Feed-forward dense classifier. The last layer must be Identity; its
/// outputs are the logits and its inputs are the feature activations.
struct Network {
    std::vector<DenseLayer> layers;

    std::size_t input_width() const { return layers.front().in_width(); }
    std::size_t class_count() const { return layers.back().out_width(); }
    std::size_t feature_count() const { return layers.back().in_width(); }
    const DenseLayer& logits_layer() const { return layers.back(); }

    /// Throws std::invalid_argument if layer widths do not chain or the
    /// final layer is not Identity.
    void validate() const;
};

/// Seeded construction: He-normal init for ReLU layers, Glorot-normal for
/// the final Identity layer, zero biases. `widths` lists every layer
/// width including input and output, e.g. {32, 64, 64, 10}.
Network make_network(const std::vector<std::size_t>& widths, RngStream rng);

/// Per-layer activations of one forward pass. `features` is the input to
/// the logits layer (post-activation of the penultimate layer, or the raw
/// input for a single-layer network); `logits` the final outputs.
struct ForwardTrace {
    Tensor input;
    std::vector<Tensor> per_layer_pre;
    std::vector<Tensor> per_layer_post;
    Tensor features;
    Tensor logits;
    int predicted_class = 0;
};

/// Gradients of a scalar loss w.r.t. every parameter and the input.
/// Shapes mirror the network exactly.
struct GradientBundle {
    std::vector<Tensor> weight_grads;
    std::vector<Tensor> bias_grads;
    Tensor input_gradient;

    bool is_finite() const;
    void add_scaled(const GradientBundle& other, double factor);
};

GradientBundle zero_gradients(const Network& net);

ForwardTrace forward(const Network& net, const Tensor& x);

/// Forward pass with `delta` added to feature `neuron` before the logits
/// layer. Logits shift by delta * W[neuron, .] relative to forward().
ForwardTrace forward_perturbed(const Network& net, const Tensor& x,
                               std::size_t neuron, double delta);

Tensor softmax(const Tensor& logits);

/// -log softmax(logits)[label], max-subtracted for stability.
double cross_entropy_loss(const Tensor& logits, int label);

/// Exact reverse-mode gradients of cross_entropy_loss(logits(x), label).
GradientBundle backward(const Network& net, const ForwardTrace& trace, int label);

/// Reverse mode seeded with an arbitrary upstream gradient at the logits
/// and, optionally, a second seed injected at the features. The optional
/// seed is what lets regularizers that touch z(x) directly share one
/// backward pass with the task loss.
GradientBundle backward_custom(const Network& net, const ForwardTrace& trace,
                               const Tensor& logits_seed,
                               const Tensor* features_seed = nullptr);

/// Gradient w.r.t. the input only (no parameter gradients); the cheap
/// path attack loops iterate on.
Tensor input_gradient(const Network& net, const ForwardTrace& trace,
                      const Tensor& logits_seed);

Network sgd_step(const Network& net, const GradientBundle& grads, double lr);

struct AdamState {
    std::vector<Tensor> m_weights, v_weights, m_bias, v_bias;
    long step = 0;
};

struct AdamHyperparams {
    double lr = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double epsilon = 1e-8;
};

Network adam_step(const Network& net, const GradientBundle& grads,
                  AdamState& state, const AdamHyperparams& hp);

} // namespace senslab
