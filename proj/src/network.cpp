#include "senslab/network.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace senslab {

void Network::validate() const {
    if (layers.empty())
        throw std::invalid_argument("Network: no layers");
    for (std::size_t i = 0; i < layers.size(); ++i) {
        const DenseLayer& l = layers[i];
        if (l.weights.rank() != 2)
            throw std::invalid_argument("Network: weights must be rank 2");
        if (l.bias.rank() != 1 || l.bias.dim(0) != l.out_width())
            throw std::invalid_argument("Network: bias shape mismatch");
        if (i > 0 && l.in_width() != layers[i - 1].out_width())
            throw std::invalid_argument("Network: layer widths do not chain");
    }
    if (layers.back().activation != Activation::Identity)
        throw std::invalid_argument("Network: final layer must be Identity");
}

Network make_network(const std::vector<std::size_t>& widths, RngStream rng) {
    if (widths.size() < 2)
        throw std::invalid_argument("make_network: need at least input and output widths");
    Network net;
    for (std::size_t i = 0; i + 1 < widths.size(); ++i) {
        std::size_t in = widths[i], out = widths[i + 1];
        bool last = (i + 2 == widths.size());
        DenseLayer layer;
        layer.activation = last ? Activation::Identity : Activation::ReLU;
        layer.weights = Tensor::matrix(in, out);
        layer.bias = Tensor({out});
        RngStream layer_rng = rng.derive("layer").derive(static_cast<std::uint64_t>(i));
        double stddev = last ? std::sqrt(2.0 / static_cast<double>(in + out))
                             : std::sqrt(2.0 / static_cast<double>(in));
        for (double& w : layer.weights.data()) w = stddev * layer_rng.normal();
        net.layers.push_back(std::move(layer));
    }
    net.validate();
    return net;
}

namespace {

void affine_forward(const DenseLayer& layer, const Tensor& in, Tensor& pre) {
    std::size_t n_in = layer.in_width(), n_out = layer.out_width();
    pre = Tensor({n_out});
    for (std::size_t c = 0; c < n_out; ++c) pre[c] = layer.bias[c];
    for (std::size_t i = 0; i < n_in; ++i) {
        double v = in[i];
        if (v == 0.0) continue;
        for (std::size_t c = 0; c < n_out; ++c)
            pre[c] += v * layer.weights.at(i, c);
    }
}

Tensor activate(const DenseLayer& layer, const Tensor& pre) {
    if (layer.activation == Activation::Identity) return pre;
    Tensor post = pre;
    for (double& v : post.data()) v = std::max(0.0, v);
    return post;
}

int argmax_lowest(const Tensor& t) {
    int best = 0;
    for (std::size_t i = 1; i < t.size(); ++i)
        if (t[i] > t[best]) best = static_cast<int>(i);
    return best;
}

ForwardTrace run_forward(const Network& net, const Tensor& x,
                         std::optional<std::size_t> neuron, double delta) {
    if (x.rank() != 1 || x.dim(0) != net.input_width())
        throw std::invalid_argument("forward: input shape does not match first layer");
    ForwardTrace trace;
    trace.input = x;
    trace.per_layer_pre.reserve(net.layers.size());
    trace.per_layer_post.reserve(net.layers.size());
    const Tensor* current = &x;
    for (std::size_t li = 0; li < net.layers.size(); ++li) {
        bool last = (li + 1 == net.layers.size());
        if (last) {
            Tensor features = *current;
            if (neuron) features[*neuron] += delta;
            trace.features = std::move(features);
            current = &trace.features;
        }
        Tensor pre;
        affine_forward(net.layers[li], *current, pre);
        trace.per_layer_pre.push_back(pre);
        trace.per_layer_post.push_back(activate(net.layers[li], pre));
        current = &trace.per_layer_post.back();
    }
    trace.logits = trace.per_layer_post.back();
    trace.predicted_class = argmax_lowest(trace.logits);
    return trace;
}

} // namespace

ForwardTrace forward(const Network& net, const Tensor& x) {
    return run_forward(net, x, std::nullopt, 0.0);
}

ForwardTrace forward_perturbed(const Network& net, const Tensor& x,
                               std::size_t neuron, double delta) {
    if (neuron >= net.feature_count())
        throw std::invalid_argument("forward_perturbed: neuron index out of range");
    return run_forward(net, x, neuron, delta);
}

Tensor softmax(const Tensor& logits) {
    double m = logits[0];
    for (double v : logits.data()) m = std::max(m, v);
    Tensor out(logits.shape());
    double sum = 0.0;
    for (std::size_t i = 0; i < logits.size(); ++i) {
        out[i] = std::exp(logits[i] - m);
        sum += out[i];
    }
    for (double& v : out.data()) v /= sum;
    return out;
}

double cross_entropy_loss(const Tensor& logits, int label) {
    if (label < 0 || static_cast<std::size_t>(label) >= logits.size())
        throw std::invalid_argument("cross_entropy_loss: label out of range");
    double m = logits[0];
    for (double v : logits.data()) m = std::max(m, v);
    double sum = 0.0;
    for (double v : logits.data()) sum += std::exp(v - m);
    return std::log(sum) - (logits[label] - m);
}

bool GradientBundle::is_finite() const {
    for (const Tensor& t : weight_grads)
        if (!t.is_finite()) return false;
    for (const Tensor& t : bias_grads)
        if (!t.is_finite()) return false;
    return input_gradient.is_finite();
}

void GradientBundle::add_scaled(const GradientBundle& other, double factor) {
    for (std::size_t li = 0; li < weight_grads.size(); ++li) {
        for (std::size_t i = 0; i < weight_grads[li].size(); ++i)
            weight_grads[li][i] += factor * other.weight_grads[li][i];
        for (std::size_t i = 0; i < bias_grads[li].size(); ++i)
            bias_grads[li][i] += factor * other.bias_grads[li][i];
    }
    for (std::size_t i = 0; i < input_gradient.size(); ++i)
        input_gradient[i] += factor * other.input_gradient[i];
}

GradientBundle zero_gradients(const Network& net) {
    GradientBundle g;
    for (const DenseLayer& l : net.layers) {
        g.weight_grads.emplace_back(l.weights.shape());
        g.bias_grads.emplace_back(l.bias.shape());
    }
    g.input_gradient = Tensor({net.input_width()});
    return g;
}

namespace {

void check_trace_matches(const Network& net, const ForwardTrace& trace) {
    if (trace.per_layer_pre.size() != net.layers.size() ||
        trace.per_layer_post.size() != net.layers.size())
        throw std::invalid_argument("backward: trace does not match network depth");
    for (std::size_t li = 0; li < net.layers.size(); ++li)
        if (trace.per_layer_pre[li].size() != net.layers[li].out_width())
            throw std::invalid_argument("backward: trace width mismatch at layer " +
                                        std::to_string(li));
    if (trace.input.size() != net.input_width())
        throw std::invalid_argument("backward: trace input width mismatch");
}

/// Core reverse sweep. `grad` enters as d(loss)/d(logits) and leaves each
/// iteration as d(loss)/d(previous activation). `features_seed`, when
/// given, is added to the gradient flowing out of the logits layer.
GradientBundle reverse_sweep(const Network& net, const ForwardTrace& trace,
                             Tensor grad, const Tensor* features_seed,
                             bool want_params) {
    GradientBundle g;
    if (want_params) g = zero_gradients(net);
    std::size_t depth = net.layers.size();
    for (std::size_t step = 0; step < depth; ++step) {
        std::size_t li = depth - 1 - step;
        const DenseLayer& layer = net.layers[li];
        bool last = (li + 1 == depth);
        // Through the activation of this layer's output.
        if (layer.activation == Activation::ReLU) {
            const Tensor& pre = trace.per_layer_pre[li];
            for (std::size_t c = 0; c < grad.size(); ++c)
                if (pre[c] <= 0.0) grad[c] = 0.0;
        }
        const Tensor& input_act =
            last ? trace.features
                 : (li == 0 ? trace.input : trace.per_layer_post[li - 1]);
        if (want_params) {
            Tensor& wg = g.weight_grads[li];
            for (std::size_t i = 0; i < layer.in_width(); ++i) {
                double a = input_act[i];
                if (a == 0.0) continue;
                for (std::size_t c = 0; c < layer.out_width(); ++c)
                    wg.at(i, c) += a * grad[c];
            }
            for (std::size_t c = 0; c < layer.out_width(); ++c)
                g.bias_grads[li][c] += grad[c];
        }
        // d(loss)/d(input activation of this layer)
        Tensor prev_grad({layer.in_width()});
        for (std::size_t i = 0; i < layer.in_width(); ++i) {
            double s = 0.0;
            for (std::size_t c = 0; c < layer.out_width(); ++c)
                s += layer.weights.at(i, c) * grad[c];
            prev_grad[i] = s;
        }
        if (last && features_seed) {
            if (features_seed->size() != prev_grad.size())
                throw std::invalid_argument("backward_custom: features seed shape mismatch");
            for (std::size_t i = 0; i < prev_grad.size(); ++i)
                prev_grad[i] += (*features_seed)[i];
        }
        grad = std::move(prev_grad);
    }
    if (want_params) g.input_gradient = std::move(grad);
    else {
        GradientBundle only;
        only.input_gradient = std::move(grad);
        return only;
    }
    return g;
}

} // namespace

GradientBundle backward(const Network& net, const ForwardTrace& trace, int label) {
    check_trace_matches(net, trace);
    if (label < 0 || static_cast<std::size_t>(label) >= net.class_count())
        throw std::invalid_argument("backward: label out of range");
    Tensor seed = softmax(trace.logits);
    seed[static_cast<std::size_t>(label)] -= 1.0;
    return reverse_sweep(net, trace, std::move(seed), nullptr, true);
}

GradientBundle backward_custom(const Network& net, const ForwardTrace& trace,
                               const Tensor& logits_seed,
                               const Tensor* features_seed) {
    check_trace_matches(net, trace);
    if (logits_seed.size() != net.class_count())
        throw std::invalid_argument("backward_custom: logits seed shape mismatch");
    return reverse_sweep(net, trace, logits_seed, features_seed, true);
}

Tensor input_gradient(const Network& net, const ForwardTrace& trace,
                      const Tensor& logits_seed) {
    check_trace_matches(net, trace);
    if (logits_seed.size() != net.class_count())
        throw std::invalid_argument("input_gradient: logits seed shape mismatch");
    return reverse_sweep(net, trace, logits_seed, nullptr, false).input_gradient;
}

Network sgd_step(const Network& net, const GradientBundle& grads, double lr) {
    if (lr < 0.0) throw std::invalid_argument("sgd_step: negative learning rate");
    if (!grads.is_finite())
        throw std::invalid_argument("sgd_step: non-finite gradients");
    Network out = net;
    for (std::size_t li = 0; li < out.layers.size(); ++li) {
        Tensor& w = out.layers[li].weights;
        const Tensor& wg = grads.weight_grads[li];
        for (std::size_t i = 0; i < w.size(); ++i) w[i] -= lr * wg[i];
        Tensor& b = out.layers[li].bias;
        const Tensor& bg = grads.bias_grads[li];
        for (std::size_t i = 0; i < b.size(); ++i) b[i] -= lr * bg[i];
    }
    return out;
}

Network adam_step(const Network& net, const GradientBundle& grads,
                  AdamState& state, const AdamHyperparams& hp) {
    if (hp.lr < 0.0) throw std::invalid_argument("adam_step: negative learning rate");
    if (!grads.is_finite())
        throw std::invalid_argument("adam_step: non-finite gradients");
    if (state.m_weights.empty()) {
        for (const DenseLayer& l : net.layers) {
            state.m_weights.emplace_back(l.weights.shape());
            state.v_weights.emplace_back(l.weights.shape());
            state.m_bias.emplace_back(l.bias.shape());
            state.v_bias.emplace_back(l.bias.shape());
        }
    }
    state.step += 1;
    double bc1 = 1.0 - std::pow(hp.beta1, static_cast<double>(state.step));
    double bc2 = 1.0 - std::pow(hp.beta2, static_cast<double>(state.step));
    Network out = net;
    auto update = [&](Tensor& param, const Tensor& grad, Tensor& m, Tensor& v) {
        for (std::size_t i = 0; i < param.size(); ++i) {
            m[i] = hp.beta1 * m[i] + (1.0 - hp.beta1) * grad[i];
            v[i] = hp.beta2 * v[i] + (1.0 - hp.beta2) * grad[i] * grad[i];
            double mhat = m[i] / bc1;
            double vhat = v[i] / bc2;
            param[i] -= hp.lr * mhat / (std::sqrt(vhat) + hp.epsilon);
        }
    };
    for (std::size_t li = 0; li < out.layers.size(); ++li) {
        update(out.layers[li].weights, grads.weight_grads[li],
               state.m_weights[li], state.v_weights[li]);
        update(out.layers[li].bias, grads.bias_grads[li],
               state.m_bias[li], state.v_bias[li]);
    }
    return out;
}

} // namespace senslab
