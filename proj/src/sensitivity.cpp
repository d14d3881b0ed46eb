#include "senslab/sensitivity.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

#include "senslab/parallel.hpp"

namespace senslab {

const SensitivityRecord& SensitivityMatrix::record(int input_id, int neuron) const {
    auto in_it = std::find(input_ids.begin(), input_ids.end(), input_id);
    if (in_it == input_ids.end())
        throw std::invalid_argument("SensitivityMatrix: unknown input_id");
    auto n_it = std::find(neurons.begin(), neurons.end(), neuron);
    if (n_it == neurons.end())
        throw std::invalid_argument("SensitivityMatrix: unknown neuron");
    std::size_t row = static_cast<std::size_t>(in_it - input_ids.begin());
    std::size_t col = static_cast<std::size_t>(n_it - neurons.begin());
    return records[row * neurons.size() + col];
}

bool SensitivityMatrix::has_input(int input_id) const {
    return std::find(input_ids.begin(), input_ids.end(), input_id) != input_ids.end();
}

double SensitivityMatrix::mean_abs_delta(int neuron) const {
    auto n_it = std::find(neurons.begin(), neurons.end(), neuron);
    if (n_it == neurons.end())
        throw std::invalid_argument("SensitivityMatrix: unknown neuron");
    std::size_t col = static_cast<std::size_t>(n_it - neurons.begin());
    double sum = 0.0;
    for (std::size_t row = 0; row < input_ids.size(); ++row)
        sum += std::abs(records[row * neurons.size() + col].min_delta);
    return sum / static_cast<double>(input_ids.size());
}

double delta_closed_form(const ForwardTrace& trace, const DenseLayer& logits_layer,
                         int y, int y_hat, std::size_t neuron) {
    if (y == y_hat)
        throw std::invalid_argument("delta_closed_form: target equals predicted class");
    if (trace.predicted_class != y)
        throw std::invalid_argument("delta_closed_form: trace prediction differs from y");
    std::size_t classes = logits_layer.out_width();
    if (y < 0 || y_hat < 0 || static_cast<std::size_t>(y) >= classes ||
        static_cast<std::size_t>(y_hat) >= classes)
        throw std::invalid_argument("delta_closed_form: class index out of range");
    if (neuron >= logits_layer.in_width())
        throw std::invalid_argument("delta_closed_form: neuron index out of range");
    double numerator = trace.logits[static_cast<std::size_t>(y)] -
                       trace.logits[static_cast<std::size_t>(y_hat)];
    double denominator = logits_layer.weights.at(neuron, static_cast<std::size_t>(y_hat)) -
                         logits_layer.weights.at(neuron, static_cast<std::size_t>(y));
    if (std::abs(denominator) <= kDenominatorTol) return kInfDelta;
    return numerator / denominator;
}

std::pair<double, int> delta_min(const ForwardTrace& trace, const DenseLayer& logits_layer,
                                 int y, std::size_t neuron) {
    double best = kInfDelta;
    int best_target = -1;
    int classes = static_cast<int>(logits_layer.out_width());
    for (int target = 0; target < classes; ++target) {
        if (target == y) continue;
        double d = delta_closed_form(trace, logits_layer, y, target, neuron);
        if (std::abs(d) < std::abs(best)) {
            best = d;
            best_target = target;
        }
    }
    return {best, best_target};
}

std::optional<double> delta_oracle(const Network& net, const Tensor& x,
                                   std::size_t neuron, double bound) {
    if (bound <= 0.0)
        throw std::invalid_argument("delta_oracle: bound must be positive");
    int baseline = forward(net, x).predicted_class;
    auto flips = [&](double delta) {
        return forward_perturbed(net, x, neuron, delta).predicted_class != baseline;
    };
    // The prediction stays fixed on an interval of deltas containing 0
    // (each logit is affine in delta), so once a direction flips it stays
    // flipped and bisection is valid.
    auto search_direction = [&](double sign) -> std::optional<double> {
        double prev = 0.0;
        double mag = 1e-6;
        while (true) {
            double probe = std::min(mag, bound);
            if (flips(sign * probe)) {
                double lo = prev, hi = probe; // flip occurs in (lo, hi]
                while (hi - lo > 1e-9) {
                    double mid = 0.5 * (lo + hi);
                    if (flips(sign * mid)) hi = mid;
                    else lo = mid;
                }
                return sign * hi;
            }
            if (probe >= bound) return std::nullopt;
            prev = probe;
            mag *= 2.0;
        }
    };
    std::optional<double> pos = search_direction(1.0);
    std::optional<double> neg = search_direction(-1.0);
    if (!pos) return neg;
    if (!neg) return pos;
    return std::abs(*pos) <= std::abs(*neg) ? pos : neg;
}

SensitivityMatrix build_sensitivity_matrix(const Network& net, const Dataset& data,
                                           const std::vector<int>* neurons,
                                           int workers) {
    if (data.size() == 0)
        throw std::invalid_argument("build_sensitivity_matrix: empty dataset");
    SensitivityMatrix matrix;
    matrix.feature_count = net.feature_count();
    matrix.class_count = static_cast<int>(net.class_count());
    if (neurons) {
        matrix.neurons = *neurons;
        std::sort(matrix.neurons.begin(), matrix.neurons.end());
        for (int n : matrix.neurons)
            if (n < 0 || static_cast<std::size_t>(n) >= matrix.feature_count)
                throw std::invalid_argument("build_sensitivity_matrix: neuron out of range");
    } else {
        matrix.neurons.resize(matrix.feature_count);
        std::iota(matrix.neurons.begin(), matrix.neurons.end(), 0);
    }

    std::vector<int> included;
    std::vector<ForwardTrace> traces;
    for (std::size_t i = 0; i < data.size(); ++i) {
        ForwardTrace trace = forward(net, data.inputs[i]);
        if (trace.predicted_class == data.labels[i]) {
            included.push_back(static_cast<int>(i));
            traces.push_back(std::move(trace));
        }
    }
    if (included.empty())
        throw std::invalid_argument("build_sensitivity_matrix: no correctly classified inputs");

    matrix.input_ids = included;
    matrix.records.resize(included.size() * matrix.neurons.size());
    const DenseLayer& logits_layer = net.logits_layer();
    parallel_for(matrix.records.size(), workers, [&](std::size_t idx) {
        std::size_t row = idx / matrix.neurons.size();
        std::size_t col = idx % matrix.neurons.size();
        const ForwardTrace& trace = traces[row];
        int y = trace.predicted_class;
        std::size_t neuron = static_cast<std::size_t>(matrix.neurons[col]);
        SensitivityRecord rec;
        rec.input_id = included[row];
        rec.neuron = matrix.neurons[col];
        rec.label = y;
        rec.delta_to_target.assign(static_cast<std::size_t>(matrix.class_count), kInfDelta);
        for (int target = 0; target < matrix.class_count; ++target) {
            if (target == y) continue;
            rec.delta_to_target[static_cast<std::size_t>(target)] =
                delta_closed_form(trace, logits_layer, y, target, neuron);
        }
        auto [d, t] = delta_min(trace, logits_layer, y, neuron);
        rec.min_delta = d;
        rec.min_target = t;
        matrix.records[idx] = std::move(rec);
    });
    return matrix;
}

namespace {

std::vector<int> rank_by_key(const std::vector<int>& neurons,
                             const std::vector<double>& keys) {
    std::vector<std::size_t> order(neurons.size());
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        if (keys[a] != keys[b]) return keys[a] < keys[b];
        return neurons[a] < neurons[b];
    });
    std::vector<int> ranked(neurons.size());
    for (std::size_t i = 0; i < order.size(); ++i) ranked[i] = neurons[order[i]];
    return ranked;
}

} // namespace

std::vector<int> rank_neurons_for_input(const SensitivityMatrix& matrix, int input_id) {
    auto in_it = std::find(matrix.input_ids.begin(), matrix.input_ids.end(), input_id);
    if (in_it == matrix.input_ids.end())
        throw std::invalid_argument("rank_neurons_for_input: unknown input_id");
    std::size_t row = static_cast<std::size_t>(in_it - matrix.input_ids.begin());
    std::vector<double> keys(matrix.neurons.size());
    for (std::size_t col = 0; col < matrix.neurons.size(); ++col)
        keys[col] = std::abs(matrix.records[row * matrix.neurons.size() + col].min_delta);
    return rank_by_key(matrix.neurons, keys);
}

std::vector<int> rank_neurons_global(const SensitivityMatrix& matrix) {
    std::vector<double> keys(matrix.neurons.size());
    for (std::size_t col = 0; col < matrix.neurons.size(); ++col) {
        double sum = 0.0;
        for (std::size_t row = 0; row < matrix.input_ids.size(); ++row)
            sum += std::abs(matrix.records[row * matrix.neurons.size() + col].min_delta);
        keys[col] = sum / static_cast<double>(matrix.input_ids.size());
    }
    return rank_by_key(matrix.neurons, keys);
}

FeatureStats feature_stats(const Network& net, const Dataset& data) {
    if (data.size() == 0)
        throw std::invalid_argument("feature_stats: empty dataset");
    std::size_t f = net.feature_count();
    std::vector<Tensor> features;
    features.reserve(data.size());
    for (const Tensor& x : data.inputs)
        features.push_back(forward(net, x).features);

    FeatureStats stats;
    stats.sample_count = data.size();
    stats.mean = Tensor({f});
    stats.std_dev = Tensor({f});
    for (const Tensor& z : features)
        for (std::size_t j = 0; j < f; ++j) stats.mean[j] += z[j];
    for (std::size_t j = 0; j < f; ++j) stats.mean[j] /= static_cast<double>(data.size());
    for (const Tensor& z : features)
        for (std::size_t j = 0; j < f; ++j) {
            double d = z[j] - stats.mean[j];
            stats.std_dev[j] += d * d;
        }
    for (std::size_t j = 0; j < f; ++j)
        stats.std_dev[j] = std::sqrt(stats.std_dev[j] / static_cast<double>(data.size()));
    return stats;
}

std::vector<DistributionRow> export_delta_distribution(const SensitivityMatrix& matrix,
                                                       const FeatureStats& stats) {
    if (stats.std_dev.size() != matrix.feature_count)
        throw std::invalid_argument("export_delta_distribution: stats width mismatch");
    std::vector<DistributionRow> rows;
    rows.reserve(matrix.records.size());
    for (const SensitivityRecord& rec : matrix.records) {
        DistributionRow row;
        row.entity_id = rec.input_id;
        row.neuron = rec.neuron;
        row.value = rec.min_delta;
        double sigma = stats.std_dev[static_cast<std::size_t>(rec.neuron)];
        row.scaled_value = std::abs(rec.min_delta) / sigma; // inf when sigma == 0
        rows.push_back(row);
    }
    return rows;
}

std::vector<DistributionRow> export_activation_distribution(const Network& net,
                                                            const Dataset& data) {
    if (data.size() == 0)
        throw std::invalid_argument("export_activation_distribution: empty dataset");
    std::size_t f = net.feature_count();
    std::vector<Tensor> features;
    features.reserve(data.size());
    for (const Tensor& x : data.inputs)
        features.push_back(forward(net, x).features);

    std::vector<double> lo(f, std::numeric_limits<double>::infinity());
    std::vector<double> hi(f, -std::numeric_limits<double>::infinity());
    for (const Tensor& z : features)
        for (std::size_t j = 0; j < f; ++j) {
            lo[j] = std::min(lo[j], z[j]);
            hi[j] = std::max(hi[j], z[j]);
        }
    std::vector<DistributionRow> rows;
    rows.reserve(data.size() * f);
    for (std::size_t i = 0; i < features.size(); ++i)
        for (std::size_t j = 0; j < f; ++j) {
            DistributionRow row;
            row.entity_id = static_cast<int>(i);
            row.neuron = static_cast<int>(j);
            row.value = features[i][j];
            double range = hi[j] - lo[j];
            row.scaled_value = range > 0.0 ? (features[i][j] - lo[j]) / range : 0.0;
            rows.push_back(row);
        }
    return rows;
}

} // namespace senslab
