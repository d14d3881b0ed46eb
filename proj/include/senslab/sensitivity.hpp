#pragma once

#include <limits>
#include <optional>
#include <vector>

#include "senslab/dataset.hpp"
#include "senslab/network.hpp"

namespace senslab {

inline constexpr double kInfDelta = std::numeric_limits<double>::infinity();

/// Weight-tie tolerance: a logits-row difference this small counts as an
/// exact tie and the corresponding delta is reported unreachable.
inline constexpr double kDenominatorTol = 1e-12;

/// Per-feature mean and standard deviation of z(x) over a dataset
/// (population convention).
struct FeatureStats {
    Tensor mean;
    Tensor std_dev;
    std::size_t sample_count = 0;
};

/// Signed boundary perturbations of one (input, neuron) pair: the delta
/// that ties each target class with the predicted one, and the
/// smallest-magnitude choice among them.
struct SensitivityRecord {
    int input_id = 0;
    int neuron = 0;
    int label = 0; // predicted class the deltas are measured against
    std::vector<double> delta_to_target; // indexed by target class; [label] unused (+inf)
    double min_delta = kInfDelta;
    int min_target = -1; // -1 when no class is reachable
};

/// Complete grid of records over (included inputs) x (selected neurons).
struct SensitivityMatrix {
    std::vector<int> input_ids;  // dataset indices of included inputs
    std::vector<int> neurons;    // selected feature indices, ascending
    std::size_t feature_count = 0;
    int class_count = 0;
    std::vector<SensitivityRecord> records; // input-major grid

    const SensitivityRecord& record(int input_id, int neuron) const;
    bool has_input(int input_id) const;
    /// Mean |min_delta| of one neuron over all included inputs (+inf if
    /// any record is unreachable).
    double mean_abs_delta(int neuron) const;
};

/// Closed-form boundary perturbation for feature `neuron`: the unique
/// delta placing logit y_hat equal to logit y, +inf when the weight rows
/// tie. Requires trace.predicted_class == y.
double delta_closed_form(const ForwardTrace& trace, const DenseLayer& logits_layer,
                         int y, int y_hat, std::size_t neuron);

/// Smallest-magnitude closed-form delta over all target classes.
/// Returns (signed delta or +inf, target class or -1); ties between
/// targets break toward the lower class index.
std::pair<double, int> delta_min(const ForwardTrace& trace, const DenseLayer& logits_layer,
                                 int y, std::size_t neuron);

/// Independent numerical verifier: scans both signs on a geometric grid
/// (x2 from 1e-6 up to `bound`) for a prediction flip, then bisects the
/// bracketing interval to width <= 1e-9. Knows nothing about the closed
/// form. Returns the smallest-magnitude flipping delta, or nullopt if
/// neither direction flips within the bound.
std::optional<double> delta_oracle(const Network& net, const Tensor& x,
                                   std::size_t neuron, double bound);

/// Builds the full record grid over the correctly classified subset of
/// `data` (sensitivity is measured relative to the current prediction,
/// and attack success on an already-misclassified seed is vacuous).
/// Deterministic for any worker count.
SensitivityMatrix build_sensitivity_matrix(const Network& net, const Dataset& data,
                                           const std::vector<int>* neurons = nullptr,
                                           int workers = 1);

/// Neuron order for one input, ascending |min_delta|; unreachable deltas
/// sort last; ties break by neuron index.
std::vector<int> rank_neurons_for_input(const SensitivityMatrix& matrix, int input_id);

/// Neuron order by mean |min_delta| over all included inputs.
std::vector<int> rank_neurons_global(const SensitivityMatrix& matrix);

FeatureStats feature_stats(const Network& net, const Dataset& data);

struct DistributionRow {
    int entity_id = 0;
    int neuron = 0;
    double value = 0.0;
    double scaled_value = 0.0;
};

/// One row per record: raw signed min_delta plus |min_delta| divided by
/// that neuron's feature standard deviation. The scaling convention is
/// recorded in run manifests as kDeltaScalingNote.
std::vector<DistributionRow> export_delta_distribution(const SensitivityMatrix& matrix,
                                                       const FeatureStats& stats);

/// One row per (input, feature): raw activation plus per-feature min-max
/// scaled value; a feature with zero range scales to all-zero.
std::vector<DistributionRow> export_activation_distribution(const Network& net,
                                                            const Dataset& data);

inline constexpr const char* kDeltaScalingNote =
    "scaled_value = |min_delta| / feature_std (per-neuron standardization)";

} // namespace senslab
