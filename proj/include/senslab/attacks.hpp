#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "senslab/dataset.hpp"
#include "senslab/network.hpp"
#include "senslab/sensitivity.hpp"

namespace senslab {

enum class NormKind { L2, Linf };
enum class AttackMode { Projected, Lagrangian };

/// Adversary specification. Projected mode enforces the epsilon ball;
/// Lagrangian mode trades the input-space norm off against the objective
/// through lagrange_coefficient and only reports achieved norms.
struct AttackConfig {
    NormKind norm = NormKind::Linf;
    double epsilon = 0.0;
    int steps = 100;
    double step_size = 0.0; // <= 0 selects the default for the norm
    int restarts = 1;
    double lagrange_coefficient = 0.0;
    AttackMode mode = AttackMode::Projected;
    std::uint64_t seed = 0;

    void validate() const;
    double effective_step() const;
};

/// Valid input region, per coordinate; attacks clamp to it after every
/// step.
struct InputRange {
    double lo = 0.0;
    double hi = 1.0;
};

enum class AttackStatus { Ok, UnreachableTarget, KClamped };

struct AttackResult {
    bool success = false;
    Tensor adversarial_input;
    double perturbation_norm_l2 = 0.0;
    double perturbation_norm_linf = 0.0;
    std::optional<int> target_neuron;
    int iterations_used = 0;
    double final_objective = 0.0;
    AttackStatus status = AttackStatus::Ok;
};

/// Iterated gradient ascent on cross-entropy inside the epsilon ball.
/// Linf takes sign steps with per-coordinate clamping; L2 takes
/// normalized steps with ball projection. Restart starts are drawn from
/// per-restart derived streams, so a longer restart schedule extends a
/// shorter one. Success means the prediction leaves class y; checked at
/// every iterate.
AttackResult pgd_attack(const Network& net, const Tensor& x, int y,
                        const AttackConfig& cfg, const InputRange& range);

/// Drives the logits toward the frozen target vector
/// logits(forward_perturbed(net, x, neuron, delta_min)) by minimizing the
/// l2 gap. Projected mode stays inside the epsilon ball; Lagrangian mode
/// minimizes gap + lambda * ||x' - x|| with backtracking line search.
/// An unreachable (infinite-delta) neuron is skipped with
/// UnreachableTarget status and counts as a failure.
AttackResult single_neuron_attack(const Network& net, const Tensor& x, int y,
                                  std::size_t neuron, const AttackConfig& cfg,
                                  const InputRange& range);

/// Independent single-neuron attacks on the top-k ranked neurons for this
/// input; succeeds if any succeeds and returns the success with the
/// smallest perturbation norm (ties to the lower rank). Sub-attack
/// streams are keyed by neuron id, so results are identical for any k,
/// schedule, or worker count.
AttackResult k_ns_attack(const Network& net, const Tensor& x, int input_id, int y,
                         std::size_t k, const SensitivityMatrix& matrix,
                         const AttackConfig& cfg, const InputRange& range,
                         int workers = 1);

enum class AttackKind { Pgd, Kns, RankCurve };

struct SeedOutcome {
    int input_id = 0;
    bool correctly_classified = false;
    bool success = false;
    double perturbation_norm_l2 = 0.0;
    double perturbation_norm_linf = 0.0;
    int target_neuron = -1;
    AttackStatus status = AttackStatus::Ok;
};

struct RankPoint {
    int rank = 0;
    int successes = 0;
    int denominator = 0;
    double success_rate = 0.0;
};

/// Success counts against both denominators the literature leaves
/// ambiguous: all seeds, and only seeds the model classifies correctly.
struct EvaluationReport {
    AttackKind kind = AttackKind::Pgd;
    std::size_t k = 0;
    int total_seeds = 0;
    int correct_seeds = 0;
    int successes = 0;
    double rate_all_seeds = 0.0;
    double rate_correct_seeds = 0.0;
    bool vacuous = false; // no correctly classified seeds to attack
    std::vector<SeedOutcome> outcomes;
    std::vector<RankPoint> rank_curve; // RankCurve mode only
};

/// Runs the chosen attack over every correctly classified seed.
/// RankCurve mode instead runs one single-neuron attack per rank
/// position per seed and reports the per-rank success rates. Per-seed
/// streams derive from cfg.seed and the dataset index, making the report
/// deterministic for any worker count.
EvaluationReport evaluate_attack(const Network& net, const Dataset& data,
                                 AttackKind kind, std::size_t k,
                                 const AttackConfig& cfg, int workers = 1);

std::string to_string(AttackKind kind);
std::string to_string(NormKind norm);
std::string to_string(AttackMode mode);
std::string to_string(AttackStatus status);

} // namespace senslab
