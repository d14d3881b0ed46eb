#include "senslab/attacks.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "senslab/parallel.hpp"
#include "senslab/rng.hpp"

namespace senslab {

void AttackConfig::validate() const {
    if (epsilon < 0.0) throw std::invalid_argument("AttackConfig: epsilon must be >= 0");
    if (steps <= 0) throw std::invalid_argument("AttackConfig: steps must be positive");
    if (restarts <= 0) throw std::invalid_argument("AttackConfig: restarts must be positive");
    if (step_size < 0.0) throw std::invalid_argument("AttackConfig: step_size must be positive");
    if (mode == AttackMode::Lagrangian && lagrange_coefficient <= 0.0)
        throw std::invalid_argument("AttackConfig: Lagrangian mode needs lagrange_coefficient > 0");
}

double AttackConfig::effective_step() const {
    if (step_size > 0.0) return step_size;
    if (mode == AttackMode::Lagrangian) return 0.1;
    return norm == NormKind::Linf ? epsilon / 4.0 : epsilon / 10.0;
}

namespace {

void clamp_to_range(Tensor& x, const InputRange& range) {
    for (double& v : x.data()) v = std::clamp(v, range.lo, range.hi);
}

void clamp_to_linf_ball(Tensor& x, const Tensor& center, double eps) {
    for (std::size_t i = 0; i < x.size(); ++i)
        x[i] = std::clamp(x[i], center[i] - eps, center[i] + eps);
}

void project_to_l2_ball(Tensor& x, const Tensor& center, double eps) {
    double norm = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        double d = x[i] - center[i];
        norm += d * d;
    }
    norm = std::sqrt(norm);
    if (norm <= eps) return;
    double scale = eps / norm;
    for (std::size_t i = 0; i < x.size(); ++i)
        x[i] = center[i] + (x[i] - center[i]) * scale;
}

Tensor random_ball_start(const Tensor& x, const AttackConfig& cfg,
                         const InputRange& range, RngStream rng) {
    Tensor start = x;
    if (cfg.epsilon > 0.0) {
        if (cfg.norm == NormKind::Linf) {
            for (double& v : start.data())
                v += rng.uniform(-cfg.epsilon, cfg.epsilon);
        } else {
            // Uniform inside the L2 ball: random direction, radius with
            // the u^(1/d) density correction.
            Tensor dir(x.shape());
            double norm2 = 0.0;
            for (double& v : dir.data()) {
                v = rng.normal();
                norm2 += v * v;
            }
            double norm = std::sqrt(norm2);
            if (norm > 0.0) {
                double radius =
                    cfg.epsilon *
                    std::pow(rng.uniform01(), 1.0 / static_cast<double>(x.size()));
                for (std::size_t i = 0; i < x.size(); ++i)
                    start[i] += dir[i] * (radius / norm);
            }
        }
        clamp_to_range(start, range);
    }
    return start;
}

void fill_norms(AttackResult& result, const Tensor& x) {
    Tensor diff = result.adversarial_input - x;
    result.perturbation_norm_l2 = l2_norm(diff);
    result.perturbation_norm_linf = linf_norm(diff);
}

/// Subgradient of ||d||_p used by the Lagrangian penalty.
Tensor norm_subgradient(const Tensor& diff, NormKind norm) {
    Tensor g(diff.shape());
    if (norm == NormKind::L2) {
        double n = l2_norm(diff);
        if (n > 0.0)
            for (std::size_t i = 0; i < diff.size(); ++i) g[i] = diff[i] / n;
    } else {
        double m = linf_norm(diff);
        if (m > 0.0) {
            std::size_t count = 0;
            for (double v : diff.data())
                if (std::abs(v) == m) ++count;
            for (std::size_t i = 0; i < diff.size(); ++i)
                if (std::abs(diff[i]) == m)
                    g[i] = (diff[i] > 0 ? 1.0 : -1.0) / static_cast<double>(count);
        }
    }
    return g;
}

struct ObjectiveEval {
    double value = 0.0;
    bool flipped = false;
    Tensor gradient; // w.r.t. the input; empty if not requested
};

} // namespace

AttackResult pgd_attack(const Network& net, const Tensor& x, int y,
                        const AttackConfig& cfg, const InputRange& range) {
    cfg.validate();
    if (cfg.mode != AttackMode::Projected)
        throw std::invalid_argument("pgd_attack: requires Projected mode");
    if (y < 0 || static_cast<std::size_t>(y) >= net.class_count())
        throw std::invalid_argument("pgd_attack: label out of range");
    double step = cfg.effective_step();

    AttackResult best;
    best.adversarial_input = x;
    bool have_best = false;
    RngStream base = RngStream(cfg.seed).derive("pgd.restart");
    for (int restart = 0; restart < cfg.restarts; ++restart) {
        Tensor current = random_ball_start(x, cfg, range,
                                           base.derive(static_cast<std::uint64_t>(restart)));
        AttackResult result;
        result.adversarial_input = current;
        for (int iter = 0; iter <= cfg.steps; ++iter) {
            ForwardTrace trace = forward(net, current);
            result.final_objective = cross_entropy_loss(trace.logits, y);
            result.iterations_used = iter;
            if (trace.predicted_class != y) {
                result.success = true;
                result.adversarial_input = current;
                fill_norms(result, x);
                return result;
            }
            if (iter == cfg.steps) break;
            Tensor seed = softmax(trace.logits);
            seed[static_cast<std::size_t>(y)] -= 1.0;
            Tensor grad = input_gradient(net, trace, seed);
            if (cfg.norm == NormKind::Linf) {
                for (std::size_t i = 0; i < current.size(); ++i)
                    current[i] += step * (grad[i] > 0 ? 1.0 : (grad[i] < 0 ? -1.0 : 0.0));
                clamp_to_linf_ball(current, x, cfg.epsilon);
            } else {
                double gnorm = l2_norm(grad);
                if (gnorm > 0.0)
                    for (std::size_t i = 0; i < current.size(); ++i)
                        current[i] += step * grad[i] / gnorm;
                project_to_l2_ball(current, x, cfg.epsilon);
            }
            clamp_to_range(current, range);
            result.adversarial_input = current;
        }
        fill_norms(result, x);
        if (!have_best || result.final_objective > best.final_objective) {
            best = result;
            have_best = true;
        }
    }
    return best;
}

namespace {

AttackResult projected_target_descent(const Network& net, const Tensor& x, int y,
                                      const Tensor& target_logits,
                                      const AttackConfig& cfg, const InputRange& range) {
    double step = cfg.effective_step();
    AttackResult best;
    best.adversarial_input = x;
    bool have_best = false;
    RngStream base = RngStream(cfg.seed).derive("sn.restart");
    for (int restart = 0; restart < cfg.restarts; ++restart) {
        Tensor current = random_ball_start(x, cfg, range,
                                           base.derive(static_cast<std::uint64_t>(restart)));
        AttackResult result;
        result.adversarial_input = current;
        for (int iter = 0; iter <= cfg.steps; ++iter) {
            ForwardTrace trace = forward(net, current);
            Tensor gap = trace.logits - target_logits;
            double gap_norm = l2_norm(gap);
            result.final_objective = gap_norm;
            result.iterations_used = iter;
            if (trace.predicted_class != y) {
                result.success = true;
                result.adversarial_input = current;
                fill_norms(result, x);
                return result;
            }
            if (iter == cfg.steps) break;
            Tensor seed(gap.shape());
            if (gap_norm > 0.0)
                for (std::size_t i = 0; i < gap.size(); ++i) seed[i] = gap[i] / gap_norm;
            Tensor grad = input_gradient(net, trace, seed);
            if (cfg.norm == NormKind::Linf) {
                for (std::size_t i = 0; i < current.size(); ++i)
                    current[i] -= step * (grad[i] > 0 ? 1.0 : (grad[i] < 0 ? -1.0 : 0.0));
                clamp_to_linf_ball(current, x, cfg.epsilon);
            } else {
                double gnorm = l2_norm(grad);
                if (gnorm > 0.0)
                    for (std::size_t i = 0; i < current.size(); ++i)
                        current[i] -= step * grad[i] / gnorm;
                project_to_l2_ball(current, x, cfg.epsilon);
            }
            clamp_to_range(current, range);
            result.adversarial_input = current;
        }
        fill_norms(result, x);
        if (!have_best || result.final_objective < best.final_objective) {
            best = result;
            have_best = true;
        }
    }
    return best;
}

AttackResult lagrangian_target_descent(const Network& net, const Tensor& x, int y,
                                       const Tensor& target_logits,
                                       const AttackConfig& cfg, const InputRange& range) {
    auto lagrangian = [&](const Tensor& candidate, double& gap_out) {
        ForwardTrace trace = forward(net, candidate);
        gap_out = l2_norm(trace.logits - target_logits);
        return gap_out + cfg.lagrange_coefficient * (cfg.norm == NormKind::L2
                                                         ? l2_norm(candidate - x)
                                                         : linf_norm(candidate - x));
    };

    Tensor current = x;
    AttackResult result;
    result.adversarial_input = current;
    double gap = 0.0;
    double loss = lagrangian(current, gap);
    result.final_objective = gap;
    double step = cfg.effective_step();
    for (int iter = 0; iter < cfg.steps; ++iter) {
        ForwardTrace trace = forward(net, current);
        result.iterations_used = iter;
        Tensor gap_vec = trace.logits - target_logits;
        double gap_norm = l2_norm(gap_vec);
        if (trace.predicted_class != y) {
            result.success = true;
            result.final_objective = gap_norm;
            break;
        }
        Tensor seed(gap_vec.shape());
        if (gap_norm > 0.0)
            for (std::size_t i = 0; i < gap_vec.size(); ++i) seed[i] = gap_vec[i] / gap_norm;
        Tensor grad = input_gradient(net, trace, seed);
        Tensor penalty = norm_subgradient(current - x, cfg.norm);
        for (std::size_t i = 0; i < grad.size(); ++i)
            grad[i] += cfg.lagrange_coefficient * penalty[i];

        // Backtracking: shrink the step until the Lagrangian does not
        // increase; give up when the step underflows.
        bool accepted = false;
        while (step > 1e-12) {
            Tensor candidate = current;
            for (std::size_t i = 0; i < candidate.size(); ++i)
                candidate[i] -= step * grad[i];
            clamp_to_range(candidate, range);
            double cand_gap = 0.0;
            double cand_loss = lagrangian(candidate, cand_gap);
            if (cand_loss <= loss) {
                current = std::move(candidate);
                loss = cand_loss;
                gap = cand_gap;
                accepted = true;
                step *= 1.2;
                break;
            }
            step *= 0.5;
        }
        if (!accepted) break;
        result.adversarial_input = current;
        result.final_objective = gap;
    }
    // Post-loop flip check (the last accepted iterate may not have been
    // tested yet).
    if (!result.success) {
        ForwardTrace trace = forward(net, result.adversarial_input);
        result.success = trace.predicted_class != y;
    } else {
        result.adversarial_input = current;
    }
    fill_norms(result, x);
    return result;
}

} // namespace

AttackResult single_neuron_attack(const Network& net, const Tensor& x, int y,
                                  std::size_t neuron, const AttackConfig& cfg,
                                  const InputRange& range) {
    cfg.validate();
    if (neuron >= net.feature_count())
        throw std::invalid_argument("single_neuron_attack: neuron index out of range");
    if (y < 0 || static_cast<std::size_t>(y) >= net.class_count())
        throw std::invalid_argument("single_neuron_attack: label out of range");

    ForwardTrace clean = forward(net, x);
    if (clean.predicted_class != y) {
        AttackResult result;
        result.success = true;
        result.adversarial_input = x;
        result.target_neuron = static_cast<int>(neuron);
        return result;
    }
    auto [delta, target_class] = delta_min(clean, net.logits_layer(), y, neuron);
    if (std::isinf(delta)) {
        AttackResult result;
        result.adversarial_input = x;
        result.target_neuron = static_cast<int>(neuron);
        result.status = AttackStatus::UnreachableTarget;
        result.final_objective = kInfDelta;
        return result;
    }
    Tensor target_logits = forward_perturbed(net, x, neuron, delta).logits;

    AttackResult result = cfg.mode == AttackMode::Projected
                              ? projected_target_descent(net, x, y, target_logits, cfg, range)
                              : lagrangian_target_descent(net, x, y, target_logits, cfg, range);
    result.target_neuron = static_cast<int>(neuron);
    return result;
}

AttackResult k_ns_attack(const Network& net, const Tensor& x, int input_id, int y,
                         std::size_t k, const SensitivityMatrix& matrix,
                         const AttackConfig& cfg, const InputRange& range,
                         int workers) {
    if (k < 1) throw std::invalid_argument("k_ns_attack: k must be >= 1");
    std::vector<int> ranked = rank_neurons_for_input(matrix, input_id);
    bool clamped = false;
    if (k > ranked.size()) {
        k = ranked.size();
        clamped = true;
    }
    std::vector<AttackResult> sub(k);
    RngStream base = RngStream(cfg.seed).derive("kns.neuron");
    parallel_for(k, workers, [&](std::size_t i) {
        AttackConfig sub_cfg = cfg;
        sub_cfg.seed = base.derive(static_cast<std::uint64_t>(ranked[i])).key();
        sub[i] = single_neuron_attack(net, x, y, static_cast<std::size_t>(ranked[i]),
                                      sub_cfg, range);
    });

    auto relevant_norm = [&](const AttackResult& r) {
        return cfg.norm == NormKind::L2 ? r.perturbation_norm_l2 : r.perturbation_norm_linf;
    };
    std::size_t pick = k; // sentinel: none succeeded
    for (std::size_t i = 0; i < k; ++i) {
        if (!sub[i].success) continue;
        if (pick == k || relevant_norm(sub[i]) < relevant_norm(sub[pick])) pick = i;
    }
    AttackResult result = pick < k ? sub[pick] : sub[0];
    if (clamped && result.status == AttackStatus::Ok)
        result.status = AttackStatus::KClamped;
    return result;
}

namespace {

bool reverify_success(const Network& net, const AttackResult& result, int y) {
    if (!result.success) return false;
    return forward(net, result.adversarial_input).predicted_class != y;
}

} // namespace

EvaluationReport evaluate_attack(const Network& net, const Dataset& data,
                                 AttackKind kind, std::size_t k,
                                 const AttackConfig& cfg, int workers) {
    cfg.validate();
    if (data.size() == 0)
        throw std::invalid_argument("evaluate_attack: empty dataset");
    InputRange range{data.range_lo, data.range_hi};
    EvaluationReport report;
    report.kind = kind;
    report.k = k;
    report.total_seeds = static_cast<int>(data.size());
    report.outcomes.resize(data.size());

    std::vector<char> correct(data.size(), 0);
    for (std::size_t i = 0; i < data.size(); ++i) {
        ForwardTrace trace = forward(net, data.inputs[i]);
        correct[i] = trace.predicted_class == data.labels[i];
        report.outcomes[i].input_id = static_cast<int>(i);
        report.outcomes[i].correctly_classified = correct[i] != 0;
        if (correct[i]) ++report.correct_seeds;
    }
    if (report.correct_seeds == 0) {
        report.vacuous = true;
        return report;
    }

    SensitivityMatrix matrix;
    if (kind != AttackKind::Pgd)
        matrix = build_sensitivity_matrix(net, data, nullptr, workers);

    RngStream eval_base = RngStream(cfg.seed).derive("eval.seed");
    auto per_seed_cfg = [&](std::size_t i) {
        AttackConfig c = cfg;
        c.seed = eval_base.derive(static_cast<std::uint64_t>(i)).key();
        return c;
    };
    auto record_outcome = [&](SeedOutcome& out, const AttackResult& r, int y) {
        out.success = reverify_success(net, r, y);
        out.perturbation_norm_l2 = r.perturbation_norm_l2;
        out.perturbation_norm_linf = r.perturbation_norm_linf;
        out.target_neuron = r.target_neuron.value_or(-1);
        out.status = r.status;
    };

    if (kind == AttackKind::RankCurve) {
        std::size_t feature_count = matrix.neurons.size();
        std::vector<char> success_grid(data.size() * feature_count, 0);
        parallel_for(data.size() * feature_count, workers, [&](std::size_t idx) {
            std::size_t i = idx / feature_count;
            std::size_t rank = idx % feature_count;
            if (!correct[i]) return;
            std::vector<int> ranked = rank_neurons_for_input(matrix, static_cast<int>(i));
            AttackConfig c = per_seed_cfg(i);
            c.seed = RngStream(c.seed)
                         .derive("kns.neuron")
                         .derive(static_cast<std::uint64_t>(ranked[rank]))
                         .key();
            AttackResult r = single_neuron_attack(net, data.inputs[i], data.labels[i],
                                                  static_cast<std::size_t>(ranked[rank]), c,
                                                  range);
            if (reverify_success(net, r, data.labels[i])) success_grid[idx] = 1;
            if (rank == 0)
                record_outcome(report.outcomes[i], r, data.labels[i]);
        });
        report.rank_curve.resize(feature_count);
        for (std::size_t rank = 0; rank < feature_count; ++rank) {
            RankPoint& point = report.rank_curve[rank];
            point.rank = static_cast<int>(rank) + 1;
            point.denominator = report.correct_seeds;
            for (std::size_t i = 0; i < data.size(); ++i)
                point.successes += success_grid[i * feature_count + rank];
            point.success_rate =
                static_cast<double>(point.successes) / static_cast<double>(point.denominator);
        }
        for (const SeedOutcome& out : report.outcomes)
            if (out.success) ++report.successes;
    } else {
        parallel_for(data.size(), workers, [&](std::size_t i) {
            if (!correct[i]) return;
            AttackConfig c = per_seed_cfg(i);
            AttackResult r;
            if (kind == AttackKind::Pgd)
                r = pgd_attack(net, data.inputs[i], data.labels[i], c, range);
            else
                r = k_ns_attack(net, data.inputs[i], static_cast<int>(i), data.labels[i], k,
                                matrix, c, range, 1);
            record_outcome(report.outcomes[i], r, data.labels[i]);
        });
        for (const SeedOutcome& out : report.outcomes)
            if (out.success) ++report.successes;
    }

    report.rate_all_seeds =
        static_cast<double>(report.successes) / static_cast<double>(report.total_seeds);
    report.rate_correct_seeds =
        static_cast<double>(report.successes) / static_cast<double>(report.correct_seeds);
    return report;
}

std::string to_string(AttackKind kind) {
    switch (kind) {
        case AttackKind::Pgd: return "pgd";
        case AttackKind::Kns: return "kns";
        case AttackKind::RankCurve: return "rank_curve";
    }
    return "?";
}

std::string to_string(NormKind norm) {
    return norm == NormKind::L2 ? "l2" : "linf";
}

std::string to_string(AttackMode mode) {
    return mode == AttackMode::Projected ? "projected" : "lagrangian";
}

std::string to_string(AttackStatus status) {
    switch (status) {
        case AttackStatus::Ok: return "ok";
        case AttackStatus::UnreachableTarget: return "unreachable_target";
        case AttackStatus::KClamped: return "k_clamped";
    }
    return "?";
}

} // namespace senslab
