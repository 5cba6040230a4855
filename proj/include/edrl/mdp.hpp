#pragma once

// MDP view of the slicing environment: state vectors, continuous-action
// decoding into feasible allocations, and the SLA reward.

#include <cstdint>
#include <span>
#include <vector>

#include "edrl/env.hpp"

namespace edrl::mdp {

/// Action = L slice-share components followed by N UE-weight components, each in [0,1].
inline int action_dim(int num_slices, int num_ues) { return num_slices + num_ues; }
/// State = L normalised Q_l, L normalised N_l, previous action.
inline int state_dim(int num_slices, int num_ues) { return 2 * num_slices + action_dim(num_slices, num_ues); }

std::vector<double> uniform_action(int dim);

/// Q_l -> 2*clamp(Q_l / (2 lambda_l), 0, 1) - 1, N_l -> 2 N_l / N - 1,
/// previous action copied through.
std::vector<double> encode_state(std::span<const double> slice_qos, std::span<const env::SliceSpec> slices,
                                 std::span<const double> prev_action);
std::vector<double> encode_state(const env::QosReport& report, std::span<const env::SliceSpec> slices,
                                 std::span<const double> prev_action);

/// State before the first step: every Q_l at its threshold, uniform previous action.
std::vector<double> initial_state(std::span<const env::SliceSpec> slices);

/// Hamilton apportionment of `total` units proportional to `weights`.
/// Non-finite or negative weights count as zero; all-zero weights mean uniform.
/// Remainder ties go to the lowest index. The result always sums to `total`.
std::vector<int> largest_remainder(std::span<const double> weights, int total);

/// Continuous action -> feasible allocation. Slices get contiguous RB blocks
/// in slice order; inside a block, RBs go to the slice's UEs in id order.
env::Allocation decode_action(std::span<const double> action, std::span<const env::SliceSpec> slices,
                              std::span<const int> ue_slice, int num_rbs);

/// Sum over slices of (1 - p_hat_l).
double reward(const env::QosReport& report);

double discounted_return(std::span<const double> rewards, double gamma);

struct StepResult {
    std::vector<double> next_state;
    double reward = 0.0;
    env::QosReport report;
};

/// Gym-style wrapper: reset(seed) -> state, step(action) -> (state', r, report).
class SlicingTask {
public:
    SlicingTask(env::CellConfig cell, std::vector<env::SliceSpec> slices, int ttis_per_step);

    std::vector<double> reset(std::uint64_t seed);
    StepResult step(std::span<const double> action);

    int state_dim() const { return mdp::state_dim(env_.num_slices(), env_.num_ues()); }
    int action_dim() const { return mdp::action_dim(env_.num_slices(), env_.num_ues()); }
    int num_slices() const { return env_.num_slices(); }
    int num_ues() const { return env_.num_ues(); }
    int ttis_per_step() const { return ttis_; }
    const env::Environment& environment() const { return env_; }

private:
    env::Environment env_;
    int ttis_;
    std::vector<double> prev_action_;
};

}  // namespace edrl::mdp
