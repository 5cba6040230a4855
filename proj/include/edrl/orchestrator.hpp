#pragma once

// Hybrid training loop (population evaluation -> elites -> evolution ->
// gradient phase -> RL/EA synchronisation) and the plain DDPG baseline.

#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <vector>

#include "edrl/ddpg.hpp"
#include "edrl/env.hpp"
#include "edrl/evo.hpp"

namespace edrl::orchestrator {

struct EdrlConfig {
    int generations = 100;
    int sync_period = 10;  // RL actor -> weakest individual every this many generations
    int episode_length = 40;
    int ttis_per_step = 10;
    std::optional<int> grad_steps_per_generation;  // unset: population_size * episode_length
    bool ea_to_rl = true;
    int ea_to_rl_patience = 3;  // consecutive generations an elite must beat the RL actor
    bool convergence_check = true;
    int convergence_window = 10;
    double convergence_tol = 0.01;
    std::uint64_t seed = 1;

    int resolved_grad_steps(int population_size) const;
    void validate() const;
};

struct GenerationStats {
    int generation = 0;  // 1-based
    std::vector<double> fitness;  // per individual, before evolution
    double best_fitness = 0.0;
    double mean_fitness = 0.0;
    std::size_t champion = 0;
    double champion_return = 0.0;        // held-out test episode, discounted
    double champion_train_return = 0.0;  // its evaluation episode, discounted
    double rl_fitness = 0.0;
    double rl_return = 0.0;
    double critic_loss = 0.0;       // mean over the generation's gradient steps
    double actor_objective = 0.0;   // mean Q over the same steps
    int grad_steps = 0;
    bool rl_to_ea = false;
    std::size_t replaced_index = 0;
    bool ea_to_rl = false;
    std::vector<double> slice_qos;      // champion test episode, per slice
    std::vector<double> ue_throughput;  // champion test episode, per UE
    std::size_t env_steps = 0;          // cumulative training steps
    bool converged = false;
};

struct EpisodeStats {
    int episode = 0;  // 1-based
    double fitness = 0.0;        // exploratory episode, plain sum
    double train_return = 0.0;   // exploratory episode, discounted
    double test_return = 0.0;    // noise-free held-out episode, discounted
    double critic_loss = 0.0;
    double actor_objective = 0.0;
    int grad_steps = 0;
    std::vector<double> slice_qos;
    std::vector<double> ue_throughput;
    std::size_t env_steps = 0;
};

struct EdrlResult {
    ddpg::DdpgAgent agent;
    std::vector<evo::Individual> population;
    std::vector<GenerationStats> stats;
    bool converged = false;
    std::size_t env_steps = 0;
};

struct DrlResult {
    ddpg::DdpgAgent agent;
    std::vector<EpisodeStats> stats;
    std::size_t env_steps = 0;
    std::size_t grad_steps = 0;
};

using GenerationSink = std::function<void(const GenerationStats&)>;
using EpisodeSink = std::function<void(const EpisodeStats&)>;

EdrlResult run_edrl(const EdrlConfig& cfg, const env::CellConfig& cell, const std::vector<env::SliceSpec>& slices,
                    const evo::EvoConfig& evo_cfg, const ddpg::DdpgConfig& ddpg_cfg,
                    const GenerationSink& on_generation = {});

/// Plain DDPG with exploration noise. `total_env_steps` defaults to
/// generations * population_size * episode_length; gradient steps follow
/// the same per-environment-step ratio as the hybrid run.
DrlResult run_drl_baseline(const EdrlConfig& cfg, const env::CellConfig& cell,
                           const std::vector<env::SliceSpec>& slices, const evo::EvoConfig& evo_cfg,
                           const ddpg::DdpgConfig& ddpg_cfg, std::optional<std::size_t> total_env_steps = {},
                           const EpisodeSink& on_episode = {});

/// True when the mean of the last `window` values moved by less than
/// `tolerance` (relative) against the mean of the window before it.
bool check_convergence(std::span<const double> history, int window, double tolerance);

/// Seed of the held-out test episode with the given record index; shared by
/// both training modes so their reported returns use the same channels.
std::uint64_t test_episode_seed(std::uint64_t master, int index);

}  // namespace edrl::orchestrator
