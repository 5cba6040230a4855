#pragma once

// Population phase: fitness rollouts, elitism, tournament selection,
// gene-batch averaging crossover and three-mode Gaussian mutation.

#include <cstdint>
#include <optional>
#include <span>
#include <utility>
#include <vector>

#include "edrl/common.hpp"
#include "edrl/ddpg.hpp"
#include "edrl/mdp.hpp"
#include "edrl/nn.hpp"

namespace edrl::evo {

struct EvoConfig {
    int population_size = 10;
    double elite_fraction = 0.2;
    double mutation_prob = 0.9;
    double super_mut_prob = 0.05;  // kappa <= this: super-mutation
    double reset_prob = 0.1;       // super_mut_prob < kappa <= this: gene reset
    double mutation_strength = 0.1;
    int crossover_batch = 128;
    int mutation_batch = 256;
    int tournament_size = 3;
    // Second argument of N(0, .) read as variance (true) or standard deviation.
    bool noise_is_variance = true;

    /// ceil(elite_fraction * population_size), at least 1.
    int num_elites() const;
    void validate() const;
};

struct Individual {
    nn::Genome genome;
    std::optional<double> fitness;
};

struct EvalResult {
    double fitness = 0.0;            // plain reward sum
    double discounted_return = 0.0;  // gamma-discounted, for reporting
    std::vector<ddpg::Transition> trajectory;
    std::vector<double> rewards;
    std::vector<double> mean_slice_qos;     // averaged over the episode
    std::vector<double> mean_throughput;    // per UE, averaged over the episode
};

/// Rolls the deterministic policy for `episode_length` steps on a freshly
/// reset task.
EvalResult evaluate(const nn::MlpNet& actor, mdp::SlicingTask& task, std::uint64_t seed, int episode_length,
                    double gamma);
EvalResult evaluate(const Individual& ind, const nn::Shape& actor_shape, mdp::SlicingTask& task,
                    std::uint64_t seed, int episode_length, double gamma);

/// Indices of the n fittest, best first; ties go to the lower index.
std::vector<std::size_t> select_elites(std::span<const Individual> population, int n);

/// Lowest-fitness index outside `protected_idx` (ties -> lowest index); falls
/// back to the whole population when everything is protected.
std::size_t weakest_index(std::span<const Individual> population, std::span<const std::size_t> protected_idx);

/// Two independent tournaments; each returns the fittest of `size` uniform
/// draws (with replacement unless `with_replacement` is false).
std::pair<std::size_t, std::size_t> tournament(std::span<const Individual> population, int size, Rng& rng,
                                               bool with_replacement = true);

/// k distinct indices from [0, n), ascending.
std::vector<std::size_t> sample_indices(std::size_t n, std::size_t k, Rng& rng);

/// Copy of p1 with `crossover_batch` random genes replaced by the parents' mean.
nn::Genome crossover(std::span<const double> p1, std::span<const double> p2, const EvoConfig& cfg, Rng& rng);

struct MutationCounts {
    bool applied = false;
    std::size_t super_mutated = 0;
    std::size_t reset = 0;
    std::size_t ordinary = 0;
};

/// In-place mutation; reports how many genes took each branch.
MutationCounts mutate(nn::Genome& genome, const EvoConfig& cfg, Rng& rng);

/// Elites keep their slots and genomes; every other slot receives
/// tournament -> crossover -> mutate offspring with unevaluated fitness.
std::vector<Individual> next_generation(std::span<const Individual> population, const EvoConfig& cfg, Rng& rng);

}  // namespace edrl::evo
