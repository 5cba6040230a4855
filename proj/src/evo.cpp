#include "edrl/evo.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace edrl::evo {

int EvoConfig::num_elites() const {
    const double raw = std::ceil(elite_fraction * population_size - 1e-9);
    return std::clamp(static_cast<int>(raw), 1, std::max(population_size, 1));
}

void EvoConfig::validate() const {
    auto prob = [](double p) { return p >= 0.0 && p <= 1.0; };
    if (population_size < 2) throw ConfigError("must be >= 2", "population_size");
    if (!(elite_fraction > 0.0 && elite_fraction < 1.0)) throw ConfigError("must be in (0, 1)", "elite_fraction");
    if (num_elites() >= population_size)
        throw ConfigError("elite count must be below the population size", "elite_fraction");
    if (!prob(mutation_prob)) throw ConfigError("must be in [0, 1]", "mutation_prob");
    if (!prob(super_mut_prob)) throw ConfigError("must be in [0, 1]", "super_mut_prob");
    if (!prob(reset_prob)) throw ConfigError("must be in [0, 1]", "reset_prob");
    if (super_mut_prob > reset_prob) throw ConfigError("must not exceed reset_prob", "super_mut_prob");
    if (!(mutation_strength >= 0.0) || !std::isfinite(mutation_strength))
        throw ConfigError("must be finite and >= 0", "mutation_strength");
    if (crossover_batch < 1) throw ConfigError("must be >= 1", "crossover_batch");
    if (mutation_batch < 1) throw ConfigError("must be >= 1", "mutation_batch");
    if (tournament_size < 1) throw ConfigError("must be >= 1", "tournament_size");
}

EvalResult evaluate(const nn::MlpNet& actor, mdp::SlicingTask& task, std::uint64_t seed, int episode_length,
                    double gamma) {
    EvalResult out;
    out.mean_slice_qos.assign(static_cast<std::size_t>(task.num_slices()), 0.0);
    out.mean_throughput.assign(static_cast<std::size_t>(task.num_ues()), 0.0);
    std::vector<double> state = task.reset(seed);
    for (int t = 0; t < episode_length; ++t) {
        std::vector<double> action = actor.forward(state);
        auto step = task.step(action);
        for (std::size_t l = 0; l < out.mean_slice_qos.size(); ++l) out.mean_slice_qos[l] += step.report.slice_qos[l];
        for (std::size_t n = 0; n < out.mean_throughput.size(); ++n)
            out.mean_throughput[n] += step.report.ue_throughput_bps[n];
        out.rewards.push_back(step.reward);
        out.trajectory.push_back({std::move(state), std::move(action), step.next_state, step.reward});
        state = std::move(step.next_state);
    }
    if (episode_length > 0) {
        for (auto& v : out.mean_slice_qos) v /= episode_length;
        for (auto& v : out.mean_throughput) v /= episode_length;
    }
    out.fitness = std::accumulate(out.rewards.begin(), out.rewards.end(), 0.0);
    out.discounted_return = mdp::discounted_return(out.rewards, gamma);
    return out;
}

EvalResult evaluate(const Individual& ind, const nn::Shape& actor_shape, mdp::SlicingTask& task,
                    std::uint64_t seed, int episode_length, double gamma) {
    return evaluate(nn::MlpNet::unflatten(ind.genome, actor_shape), task, seed, episode_length, gamma);
}

namespace {

double fitness_of(const Individual& ind, std::size_t i) {
    if (!ind.fitness) throw ContractViolation("individual " + std::to_string(i) + " has not been evaluated");
    return *ind.fitness;
}

}  // namespace

std::vector<std::size_t> select_elites(std::span<const Individual> population, int n) {
    std::vector<std::size_t> order(population.size());
    std::iota(order.begin(), order.end(), 0);
    for (std::size_t i = 0; i < population.size(); ++i) fitness_of(population[i], i);
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) { return *population[a].fitness > *population[b].fitness; });
    order.resize(std::min(order.size(), static_cast<std::size_t>(std::max(n, 0))));
    return order;
}

std::size_t weakest_index(std::span<const Individual> population, std::span<const std::size_t> protected_idx) {
    if (population.empty()) throw ContractViolation("weakest_index: empty population");
    auto scan = [&](bool honour_protection) -> std::optional<std::size_t> {
        std::optional<std::size_t> best;
        for (std::size_t i = 0; i < population.size(); ++i) {
            if (honour_protection && std::find(protected_idx.begin(), protected_idx.end(), i) != protected_idx.end())
                continue;
            const double f = fitness_of(population[i], i);
            if (!best || f < *population[*best].fitness) best = i;
        }
        return best;
    };
    if (auto i = scan(true)) return *i;
    return *scan(false);
}

std::vector<std::size_t> sample_indices(std::size_t n, std::size_t k, Rng& rng) {
    if (k > n) throw ContractViolation("sample_indices: k > n");
    // Floyd's algorithm: k draws regardless of n.
    std::vector<std::size_t> chosen;
    chosen.reserve(k);
    for (std::size_t j = n - k; j < n; ++j) {
        std::uniform_int_distribution<std::size_t> pick(0, j);
        const std::size_t t = pick(rng);
        if (std::find(chosen.begin(), chosen.end(), t) == chosen.end())
            chosen.push_back(t);
        else
            chosen.push_back(j);
    }
    std::sort(chosen.begin(), chosen.end());
    return chosen;
}

std::pair<std::size_t, std::size_t> tournament(std::span<const Individual> population, int size, Rng& rng,
                                               bool with_replacement) {
    if (population.empty()) throw ContractViolation("tournament: empty population");
    if (size < 1) throw ContractViolation("tournament: size must be >= 1");
    for (std::size_t i = 0; i < population.size(); ++i) fitness_of(population[i], i);

    auto better = [&](std::size_t a, std::size_t b) {
        const double fa = *population[a].fitness;
        const double fb = *population[b].fitness;
        return fa > fb || (fa == fb && a < b);
    };
    auto one = [&]() {
        std::vector<std::size_t> entrants;
        if (with_replacement) {
            std::uniform_int_distribution<std::size_t> pick(0, population.size() - 1);
            for (int i = 0; i < size; ++i) entrants.push_back(pick(rng));
        } else {
            entrants = sample_indices(population.size(), std::min<std::size_t>(size, population.size()), rng);
        }
        std::size_t winner = entrants.front();
        for (auto c : entrants)
            if (better(c, winner)) winner = c;
        return winner;
    };
    const std::size_t p1 = one();
    const std::size_t p2 = one();
    return {p1, p2};
}

nn::Genome crossover(std::span<const double> p1, std::span<const double> p2, const EvoConfig& cfg, Rng& rng) {
    if (p1.size() != p2.size()) throw ContractViolation("crossover: genome lengths differ");
    nn::Genome child(p1.begin(), p1.end());
    const std::size_t batch = static_cast<std::size_t>(std::max(cfg.crossover_batch, 0));
    if (child.size() <= batch) {
        for (std::size_t i = 0; i < child.size(); ++i) child[i] = 0.5 * (p1[i] + p2[i]);
        return child;
    }
    for (std::size_t i : sample_indices(child.size(), batch, rng)) child[i] = 0.5 * (p1[i] + p2[i]);
    return child;
}

MutationCounts mutate(nn::Genome& genome, const EvoConfig& cfg, Rng& rng) {
    MutationCounts counts;
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    if (genome.empty() || !(unit(rng) < cfg.mutation_prob)) return counts;
    counts.applied = true;

    auto spread = [&](double param) { return cfg.noise_is_variance ? std::sqrt(param) : param; };
    const double ordinary_sd = spread(cfg.mutation_strength);
    const double super_sd = spread(100.0 * cfg.mutation_strength);
    const double reset_sd = 1.0;  // N(0, 1) is the same under either reading
    std::normal_distribution<double> normal(0.0, 1.0);

    const std::size_t k = std::min(genome.size(), static_cast<std::size_t>(std::max(cfg.mutation_batch, 0)));
    for (std::size_t i : sample_indices(genome.size(), k, rng)) {
        const double kappa = unit(rng);
        const double z = normal(rng);
        if (kappa <= cfg.super_mut_prob) {
            genome[i] += super_sd * z;
            ++counts.super_mutated;
        } else if (kappa <= cfg.reset_prob) {
            genome[i] = reset_sd * z;
            ++counts.reset;
        } else {
            genome[i] += ordinary_sd * z;
            ++counts.ordinary;
        }
    }
    return counts;
}

std::vector<Individual> next_generation(std::span<const Individual> population, const EvoConfig& cfg, Rng& rng) {
    const auto elites = select_elites(population, cfg.num_elites());
    std::vector<Individual> next(population.begin(), population.end());
    for (std::size_t i = 0; i < population.size(); ++i) {
        if (std::find(elites.begin(), elites.end(), i) != elites.end()) continue;
        const auto [a, b] = tournament(population, cfg.tournament_size, rng);
        nn::Genome child = crossover(population[a].genome, population[b].genome, cfg, rng);
        mutate(child, cfg, rng);
        next[i] = Individual{std::move(child), std::nullopt};
    }
    return next;
}

}  // namespace edrl::evo
