#pragma once

// Independent reference computations shared by the unit tests and the
// acceptance binary. Nothing here calls the code path it is checking.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <random>
#include <span>
#include <vector>

#include <Eigen/Core>

#include "edrl/ddpg.hpp"
#include "edrl/env.hpp"
#include "edrl/evo.hpp"
#include "edrl/mdp.hpp"
#include "edrl/nn.hpp"

namespace oracle {

// ---- radio -----------------------------------------------------------------

/// B log2(1 + p d^-eta h / (N0 B + I)) written out from scratch.
inline double rb_rate(const edrl::env::CellConfig& c, double distance, double fading, double interference) {
    const double p_watts = std::pow(10.0, c.tx_power_dbm / 10.0) / 1000.0;
    const double noise_watts = std::pow(10.0, c.noise_psd_dbm_hz / 10.0) / 1000.0 * c.rb_bandwidth_hz;
    const double snr = p_watts * std::pow(distance, -c.pathloss_exp) * fading / (noise_watts + interference);
    return c.rb_bandwidth_hz * std::log2(1.0 + snr);
}

/// Brute-force per-UE throughput: sum over slices and RBs of e * b * rate.
inline std::vector<double> throughputs(const edrl::env::Environment& env, const edrl::env::Allocation& alloc) {
    const auto& ues = env.ues();
    std::vector<double> out(ues.size(), 0.0);
    for (std::size_t n = 0; n < ues.size(); ++n)
        for (int l = 0; l < alloc.num_slices; ++l)
            for (int k = 0; k < alloc.num_rbs; ++k) {
                const bool e = alloc.ue_rb[n * alloc.num_rbs + k] != 0;
                const bool b = alloc.slice_rb[static_cast<std::size_t>(l) * alloc.num_rbs + k] != 0;
                if (e && b && ues[n].slice == l)
                    out[n] += rb_rate(env.cell(), ues[n].distance_m, ues[n].fading[k],
                                      env.last_interference()(static_cast<Eigen::Index>(n), k));
            }
    return out;
}

// ---- allocation ----------------------------------------------------------

struct FeasibilityCount {
    int shared_rbs = 0;        // RB owned by more than one slice
    int foreign_ue_rbs = 0;    // UE on an RB its slice does not own
    int multi_user_rbs = 0;    // RB given to more than one UE
    int total_owned = 0;       // sum over slices of owned RBs
    bool ok(int num_rbs) const {
        return shared_rbs == 0 && foreign_ue_rbs == 0 && multi_user_rbs == 0 && total_owned == num_rbs;
    }
};

inline FeasibilityCount count_violations(const edrl::env::Allocation& a, std::span<const int> ue_slice) {
    FeasibilityCount c;
    for (int k = 0; k < a.num_rbs; ++k) {
        int owners = 0;
        for (int l = 0; l < a.num_slices; ++l) owners += a.slice_rb[static_cast<std::size_t>(l) * a.num_rbs + k];
        c.total_owned += owners;
        if (owners > 1) ++c.shared_rbs;
        int users = 0;
        for (int n = 0; n < a.num_ues; ++n) {
            if (!a.ue_rb[static_cast<std::size_t>(n) * a.num_rbs + k]) continue;
            ++users;
            if (!a.slice_rb[static_cast<std::size_t>(ue_slice[n]) * a.num_rbs + k]) ++c.foreign_ue_rbs;
        }
        if (users > 1) ++c.multi_user_rbs;
    }
    return c;
}

// ---- gradients -----------------------------------------------------------

struct GradCheck {
    double max_param_error = 0.0;
    double max_input_error = 0.0;
    std::size_t checked = 0;
};

inline double rel_error(double a, double b, double floor) {
    return std::abs(a - b) / std::max({std::abs(a), std::abs(b), floor});
}

/// Central differences of f = sum(G .* net(X)) against backprop. `stride`
/// > 1 checks every stride-th parameter (starting at a random offset).
inline GradCheck finite_difference_check(edrl::nn::MlpNet& net, const Eigen::MatrixXd& x, const Eigen::MatrixXd& g,
                                         double h, double floor, std::size_t stride = 1, std::size_t offset = 0) {
    edrl::nn::ForwardCache cache;
    net.forward(x, &cache);
    edrl::nn::Genome grads;
    const Eigen::MatrixXd dx = net.backward(cache, g, &grads);

    auto objective = [&](const edrl::nn::MlpNet& m, const Eigen::MatrixXd& in) {
        return (m.forward(in, nullptr).array() * g.array()).sum();
    };
    GradCheck out;
    auto params = net.mutable_params();
    for (std::size_t i = offset % stride; i < params.size(); i += stride) {
        const double saved = params[i];
        params[i] = saved + h;
        const double up = objective(net, x);
        params[i] = saved - h;
        const double down = objective(net, x);
        params[i] = saved;
        out.max_param_error = std::max(out.max_param_error, rel_error((up - down) / (2 * h), grads[i], floor));
        ++out.checked;
    }
    for (Eigen::Index r = 0; r < x.rows(); ++r)
        for (Eigen::Index c = 0; c < x.cols(); ++c) {
            Eigen::MatrixXd xp = x, xm = x;
            xp(r, c) += h;
            xm(r, c) -= h;
            const double fd = (objective(net, xp) - objective(net, xm)) / (2 * h);
            out.max_input_error = std::max(out.max_input_error, rel_error(fd, dx(r, c), floor));
        }
    return out;
}

// ---- policy-gradient toy -------------------------------------------------

struct ToyResult {
    int updates = 0;
    double max_deviation = std::numeric_limits<double>::infinity();
};

/// Trains an actor against Q(a) = -(a - target)^2 until every probe state
/// maps within `tol` of target or `max_updates` is hit.
inline ToyResult train_toy_actor(std::uint64_t seed, std::span<const int> hidden, double target, double tol,
                                 int max_updates, int batch = 32) {
    edrl::Rng rng(seed);
    auto actor = edrl::nn::MlpNet::random(
        edrl::nn::make_shape(1, hidden, 1, edrl::nn::OutputActivation::unit_tanh), rng);
    edrl::nn::AdamState adam({}, actor.num_params());
    const edrl::ddpg::ActionValueFn q = [target](const Eigen::MatrixXd&, const Eigen::MatrixXd& a) {
        edrl::ddpg::ActionValue v;
        v.q = (-(a.array() - target).square()).matrix().transpose().col(0);
        v.dq_da = -2.0 * (a.array() - target).matrix();
        return v;
    };
    std::uniform_real_distribution<double> unit(-1.0, 1.0);
    auto deviation = [&] {
        double worst = 0.0;
        for (int i = 0; i <= 20; ++i) {
            Eigen::VectorXd s(1);
            s(0) = -1.0 + 0.1 * i;
            worst = std::max(worst, std::abs(actor.forward(s)(0) - target));
        }
        return worst;
    };
    ToyResult r;
    for (r.updates = 0; r.updates < max_updates;) {
        Eigen::MatrixXd states(1, batch);
        for (int c = 0; c < batch; ++c) states(0, c) = unit(rng);
        edrl::ddpg::policy_gradient_step(actor, adam, states, q);
        ++r.updates;
        if (r.updates % 50 == 0 && (r.max_deviation = deviation()) <= tol) return r;
    }
    r.max_deviation = deviation();
    return r;
}

// ---- evolution -----------------------------------------------------------

inline double sphere_fitness(std::span<const double> x) {
    double s = 0.0;
    for (double v : x) s -= v * v;
    return s;
}

/// Best evaluated fitness per generation (index 0 = initial population) of
/// the evolutionary loop on the negated sphere.
inline std::vector<double> sphere_run(std::uint64_t seed, int generations, std::size_t genes,
                                      const edrl::evo::EvoConfig& cfg) {
    edrl::Rng rng(seed);
    std::uniform_real_distribution<double> init(-5.0, 5.0);
    std::vector<edrl::evo::Individual> pop(static_cast<std::size_t>(cfg.population_size));
    for (auto& ind : pop) {
        ind.genome.resize(genes);
        for (auto& v : ind.genome) v = init(rng);
    }
    std::vector<double> best;
    for (int g = 0; g <= generations; ++g) {
        double top = -std::numeric_limits<double>::infinity();
        for (auto& ind : pop) {
            ind.fitness = sphere_fitness(ind.genome);
            top = std::max(top, *ind.fitness);
        }
        best.push_back(top);
        if (g < generations) pop = edrl::evo::next_generation(pop, cfg, rng);
    }
    return best;
}

struct ModeFrequencies {
    double super = 0.0;
    double reset = 0.0;
    double ordinary = 0.0;
    std::size_t genes = 0;
};

inline ModeFrequencies mutation_modes(std::uint64_t seed, std::size_t min_genes, const edrl::evo::EvoConfig& cfg) {
    edrl::Rng rng(seed);
    std::size_t super = 0, reset = 0, ordinary = 0;
    edrl::nn::Genome genome(1000, 0.0);
    while (super + reset + ordinary < min_genes) {
        const auto c = edrl::evo::mutate(genome, cfg, rng);
        super += c.super_mutated;
        reset += c.reset;
        ordinary += c.ordinary;
    }
    ModeFrequencies f;
    f.genes = super + reset + ordinary;
    f.super = static_cast<double>(super) / f.genes;
    f.reset = static_cast<double>(reset) / f.genes;
    f.ordinary = static_cast<double>(ordinary) / f.genes;
    return f;
}

/// Fraction of tournaments won by the fittest of `pop_size` distinct individuals.
inline double tournament_best_frequency(std::uint64_t seed, int pop_size, int size, int draws) {
    edrl::Rng rng(seed);
    std::vector<edrl::evo::Individual> pop(static_cast<std::size_t>(pop_size));
    std::vector<double> f(pop.size());
    for (std::size_t i = 0; i < pop.size(); ++i) f[i] = static_cast<double>((i * 7) % pop.size());
    for (std::size_t i = 0; i < pop.size(); ++i) pop[i].fitness = f[i];
    const auto best = static_cast<std::size_t>(std::max_element(f.begin(), f.end()) - f.begin());
    int wins = 0;
    for (int d = 0; d < draws; ++d)
        if (edrl::evo::tournament(pop, size, rng).first == best) ++wins;
    return static_cast<double>(wins) / draws;
}

}  // namespace oracle
