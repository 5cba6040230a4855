#include <doctest.h>

#include <vector>

#include "edrl/orchestrator.hpp"

using namespace edrl;
using namespace edrl::orchestrator;

namespace {

struct Small {
    env::CellConfig cell;
    std::vector<env::SliceSpec> slices;
    evo::EvoConfig evo;
    ddpg::DdpgConfig ddpg;
    EdrlConfig cfg;

    Small() {
        cell.num_rbs = 10;
        slices = {{0, env::SliceKind::embb, 2, 2e6, 0.5e6, 1e4},
                  {1, env::SliceKind::mtc, 3, 3.0, 1.0, 1e4},
                  {2, env::SliceKind::urllc, 1, 0.01, 0.005, 1e4}};
        evo.population_size = 4;
        evo.elite_fraction = 0.25;
        ddpg.hidden = {8, 8};
        ddpg.batch_size = 8;
        ddpg.buffer_capacity = 500;
        cfg.generations = 4;
        cfg.episode_length = 5;
        cfg.ttis_per_step = 2;
        cfg.grad_steps_per_generation = 6;
        cfg.convergence_check = false;
        cfg.seed = 77;
    }
};

bool same_stats(const GenerationStats& a, const GenerationStats& b) {
    return a.fitness == b.fitness && a.best_fitness == b.best_fitness && a.rl_fitness == b.rl_fitness &&
           a.champion_return == b.champion_return && a.critic_loss == b.critic_loss &&
           a.actor_objective == b.actor_objective && a.slice_qos == b.slice_qos &&
           a.ue_throughput == b.ue_throughput && a.replaced_index == b.replaced_index && a.rl_to_ea == b.rl_to_ea &&
           a.ea_to_rl == b.ea_to_rl && a.env_steps == b.env_steps;
}

}  // namespace

TEST_SUITE("orchestrator") {

TEST_CASE("convergence rule") {
    const std::vector<double> flat(20, 3.0);
    CHECK(check_convergence(flat, 10, 0.01));
    const std::vector<double> zeros(20, 0.0);
    CHECK(check_convergence(zeros, 10, 0.01));
    CHECK_FALSE(check_convergence(std::span<const double>(flat).first(19), 10, 0.01));
    std::vector<double> rising(20);
    for (int i = 0; i < 20; ++i) rising[i] = 10.0 + i;
    CHECK_FALSE(check_convergence(rising, 10, 0.01));
    std::vector<double> settling(20, 10.0);
    settling[19] = 10.05;
    CHECK(check_convergence(settling, 10, 0.01));
}

TEST_CASE("config validation") {
    EdrlConfig c;
    CHECK(c.generations == 100);
    CHECK(c.sync_period == 10);
    CHECK(c.resolved_grad_steps(10) == 400);
    c.sync_period = 0;
    CHECK_THROWS_AS(c.validate(), ConfigError);
}

TEST_CASE("stats shapes and RL-to-population schedule") {
    Small s;
    s.cfg.sync_period = 2;
    s.cfg.ea_to_rl = false;
    const auto r = run_edrl(s.cfg, s.cell, s.slices, s.evo, s.ddpg);
    REQUIRE(r.stats.size() == 4);
    for (const auto& st : r.stats) {
        CHECK(st.fitness.size() == 4);
        CHECK(st.slice_qos.size() == 3);
        CHECK(st.ue_throughput.size() == 6);
        CHECK(st.rl_to_ea == (st.generation % 2 == 0));
        CHECK(st.grad_steps == 6);
        CHECK(st.env_steps == static_cast<std::size_t>(st.generation) * 4 * 5);
    }
    CHECK(r.env_steps == 80);
}

TEST_CASE("a single generation with the default period copies nothing") {
    Small s;
    s.cfg.generations = 1;
    s.cfg.sync_period = 10;
    const auto r = run_edrl(s.cfg, s.cell, s.slices, s.evo, s.ddpg);
    REQUIRE(r.stats.size() == 1);
    CHECK_FALSE(r.stats[0].rl_to_ea);
}

TEST_CASE("period one puts the RL actor into the weakest non-elite slot every generation") {
    Small s;
    s.cfg.sync_period = 1;
    s.cfg.ea_to_rl = false;
    std::vector<std::size_t> replaced;
    const auto r = run_edrl(s.cfg, s.cell, s.slices, s.evo, s.ddpg, [&](const GenerationStats& st) {
        CHECK(st.rl_to_ea);
        // weakest by evaluated fitness, elites excluded
        const std::size_t champion = st.champion;
        double worst = 1e300;
        std::size_t expect = 0;
        for (std::size_t i = 0; i < st.fitness.size(); ++i)
            if (i != champion && st.fitness[i] < worst) worst = st.fitness[i], expect = i;
        CHECK(st.replaced_index == expect);
        replaced.push_back(st.replaced_index);
    });
    REQUIRE(!replaced.empty());
    CHECK(r.population[replaced.back()].genome == r.agent.actor().flatten());
}

TEST_CASE("same seed gives identical stats streams") {
    Small s;
    s.cfg.sync_period = 2;
    const auto a = run_edrl(s.cfg, s.cell, s.slices, s.evo, s.ddpg);
    const auto b = run_edrl(s.cfg, s.cell, s.slices, s.evo, s.ddpg);
    REQUIRE(a.stats.size() == b.stats.size());
    for (std::size_t i = 0; i < a.stats.size(); ++i) CHECK(same_stats(a.stats[i], b.stats[i]));
    CHECK(a.agent.actor() == b.agent.actor());

    s.cfg.seed = 78;
    const auto c = run_edrl(s.cfg, s.cell, s.slices, s.evo, s.ddpg);
    CHECK_FALSE(c.stats[0].fitness == a.stats[0].fitness);
}

TEST_CASE("elite copied into the RL actor and its target") {
    Small s;
    s.cfg.generations = 1;
    s.cfg.grad_steps_per_generation = 0;
    s.cfg.ea_to_rl_patience = 1;
    const auto r = run_edrl(s.cfg, s.cell, s.slices, s.evo, s.ddpg);
    const auto& st = r.stats[0];
    CHECK(st.ea_to_rl == (st.best_fitness > st.rl_fitness));
    if (st.ea_to_rl) {
        CHECK(r.population[st.champion].genome == r.agent.actor().flatten());
        CHECK(r.agent.target_actor() == r.agent.actor());
    }
}

TEST_CASE("elite must dominate for the configured number of generations") {
    Small s;
    s.cfg.generations = 6;
    s.cfg.grad_steps_per_generation = 0;
    s.cfg.ea_to_rl_patience = 3;
    s.cfg.sync_period = 100;
    int streak = 0;
    run_edrl(s.cfg, s.cell, s.slices, s.evo, s.ddpg, [&](const GenerationStats& st) {
        streak = st.best_fitness > st.rl_fitness ? streak + 1 : 0;
        CHECK(st.ea_to_rl == (streak >= 3));
        if (st.ea_to_rl) streak = 0;
    });
}

TEST_CASE("baseline without gradient steps keeps its initial actor") {
    Small s;
    s.cfg.grad_steps_per_generation = 0;
    const auto r = run_drl_baseline(s.cfg, s.cell, s.slices, s.evo, s.ddpg);
    Rng init(derive_seed(s.cfg.seed, {stream::agent_init}));
    const ddpg::DdpgAgent fresh(r.agent.state_dim(), r.agent.action_dim(), s.ddpg, init);
    CHECK(r.agent.actor() == fresh.actor());
    CHECK(r.grad_steps == 0);
}

TEST_CASE("baseline matches the hybrid run's environment steps and gradient steps") {
    Small s;
    const auto hybrid = run_edrl(s.cfg, s.cell, s.slices, s.evo, s.ddpg);
    const auto base = run_drl_baseline(s.cfg, s.cell, s.slices, s.evo, s.ddpg);
    CHECK(base.env_steps == hybrid.env_steps);
    CHECK(base.env_steps == static_cast<std::size_t>(4 * 4 * 5));
    int hybrid_grad = 0;
    for (const auto& st : hybrid.stats) hybrid_grad += st.grad_steps;
    CHECK(base.grad_steps == static_cast<std::size_t>(hybrid_grad));
    CHECK(base.stats.size() == 16);
    CHECK(base.stats.back().env_steps == base.env_steps);

    const auto again = run_drl_baseline(s.cfg, s.cell, s.slices, s.evo, s.ddpg);
    CHECK(again.agent.actor() == base.agent.actor());
    for (std::size_t i = 0; i < base.stats.size(); ++i) CHECK(again.stats[i].test_return == base.stats[i].test_return);

    const auto custom = run_drl_baseline(s.cfg, s.cell, s.slices, s.evo, s.ddpg, std::size_t{23});
    CHECK(custom.env_steps == 23);
}

TEST_CASE("convergence stops the hybrid loop early") {
    Small s;
    s.cfg.generations = 30;
    s.cfg.convergence_check = true;
    s.cfg.convergence_window = 2;
    s.cfg.convergence_tol = 1e9;  // any two windows count as converged
    const auto r = run_edrl(s.cfg, s.cell, s.slices, s.evo, s.ddpg);
    CHECK(r.converged);
    CHECK(r.stats.size() == 4);
    CHECK(r.stats.back().converged);
}

TEST_CASE("an empty slice list is rejected") {
    Small s;
    s.slices.clear();
    CHECK_THROWS(run_edrl(s.cfg, s.cell, s.slices, s.evo, s.ddpg));
}

}  // TEST_SUITE
