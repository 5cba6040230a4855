#include "edrl/orchestrator.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

namespace edrl::orchestrator {

int EdrlConfig::resolved_grad_steps(int population_size) const {
    return grad_steps_per_generation.value_or(population_size * episode_length);
}

void EdrlConfig::validate() const {
    if (generations < 1) throw ConfigError("must be >= 1", "generations");
    if (sync_period < 1) throw ConfigError("must be >= 1", "sync_period");
    if (episode_length < 1) throw ConfigError("must be >= 1", "episode_length");
    if (ttis_per_step < 1) throw ConfigError("must be >= 1", "ttis_per_step");
    if (grad_steps_per_generation && *grad_steps_per_generation < 0)
        throw ConfigError("must be >= 0", "grad_steps_per_generation");
    if (ea_to_rl_patience < 1) throw ConfigError("must be >= 1", "ea_to_rl_patience");
    if (convergence_window < 2) throw ConfigError("must be >= 2", "convergence_window");
    if (!(convergence_tol >= 0.0) || !std::isfinite(convergence_tol)) throw ConfigError("must be >= 0", "convergence_tol");
}

bool check_convergence(std::span<const double> history, int window, double tolerance) {
    if (window < 2) return false;
    const auto w = static_cast<std::size_t>(window);
    if (history.size() < 2 * w) return false;
    const auto end = history.end();
    const double recent = std::accumulate(end - static_cast<std::ptrdiff_t>(w), end, 0.0) / window;
    const double before =
        std::accumulate(end - static_cast<std::ptrdiff_t>(2 * w), end - static_cast<std::ptrdiff_t>(w), 0.0) / window;
    const double change = std::abs(recent - before);
    return change == 0.0 || change < tolerance * std::abs(before);
}

std::uint64_t test_episode_seed(std::uint64_t master, int index) {
    return derive_seed(master, {stream::test_episode, static_cast<std::uint64_t>(index)});
}

namespace {

struct GradientPhase {
    double critic_loss = 0.0;
    double actor_objective = 0.0;
    int steps = 0;
};

GradientPhase train(ddpg::DdpgAgent& agent, const ddpg::ReplayBuffer& buffer, int steps, Rng& rng,
                    const char* phase, int record) {
    GradientPhase out;
    if (buffer.size() == 0) return out;
    for (int i = 0; i < steps; ++i) {
        const auto batch = buffer.sample(agent.config().batch_size, rng);
        try {
            out.critic_loss += agent.critic_update(batch);
            out.actor_objective += agent.actor_update(batch);
        } catch (const NumericError& e) {
            std::ostringstream dump;
            auto norm = [](std::span<const double> p) {
                double s = 0.0;
                for (double v : p) s += v * v;
                return std::sqrt(s);
            };
            dump << e.what() << " [" << phase << " " << record << ", gradient step " << i
                 << ", buffer size " << buffer.size() << ", |actor| " << norm(agent.actor().params())
                 << ", |critic| " << norm(agent.critic().params()) << ", critic Adam step "
                 << agent.critic_adam().step << "]";
            throw NumericError(dump.str());
        }
        agent.soft_update();
        ++out.steps;
    }
    if (out.steps > 0) {
        out.critic_loss /= out.steps;
        out.actor_objective /= out.steps;
    }
    return out;
}

void check_dimensions(const ddpg::DdpgAgent& agent, const mdp::SlicingTask& task) {
    if (agent.state_dim() != task.state_dim() || agent.action_dim() != task.action_dim())
        throw ContractViolation("actor/critic dimensions do not match the MDP");
}

}  // namespace

EdrlResult run_edrl(const EdrlConfig& cfg, const env::CellConfig& cell, const std::vector<env::SliceSpec>& slices,
                    const evo::EvoConfig& evo_cfg, const ddpg::DdpgConfig& ddpg_cfg,
                    const GenerationSink& on_generation) {
    cfg.validate();
    evo_cfg.validate();
    ddpg_cfg.validate();

    mdp::SlicingTask task(cell, slices, cfg.ttis_per_step);
    Rng agent_rng(derive_seed(cfg.seed, {stream::agent_init}));
    ddpg::DdpgAgent agent(task.state_dim(), task.action_dim(), ddpg_cfg, agent_rng);
    check_dimensions(agent, task);
    const nn::Shape actor_shape = agent.actor().shape();

    std::vector<evo::Individual> population;
    for (int i = 0; i < evo_cfg.population_size; ++i) {
        Rng rng(derive_seed(cfg.seed, {stream::population_init, static_cast<std::uint64_t>(i)}));
        population.push_back({nn::MlpNet::random(actor_shape, rng).flatten(), std::nullopt});
    }

    ddpg::ReplayBuffer buffer(ddpg_cfg.buffer_capacity, task.state_dim(), task.action_dim());
    Rng evo_rng(derive_seed(cfg.seed, {stream::evolution}));
    Rng replay_rng(derive_seed(cfg.seed, {stream::replay}));
    const int grad_steps = cfg.resolved_grad_steps(evo_cfg.population_size);
    const double gamma = ddpg_cfg.gamma;

    std::vector<GenerationStats> history;
    std::vector<double> rl_fitness_history;
    std::size_t env_steps = 0;
    int dominance_streak = 0;
    bool converged = false;

    for (int g = 1; g <= cfg.generations; ++g) {
        GenerationStats st;
        st.generation = g;

        // Population evaluation; trajectories enter the buffer in index order.
        std::vector<evo::EvalResult> evals;
        for (std::size_t i = 0; i < population.size(); ++i) {
            const auto seed = derive_seed(cfg.seed, {stream::individual_eval, static_cast<std::uint64_t>(g), i});
            evals.push_back(evo::evaluate(population[i], actor_shape, task, seed, cfg.episode_length, gamma));
            population[i].fitness = evals.back().fitness;
            for (const auto& t : evals.back().trajectory) buffer.push(t);
            env_steps += evals.back().trajectory.size();
            st.fitness.push_back(evals.back().fitness);
        }

        const auto rl_eval = evo::evaluate(agent.actor(), task,
                                           derive_seed(cfg.seed, {stream::rl_eval, static_cast<std::uint64_t>(g)}),
                                           cfg.episode_length, gamma);
        st.rl_fitness = rl_eval.fitness;
        st.rl_return = rl_eval.discounted_return;

        const auto elites = evo::select_elites(population, evo_cfg.num_elites());
        st.champion = elites.front();
        st.best_fitness = st.fitness[st.champion];
        st.mean_fitness = std::accumulate(st.fitness.begin(), st.fitness.end(), 0.0) / st.fitness.size();
        st.champion_train_return = evals[st.champion].discounted_return;
        const auto test = evo::evaluate(population[st.champion], actor_shape, task,
                                        test_episode_seed(cfg.seed, g), cfg.episode_length, gamma);
        st.champion_return = test.discounted_return;
        st.slice_qos = test.mean_slice_qos;
        st.ue_throughput = test.mean_throughput;

        // Elites -> RL actor after sustained dominance.
        if (cfg.ea_to_rl) {
            dominance_streak = st.best_fitness > st.rl_fitness ? dominance_streak + 1 : 0;
            if (dominance_streak >= cfg.ea_to_rl_patience) {
                agent.load_actor_genome(population[st.champion].genome);
                st.ea_to_rl = true;
                dominance_streak = 0;
            }
        }

        const auto evaluated = population;
        population = evo::next_generation(evaluated, evo_cfg, evo_rng);

        const auto phase = train(agent, buffer, grad_steps, replay_rng, "generation", g);
        st.critic_loss = phase.critic_loss;
        st.actor_objective = phase.actor_objective;
        st.grad_steps = phase.steps;

        if (g % cfg.sync_period == 0) {
            st.replaced_index = evo::weakest_index(evaluated, elites);
            population[st.replaced_index] = {agent.actor().flatten(), std::nullopt};
            st.rl_to_ea = true;
        }

        st.env_steps = env_steps;
        rl_fitness_history.push_back(st.rl_fitness);
        if (cfg.convergence_check &&
            check_convergence(rl_fitness_history, cfg.convergence_window, cfg.convergence_tol)) {
            st.converged = true;
            converged = true;
        }
        if (on_generation) on_generation(st);
        history.push_back(std::move(st));
        if (converged) break;
    }

    return EdrlResult{std::move(agent), std::move(population), std::move(history), converged, env_steps};
}

DrlResult run_drl_baseline(const EdrlConfig& cfg, const env::CellConfig& cell,
                           const std::vector<env::SliceSpec>& slices, const evo::EvoConfig& evo_cfg,
                           const ddpg::DdpgConfig& ddpg_cfg, std::optional<std::size_t> total_env_steps,
                           const EpisodeSink& on_episode) {
    cfg.validate();
    ddpg_cfg.validate();
    if (evo_cfg.population_size < 1) throw ConfigError("must be >= 1", "population_size");

    mdp::SlicingTask task(cell, slices, cfg.ttis_per_step);
    Rng agent_rng(derive_seed(cfg.seed, {stream::agent_init}));
    ddpg::DdpgAgent agent(task.state_dim(), task.action_dim(), ddpg_cfg, agent_rng);
    check_dimensions(agent, task);

    ddpg::ReplayBuffer buffer(ddpg_cfg.buffer_capacity, task.state_dim(), task.action_dim());
    Rng replay_rng(derive_seed(cfg.seed, {stream::replay}));
    Rng explore_rng(derive_seed(cfg.seed, {stream::exploration}));

    const std::size_t steps_per_generation =
        static_cast<std::size_t>(evo_cfg.population_size) * static_cast<std::size_t>(cfg.episode_length);
    const std::size_t budget =
        total_env_steps.value_or(static_cast<std::size_t>(cfg.generations) * steps_per_generation);
    const auto grad_per_generation = static_cast<std::size_t>(cfg.resolved_grad_steps(evo_cfg.population_size));
    const double gamma = ddpg_cfg.gamma;

    std::vector<EpisodeStats> history;
    std::size_t env_steps = 0;
    std::size_t grad_done = 0;
    for (int e = 1; env_steps < budget; ++e) {
        EpisodeStats st;
        st.episode = e;
        const int length = static_cast<int>(std::min<std::size_t>(cfg.episode_length, budget - env_steps));

        std::vector<double> state =
            task.reset(derive_seed(cfg.seed, {stream::drl_episode, static_cast<std::uint64_t>(e)}));
        std::vector<double> rewards;
        for (int t = 0; t < length; ++t) {
            auto action = agent.act(state, true, explore_rng);
            auto step = task.step(action);
            rewards.push_back(step.reward);
            buffer.push({std::move(state), std::move(action), step.next_state, step.reward});
            state = std::move(step.next_state);
        }
        env_steps += static_cast<std::size_t>(length);
        st.fitness = std::accumulate(rewards.begin(), rewards.end(), 0.0);
        st.train_return = mdp::discounted_return(rewards, gamma);

        // Same gradient-steps-per-environment-step ratio as the hybrid loop.
        const std::size_t grad_target = env_steps * grad_per_generation / steps_per_generation;
        const auto phase = train(agent, buffer, static_cast<int>(grad_target - grad_done), replay_rng, "episode", e);
        grad_done = grad_target;
        st.critic_loss = phase.critic_loss;
        st.actor_objective = phase.actor_objective;
        st.grad_steps = phase.steps;

        const auto test =
            evo::evaluate(agent.actor(), task, test_episode_seed(cfg.seed, e), cfg.episode_length, gamma);
        st.test_return = test.discounted_return;
        st.slice_qos = test.mean_slice_qos;
        st.ue_throughput = test.mean_throughput;
        st.env_steps = env_steps;
        if (on_episode) on_episode(st);
        history.push_back(std::move(st));
    }
    return DrlResult{std::move(agent), std::move(history), env_steps, grad_done};
}

}  // namespace edrl::orchestrator
