#pragma once

// Deterministic policy gradient learner: replay buffer, actor/critic with
// soft-updated targets.

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "edrl/common.hpp"
#include "edrl/nn.hpp"

namespace edrl::ddpg {

struct Transition {
    std::vector<double> state;
    std::vector<double> action;
    std::vector<double> next_state;
    double reward = 0.0;

    bool operator==(const Transition&) const = default;
};

/// Columns are samples.
struct Batch {
    Eigen::MatrixXd states;
    Eigen::MatrixXd actions;
    Eigen::MatrixXd next_states;
    Eigen::VectorXd rewards;

    int size() const { return static_cast<int>(rewards.size()); }
};

Batch make_batch(std::span<const Transition> transitions);

/// Bounded FIFO. Storage grows lazily up to `capacity`, then the oldest
/// entry is overwritten.
class ReplayBuffer {
public:
    ReplayBuffer(std::size_t capacity, int state_dim, int action_dim);

    void push(const Transition& t);
    std::size_t size() const { return size_; }
    std::size_t capacity() const { return capacity_; }
    /// i = 0 is the oldest stored transition.
    Transition at(std::size_t i) const;
    /// Uniform with replacement over current contents.
    Batch sample(int batch_size, Rng& rng) const;

private:
    std::size_t slot(std::size_t i) const { return (head_ + i) % capacity_; }
    void copy_into(std::size_t slot, Batch& batch, int col) const;

    std::size_t capacity_;
    int state_dim_;
    int action_dim_;
    std::size_t row_;  // doubles per stored transition
    std::vector<double> data_;
    std::size_t head_ = 0;  // slot of the oldest entry
    std::size_t size_ = 0;
};

struct DdpgConfig {
    std::vector<int> hidden{128, 256, 256};
    double gamma = 0.95;
    double tau = 0.005;
    double explore_sigma = 0.1;
    int batch_size = 128;
    std::size_t buffer_capacity = 1'000'000;
    nn::AdamConfig actor_adam{};
    nn::AdamConfig critic_adam{};

    void validate() const;
};

/// Q values and dQ/da for a batch of (state, action) columns.
struct ActionValue {
    Eigen::VectorXd q;
    Eigen::MatrixXd dq_da;
};
using ActionValueFn = std::function<ActionValue(const Eigen::MatrixXd& states, const Eigen::MatrixXd& actions)>;

/// One Adam ascent step on mean_i Q(s_i, actor(s_i)). Returns the mean Q
/// before the step.
double policy_gradient_step(nn::MlpNet& actor, nn::AdamState& adam, const Eigen::MatrixXd& states,
                            const ActionValueFn& critic);

class DdpgAgent {
public:
    DdpgAgent(int state_dim, int action_dim, DdpgConfig cfg, Rng& init_rng);

    /// Deterministic actor output, plus clamped N(0, sigma^2) noise when exploring.
    std::vector<double> act(std::span<const double> state, bool explore, Rng& rng) const;

    /// Regression of Q(s,a) onto r + gamma * Q'(s', actor'(s')). Returns the pre-step loss.
    double critic_update(const Batch& batch);
    /// Returns mean Q(s, actor(s)) before the step.
    double actor_update(const Batch& batch);
    /// Mean squared TD error without touching any parameters.
    double critic_loss(const Batch& batch) const;
    void soft_update();

    /// Copy a genome into both the online and target actor.
    void load_actor_genome(std::span<const double> genome);

    const DdpgConfig& config() const { return cfg_; }
    int state_dim() const { return state_dim_; }
    int action_dim() const { return action_dim_; }
    const nn::MlpNet& actor() const { return actor_; }
    const nn::MlpNet& critic() const { return critic_; }
    const nn::MlpNet& target_actor() const { return target_actor_; }
    const nn::MlpNet& target_critic() const { return target_critic_; }
    nn::MlpNet& actor() { return actor_; }
    nn::MlpNet& critic() { return critic_; }
    nn::MlpNet& target_actor() { return target_actor_; }
    nn::MlpNet& target_critic() { return target_critic_; }
    const nn::AdamState& actor_adam() const { return actor_adam_; }
    const nn::AdamState& critic_adam() const { return critic_adam_; }

    // Checkpoint: magic "EDRLDDPG", u32 version, then actor, critic, target
    // actor, target critic in the network checkpoint format, then the actor
    // and critic Adam states (u64 step, u64 n, n x f64 m, n x f64 v).
    void save(std::ostream& out) const;
    void save(const std::string& path) const;
    static DdpgAgent load(std::istream& in, DdpgConfig cfg);
    static DdpgAgent load(const std::string& path, DdpgConfig cfg);

private:
    DdpgAgent(DdpgConfig cfg, nn::MlpNet actor, nn::MlpNet critic, nn::MlpNet target_actor,
              nn::MlpNet target_critic, nn::AdamState actor_adam, nn::AdamState critic_adam);

    DdpgConfig cfg_;
    int state_dim_ = 0;
    int action_dim_ = 0;
    nn::MlpNet actor_;
    nn::MlpNet critic_;
    nn::MlpNet target_actor_;
    nn::MlpNet target_critic_;
    nn::AdamState actor_adam_;
    nn::AdamState critic_adam_;
};

/// Stacks states over actions, column by column.
Eigen::MatrixXd concat_rows(const Eigen::MatrixXd& top, const Eigen::MatrixXd& bottom);

}  // namespace edrl::ddpg
