#include "edrl/ddpg.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <fstream>
#include <istream>
#include <ostream>

namespace edrl::ddpg {

Batch make_batch(std::span<const Transition> transitions) {
    if (transitions.empty()) throw ContractViolation("make_batch: empty batch");
    const auto s = static_cast<Eigen::Index>(transitions.front().state.size());
    const auto a = static_cast<Eigen::Index>(transitions.front().action.size());
    const auto e = static_cast<Eigen::Index>(transitions.size());
    Batch b{Eigen::MatrixXd(s, e), Eigen::MatrixXd(a, e), Eigen::MatrixXd(s, e), Eigen::VectorXd(e)};
    for (Eigen::Index i = 0; i < e; ++i) {
        const auto& t = transitions[static_cast<std::size_t>(i)];
        if (static_cast<Eigen::Index>(t.state.size()) != s || static_cast<Eigen::Index>(t.next_state.size()) != s ||
            static_cast<Eigen::Index>(t.action.size()) != a)
            throw ContractViolation("make_batch: ragged transitions");
        b.states.col(i) = Eigen::Map<const Eigen::VectorXd>(t.state.data(), s);
        b.actions.col(i) = Eigen::Map<const Eigen::VectorXd>(t.action.data(), a);
        b.next_states.col(i) = Eigen::Map<const Eigen::VectorXd>(t.next_state.data(), s);
        b.rewards(i) = t.reward;
    }
    return b;
}

ReplayBuffer::ReplayBuffer(std::size_t capacity, int state_dim, int action_dim)
    : capacity_(capacity),
      state_dim_(state_dim),
      action_dim_(action_dim),
      row_(2 * static_cast<std::size_t>(state_dim) + static_cast<std::size_t>(action_dim) + 1) {
    if (capacity_ == 0) throw ConfigError("must be >= 1", "buffer_capacity");
}

void ReplayBuffer::push(const Transition& t) {
    if (t.state.size() != static_cast<std::size_t>(state_dim_) ||
        t.next_state.size() != static_cast<std::size_t>(state_dim_) ||
        t.action.size() != static_cast<std::size_t>(action_dim_))
        throw ContractViolation("ReplayBuffer::push: transition dimension mismatch");
    std::size_t dst;
    if (size_ < capacity_) {
        dst = slot(size_);
        if (data_.size() < (dst + 1) * row_) data_.resize((dst + 1) * row_);
        ++size_;
    } else {
        dst = head_;
        head_ = (head_ + 1) % capacity_;
    }
    double* p = data_.data() + dst * row_;
    p = std::copy(t.state.begin(), t.state.end(), p);
    p = std::copy(t.action.begin(), t.action.end(), p);
    p = std::copy(t.next_state.begin(), t.next_state.end(), p);
    *p = t.reward;
}

Transition ReplayBuffer::at(std::size_t i) const {
    if (i >= size_) throw ContractViolation("ReplayBuffer::at: index out of range");
    const double* p = data_.data() + slot(i) * row_;
    Transition t;
    t.state.assign(p, p + state_dim_);
    p += state_dim_;
    t.action.assign(p, p + action_dim_);
    p += action_dim_;
    t.next_state.assign(p, p + state_dim_);
    p += state_dim_;
    t.reward = *p;
    return t;
}

void ReplayBuffer::copy_into(std::size_t s, Batch& batch, int col) const {
    const double* p = data_.data() + s * row_;
    batch.states.col(col) = Eigen::Map<const Eigen::VectorXd>(p, state_dim_);
    p += state_dim_;
    batch.actions.col(col) = Eigen::Map<const Eigen::VectorXd>(p, action_dim_);
    p += action_dim_;
    batch.next_states.col(col) = Eigen::Map<const Eigen::VectorXd>(p, state_dim_);
    p += state_dim_;
    batch.rewards(col) = *p;
}

Batch ReplayBuffer::sample(int batch_size, Rng& rng) const {
    if (size_ == 0) throw ContractViolation("ReplayBuffer::sample: buffer is empty");
    if (batch_size < 1) throw ContractViolation("ReplayBuffer::sample: batch size must be >= 1");
    Batch b{Eigen::MatrixXd(state_dim_, batch_size), Eigen::MatrixXd(action_dim_, batch_size),
            Eigen::MatrixXd(state_dim_, batch_size), Eigen::VectorXd(batch_size)};
    std::uniform_int_distribution<std::size_t> pick(0, size_ - 1);
    for (int i = 0; i < batch_size; ++i) copy_into(slot(pick(rng)), b, i);
    return b;
}

void DdpgConfig::validate() const {
    if (hidden.empty()) throw ConfigError("at least one hidden layer required", "hidden");
    for (int h : hidden)
        if (h < 1) throw ConfigError("hidden sizes must be >= 1", "hidden");
    if (!(gamma >= 0.0 && gamma < 1.0)) throw ConfigError("must be in [0, 1)", "gamma");
    if (!(tau >= 0.0 && tau <= 1.0)) throw ConfigError("must be in [0, 1]", "tau");
    if (!(explore_sigma >= 0.0) || !std::isfinite(explore_sigma)) throw ConfigError("must be >= 0", "explore_sigma");
    if (batch_size < 1) throw ConfigError("must be >= 1", "batch_size");
    if (buffer_capacity < 1) throw ConfigError("must be >= 1", "buffer_capacity");
    for (const auto* a : {&actor_adam, &critic_adam})
        if (!(a->lr > 0) || !(a->beta1 >= 0 && a->beta1 < 1) || !(a->beta2 >= 0 && a->beta2 < 1) || !(a->eps > 0))
            throw ConfigError("invalid Adam hyper-parameters", "lr");
}

Eigen::MatrixXd concat_rows(const Eigen::MatrixXd& top, const Eigen::MatrixXd& bottom) {
    if (top.cols() != bottom.cols()) throw ContractViolation("concat_rows: column count mismatch");
    Eigen::MatrixXd out(top.rows() + bottom.rows(), top.cols());
    out.topRows(top.rows()) = top;
    out.bottomRows(bottom.rows()) = bottom;
    return out;
}

double policy_gradient_step(nn::MlpNet& actor, nn::AdamState& adam, const Eigen::MatrixXd& states,
                            const ActionValueFn& critic) {
    const auto e = states.cols();
    if (e < 1) throw ContractViolation("policy_gradient_step: empty batch");
    nn::ForwardCache cache;
    const Eigen::MatrixXd actions = actor.forward(states, &cache);
    const ActionValue qv = critic(states, actions);
    if (qv.q.size() != e || qv.dq_da.rows() != actions.rows() || qv.dq_da.cols() != e)
        throw ContractViolation("policy_gradient_step: critic returned wrong shapes");
    const double objective = qv.q.mean();
    if (!std::isfinite(objective)) throw NumericError("policy_gradient_step: non-finite Q");

    // Descend on -mean Q.
    const Eigen::MatrixXd out_grad = -qv.dq_da / static_cast<double>(e);
    nn::Genome grads;
    actor.backward(cache, out_grad, &grads);
    nn::adam_step(actor, grads, adam);
    return objective;
}

DdpgAgent::DdpgAgent(int state_dim, int action_dim, DdpgConfig cfg, Rng& init_rng)
    : cfg_(std::move(cfg)), state_dim_(state_dim), action_dim_(action_dim) {
    cfg_.validate();
    if (state_dim < 1 || action_dim < 1) throw ContractViolation("DdpgAgent: dimensions must be >= 1");
    actor_ = nn::MlpNet::random(nn::make_shape(state_dim, cfg_.hidden, action_dim, nn::OutputActivation::unit_tanh),
                                init_rng);
    critic_ = nn::MlpNet::random(
        nn::make_shape(state_dim + action_dim, cfg_.hidden, 1, nn::OutputActivation::identity), init_rng);
    target_actor_ = actor_;
    target_critic_ = critic_;
    actor_adam_ = nn::AdamState(cfg_.actor_adam, actor_.num_params());
    critic_adam_ = nn::AdamState(cfg_.critic_adam, critic_.num_params());
}

DdpgAgent::DdpgAgent(DdpgConfig cfg, nn::MlpNet actor, nn::MlpNet critic, nn::MlpNet target_actor,
                     nn::MlpNet target_critic, nn::AdamState actor_adam, nn::AdamState critic_adam)
    : cfg_(std::move(cfg)),
      state_dim_(actor.input_size()),
      action_dim_(actor.output_size()),
      actor_(std::move(actor)),
      critic_(std::move(critic)),
      target_actor_(std::move(target_actor)),
      target_critic_(std::move(target_critic)),
      actor_adam_(std::move(actor_adam)),
      critic_adam_(std::move(critic_adam)) {
    if (critic_.input_size() != state_dim_ + action_dim_ || critic_.output_size() != 1 ||
        !(target_actor_.shape() == actor_.shape()) || !(target_critic_.shape() == critic_.shape()))
        throw ContractViolation("DdpgAgent: inconsistent network shapes");
    if (actor_adam_.m.size() != actor_.num_params() || critic_adam_.m.size() != critic_.num_params())
        throw ContractViolation("DdpgAgent: Adam state does not match network size");
}

std::vector<double> DdpgAgent::act(std::span<const double> state, bool explore, Rng& rng) const {
    if (state.size() != static_cast<std::size_t>(state_dim_)) throw ContractViolation("act: state dimension mismatch");
    auto a = actor_.forward(state);
    if (explore) {
        std::normal_distribution<double> noise(0.0, 1.0);
        for (auto& v : a) v = std::clamp(v + cfg_.explore_sigma * noise(rng), 0.0, 1.0);
    }
    return a;
}

namespace {

Eigen::VectorXd td_targets(const DdpgAgent& agent, const Batch& batch) {
    const Eigen::MatrixXd next_actions = agent.target_actor().forward(batch.next_states, nullptr);
    const Eigen::MatrixXd next_q =
        agent.target_critic().forward(concat_rows(batch.next_states, next_actions), nullptr);
    return batch.rewards + agent.config().gamma * next_q.row(0).transpose();
}

}  // namespace

double DdpgAgent::critic_loss(const Batch& batch) const {
    if (batch.size() < 1) throw ContractViolation("critic_loss: empty batch");
    const Eigen::VectorXd y = td_targets(*this, batch);
    const Eigen::MatrixXd q = critic_.forward(concat_rows(batch.states, batch.actions), nullptr);
    return (q.row(0).transpose() - y).squaredNorm() / batch.size();
}

double DdpgAgent::critic_update(const Batch& batch) {
    if (batch.size() < 1) throw ContractViolation("critic_update: empty batch");
    const Eigen::VectorXd y = td_targets(*this, batch);
    nn::ForwardCache cache;
    const Eigen::MatrixXd q = critic_.forward(concat_rows(batch.states, batch.actions), &cache);
    const Eigen::RowVectorXd err = q.row(0) - y.transpose();
    const double loss = err.squaredNorm() / batch.size();
    if (!std::isfinite(loss)) throw NumericError("critic_update: non-finite loss");

    const Eigen::MatrixXd out_grad = (2.0 / batch.size()) * err;
    nn::Genome grads;
    critic_.backward(cache, out_grad, &grads);
    nn::adam_step(critic_, grads, critic_adam_);
    return loss;
}

double DdpgAgent::actor_update(const Batch& batch) {
    if (batch.size() < 1) throw ContractViolation("actor_update: empty batch");
    const nn::MlpNet& critic = critic_;
    const int s_dim = state_dim_;
    auto q_fn = [&critic, s_dim](const Eigen::MatrixXd& states, const Eigen::MatrixXd& actions) {
        nn::ForwardCache cache;
        const Eigen::MatrixXd q = critic.forward(concat_rows(states, actions), &cache);
        const Eigen::MatrixXd ones = Eigen::MatrixXd::Ones(1, states.cols());
        const Eigen::MatrixXd dx = critic.backward(cache, ones, nullptr);
        return ActionValue{q.row(0).transpose(), dx.bottomRows(dx.rows() - s_dim)};
    };
    return policy_gradient_step(actor_, actor_adam_, batch.states, q_fn);
}

void DdpgAgent::soft_update() {
    nn::soft_update(target_actor_, actor_, cfg_.tau);
    nn::soft_update(target_critic_, critic_, cfg_.tau);
}

void DdpgAgent::load_actor_genome(std::span<const double> genome) {
    actor_.set_params(genome);
    target_actor_.set_params(genome);
}

namespace {

constexpr std::array<char, 8> kAgentMagic{'E', 'D', 'R', 'L', 'D', 'D', 'P', 'G'};
constexpr std::uint32_t kAgentVersion = 1;

void write_adam(std::ostream& out, const nn::AdamState& s) {
    nn::io::write_u64(out, s.step);
    nn::io::write_u64(out, s.m.size());
    for (double v : s.m) nn::io::write_f64(out, v);
    for (double v : s.v) nn::io::write_f64(out, v);
}

nn::AdamState read_adam(std::istream& in, const nn::AdamConfig& cfg, std::size_t expected) {
    nn::AdamState s(cfg, 0);
    s.step = nn::io::read_u64(in);
    const auto n = nn::io::read_u64(in);
    if (n != expected) throw ContractViolation("agent checkpoint: Adam state size mismatch");
    s.m.resize(n);
    s.v.resize(n);
    for (auto& v : s.m) v = nn::io::read_f64(in);
    for (auto& v : s.v) v = nn::io::read_f64(in);
    return s;
}

}  // namespace

void DdpgAgent::save(std::ostream& out) const {
    out.write(kAgentMagic.data(), kAgentMagic.size());
    nn::io::write_u32(out, kAgentVersion);
    nn::save_checkpoint(actor_, out);
    nn::save_checkpoint(critic_, out);
    nn::save_checkpoint(target_actor_, out);
    nn::save_checkpoint(target_critic_, out);
    write_adam(out, actor_adam_);
    write_adam(out, critic_adam_);
}

void DdpgAgent::save(const std::string& path) const {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot open " + path + " for writing");
    save(out);
}

DdpgAgent DdpgAgent::load(std::istream& in, DdpgConfig cfg) {
    std::array<char, 8> magic{};
    if (!in.read(magic.data(), magic.size()) || magic != kAgentMagic)
        throw ContractViolation("not an agent checkpoint (bad magic)");
    if (nn::io::read_u32(in) != kAgentVersion) throw ContractViolation("unsupported agent checkpoint version");
    auto actor = nn::load_checkpoint(in);
    auto critic = nn::load_checkpoint(in);
    auto target_actor = nn::load_checkpoint(in);
    auto target_critic = nn::load_checkpoint(in);
    auto actor_adam = read_adam(in, cfg.actor_adam, actor.num_params());
    auto critic_adam = read_adam(in, cfg.critic_adam, critic.num_params());
    return DdpgAgent(std::move(cfg), std::move(actor), std::move(critic), std::move(target_actor),
                     std::move(target_critic), std::move(actor_adam), std::move(critic_adam));
}

DdpgAgent DdpgAgent::load(const std::string& path, DdpgConfig cfg) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open " + path);
    return load(in, std::move(cfg));
}

}  // namespace edrl::ddpg
