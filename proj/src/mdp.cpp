#include "edrl/mdp.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace edrl::mdp {

std::vector<double> uniform_action(int dim) { return std::vector<double>(static_cast<std::size_t>(dim), 0.5); }

std::vector<double> encode_state(std::span<const double> slice_qos, std::span<const env::SliceSpec> slices,
                                 std::span<const double> prev_action) {
    const std::size_t L = slices.size();
    int total_ues = 0;
    for (const auto& s : slices) total_ues += s.num_ues;
    if (slice_qos.size() != L) throw ContractViolation("encode_state: one Q_l per slice required");
    if (prev_action.size() != static_cast<std::size_t>(action_dim(static_cast<int>(L), total_ues)))
        throw ContractViolation("encode_state: previous action has the wrong dimension");

    std::vector<double> s;
    s.reserve(2 * L + prev_action.size());
    for (std::size_t l = 0; l < L; ++l) {
        const double ratio = slice_qos[l] / (2.0 * slices[l].qos_threshold);
        const double clamped = std::isfinite(ratio) ? std::clamp(ratio, 0.0, 1.0) : (ratio > 0 ? 1.0 : 0.0);
        s.push_back(2.0 * clamped - 1.0);
    }
    for (const auto& slice : slices) s.push_back(2.0 * slice.num_ues / total_ues - 1.0);
    s.insert(s.end(), prev_action.begin(), prev_action.end());
    return s;
}

std::vector<double> encode_state(const env::QosReport& report, std::span<const env::SliceSpec> slices,
                                 std::span<const double> prev_action) {
    return encode_state(report.slice_qos, slices, prev_action);
}

std::vector<double> initial_state(std::span<const env::SliceSpec> slices) {
    int total_ues = 0;
    std::vector<double> q;
    for (const auto& s : slices) {
        total_ues += s.num_ues;
        q.push_back(s.qos_threshold);
    }
    return encode_state(q, slices, uniform_action(action_dim(static_cast<int>(slices.size()), total_ues)));
}

std::vector<int> largest_remainder(std::span<const double> weights, int total) {
    const std::size_t n = weights.size();
    std::vector<int> counts(n, 0);
    if (n == 0 || total <= 0) return counts;

    std::vector<double> w(n);
    for (std::size_t i = 0; i < n; ++i) w[i] = (std::isfinite(weights[i]) && weights[i] > 0) ? weights[i] : 0.0;
    double sum = std::accumulate(w.begin(), w.end(), 0.0);
    if (!(sum > 0) || !std::isfinite(sum)) {
        std::fill(w.begin(), w.end(), 1.0);
        sum = static_cast<double>(n);
    }

    std::vector<double> remainder(n);
    int assigned = 0;
    for (std::size_t i = 0; i < n; ++i) {
        const double quota = total * (w[i] / sum);
        const double whole = std::floor(quota);
        counts[i] = static_cast<int>(whole);
        remainder[i] = quota - whole;
        assigned += counts[i];
    }
    // Rounding in quota can push the floor sum past total by one in pathological cases.
    while (assigned > total) {
        const auto it = std::max_element(counts.begin(), counts.end());
        --*it;
        --assigned;
    }
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) { return remainder[a] > remainder[b]; });
    for (std::size_t i = 0; assigned < total; i = (i + 1) % n) {
        ++counts[order[i]];
        ++assigned;
    }
    return counts;
}

env::Allocation decode_action(std::span<const double> action, std::span<const env::SliceSpec> slices,
                              std::span<const int> ue_slice, int num_rbs) {
    const int L = static_cast<int>(slices.size());
    const int N = static_cast<int>(ue_slice.size());
    if (action.size() != static_cast<std::size_t>(action_dim(L, N)))
        throw ContractViolation("decode_action: action has the wrong dimension");

    auto sanitize = [](double v) { return std::isfinite(v) ? std::clamp(v, 0.0, 1.0) : 0.0; };
    std::vector<double> shares(static_cast<std::size_t>(L));
    for (int l = 0; l < L; ++l) shares[l] = sanitize(action[l]);
    const auto rb_counts = largest_remainder(shares, num_rbs);

    env::Allocation alloc(L, N, num_rbs);
    int first_rb = 0;
    for (int l = 0; l < L; ++l) {
        const int block = rb_counts[l];
        for (int k = first_rb; k < first_rb + block; ++k) alloc.set_b(l, k, true);

        std::vector<int> members;
        std::vector<double> weights;
        for (int n = 0; n < N; ++n) {
            if (ue_slice[n] != l) continue;
            members.push_back(n);
            weights.push_back(sanitize(action[L + n]));
        }
        if (!members.empty()) {
            const auto per_ue = largest_remainder(weights, block);
            int k = first_rb;
            for (std::size_t i = 0; i < members.size(); ++i)
                for (int c = 0; c < per_ue[i]; ++c) alloc.set_e(members[i], k++, true);
        }
        first_rb += block;
    }
    return alloc;
}

double reward(const env::QosReport& report) {
    double r = 0.0;
    for (double p : report.violation_prob) r += 1.0 - p;
    return r;
}

double discounted_return(std::span<const double> rewards, double gamma) {
    double total = 0.0;
    double weight = 1.0;
    for (double r : rewards) {
        total += weight * r;
        weight *= gamma;
    }
    return total;
}

SlicingTask::SlicingTask(env::CellConfig cell, std::vector<env::SliceSpec> slices, int ttis_per_step)
    : env_(std::move(cell), std::move(slices)), ttis_(ttis_per_step) {
    if (ttis_ < 1) throw ConfigError("must be >= 1", "ttis_per_step");
}

std::vector<double> SlicingTask::reset(std::uint64_t seed) {
    env_.reset(seed);
    prev_action_ = uniform_action(action_dim());
    return initial_state(env_.slices());
}

StepResult SlicingTask::step(std::span<const double> action) {
    const auto alloc = decode_action(action, env_.slices(), env_.ue_slice(), env_.num_rbs());
    StepResult out;
    out.report = env_.step(alloc, ttis_);
    out.reward = reward(out.report);
    prev_action_.assign(action.begin(), action.end());
    out.next_state = encode_state(out.report, env_.slices(), prev_action_);
    return out;
}

}  // namespace edrl::mdp
