#include "edrl/env.hpp"

#include <algorithm>
#include <cmath>
#include <complex>
#include <numbers>
#include <string>

namespace edrl::env {

std::string_view to_string(SliceKind kind) {
    switch (kind) {
        case SliceKind::embb: return "embb";
        case SliceKind::mtc: return "mtc";
        case SliceKind::urllc: return "urllc";
    }
    throw ConfigError("unknown slice kind");
}

SliceKind parse_slice_kind(std::string_view name) {
    if (name == "embb") return SliceKind::embb;
    if (name == "mtc") return SliceKind::mtc;
    if (name == "urllc") return SliceKind::urllc;
    throw ConfigError("unknown slice kind '" + std::string(name) + "'", "kind");
}

std::string_view qos_unit(SliceKind kind) {
    switch (kind) {
        case SliceKind::embb: return "bit/s";
        case SliceKind::mtc: return "devices";
        case SliceKind::urllc: return "s";
    }
    throw ConfigError("unknown slice kind");
}

namespace {

void require(bool ok, const char* key, const char* what) {
    if (!ok) throw ConfigError(what, key);
}

}  // namespace

void CellConfig::validate() const {
    require(num_rbs >= 1, "num_rbs", "must be >= 1");
    require(std::isfinite(rb_bandwidth_hz) && rb_bandwidth_hz > 0, "rb_bandwidth_hz", "must be > 0");
    require(std::isfinite(subcarrier_spacing_hz) && subcarrier_spacing_hz > 0, "subcarrier_spacing_hz",
            "must be > 0");
    require(std::isfinite(tx_power_dbm), "tx_power_dbm", "must be finite");
    require(std::isfinite(noise_psd_dbm_hz), "noise_psd_dbm_hz", "must be finite");
    require(std::isfinite(pathloss_exp) && pathloss_exp > 0, "pathloss_exp", "must be > 0");
    require(num_taps >= 1, "num_taps", "must be >= 1");
    require(std::isfinite(cell_radius_m) && cell_radius_m > 0, "cell_radius_m", "must be > 0");
    require(std::isfinite(min_distance_m) && min_distance_m > 0 && min_distance_m <= cell_radius_m,
            "min_distance_m", "must be in (0, cell_radius_m]");
    require(std::isfinite(mtc_min_rate_bps) && mtc_min_rate_bps >= 0, "mtc_min_rate_bps", "must be >= 0");
    require(std::isfinite(urllc_delay_cap_s) && urllc_delay_cap_s > 0, "urllc_delay_cap_s", "must be > 0");
    for (const auto& i : interferers) {
        require(std::isfinite(i.distance_m) && i.distance_m > 0, "interferers.distance_m", "must be > 0");
        require(std::isfinite(i.tx_power_dbm), "interferers.tx_power_dbm", "must be finite");
    }
}

void SliceSpec::validate() const {
    require(num_ues >= 1, "num_ues", "must be >= 1");
    require(std::isfinite(qos_threshold) && qos_threshold > 0, "qos_threshold", "must be > 0");
    require(std::isfinite(qos_margin) && qos_margin > 0, "qos_margin", "must be > 0");
    if (kind == SliceKind::urllc)
        require(std::isfinite(urllc_mean_packet_bits) && urllc_mean_packet_bits > 0, "urllc_mean_packet_bits",
                "must be > 0");
}

std::vector<SliceSpec> default_slices() {
    return {
        {0, SliceKind::embb, 5, 2e6, 0.5e6, 1e4},
        {1, SliceKind::mtc, 20, 18.0, 2.0, 1e4},
        {2, SliceKind::urllc, 5, 10e-3, 5e-3, 1e4},
    };
}

void validate_slices(std::span<const SliceSpec> slices) {
    if (slices.empty()) throw ConfigError("at least one slice required", "slices");
    for (std::size_t l = 0; l < slices.size(); ++l) {
        slices[l].validate();
        if (slices[l].id != static_cast<int>(l))
            throw ConfigError("slice ids must be 0..L-1 in order", "slices.id");
    }
}

Allocation::Allocation(int slices, int ues, int rbs)
    : num_slices(slices),
      num_ues(ues),
      num_rbs(rbs),
      slice_rb(static_cast<std::size_t>(slices) * rbs, 0),
      ue_rb(static_cast<std::size_t>(ues) * rbs, 0) {}

int Allocation::slice_rb_count(int slice) const {
    int count = 0;
    for (int k = 0; k < num_rbs; ++k) count += b(slice, k);
    return count;
}

void check_feasible(const Allocation& alloc, std::span<const int> ue_slice) {
    const int K = alloc.num_rbs;
    if (alloc.slice_rb.size() != static_cast<std::size_t>(alloc.num_slices) * K ||
        alloc.ue_rb.size() != static_cast<std::size_t>(alloc.num_ues) * K ||
        ue_slice.size() != static_cast<std::size_t>(alloc.num_ues))
        throw ConstraintViolation("allocation dimensions inconsistent");

    long used = 0;
    for (int k = 0; k < K; ++k) {
        int owners = 0;
        for (int l = 0; l < alloc.num_slices; ++l) owners += alloc.b(l, k);
        if (owners > 1) throw ConstraintViolation("RB " + std::to_string(k) + " owned by more than one slice");

        int users = 0;
        for (int n = 0; n < alloc.num_ues; ++n) {
            if (!alloc.e(n, k)) continue;
            const int l = ue_slice[n];
            if (l < 0 || l >= alloc.num_slices || !alloc.b(l, k))
                throw ConstraintViolation("UE " + std::to_string(n) + " uses RB " + std::to_string(k) +
                                          " not owned by its slice");
            ++users;
            used += 1;
        }
        if (users > 1) throw ConstraintViolation("RB " + std::to_string(k) + " assigned to more than one UE");
    }
    if (used > K) throw ConstraintViolation("more than K RB assignments");
}

double dbm_to_watts(double dbm) { return std::pow(10.0, (dbm - 30.0) / 10.0); }

double noise_power_watts(const CellConfig& cfg) {
    return dbm_to_watts(cfg.noise_psd_dbm_hz) * cfg.rb_bandwidth_hz;
}

Eigen::MatrixXd sample_channel(const CellConfig& cfg, int num_ues, Rng& rng) {
    const int K = cfg.num_rbs;
    const int L = cfg.num_taps;
    // Taps are spaced one full-band sample apart, so tap m rotates by 2*pi*m*k/K at RB k.
    std::vector<std::complex<double>> twiddle(static_cast<std::size_t>(K));
    for (int i = 0; i < K; ++i) {
        const double phase = -2.0 * std::numbers::pi * i / K;
        twiddle[i] = {std::cos(phase), std::sin(phase)};
    }
    const double tap_scale = std::sqrt(1.0 / (2.0 * L));
    std::normal_distribution<double> normal(0.0, 1.0);
    std::vector<std::complex<double>> taps(static_cast<std::size_t>(L));

    Eigen::MatrixXd gains(num_ues, K);
    for (int n = 0; n < num_ues; ++n) {
        for (auto& t : taps) {
            const double re = normal(rng);
            const double im = normal(rng);
            t = {re * tap_scale, im * tap_scale};
        }
        for (int k = 0; k < K; ++k) {
            std::complex<double> h{0.0, 0.0};
            for (int m = 0; m < L; ++m) h += taps[m] * twiddle[(static_cast<long>(m) * k) % K];
            gains(n, k) = std::norm(h);
        }
    }
    return gains;
}

double per_rb_rate(const UeState& ue, int rb, const CellConfig& cfg, double interference_w) {
    if (!(ue.distance_m > 0) || !std::isfinite(ue.distance_m))
        throw ContractViolation("UE " + std::to_string(ue.id) + " has non-positive distance");
    const double signal = dbm_to_watts(cfg.tx_power_dbm) * std::pow(ue.distance_m, -cfg.pathloss_exp) *
                          ue.fading[static_cast<std::size_t>(rb)];
    const double sinr = signal / (interference_w + noise_power_watts(cfg));
    return cfg.rb_bandwidth_hz * std::log2(1.0 + sinr);
}

double interferer_distance(const UeState& ue, const CellConfig& cfg, std::size_t j) {
    const auto& ifr = cfg.interferers.at(j);
    const double angle = 2.0 * std::numbers::pi * static_cast<double>(j) / static_cast<double>(cfg.interferers.size());
    const double dx = ue.x_m - ifr.distance_m * std::cos(angle);
    const double dy = ue.y_m - ifr.distance_m * std::sin(angle);
    return std::max(std::hypot(dx, dy), cfg.min_distance_m);
}

double interference_at(const UeState& ue, int /*rb*/, const CellConfig& cfg, std::span<const double> gains) {
    if (gains.size() != cfg.interferers.size())
        throw ContractViolation("one gain per interferer required");
    double total = 0.0;
    for (std::size_t j = 0; j < cfg.interferers.size(); ++j) {
        total += dbm_to_watts(cfg.interferers[j].tx_power_dbm) *
                 std::pow(interferer_distance(ue, cfg, j), -cfg.pathloss_exp) * gains[j];
    }
    return total;
}

double interference_at(const UeState& ue, int rb, const CellConfig& cfg, Rng& rng) {
    std::exponential_distribution<double> rayleigh_power(1.0);
    std::vector<double> gains(cfg.interferers.size());
    for (auto& g : gains) g = rayleigh_power(rng);
    return interference_at(ue, rb, cfg, gains);
}

std::vector<double> ue_throughputs(const Allocation& alloc, const Eigen::MatrixXd& rates,
                                   std::span<const int> ue_slice) {
    if (rates.rows() != alloc.num_ues || rates.cols() != alloc.num_rbs)
        throw ContractViolation("rate matrix must be N x K");
    std::vector<double> out(static_cast<std::size_t>(alloc.num_ues), 0.0);
    for (int n = 0; n < alloc.num_ues; ++n) {
        const int l = ue_slice[n];
        double sum = 0.0;
        for (int k = 0; k < alloc.num_rbs; ++k)
            if (alloc.e(n, k) && alloc.b(l, k)) sum += rates(n, k);
        out[n] = sum;
    }
    return out;
}

double slice_qos_from_throughput(const SliceSpec& slice, std::span<const UeState> ues,
                                 std::span<const double> throughput, const CellConfig& cfg) {
    double sum = 0.0;
    double worst = 0.0;
    int members = 0;
    int served = 0;
    for (const auto& ue : ues) {
        if (ue.slice != slice.id) continue;
        const double rate = throughput[static_cast<std::size_t>(ue.id)];
        ++members;
        sum += rate;
        if (rate >= cfg.mtc_min_rate_bps) ++served;
        const double delay = rate > 0.0 ? std::min(ue.hol_packet_bits / rate, cfg.urllc_delay_cap_s)
                                        : cfg.urllc_delay_cap_s;
        worst = std::max(worst, delay);
    }
    switch (slice.kind) {
        case SliceKind::embb: return members > 0 ? sum / members : 0.0;
        case SliceKind::mtc: return static_cast<double>(served);
        case SliceKind::urllc: return worst;
    }
    throw ConfigError("unknown slice kind", "kind");
}

double slice_qos(const SliceSpec& slice, std::span<const UeState> ues, const Allocation& alloc,
                 const Eigen::MatrixXd& rates, const CellConfig& cfg) {
    std::vector<int> ue_slice(ues.size());
    for (const auto& ue : ues) ue_slice.at(static_cast<std::size_t>(ue.id)) = ue.slice;
    const auto tput = ue_throughputs(alloc, rates, ue_slice);
    return slice_qos_from_throughput(slice, ues, tput, cfg);
}

Environment::Environment(CellConfig cfg, std::vector<SliceSpec> slices)
    : cfg_(std::move(cfg)), slices_(std::move(slices)) {
    cfg_.validate();
    int total = 0;
    for (const auto& s : slices_) total += std::max(s.num_ues, 0);
    if (total == 0) throw ConfigError("slices serve no UEs", "slices.num_ues");
    validate_slices(slices_);
    for (const auto& s : slices_)
        for (int i = 0; i < s.num_ues; ++i) ue_slice_.push_back(s.id);
    ues_.resize(ue_slice_.size());
    for (std::size_t n = 0; n < ues_.size(); ++n) {
        ues_[n].id = static_cast<int>(n);
        ues_[n].slice = ue_slice_[n];
        ues_[n].fading.assign(static_cast<std::size_t>(cfg_.num_rbs), 1.0);
    }
}

void Environment::reset(std::uint64_t seed) {
    rng_.seed(seed);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    for (auto& ue : ues_) {
        const double r = std::max(cfg_.cell_radius_m * std::sqrt(unit(rng_)), cfg_.min_distance_m);
        const double theta = 2.0 * std::numbers::pi * unit(rng_);
        ue.x_m = r * std::cos(theta);
        ue.y_m = r * std::sin(theta);
        ue.distance_m = r;
    }
    redraw_fading();
    redraw_packets();
}

void Environment::redraw_fading() {
    const Eigen::MatrixXd gains = sample_channel(cfg_, num_ues(), rng_);
    for (auto& ue : ues_)
        for (int k = 0; k < cfg_.num_rbs; ++k) ue.fading[static_cast<std::size_t>(k)] = gains(ue.id, k);
}

void Environment::redraw_packets() {
    for (auto& ue : ues_) {
        const auto& s = slices_[static_cast<std::size_t>(ue.slice)];
        if (s.kind == SliceKind::urllc) {
            std::exponential_distribution<double> size(1.0 / s.urllc_mean_packet_bits);
            ue.hol_packet_bits = size(rng_);
        } else {
            ue.hol_packet_bits = 0.0;
        }
    }
}

QosReport Environment::step(const Allocation& alloc, int ttis) {
    if (ttis < 1) throw ContractViolation("ttis per step must be >= 1");
    if (alloc.num_slices != num_slices() || alloc.num_ues != num_ues() || alloc.num_rbs != num_rbs())
        throw ConstraintViolation("allocation shape does not match the environment");
    check_feasible(alloc, ue_slice_);

    const int N = num_ues();
    const int K = num_rbs();
    const int L = num_slices();
    const std::size_t J = cfg_.interferers.size();

    QosReport report;
    report.slice_qos.assign(L, 0.0);
    report.ue_throughput_bps.assign(N, 0.0);
    report.violation_prob.assign(L, 0.0);
    report.violations.assign(L, 0);
    report.ttis = ttis;

    // Interferer path gains depend only on placement, which is fixed within a step.
    Eigen::MatrixXd ifr_path(N, static_cast<Eigen::Index>(J));
    for (int n = 0; n < N; ++n)
        for (std::size_t j = 0; j < J; ++j)
            ifr_path(n, static_cast<Eigen::Index>(j)) =
                dbm_to_watts(cfg_.interferers[j].tx_power_dbm) *
                std::pow(interferer_distance(ues_[n], cfg_, j), -cfg_.pathloss_exp);

    std::exponential_distribution<double> rayleigh_power(1.0);
    Eigen::MatrixXd rates(N, K);
    last_interference_.resize(N, K);
    for (int t = 0; t < ttis; ++t) {
        redraw_fading();
        redraw_packets();
        rates.setZero();
        // Every (n, k, j) gain is drawn regardless of the allocation so that the
        // random stream, and hence the channel, is identical across policies.
        for (int n = 0; n < N; ++n) {
            for (int k = 0; k < K; ++k) {
                double interference = 0.0;
                for (std::size_t j = 0; j < J; ++j)
                    interference += ifr_path(n, static_cast<Eigen::Index>(j)) * rayleigh_power(rng_);
                last_interference_(n, k) = interference;
                if (alloc.e(n, k)) rates(n, k) = per_rb_rate(ues_[n], k, cfg_, interference);
            }
        }
        const auto tput = ue_throughputs(alloc, rates, ue_slice_);
        for (int n = 0; n < N; ++n) report.ue_throughput_bps[n] += tput[n];
        for (int l = 0; l < L; ++l) {
            const double q = slice_qos_from_throughput(slices_[l], ues_, tput, cfg_);
            report.slice_qos[l] += q;
            if (sla_violated(slices_[l], q)) ++report.violations[l];
        }
    }
    for (auto& v : report.slice_qos) v /= ttis;
    for (auto& v : report.ue_throughput_bps) v /= ttis;
    for (int l = 0; l < L; ++l) report.violation_prob[l] = static_cast<double>(report.violations[l]) / ttis;
    return report;
}

}  // namespace edrl::env
