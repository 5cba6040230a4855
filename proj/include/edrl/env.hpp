#pragma once

// Downlink OFDMA slicing simulator: one O-RU cell, Rayleigh-faded RBs,
// neighbour-cell interference and per-slice QoS / SLA-violation tracking.

#include <cmath>
#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Core>

#include "edrl/common.hpp"

namespace edrl::env {

enum class SliceKind { embb, mtc, urllc };

std::string_view to_string(SliceKind kind);
/// Throws ConfigError for anything other than "embb", "mtc", "urllc".
SliceKind parse_slice_kind(std::string_view name);
/// Unit of Q_l for a slice kind: "bit/s", "devices" or "s".
std::string_view qos_unit(SliceKind kind);

struct Interferer {
    double distance_m = 750.0;  // from the serving cell centre
    double tx_power_dbm = 56.0;
};

struct CellConfig {
    int num_rbs = 50;
    double rb_bandwidth_hz = 200e3;
    double subcarrier_spacing_hz = 15e3;  // recorded only; RB bandwidth is authoritative
    double tx_power_dbm = 56.0;           // per RB
    double noise_psd_dbm_hz = -173.0;
    double pathloss_exp = 3.0;
    int num_taps = 10;
    // Interferers sit on a ring around the cell, interferer j at angle 2*pi*j/J.
    std::vector<Interferer> interferers{{750.0, 56.0}, {750.0, 56.0}};
    double cell_radius_m = 250.0;
    double min_distance_m = 1.0;
    double mtc_min_rate_bps = 10e3;
    double urllc_delay_cap_s = 1.0;

    void validate() const;  // throws ConfigError naming the field
};

struct SliceSpec {
    int id = 0;
    SliceKind kind = SliceKind::embb;
    int num_ues = 1;
    double qos_threshold = 1.0;  // lambda_l, in qos_unit(kind)
    double qos_margin = 1.0;     // epsilon_l, same unit
    double urllc_mean_packet_bits = 1e4;

    void validate() const;
};

/// eMBB / MTC / URLLC with 5 / 20 / 5 UEs and the default thresholds.
std::vector<SliceSpec> default_slices();
void validate_slices(std::span<const SliceSpec> slices);

struct UeState {
    int id = 0;
    int slice = 0;
    double x_m = 0.0;
    double y_m = 0.0;
    double distance_m = 1.0;
    std::vector<double> fading;  // power gain per RB
    double hol_packet_bits = 0.0;
};

/// Binary slice->RB (b) and UE->RB (e) indicators, both row-major over RBs.
struct Allocation {
    int num_slices = 0;
    int num_ues = 0;
    int num_rbs = 0;
    std::vector<std::uint8_t> slice_rb;
    std::vector<std::uint8_t> ue_rb;

    Allocation() = default;
    Allocation(int slices, int ues, int rbs);

    bool b(int slice, int rb) const { return slice_rb[static_cast<std::size_t>(slice) * num_rbs + rb] != 0; }
    bool e(int ue, int rb) const { return ue_rb[static_cast<std::size_t>(ue) * num_rbs + rb] != 0; }
    void set_b(int slice, int rb, bool v) { slice_rb[static_cast<std::size_t>(slice) * num_rbs + rb] = v; }
    void set_e(int ue, int rb, bool v) { ue_rb[static_cast<std::size_t>(ue) * num_rbs + rb] = v; }
    /// RBs currently owned by a slice.
    int slice_rb_count(int slice) const;
};

/// Throws ConstraintViolation if any of the allocation invariants fail.
void check_feasible(const Allocation& alloc, std::span<const int> ue_slice);

struct QosReport {
    std::vector<double> slice_qos;          // Q_l averaged over the step's TTIs
    std::vector<double> ue_throughput_bps;  // averaged over the step's TTIs
    std::vector<double> violation_prob;     // p_hat_l
    std::vector<int> violations;            // TTIs with |Q_l - lambda_l| >= eps_l
    int ttis = 0;

    bool operator==(const QosReport&) const = default;
};

double dbm_to_watts(double dbm);
/// sigma^2 integrated over one RB, in watts.
double noise_power_watts(const CellConfig& cfg);

/// N x K power gains of a num_taps-tap equal-power Rayleigh delay line,
/// evaluated at the K RB centres. E[h] = 1.
Eigen::MatrixXd sample_channel(const CellConfig& cfg, int num_ues, Rng& rng);

/// Shannon rate of one RB (bit/s). Throws ContractViolation for d <= 0.
double per_rb_rate(const UeState& ue, int rb, const CellConfig& cfg, double interference_w);

/// Distance from a UE to interferer j of the ring layout.
double interferer_distance(const UeState& ue, const CellConfig& cfg, std::size_t j);

/// Interference power (W) with the per-interferer power gains supplied.
double interference_at(const UeState& ue, int rb, const CellConfig& cfg, std::span<const double> gains);
/// Same, with fresh unit-mean exponential gains drawn from rng.
double interference_at(const UeState& ue, int rb, const CellConfig& cfg, Rng& rng);

/// Per-UE throughput (bit/s): sum over RBs of e*b*rate.
std::vector<double> ue_throughputs(const Allocation& alloc, const Eigen::MatrixXd& rates,
                                   std::span<const int> ue_slice);

/// Q_l for one slice: mean rate (eMBB), served-device count (MTC) or max
/// head-of-line delay (URLLC).
double slice_qos(const SliceSpec& slice, std::span<const UeState> ues, const Allocation& alloc,
                 const Eigen::MatrixXd& rates, const CellConfig& cfg);

/// Q_l from precomputed per-UE throughputs.
double slice_qos_from_throughput(const SliceSpec& slice, std::span<const UeState> ues,
                                 std::span<const double> throughput, const CellConfig& cfg);

inline bool sla_violated(const SliceSpec& slice, double q) {
    return std::abs(q - slice.qos_threshold) >= slice.qos_margin;
}

/// Environment state plus its private random stream.
class Environment {
public:
    Environment(CellConfig cfg, std::vector<SliceSpec> slices);

    /// New placements, fading and URLLC queues. Same seed, same state.
    void reset(std::uint64_t seed);

    /// Simulates `ttis` TTIs under a fixed allocation.
    QosReport step(const Allocation& alloc, int ttis);

    const CellConfig& cell() const { return cfg_; }
    const std::vector<SliceSpec>& slices() const { return slices_; }
    const std::vector<UeState>& ues() const { return ues_; }
    const std::vector<int>& ue_slice() const { return ue_slice_; }
    int num_ues() const { return static_cast<int>(ues_.size()); }
    int num_slices() const { return static_cast<int>(slices_.size()); }
    int num_rbs() const { return cfg_.num_rbs; }
    /// I_{n,k} (W) of the most recent TTI, N x K.
    const Eigen::MatrixXd& last_interference() const { return last_interference_; }

private:
    void redraw_fading();
    void redraw_packets();

    CellConfig cfg_;
    std::vector<SliceSpec> slices_;
    std::vector<int> ue_slice_;
    std::vector<UeState> ues_;
    Eigen::MatrixXd last_interference_;
    Rng rng_;
};

}  // namespace edrl::env
