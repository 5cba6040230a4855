#pragma once

// Dense tanh MLP with hand-written backprop and Adam.
//
// All parameters live in one flat vector (the genome). Layer l contributes
// its weight matrix in row-major order (out x in, i.e. one row per output
// neuron) followed by its bias vector, layers in input-to-output order.

#include <cstdint>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "edrl/common.hpp"

namespace edrl::nn {

enum class OutputActivation : std::uint32_t {
    identity = 0,   // critic head
    unit_tanh = 1,  // actor head, (tanh(z) + 1) / 2 in [0, 1]
};

struct Shape {
    std::vector<int> sizes;  // input, hidden..., output
    OutputActivation output = OutputActivation::identity;

    int num_layers() const { return static_cast<int>(sizes.size()) - 1; }
    std::size_t num_params() const;
    bool operator==(const Shape&) const = default;
};

/// input -> hidden... -> output with the given head.
Shape make_shape(int input, std::span<const int> hidden, int output, OutputActivation head);

using Genome = std::vector<double>;

using RowMajorMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using WeightMap = Eigen::Map<RowMajorMatrix>;
using ConstWeightMap = Eigen::Map<const RowMajorMatrix>;
using BiasMap = Eigen::Map<Eigen::VectorXd>;
using ConstBiasMap = Eigen::Map<const Eigen::VectorXd>;

class MlpNet;

/// Activations recorded by a forward pass; valid until the net's parameters change.
struct ForwardCache {
    std::vector<Eigen::MatrixXd> activations;  // [0] = input batch, [l+1] = output of layer l
    const MlpNet* owner = nullptr;
    std::uint64_t revision = 0;

    const Eigen::MatrixXd& output() const { return activations.back(); }
};

class MlpNet {
public:
    MlpNet() = default;
    /// All parameters zero.
    explicit MlpNet(Shape shape);
    /// Weights and biases uniform in [-1/sqrt(fan_in), 1/sqrt(fan_in)].
    static MlpNet random(Shape shape, Rng& rng);

    const Shape& shape() const { return shape_; }
    int input_size() const { return shape_.sizes.front(); }
    int output_size() const { return shape_.sizes.back(); }
    std::size_t num_params() const { return params_.size(); }

    std::span<const double> params() const { return params_; }
    /// Mutable view; invalidates outstanding forward caches.
    std::span<double> mutable_params() {
        ++revision_;
        return params_;
    }
    ConstWeightMap weights(int layer) const;
    ConstBiasMap bias(int layer) const;
    WeightMap weights(int layer);
    BiasMap bias(int layer);

    /// Single input vector.
    Eigen::VectorXd forward(const Eigen::VectorXd& x) const;
    std::vector<double> forward(std::span<const double> x) const;
    /// Batch with one sample per column. Fills `cache` when given.
    Eigen::MatrixXd forward(const Eigen::MatrixXd& x, ForwardCache* cache) const;

    /// Reverse pass for the objective sum(output_grad .* output). Writes
    /// d/dparams into `param_grads` (resized) unless it is null, and returns
    /// the gradient with respect to the input batch.
    Eigen::MatrixXd backward(const ForwardCache& cache, const Eigen::MatrixXd& output_grad,
                             Genome* param_grads) const;

    Genome flatten() const { return {params_.begin(), params_.end()}; }
    static MlpNet unflatten(std::span<const double> genome, const Shape& shape);
    /// Replace all parameters; throws ContractViolation on length mismatch.
    void set_params(std::span<const double> genome);

    std::uint64_t revision() const { return revision_; }

    bool operator==(const MlpNet& other) const { return shape_ == other.shape_ && params_ == other.params_; }

private:
    std::size_t weight_offset(int layer) const { return offsets_[static_cast<std::size_t>(layer)]; }
    std::size_t bias_offset(int layer) const;

    Shape shape_;
    // Aligned so Eigen's vectorised kernels take the same code path (and
    // summation order) no matter where the heap places the buffer.
    std::vector<double, Eigen::aligned_allocator<double>> params_;
    std::vector<std::size_t> offsets_;
    std::uint64_t revision_ = 0;
};

struct AdamConfig {
    double lr = 1e-4;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
    bool operator==(const AdamConfig&) const = default;
};

struct AdamState {
    AdamConfig config;
    std::vector<double> m;
    std::vector<double> v;
    std::uint64_t step = 0;

    AdamState() = default;
    AdamState(AdamConfig cfg, std::size_t num_params) : config(cfg), m(num_params, 0.0), v(num_params, 0.0) {}
    bool operator==(const AdamState&) const = default;
};

/// One bias-corrected Adam step (descent). Throws NumericError on a
/// non-finite gradient, leaving net and state untouched.
void adam_step(MlpNet& net, std::span<const double> grads, AdamState& state);

/// target <- tau * online + (1 - tau) * target.
void soft_update(MlpNet& target, const MlpNet& online, double tau);

// Checkpoint layout, all little-endian:
//   8 bytes  magic "EDRLMLP\0"
//   u32      format version (1)
//   u32      output activation (0 identity, 1 unit_tanh)
//   u32      number of layer sizes S
//   S x u32  layer sizes, input first
//   u64      parameter count P
//   P x f64  parameters in genome order
void save_checkpoint(const MlpNet& net, std::ostream& out);
MlpNet load_checkpoint(std::istream& in);
void save_checkpoint(const MlpNet& net, const std::string& path);
MlpNet load_checkpoint(const std::string& path);

namespace io {
// Little-endian primitives shared with the agent checkpoint.
void write_u32(std::ostream& out, std::uint32_t v);
void write_u64(std::ostream& out, std::uint64_t v);
void write_f64(std::ostream& out, double v);
std::uint32_t read_u32(std::istream& in);
std::uint64_t read_u64(std::istream& in);
double read_f64(std::istream& in);
}  // namespace io

}  // namespace edrl::nn
