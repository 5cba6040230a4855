#include "edrl/nn.hpp"

#include <array>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <istream>
#include <ostream>

namespace edrl::nn {

namespace {

// tanh through exp: Eigen vectorises exp for doubles but not tanh. Saturates
// cleanly to +-1 when exp over/underflows.
template <typename Derived>
void tanh_inplace(Eigen::MatrixBase<Derived>& z) {
    z = (1.0 - 2.0 / ((2.0 * z.array()).exp() + 1.0)).matrix();
}

template <typename Derived>
void unit_tanh_inplace(Eigen::MatrixBase<Derived>& z) {
    z = (1.0 - 1.0 / ((2.0 * z.array()).exp() + 1.0)).matrix();
}

}  // namespace

std::size_t Shape::num_params() const {
    std::size_t total = 0;
    for (int l = 0; l < num_layers(); ++l)
        total += static_cast<std::size_t>(sizes[l]) * sizes[l + 1] + static_cast<std::size_t>(sizes[l + 1]);
    return total;
}

Shape make_shape(int input, std::span<const int> hidden, int output, OutputActivation head) {
    Shape s;
    s.sizes.push_back(input);
    s.sizes.insert(s.sizes.end(), hidden.begin(), hidden.end());
    s.sizes.push_back(output);
    s.output = head;
    return s;
}

MlpNet::MlpNet(Shape shape) : shape_(std::move(shape)) {
    if (shape_.sizes.size() < 2) throw ContractViolation("MlpNet needs at least input and output sizes");
    for (int s : shape_.sizes)
        if (s < 1) throw ContractViolation("MlpNet layer sizes must be >= 1");
    std::size_t offset = 0;
    for (int l = 0; l < shape_.num_layers(); ++l) {
        offsets_.push_back(offset);
        offset += static_cast<std::size_t>(shape_.sizes[l]) * shape_.sizes[l + 1] + shape_.sizes[l + 1];
    }
    params_.assign(offset, 0.0);
}

MlpNet MlpNet::random(Shape shape, Rng& rng) {
    MlpNet net(std::move(shape));
    for (int l = 0; l < net.shape_.num_layers(); ++l) {
        const double bound = 1.0 / std::sqrt(static_cast<double>(net.shape_.sizes[l]));
        std::uniform_real_distribution<double> u(-bound, bound);
        const std::size_t begin = net.weight_offset(l);
        const std::size_t end = net.bias_offset(l) + static_cast<std::size_t>(net.shape_.sizes[l + 1]);
        for (std::size_t i = begin; i < end; ++i) net.params_[i] = u(rng);
    }
    return net;
}

std::size_t MlpNet::bias_offset(int layer) const {
    return offsets_[static_cast<std::size_t>(layer)] +
           static_cast<std::size_t>(shape_.sizes[layer]) * shape_.sizes[layer + 1];
}

ConstWeightMap MlpNet::weights(int layer) const {
    return {params_.data() + weight_offset(layer), shape_.sizes[layer + 1], shape_.sizes[layer]};
}
ConstBiasMap MlpNet::bias(int layer) const { return {params_.data() + bias_offset(layer), shape_.sizes[layer + 1]}; }
WeightMap MlpNet::weights(int layer) {
    ++revision_;
    return {params_.data() + weight_offset(layer), shape_.sizes[layer + 1], shape_.sizes[layer]};
}
BiasMap MlpNet::bias(int layer) {
    ++revision_;
    return {params_.data() + bias_offset(layer), shape_.sizes[layer + 1]};
}

Eigen::VectorXd MlpNet::forward(const Eigen::VectorXd& x) const {
    Eigen::MatrixXd batch = x;
    return forward(batch, nullptr).col(0);
}

std::vector<double> MlpNet::forward(std::span<const double> x) const {
    const Eigen::VectorXd in = Eigen::Map<const Eigen::VectorXd>(x.data(), static_cast<Eigen::Index>(x.size()));
    const Eigen::VectorXd out = forward(in);
    return {out.data(), out.data() + out.size()};
}

Eigen::MatrixXd MlpNet::forward(const Eigen::MatrixXd& x, ForwardCache* cache) const {
    if (x.rows() != input_size())
        throw ContractViolation("forward: input has " + std::to_string(x.rows()) + " rows, net expects " +
                                std::to_string(input_size()));
    const int layers = shape_.num_layers();
    if (cache) {
        cache->activations.resize(static_cast<std::size_t>(layers) + 1);
        cache->activations[0] = x;
        cache->owner = this;
        cache->revision = revision_;
    }
    Eigen::MatrixXd a = x;
    for (int l = 0; l < layers; ++l) {
        Eigen::MatrixXd z(shape_.sizes[l + 1], x.cols());
        z.noalias() = weights(l) * a;
        z.colwise() += bias(l);
        if (l + 1 < layers)
            tanh_inplace(z);
        else if (shape_.output == OutputActivation::unit_tanh)
            unit_tanh_inplace(z);
        a = std::move(z);
        if (cache) cache->activations[static_cast<std::size_t>(l) + 1] = a;
    }
    return a;
}

Eigen::MatrixXd MlpNet::backward(const ForwardCache& cache, const Eigen::MatrixXd& output_grad,
                                 Genome* param_grads) const {
    const int layers = shape_.num_layers();
    if (cache.owner != this || cache.revision != revision_ ||
        cache.activations.size() != static_cast<std::size_t>(layers) + 1)
        throw ContractViolation("backward: forward cache is stale or belongs to another net");
    const Eigen::MatrixXd& out = cache.output();
    if (output_grad.rows() != out.rows() || output_grad.cols() != out.cols())
        throw ContractViolation("backward: output gradient shape mismatch");

    std::vector<double, Eigen::aligned_allocator<double>> grads(param_grads ? params_.size() : 0, 0.0);

    Eigen::MatrixXd delta;
    switch (shape_.output) {
        case OutputActivation::identity: delta = output_grad; break;
        case OutputActivation::unit_tanh: {
            // y = (t + 1) / 2, dy/dz = (1 - t^2) / 2 with t = 2y - 1.
            const Eigen::ArrayXXd t = 2.0 * out.array() - 1.0;
            delta = (output_grad.array() * 0.5 * (1.0 - t.square())).matrix();
            break;
        }
    }

    for (int l = layers - 1; l >= 0; --l) {
        const Eigen::MatrixXd& a_in = cache.activations[static_cast<std::size_t>(l)];
        if (param_grads) {
            WeightMap dw(grads.data() + weight_offset(l), shape_.sizes[l + 1], shape_.sizes[l]);
            BiasMap db(grads.data() + bias_offset(l), shape_.sizes[l + 1]);
            dw.noalias() = delta * a_in.transpose();
            db = delta.rowwise().sum();
        }
        Eigen::MatrixXd upstream(shape_.sizes[l], delta.cols());
        upstream.noalias() = weights(l).transpose() * delta;
        if (l == 0) {
            if (param_grads) param_grads->assign(grads.begin(), grads.end());
            return upstream;
        }
        delta = (upstream.array() * (1.0 - a_in.array().square())).matrix();
    }
    return {};
}

MlpNet MlpNet::unflatten(std::span<const double> genome, const Shape& shape) {
    MlpNet net(shape);
    net.set_params(genome);
    return net;
}

void MlpNet::set_params(std::span<const double> genome) {
    if (genome.size() != params_.size())
        throw ContractViolation("genome length " + std::to_string(genome.size()) + " does not match " +
                                std::to_string(params_.size()) + " parameters");
    ++revision_;
    std::copy(genome.begin(), genome.end(), params_.begin());
}

void adam_step(MlpNet& net, std::span<const double> grads, AdamState& state) {
    const std::size_t n = net.num_params();
    if (grads.size() != n || state.m.size() != n || state.v.size() != n)
        throw ContractViolation("adam_step: gradient/moment dimension mismatch");
    for (std::size_t i = 0; i < n; ++i)
        if (!std::isfinite(grads[i]))
            throw NumericError("adam_step: non-finite gradient at parameter " + std::to_string(i));

    const auto& c = state.config;
    state.step += 1;
    const double t = static_cast<double>(state.step);
    const double bc1 = 1.0 - std::pow(c.beta1, t);
    const double bc2 = 1.0 - std::pow(c.beta2, t);

    const auto len = static_cast<Eigen::Index>(n);
    Eigen::Map<const Eigen::ArrayXd> g(grads.data(), len);
    Eigen::Map<Eigen::ArrayXd> m(state.m.data(), len);
    Eigen::Map<Eigen::ArrayXd> v(state.v.data(), len);
    auto p = net.mutable_params();
    Eigen::Map<Eigen::ArrayXd> theta(p.data(), len);

    m = c.beta1 * m + (1.0 - c.beta1) * g;
    v = c.beta2 * v + (1.0 - c.beta2) * g.square();
    theta -= c.lr * (m / bc1) / ((v / bc2).sqrt() + c.eps);
}

void soft_update(MlpNet& target, const MlpNet& online, double tau) {
    if (!(target.shape() == online.shape())) throw ContractViolation("soft_update: shape mismatch");
    const auto len = static_cast<Eigen::Index>(online.num_params());
    auto tp = target.mutable_params();
    Eigen::Map<Eigen::ArrayXd> t(tp.data(), len);
    Eigen::Map<const Eigen::ArrayXd> o(online.params().data(), len);
    t = tau * o + (1.0 - tau) * t;
}

namespace io {

void write_u32(std::ostream& out, std::uint32_t v) {
    std::array<char, 4> b;
    for (int i = 0; i < 4; ++i) b[i] = static_cast<char>((v >> (8 * i)) & 0xff);
    out.write(b.data(), b.size());
}

void write_u64(std::ostream& out, std::uint64_t v) {
    std::array<char, 8> b;
    for (int i = 0; i < 8; ++i) b[i] = static_cast<char>((v >> (8 * i)) & 0xff);
    out.write(b.data(), b.size());
}

void write_f64(std::ostream& out, double v) { write_u64(out, std::bit_cast<std::uint64_t>(v)); }

std::uint32_t read_u32(std::istream& in) {
    std::array<unsigned char, 4> b{};
    if (!in.read(reinterpret_cast<char*>(b.data()), b.size())) throw ContractViolation("checkpoint truncated");
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(b[i]) << (8 * i);
    return v;
}

std::uint64_t read_u64(std::istream& in) {
    std::array<unsigned char, 8> b{};
    if (!in.read(reinterpret_cast<char*>(b.data()), b.size())) throw ContractViolation("checkpoint truncated");
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(b[i]) << (8 * i);
    return v;
}

double read_f64(std::istream& in) { return std::bit_cast<double>(read_u64(in)); }

}  // namespace io

namespace {
constexpr std::array<char, 8> kMagic{'E', 'D', 'R', 'L', 'M', 'L', 'P', '\0'};
constexpr std::uint32_t kVersion = 1;
}  // namespace

void save_checkpoint(const MlpNet& net, std::ostream& out) {
    out.write(kMagic.data(), kMagic.size());
    io::write_u32(out, kVersion);
    io::write_u32(out, static_cast<std::uint32_t>(net.shape().output));
    io::write_u32(out, static_cast<std::uint32_t>(net.shape().sizes.size()));
    for (int s : net.shape().sizes) io::write_u32(out, static_cast<std::uint32_t>(s));
    io::write_u64(out, net.num_params());
    for (double p : net.params()) io::write_f64(out, p);
}

MlpNet load_checkpoint(std::istream& in) {
    std::array<char, 8> magic{};
    if (!in.read(magic.data(), magic.size()) || magic != kMagic)
        throw ContractViolation("not a network checkpoint (bad magic)");
    if (const auto version = io::read_u32(in); version != kVersion)
        throw ContractViolation("unsupported network checkpoint version " + std::to_string(version));
    Shape shape;
    const auto head = io::read_u32(in);
    if (head > 1) throw ContractViolation("unknown output activation in checkpoint");
    shape.output = static_cast<OutputActivation>(head);
    const auto count = io::read_u32(in);
    if (count < 2 || count > 64) throw ContractViolation("implausible layer count in checkpoint");
    for (std::uint32_t i = 0; i < count; ++i) shape.sizes.push_back(static_cast<int>(io::read_u32(in)));
    MlpNet net(shape);
    const auto n = io::read_u64(in);
    if (n != net.num_params()) throw ContractViolation("checkpoint parameter count does not match its shape");
    Genome genome(n);
    for (auto& p : genome) p = io::read_f64(in);
    net.set_params(genome);
    return net;
}

void save_checkpoint(const MlpNet& net, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot open " + path + " for writing");
    save_checkpoint(net, out);
}

MlpNet load_checkpoint(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open " + path);
    return load_checkpoint(in);
}

}  // namespace edrl::nn
