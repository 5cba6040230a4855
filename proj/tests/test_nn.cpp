#include <doctest.h>

#include <cmath>
#include <sstream>

#include "edrl/nn.hpp"
#include "oracles.hpp"

using namespace edrl;
using namespace edrl::nn;

namespace {

Shape small_shape(OutputActivation head) {
    const std::vector<int> hidden{6, 5};
    return make_shape(4, hidden, 3, head);
}

Eigen::MatrixXd random_matrix(Eigen::Index r, Eigen::Index c, Rng& rng, double scale = 1.0) {
    std::uniform_real_distribution<double> u(-scale, scale);
    Eigen::MatrixXd m(r, c);
    for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = u(rng);
    return m;
}

}  // namespace

TEST_SUITE("nn") {

TEST_CASE("parameter count and layout") {
    const auto s = small_shape(OutputActivation::identity);
    CHECK(s.num_params() == (4 * 6 + 6) + (6 * 5 + 5) + (5 * 3 + 3));
    MlpNet net(s);
    auto p = net.mutable_params();
    for (std::size_t i = 0; i < p.size(); ++i) p[i] = static_cast<double>(i);
    // Layer 0: row-major weights (6 x 4) then 6 biases.
    CHECK(net.weights(0)(0, 0) == 0.0);
    CHECK(net.weights(0)(0, 3) == 3.0);
    CHECK(net.weights(0)(1, 0) == 4.0);
    CHECK(net.bias(0)(0) == 24.0);
    CHECK(net.weights(1)(0, 0) == 30.0);
    CHECK(net.bias(2)(2) == static_cast<double>(s.num_params() - 1));
}

TEST_CASE("zero nets") {
    Eigen::VectorXd x = Eigen::VectorXd::LinSpaced(4, -1.0, 2.0);
    MlpNet actor(small_shape(OutputActivation::unit_tanh));
    for (double v : actor.forward(x)) CHECK(v == 0.5);
    MlpNet critic(small_shape(OutputActivation::identity));
    for (double v : critic.forward(x)) CHECK(v == 0.0);
}

TEST_CASE("forward matches a hand evaluation") {
    Rng rng(2);
    const auto net = MlpNet::random(small_shape(OutputActivation::unit_tanh), rng);
    Eigen::VectorXd x(4);
    x << 0.3, -0.7, 1.1, 0.05;
    Eigen::VectorXd h = x;
    for (int l = 0; l < 3; ++l) {
        Eigen::VectorXd z = net.weights(l) * h + net.bias(l);
        h = z.array().tanh().matrix();
    }
    const Eigen::VectorXd expected = (h.array() + 1.0) / 2.0;
    const Eigen::VectorXd y = net.forward(x);
    for (int i = 0; i < 3; ++i) CHECK(y(i) == doctest::Approx(expected(i)).epsilon(1e-14));
    CHECK(net.forward(x) == y);
}

TEST_CASE("init range follows fan-in") {
    Rng rng(4);
    const std::vector<int> hidden{64};
    const auto net = MlpNet::random(make_shape(16, hidden, 8, OutputActivation::identity), rng);
    CHECK(net.weights(0).cwiseAbs().maxCoeff() <= 0.25);
    CHECK(net.weights(1).cwiseAbs().maxCoeff() <= 0.125);
    CHECK(net.weights(0).cwiseAbs().maxCoeff() > 0.2);
}

TEST_CASE("backprop matches finite differences") {
    Rng rng(10);
    for (int trial = 0; trial < 6; ++trial) {
        const auto head = trial % 2 ? OutputActivation::unit_tanh : OutputActivation::identity;
        const std::vector<int> hidden{7, 9, 5};
        auto net = MlpNet::random(make_shape(5, hidden, 3, head), rng);
        const auto x = random_matrix(5, 3, rng);
        const auto g = random_matrix(3, 3, rng);
        const auto r = oracle::finite_difference_check(net, x, g, 1e-5, 1e-6);
        CHECK(r.max_param_error <= 1e-4);
        CHECK(r.max_input_error <= 1e-4);
    }
}

TEST_CASE("zero output gradient gives zero parameter gradient") {
    Rng rng(1);
    const auto net = MlpNet::random(small_shape(OutputActivation::identity), rng);
    ForwardCache cache;
    net.forward(random_matrix(4, 2, rng), &cache);
    Genome grads;
    const auto dx = net.backward(cache, Eigen::MatrixXd::Zero(3, 2), &grads);
    for (double g : grads) CHECK(g == 0.0);
    CHECK(dx.isZero(0.0));
}

TEST_CASE("input gradient of a linear layer is W^T g") {
    Rng rng(6);
    const auto net = MlpNet::random(make_shape(4, {}, 3, OutputActivation::identity), rng);
    ForwardCache cache;
    net.forward(random_matrix(4, 2, rng), &cache);
    const auto g = random_matrix(3, 2, rng);
    const Eigen::MatrixXd dx = net.backward(cache, g, nullptr);
    const Eigen::MatrixXd expected = net.weights(0).transpose() * g;
    CHECK((dx - expected).cwiseAbs().maxCoeff() <= 1e-15);
}

TEST_CASE("stale caches are rejected") {
    Rng rng(6);
    auto net = MlpNet::random(small_shape(OutputActivation::identity), rng);
    ForwardCache cache;
    net.forward(random_matrix(4, 2, rng), &cache);
    net.mutable_params()[0] += 1.0;
    CHECK_THROWS_AS(net.backward(cache, Eigen::MatrixXd::Ones(3, 2), nullptr), ContractViolation);
}

TEST_CASE("flatten and unflatten") {
    Rng rng(8);
    const auto shape = small_shape(OutputActivation::unit_tanh);
    const auto net = MlpNet::random(shape, rng);
    const auto g = net.flatten();
    CHECK(g.size() == shape.num_params());
    CHECK(MlpNet::unflatten(g, shape) == net);

    auto changed = g;
    changed[17] += 0.25;
    const auto other = MlpNet::unflatten(changed, shape);
    std::size_t differing = 0;
    for (std::size_t i = 0; i < g.size(); ++i) differing += other.params()[i] != net.params()[i];
    CHECK(differing == 1);
    CHECK_THROWS_AS(MlpNet::unflatten(std::vector<double>(3, 0.0), shape), ContractViolation);
}

TEST_CASE("adam") {
    Rng rng(3);
    SUBCASE("first step moves each coordinate by about lr") {
        auto net = MlpNet::random(small_shape(OutputActivation::identity), rng);
        const auto before = net.flatten();
        AdamState st({}, net.num_params());
        std::vector<double> grads(net.num_params());
        for (std::size_t i = 0; i < grads.size(); ++i) grads[i] = (i % 2 ? 1.0 : -1.0) * (0.5 + 0.01 * i);
        adam_step(net, grads, st);
        for (std::size_t i = 0; i < grads.size(); ++i) {
            const double g = std::abs(grads[i]);
            const double expected = 1e-4 * g / (g + 1e-8);
            CHECK(std::abs(net.params()[i] - before[i]) == doctest::Approx(expected).epsilon(1e-9));
            CHECK((net.params()[i] - before[i]) * grads[i] < 0.0);
        }
        CHECK(st.step == 1);
    }
    SUBCASE("zero gradient leaves parameters unchanged") {
        auto net = MlpNet::random(small_shape(OutputActivation::identity), rng);
        const auto before = net.flatten();
        AdamState st({}, net.num_params());
        adam_step(net, std::vector<double>(net.num_params(), 0.0), st);
        CHECK(net.flatten() == before);
    }
    SUBCASE("non-finite gradient is refused before any change") {
        auto net = MlpNet::random(small_shape(OutputActivation::identity), rng);
        const auto before = net.flatten();
        AdamState st({}, net.num_params());
        std::vector<double> grads(net.num_params(), 1.0);
        grads[5] = std::nan("");
        CHECK_THROWS_AS(adam_step(net, grads, st), NumericError);
        CHECK(net.flatten() == before);
        CHECK(st.step == 0);
    }
    SUBCASE("identical inputs give identical trajectories") {
        Rng r1(5), r2(5);
        auto a = MlpNet::random(small_shape(OutputActivation::identity), r1);
        auto b = MlpNet::random(small_shape(OutputActivation::identity), r2);
        AdamState sa({}, a.num_params()), sb({}, b.num_params());
        for (int t = 0; t < 20; ++t) {
            std::vector<double> g(a.num_params());
            for (std::size_t i = 0; i < g.size(); ++i) g[i] = std::sin(0.1 * t + i);
            adam_step(a, g, sa);
            adam_step(b, g, sb);
        }
        CHECK(a == b);
        CHECK(sa == sb);
    }
}

TEST_CASE("soft update rule") {
    Rng rng(9);
    const auto online = MlpNet::random(small_shape(OutputActivation::identity), rng);
    MlpNet target(online.shape());
    soft_update(target, online, 0.005);
    for (std::size_t i = 0; i < online.num_params(); ++i) CHECK(target.params()[i] == 0.005 * online.params()[i]);
    const auto frozen = target;
    soft_update(target, online, 0.0);
    CHECK(target == frozen);
    soft_update(target, online, 1.0);
    CHECK(target == online);
}

TEST_CASE("checkpoint round trip is bitwise") {
    Rng rng(12);
    const auto net = MlpNet::random(small_shape(OutputActivation::unit_tanh), rng);
    std::stringstream buf;
    save_checkpoint(net, buf);
    const std::string bytes = buf.str();
    CHECK(bytes.substr(0, 8) == std::string("EDRLMLP\0", 8));
    const auto loaded = load_checkpoint(buf);
    CHECK(loaded == net);

    std::stringstream truncated(bytes.substr(0, bytes.size() - 3));
    CHECK_THROWS(load_checkpoint(truncated));
    std::string bad = bytes;
    bad[0] = 'X';
    std::stringstream wrong_magic(bad);
    CHECK_THROWS(load_checkpoint(wrong_magic));
}

}  // TEST_SUITE
