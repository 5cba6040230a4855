#pragma once

#include <cstdint>
#include <initializer_list>
#include <random>
#include <stdexcept>
#include <string>

namespace edrl {

/// Bad or inconsistent configuration. `key()` names the offending field when known.
class ConfigError : public std::runtime_error {
public:
    explicit ConfigError(const std::string& msg, std::string key = {})
        : std::runtime_error(key.empty() ? msg : key + ": " + msg), key_(std::move(key)) {}
    const std::string& key() const noexcept { return key_; }

private:
    std::string key_;
};

/// An allocation that breaks the slice/RB feasibility constraints.
class ConstraintViolation : public std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// Caller broke a precondition (dimension mismatch, stale cache, ...).
class ContractViolation : public std::logic_error {
    using std::logic_error::logic_error;
};

/// NaN/Inf showed up in a gradient, loss or parameter.
class NumericError : public std::runtime_error {
    using std::runtime_error::runtime_error;
};

using Rng = std::mt19937_64;

inline std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

/// Independent stream seed for a (master, tag, indices...) path.
inline std::uint64_t derive_seed(std::uint64_t master, std::initializer_list<std::uint64_t> path) {
    std::uint64_t h = splitmix64(master);
    for (auto p : path) h = splitmix64(h ^ splitmix64(p + 0x632be59bd9b4e019ULL));
    return h;
}

namespace stream {
// Tags for derive_seed so that every consumer of randomness owns its own stream.
inline constexpr std::uint64_t population_init = 1;
inline constexpr std::uint64_t agent_init = 2;
inline constexpr std::uint64_t individual_eval = 3;
inline constexpr std::uint64_t rl_eval = 4;
inline constexpr std::uint64_t evolution = 5;
inline constexpr std::uint64_t replay = 6;
inline constexpr std::uint64_t drl_episode = 7;
inline constexpr std::uint64_t exploration = 8;
inline constexpr std::uint64_t eval_only = 9;
inline constexpr std::uint64_t test_episode = 10;
}  // namespace stream

}  // namespace edrl
