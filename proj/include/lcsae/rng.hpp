#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <span>
#include <vector>

namespace lcsae {

/// Derives independent 64-bit seeds from a master seed (splitmix64).
/// Chain k gets stream `derive_seed(master, k)`; the mapping is fixed so
/// that runs are reproducible regardless of how many chains execute.
inline std::uint64_t derive_seed(std::uint64_t master, std::uint64_t stream) {
    std::uint64_t z = master + 0x9e3779b97f4a7c15ULL * (stream + 1);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

/// Thin wrapper over mt19937_64 with the distributions the sampler needs.
class Rng {
  public:
    explicit Rng(std::uint64_t seed) : gen_(seed) {}

    double uniform() { return unif_(gen_); }
    double uniform(double lo, double hi) { return lo + (hi - lo) * unif_(gen_); }
    double normal() { return norm_(gen_); }
    double normal(double mean, double sd) { return mean + sd * norm_(gen_); }
    double gamma(double shape, double scale = 1.0) {
        std::gamma_distribution<double> g(shape, scale);
        return g(gen_);
    }
    std::uint64_t raw() { return gen_(); }

    /// Index sampled from unnormalized nonnegative weights.
    int discrete(std::span<const double> weights) {
        double total = 0.0;
        for (double w : weights) total += w;
        double u = uniform() * total;
        double acc = 0.0;
        for (std::size_t i = 0; i + 1 < weights.size(); ++i) {
            acc += weights[i];
            if (u < acc) return static_cast<int>(i);
        }
        return static_cast<int>(weights.size()) - 1;
    }

    /// Dirichlet draw with per-component concentrations.
    std::vector<double> dirichlet(std::span<const double> conc) {
        std::vector<double> x(conc.size());
        double total = 0.0;
        for (std::size_t i = 0; i < conc.size(); ++i) {
            x[i] = gamma(conc[i]);
            total += x[i];
        }
        for (double& v : x) v /= total;
        return x;
    }

  private:
    std::mt19937_64 gen_;
    std::uniform_real_distribution<double> unif_{0.0, 1.0};
    std::normal_distribution<double> norm_{0.0, 1.0};
};

}  // namespace lcsae
