#pragma once

#include <cstdint>
#include <random>
#include <span>

namespace quantamp {

inline constexpr double kProbFloor = 1e-300;
inline constexpr double kVarFloor = 1e-12;

// log-domain probability in nats
struct StableLogProb {
    double value;
    double prob() const;
};

double normal_pdf(double x, double mean, double var);
double log_normal_pdf(double x, double mean, double var);

// Phi(-u), upper tail of the standard normal
double half_erfc(double u);
double log_half_erfc(double u);

// Q(x)/phi(x) and its reciprocal (hazard), stable for all x
double mills_ratio(double x);
double inv_mills_ratio(double x);
// Var[v | v > x] for standard normal v
double tail_var(double x);

double gaussian_cell_mass(double lo, double hi, double mean, double var);
StableLogProb log_gaussian_cell_mass(double lo, double hi, double mean, double var);

// Standard normal restricted to [lo, hi].
// rho_lo = phi(lo)/Z and rho_hi = phi(hi)/Z, zero at infinite ends.
struct TruncatedMoments {
    StableLogProb log_mass;
    double mean;
    double var;
    double rho_lo;
    double rho_hi;
};
TruncatedMoments truncated_std_normal(double lo, double hi);

double log_sum_exp(std::span<const double> v);

// mt19937_64 engine with SplitMix64 seeding; the samplers are hand-written so
// streams are identical across standard libraries.
class Rng {
public:
    explicit Rng(std::uint64_t seed);

    std::uint64_t next_u64() { return engine_(); }
    double uniform();        // [0, 1)
    double uniform_open();   // (0, 1]
    double normal();
    std::uint64_t below(std::uint64_t n);  // uniform integer in [0, n)

    // independent child stream; same (seed, stream) always gives the same child
    Rng split(std::uint64_t stream) const;
    std::uint64_t seed() const { return seed_; }

private:
    std::uint64_t seed_;
    std::mt19937_64 engine_;
    double spare_ = 0.0;
    bool has_spare_ = false;
};

std::uint64_t splitmix64(std::uint64_t x);
std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream);

}  // namespace quantamp
