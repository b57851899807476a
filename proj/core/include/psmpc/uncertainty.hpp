// Random-uncertainty modelling: reproducible counter-based sampling streams,
// composable distribution specifications, and realization of uncertain linear
// inequality systems F(q) xi <= g(q) from drawn samples.
#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <functional>
#include <variant>
#include <vector>

namespace psmpc::uncertainty {

/// Small, fast PRNG (xoshiro256**) seeded through a splitmix64 expansion.
/// One engine is cheap to construct, so the sampling code creates a fresh
/// engine per (stream, sample index) pair; that makes every sample a pure
/// function of its coordinates and allows parallel generation with a
/// deterministic merge.
class RngEngine {
 public:
    explicit RngEngine(std::uint64_t seed_material);

    std::uint64_t next_u64();
    /// Uniform double in [0, 1) with 53 random bits.
    double uniform();
    /// Uniform double in [lo, hi]; degenerate intervals return lo exactly.
    double uniform(double lo, double hi);
    /// Standard normal via Box-Muller (second value of each pair is cached).
    double normal();

 private:
    std::uint64_t s_[4];
    double cached_normal_ = 0.0;
    bool has_cached_normal_ = false;
};

/// Coordinates of a reproducible sampling stream.  The pair (seed, stream)
/// names an unbounded family of independent draws addressed by sample index;
/// `substream` derives further independent families from the same seed.
struct SampleStream {
    std::uint64_t seed = 0;
    std::uint64_t stream = 0;

    /// Derived stream k; distinct k give statistically independent streams.
    [[nodiscard]] SampleStream substream(std::uint64_t k) const;
    /// Engine whose output is a pure function of (seed, stream, index).
    [[nodiscard]] RngEngine engine_at(std::uint64_t index) const;
};

/// Independent uniform coordinates on [lower_i, upper_i].
struct UniformBoxBlock {
    Eigen::VectorXd lower;
    Eigen::VectorXd upper;
};

/// Multivariate Gaussian with symmetric positive semidefinite covariance.
struct GaussianBlock {
    Eigen::VectorXd mean;
    Eigen::MatrixXd covariance;
};

/// One scalar drawn uniformly from [lo, hi]; conventionally used as a
/// multiplicative factor applied to another block by the consuming system.
struct ScalarFactorBlock {
    double lo = 0.0;
    double hi = 0.0;
};

using DistributionBlock = std::variant<UniformBoxBlock, GaussianBlock, ScalarFactorBlock>;

/// Validated composition of distribution blocks.  A sample is the
/// concatenation of one draw per block, in block order.
class DistributionSpec {
 public:
    /// Validates every block (finite bounds, lower <= upper, symmetric PSD
    /// covariance) and caches Gaussian covariance square roots.
    /// Throws std::invalid_argument on violation.
    explicit DistributionSpec(std::vector<DistributionBlock> blocks);

    [[nodiscard]] int dimension() const { return dim_; }
    [[nodiscard]] const std::vector<DistributionBlock>& blocks() const { return blocks_; }

    /// One draw using the supplied engine (coordinates consumed in order).
    [[nodiscard]] Eigen::VectorXd sample(RngEngine& engine) const;

 private:
    std::vector<DistributionBlock> blocks_;
    std::vector<Eigen::MatrixXd> sqrt_covariance_;  // parallel to blocks_; empty for non-Gaussian
    int dim_ = 0;
};

/// Draws `count` i.i.d. samples at stream indices 0..count-1.
/// Byte-identical across calls with equal (spec, stream, count).
std::vector<Eigen::VectorXd> draw(const DistributionSpec& spec, const SampleStream& stream,
                                  int count);

/// One realized inequality system F xi <= g.
struct Realization {
    Eigen::MatrixXd F;
    Eigen::VectorXd g;
};

/// Uncertain linear inequality family q -> {F(q) xi <= g(q)} with fixed row
/// count p and variable dimension n_xi.
class UncertainConstraintSystem {
 public:
    using RealizeFn = std::function<Realization(const Eigen::VectorXd&)>;

    /// F(q) = F0 + sum_i q_i F_i, g(q) = g0 + sum_i q_i g_i.
    static UncertainConstraintSystem affine(Eigen::MatrixXd F0, std::vector<Eigen::MatrixXd> Fi,
                                            Eigen::VectorXd g0, std::vector<Eigen::VectorXd> gi);
    /// Single row q_0 * q_{1..n_xi}' xi <= rhs: a scalar factor times a
    /// random direction.  Expects samples laid out [factor; direction].
    static UncertainConstraintSystem scaled_direction(int n_xi, double rhs = 1.0);
    /// Arbitrary realization function with declared fixed dimensions.
    static UncertainConstraintSystem callback(int n_xi, int p, RealizeFn fn);

    [[nodiscard]] int dimension() const { return n_xi_; }
    [[nodiscard]] int rows() const { return p_; }
    /// Deterministic realization; throws std::runtime_error if a callback
    /// produces dimensions other than the declared (p, n_xi).
    [[nodiscard]] Realization realize(const Eigen::VectorXd& q) const;

 private:
    UncertainConstraintSystem(int n_xi, int p, RealizeFn fn);
    int n_xi_ = 0;
    int p_ = 0;
    RealizeFn fn_;
};

/// N realized systems plus the stream coordinates they came from.
struct ScenarioSet {
    std::vector<Realization> scenarios;
    std::uint64_t seed = 0;
    std::uint64_t stream = 0;
    std::uint64_t first_index = 0;
    int dimension = 0;
    int rows_per_scenario = 0;
};

/// Realizes N scenarios from samples at stream indices 0..N-1.
/// Throws std::invalid_argument when N < 1 or dimensions are incompatible.
ScenarioSet realize_scenarios(const UncertainConstraintSystem& sys, const DistributionSpec& spec,
                              const SampleStream& stream, int N);

/// 1 when some component of F(q) xi <= g(q) is violated, else 0.
/// Zero tolerance: equality counts as satisfied.
int violation_indicator(const UncertainConstraintSystem& sys, const Eigen::VectorXd& xi,
                        const Eigen::VectorXd& q);

}  // namespace psmpc::uncertainty
