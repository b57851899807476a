#include "psmpc/uncertainty.hpp"

#include <cmath>
#include <stdexcept>
#include <utility>

namespace psmpc::uncertainty {

namespace {

constexpr std::uint64_t kStreamSalt = 0x9E3779B97F4A7C15ULL;
constexpr std::uint64_t kIndexSalt = 0xD1B54A32D192ED03ULL;
constexpr std::uint64_t kSubstreamSalt = 0x94D049BB133111EBULL;

// One splitmix64 step: advances the state and returns a mixed output.
std::uint64_t splitmix64_next(std::uint64_t& state) {
    state += 0x9E3779B97F4A7C15ULL;
    std::uint64_t z = state;
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
}

// Stateless mix used for stream/index derivation.
std::uint64_t mix64(std::uint64_t v) {
    std::uint64_t s = v;
    return splitmix64_next(s);
}

std::uint64_t rotl64(std::uint64_t x, int k) { return (x << k) | (x >> (64 - k)); }

bool all_finite(const Eigen::VectorXd& v) { return v.allFinite(); }

}  // namespace

RngEngine::RngEngine(std::uint64_t seed_material) {
    std::uint64_t sm = seed_material;
    for (auto& word : s_) word = splitmix64_next(sm);
    // xoshiro256** requires a nonzero state; splitmix expansion makes an
    // all-zero state astronomically unlikely, but guard anyway.
    if ((s_[0] | s_[1] | s_[2] | s_[3]) == 0) s_[0] = 1;
}

std::uint64_t RngEngine::next_u64() {
    const std::uint64_t result = rotl64(s_[1] * 5, 7) * 9;
    const std::uint64_t t = s_[1] << 17;
    s_[2] ^= s_[0];
    s_[3] ^= s_[1];
    s_[1] ^= s_[2];
    s_[0] ^= s_[3];
    s_[2] ^= t;
    s_[3] = rotl64(s_[3], 45);
    return result;
}

double RngEngine::uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

double RngEngine::uniform(double lo, double hi) {
    if (lo == hi) return lo;
    return lo + uniform() * (hi - lo);
}

double RngEngine::normal() {
    if (has_cached_normal_) {
        has_cached_normal_ = false;
        return cached_normal_;
    }
    // 1 - U keeps the argument of log strictly positive.
    const double u1 = 1.0 - uniform();
    const double u2 = uniform();
    const double radius = std::sqrt(-2.0 * std::log(u1));
    const double angle = 2.0 * M_PI * u2;
    cached_normal_ = radius * std::sin(angle);
    has_cached_normal_ = true;
    return radius * std::cos(angle);
}

SampleStream SampleStream::substream(std::uint64_t k) const {
    SampleStream derived;
    derived.seed = seed;
    derived.stream = mix64(stream ^ (kSubstreamSalt * (k + 1)));
    return derived;
}

RngEngine SampleStream::engine_at(std::uint64_t index) const {
    const std::uint64_t h = mix64(seed ^ (kStreamSalt * (stream + 1)));
    const std::uint64_t g = mix64(h ^ (kIndexSalt * (index + 1)));
    return RngEngine(g);
}

DistributionSpec::DistributionSpec(std::vector<DistributionBlock> blocks)
    : blocks_(std::move(blocks)) {
    if (blocks_.empty()) throw std::invalid_argument("DistributionSpec: no blocks");
    sqrt_covariance_.resize(blocks_.size());
    for (std::size_t bi = 0; bi < blocks_.size(); ++bi) {
        const auto& block = blocks_[bi];
        if (const auto* ub = std::get_if<UniformBoxBlock>(&block)) {
            if (ub->lower.size() == 0 || ub->lower.size() != ub->upper.size())
                throw std::invalid_argument("DistributionSpec: uniform box dimension mismatch");
            if (!all_finite(ub->lower) || !all_finite(ub->upper))
                throw std::invalid_argument("DistributionSpec: uniform box bounds must be finite");
            if (((ub->upper - ub->lower).array() < 0.0).any())
                throw std::invalid_argument("DistributionSpec: uniform box needs lower <= upper");
            dim_ += static_cast<int>(ub->lower.size());
        } else if (const auto* gb = std::get_if<GaussianBlock>(&block)) {
            const auto n = gb->mean.size();
            if (n == 0 || gb->covariance.rows() != n || gb->covariance.cols() != n)
                throw std::invalid_argument("DistributionSpec: Gaussian dimension mismatch");
            if (!all_finite(gb->mean) || !gb->covariance.allFinite())
                throw std::invalid_argument("DistributionSpec: Gaussian parameters must be finite");
            const double scale = std::max(1.0, gb->covariance.cwiseAbs().maxCoeff());
            if ((gb->covariance - gb->covariance.transpose()).cwiseAbs().maxCoeff() > 1e-9 * scale)
                throw std::invalid_argument("DistributionSpec: covariance must be symmetric");
            Eigen::MatrixXd sym = 0.5 * (gb->covariance + gb->covariance.transpose());
            Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(sym);
            if (es.info() != Eigen::Success)
                throw std::invalid_argument("DistributionSpec: covariance eigendecomposition failed");
            const double max_eig = es.eigenvalues().cwiseAbs().maxCoeff();
            if (es.eigenvalues().minCoeff() < -1e-10 * std::max(1.0, max_eig))
                throw std::invalid_argument("DistributionSpec: covariance must be positive semidefinite");
            Eigen::VectorXd clamped = es.eigenvalues().cwiseMax(0.0);
            sqrt_covariance_[bi] =
                es.eigenvectors() * clamped.cwiseSqrt().asDiagonal() * es.eigenvectors().transpose();
            dim_ += static_cast<int>(n);
        } else {
            const auto& sf = std::get<ScalarFactorBlock>(block);
            if (!std::isfinite(sf.lo) || !std::isfinite(sf.hi) || sf.lo > sf.hi)
                throw std::invalid_argument("DistributionSpec: scalar factor needs finite lo <= hi");
            dim_ += 1;
        }
    }
}

Eigen::VectorXd DistributionSpec::sample(RngEngine& engine) const {
    Eigen::VectorXd q(dim_);
    int offset = 0;
    for (std::size_t bi = 0; bi < blocks_.size(); ++bi) {
        const auto& block = blocks_[bi];
        if (const auto* ub = std::get_if<UniformBoxBlock>(&block)) {
            for (int i = 0; i < ub->lower.size(); ++i)
                q(offset + i) = engine.uniform(ub->lower(i), ub->upper(i));
            offset += static_cast<int>(ub->lower.size());
        } else if (const auto* gb = std::get_if<GaussianBlock>(&block)) {
            const int n = static_cast<int>(gb->mean.size());
            Eigen::VectorXd z(n);
            for (int i = 0; i < n; ++i) z(i) = engine.normal();
            q.segment(offset, n) = gb->mean + sqrt_covariance_[bi] * z;
            offset += n;
        } else {
            const auto& sf = std::get<ScalarFactorBlock>(block);
            q(offset) = engine.uniform(sf.lo, sf.hi);
            offset += 1;
        }
    }
    return q;
}

std::vector<Eigen::VectorXd> draw(const DistributionSpec& spec, const SampleStream& stream,
                                  int count) {
    if (count < 1) throw std::invalid_argument("draw: count must be >= 1");
    std::vector<Eigen::VectorXd> samples;
    samples.reserve(static_cast<std::size_t>(count));
    for (int i = 0; i < count; ++i) {
        RngEngine engine = stream.engine_at(static_cast<std::uint64_t>(i));
        samples.push_back(spec.sample(engine));
    }
    return samples;
}

UncertainConstraintSystem::UncertainConstraintSystem(int n_xi, int p, RealizeFn fn)
    : n_xi_(n_xi), p_(p), fn_(std::move(fn)) {
    if (n_xi_ < 1 || p_ < 1)
        throw std::invalid_argument("UncertainConstraintSystem: dimensions must be positive");
    if (!fn_) throw std::invalid_argument("UncertainConstraintSystem: empty realization function");
}

UncertainConstraintSystem UncertainConstraintSystem::affine(Eigen::MatrixXd F0,
                                                            std::vector<Eigen::MatrixXd> Fi,
                                                            Eigen::VectorXd g0,
                                                            std::vector<Eigen::VectorXd> gi) {
    const int p = static_cast<int>(F0.rows());
    const int n_xi = static_cast<int>(F0.cols());
    if (g0.size() != p) throw std::invalid_argument("affine system: g0 size mismatch");
    if (Fi.size() != gi.size())
        throw std::invalid_argument("affine system: coefficient list length mismatch");
    for (const auto& m : Fi)
        if (m.rows() != p || m.cols() != n_xi)
            throw std::invalid_argument("affine system: Fi shape mismatch");
    for (const auto& v : gi)
        if (v.size() != p) throw std::invalid_argument("affine system: gi size mismatch");
    const auto n_q = static_cast<int>(Fi.size());
    auto fn = [F0 = std::move(F0), Fi = std::move(Fi), g0 = std::move(g0), gi = std::move(gi),
               n_q](const Eigen::VectorXd& q) -> Realization {
        if (q.size() != n_q)
            throw std::invalid_argument("affine system: sample dimension mismatch");
        Realization r{F0, g0};
        for (int i = 0; i < n_q; ++i) {
            r.F += q(i) * Fi[static_cast<std::size_t>(i)];
            r.g += q(i) * gi[static_cast<std::size_t>(i)];
        }
        return r;
    };
    return UncertainConstraintSystem(n_xi, p, std::move(fn));
}

UncertainConstraintSystem UncertainConstraintSystem::scaled_direction(int n_xi, double rhs) {
    if (n_xi < 1) throw std::invalid_argument("scaled_direction: dimension must be positive");
    auto fn = [n_xi, rhs](const Eigen::VectorXd& q) -> Realization {
        if (q.size() != n_xi + 1)
            throw std::invalid_argument("scaled_direction: expected [factor; direction] sample");
        Realization r;
        r.F = (q(0) * q.tail(n_xi)).transpose();
        r.g = Eigen::VectorXd::Constant(1, rhs);
        return r;
    };
    return UncertainConstraintSystem(n_xi, 1, std::move(fn));
}

UncertainConstraintSystem UncertainConstraintSystem::callback(int n_xi, int p, RealizeFn fn) {
    return UncertainConstraintSystem(n_xi, p, std::move(fn));
}

Realization UncertainConstraintSystem::realize(const Eigen::VectorXd& q) const {
    Realization r = fn_(q);
    if (r.F.rows() != p_ || r.F.cols() != n_xi_ || r.g.size() != p_)
        throw std::runtime_error("UncertainConstraintSystem: realization changed dimensions");
    return r;
}

ScenarioSet realize_scenarios(const UncertainConstraintSystem& sys, const DistributionSpec& spec,
                              const SampleStream& stream, int N) {
    if (N < 1) throw std::invalid_argument("realize_scenarios: N must be >= 1");
    ScenarioSet set;
    set.seed = stream.seed;
    set.stream = stream.stream;
    set.first_index = 0;
    set.dimension = sys.dimension();
    set.rows_per_scenario = sys.rows();
    set.scenarios.reserve(static_cast<std::size_t>(N));
    for (int i = 0; i < N; ++i) {
        RngEngine engine = stream.engine_at(static_cast<std::uint64_t>(i));
        set.scenarios.push_back(sys.realize(spec.sample(engine)));
    }
    return set;
}

int violation_indicator(const UncertainConstraintSystem& sys, const Eigen::VectorXd& xi,
                        const Eigen::VectorXd& q) {
    if (xi.size() != sys.dimension())
        throw std::invalid_argument("violation_indicator: point dimension mismatch");
    Realization r = sys.realize(q);
    return ((r.F * xi - r.g).array() > 0.0).any() ? 1 : 0;
}

}  // namespace psmpc::uncertainty
