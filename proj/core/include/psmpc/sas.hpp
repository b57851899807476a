// Simple approximating sets (SAS): norm-ball sets x_c + P B_p for
// p in {1, inf}, the sampled intersection polytope, their support functions,
// vertex maps, lifted inequality representations, and inscribed-set design.
#pragma once

#include <Eigen/Dense>
#include <vector>

#include "psmpc/polytope.hpp"
#include "psmpc/uncertainty.hpp"

namespace psmpc::sas {

enum class NormOrder { L1, Linf };
enum class ShapeMode { Diagonal, FullShape };

/// Norm-ball approximating set {x_c + P z : ||z||_p <= 1} with a symmetric
/// positive semidefinite shape matrix P.
class NormSAS {
 public:
    /// Validates symmetry (within 1e-9 of the magnitude of P) and
    /// near-positive-semidefiniteness (eigenvalues >= -1e-8 ||P||).
    NormSAS(Eigen::VectorXd center, Eigen::MatrixXd shape, NormOrder order);

    [[nodiscard]] const Eigen::VectorXd& center() const { return center_; }
    [[nodiscard]] const Eigen::MatrixXd& shape() const { return shape_; }
    [[nodiscard]] NormOrder order() const { return order_; }
    [[nodiscard]] int dimension() const { return static_cast<int>(center_.size()); }

 private:
    Eigen::VectorXd center_;
    Eigen::MatrixXd shape_;
    NormOrder order_;
};

/// The set scaled by gamma >= 0 about its own center: x_c + gamma P B_p.
NormSAS scaled(const NormSAS& s, double gamma);

/// Lifted description of an l1-ball SAS with M = P^{-1}, c = P^{-1} x_c:
/// the 3n+1 inequalities over (xi, zeta)
///   m_i' xi - c_i <= zeta_i,  -m_i' xi + c_i <= zeta_i,  zeta_i >= 0,
///   sum_i zeta_i <= 1,
/// whose projection onto xi is exactly {||M xi - c||_1 <= 1}.
struct LiftedL1Rep {
    Eigen::MatrixXd M;
    Eigen::VectorXd c;

    [[nodiscard]] int dimension() const { return static_cast<int>(c.size()); }
    /// Total inequality count: 3n + 1.
    [[nodiscard]] int count() const { return 3 * dimension() + 1; }
    /// Materializes the inequalities as one polytope in (xi, zeta) space,
    /// rows ordered [m_i' xi - zeta_i <= c_i]_i, [-m_i' xi - zeta_i <= -c_i]_i,
    /// [-zeta_i <= 0]_i, [1' zeta <= 1].
    [[nodiscard]] polytope::HPolytope lifted_polytope() const;
};

/// Sampled-intersection SAS: the polytope formed by stacking all realized
/// scenario rows, centered at its Chebyshev center.
struct SampledSAS {
    polytope::CenteredPolytope poly;
    int scenario_count = 0;     // number of scenarios N_S
    int rows_per_scenario = 0;  // p
    int scenario_rows = 0;      // N_S * p before any pruning (none is done)
};

/// Support function f' x_c + ||P f||_q with q the dual norm of p.
double sas_support(const NormSAS& s, const Eigen::VectorXd& f);

/// Vertices x_c + P z over the generators z of B_p: the 2n signed unit
/// vectors for p = 1, the 2^n sign vectors for p = inf (guarded to n <= 20).
std::vector<Eigen::VectorXd> sas_vertices(const NormSAS& s);

/// True iff ||P^{-1}(xi - x_c)||_p <= 1 + 1e-9.  Requires cond(P) <= 1e12
/// (throws SingularShapeError otherwise).
bool sas_membership(const NormSAS& s, const Eigen::VectorXd& xi);

/// Lifted inequality representation of an l1-ball SAS.
/// Throws std::invalid_argument for p != 1 and SingularShapeError when P is
/// not invertible.
LiftedL1Rep lift_l1(const NormSAS& s);

/// H-representation of an linf-ball SAS: the 2n rows +-m_i' xi <= 1 +- m_i' x_c.
/// Throws std::invalid_argument for p != inf and SingularShapeError when P is
/// not invertible.
polytope::HPolytope hrep_linf(const NormSAS& s);

/// All realized scenario rows stacked into one polytope (N_S * p rows, in
/// scenario order); the overload appends the 2n rows of the axis-aligned box
/// ||xi||_inf <= box_radius.
polytope::HPolytope stacked_design_polytope(const uncertainty::ScenarioSet& scen);
polytope::HPolytope stacked_design_polytope(const uncertainty::ScenarioSet& scen,
                                            double box_radius);

/// Intersection of all realized scenario systems, centered at its Chebyshev
/// center.  Throws EmptySetError when the intersection has empty interior and
/// UnboundedSetError when no finite Chebyshev ball exists.
SampledSAS design_sampled_poly(const uncertainty::ScenarioSet& scen);

/// Same, with an axis-aligned operating box ||xi||_inf <= box_radius
/// intersected in before centering; scenario_rows still reports N_S * p.
SampledSAS design_sampled_poly(const uncertainty::ScenarioSet& scen, double box_radius);

/// Largest (by trace of P) norm-ball SAS inscribed in D: maximizes sum of the
/// diagonal of P subject to f_i' x_c + ||P f_i||_q <= g_i for every row of D,
/// with P diagonal and bounded below by mu I, mu = 1e-6 times half the widest
/// extent of D (keeps P invertible at degenerate maximizers).
/// ShapeMode::FullShape requires a semidefinite-programming backend and
/// throws NotSupportedError.  Throws UnboundedSetError when D is unbounded
/// and EmptySetError when D has empty interior.
NormSAS design_norm_sas(const polytope::HPolytope& D, NormOrder order,
                        ShapeMode mode = ShapeMode::Diagonal);

}  // namespace psmpc::sas
