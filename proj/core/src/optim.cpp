#include "psmpc/optim.hpp"

#include <Eigen/Eigenvalues>
#include <Eigen/LU>
#include <Eigen/QR>

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <vector>

namespace psmpc::optim {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

double inf_norm_or_zero(const Eigen::VectorXd& v) {
  return v.size() == 0 ? 0.0 : v.cwiseAbs().maxCoeff();
}

// ---------------------------------------------------------------------------
// Standard-form simplex:  minimize cost'y  subject to  E y = h,  y >= 0.
//
// Two phases with artificial variables, Dantzig pricing with a Bland fallback
// once the objective stalls, and full basis refactorization each iteration
// (basis dimension equals the number of equality rows, which stays small in
// every use below even when the column count is large).
// ---------------------------------------------------------------------------

enum class SfStatus { Optimal, Infeasible, Unbounded, Failure };

struct SfResult {
  SfStatus status = SfStatus::Failure;
  Eigen::VectorXd y;    // length = number of columns of E
  Eigen::VectorXd pi;   // equality multipliers in the original row convention
  double objective = 0.0;
  int iterations = 0;
  std::string note;
};

struct SfWork {
  Eigen::MatrixXd E;
  Eigen::VectorXd h;
  std::vector<int> basis;         // length k; entries >= M denote artificials
  std::vector<char> flipped;      // per-row sign flips applied to (E, h)
  std::vector<int> row_ids;       // original index of each surviving row
  Eigen::MatrixXd B;
  Eigen::VectorXd xB;

  void rebuild_basis_matrix() {
    const auto k = static_cast<Eigen::Index>(basis.size());
    const Eigen::Index M = E.cols();
    B.resize(k, k);
    for (Eigen::Index i = 0; i < k; ++i) {
      if (basis[static_cast<std::size_t>(i)] < M) {
        B.col(i) = E.col(basis[static_cast<std::size_t>(i)]);
      } else {
        B.col(i) = Eigen::VectorXd::Unit(k, basis[static_cast<std::size_t>(i)] -
                                                static_cast<int>(M));
      }
    }
  }
};

// One simplex phase. `cost_of` yields the cost of any column (artificials
// included); `allow_enter` masks the columns allowed to enter the basis.
template <typename CostFn, typename EnterFn>
SfStatus run_phase(SfWork& w, CostFn cost_of, EnterFn allow_enter,
                   double cost_scale, const SolverOptions& opt, int max_iter,
                   int& iter_count, std::string& note) {
  const Eigen::Index M = w.E.cols();
  const double tol_reduced = opt.opt_tol * (1.0 + cost_scale);
  const double tol_pivot = 1e-10;

  bool bland = false;
  double best_obj = kInf;
  int last_progress = iter_count;
  const int stall_window = 3 * static_cast<int>(w.E.rows()) + 30;

  while (true) {
    if (iter_count++ > max_iter) {
      note = "iteration cap reached";
      return SfStatus::Failure;
    }
    w.rebuild_basis_matrix();
    Eigen::PartialPivLU<Eigen::MatrixXd> lu(w.B);
    w.xB = lu.solve(w.h);

    const auto k = static_cast<Eigen::Index>(w.basis.size());
    Eigen::VectorXd cB(k);
    for (Eigen::Index i = 0; i < k; ++i)
      cB(i) = cost_of(w.basis[static_cast<std::size_t>(i)]);

    const double obj = cB.dot(w.xB);
    if (obj < best_obj - tol_reduced) {
      best_obj = obj;
      last_progress = iter_count;
    } else if (!bland && iter_count - last_progress > stall_window) {
      bland = true;  // anti-cycling fallback
    }

    Eigen::PartialPivLU<Eigen::MatrixXd> lut(w.B.transpose());
    const Eigen::VectorXd pi = lut.solve(cB);

    std::vector<char> is_basic(static_cast<std::size_t>(M), 0);
    for (int bi : w.basis)
      if (bi < M) is_basic[static_cast<std::size_t>(bi)] = 1;

    // Pricing.
    const Eigen::VectorXd Et_pi = w.E.transpose() * pi;
    int entering = -1;
    double most_negative = -tol_reduced;
    for (Eigen::Index j = 0; j < M; ++j) {
      if (is_basic[static_cast<std::size_t>(j)] ||
          !allow_enter(static_cast<int>(j)))
        continue;
      const double red = cost_of(static_cast<int>(j)) - Et_pi(j);
      if (red < most_negative) {
        entering = static_cast<int>(j);
        most_negative = red;
        if (bland) break;  // smallest eligible index
      }
    }
    if (entering < 0) return SfStatus::Optimal;

    // Ratio test.
    const Eigen::VectorXd u = lu.solve(w.E.col(entering));
    int leaving = -1;
    double best_ratio = kInf;
    bool leaving_artificial = false;
    for (Eigen::Index i = 0; i < k; ++i) {
      if (u(i) <= tol_pivot) continue;
      const double num = std::max(w.xB(i), 0.0);
      const double ratio = num / u(i);
      const bool art = w.basis[static_cast<std::size_t>(i)] >= M;
      const bool better =
          ratio < best_ratio - 1e-12 ||
          (ratio <= best_ratio + 1e-12 &&
           ((art && !leaving_artificial) ||
            (art == leaving_artificial && leaving >= 0 &&
             w.basis[static_cast<std::size_t>(i)] <
                 w.basis[static_cast<std::size_t>(leaving)])));
      if (leaving < 0 || better) {
        leaving = static_cast<int>(i);
        best_ratio = std::min(best_ratio, ratio);
        leaving_artificial = art;
      }
    }
    if (leaving < 0) return SfStatus::Unbounded;
    w.basis[static_cast<std::size_t>(leaving)] = entering;
  }
}

SfResult solve_standard_form(Eigen::MatrixXd E, Eigen::VectorXd h,
                             const Eigen::VectorXd& cost,
                             const SolverOptions& opt) {
  SfResult out;
  const Eigen::Index k0 = E.rows();
  const Eigen::Index M = E.cols();

  if (M == 0) {
    if (inf_norm_or_zero(h) <= opt.feas_tol * (1.0 + inf_norm_or_zero(h))) {
      out.status = SfStatus::Optimal;
      out.y.resize(0);
      out.pi = Eigen::VectorXd::Zero(k0);
      out.objective = 0.0;
    } else {
      out.status = SfStatus::Infeasible;
    }
    return out;
  }

  SfWork w;
  w.flipped.assign(static_cast<std::size_t>(k0), 0);
  for (Eigen::Index i = 0; i < k0; ++i) {
    if (h(i) < 0.0) {
      E.row(i) = -E.row(i);
      h(i) = -h(i);
      w.flipped[static_cast<std::size_t>(i)] = 1;
    }
  }
  w.E = std::move(E);
  w.h = std::move(h);
  w.basis.resize(static_cast<std::size_t>(k0));
  w.row_ids.resize(static_cast<std::size_t>(k0));
  for (Eigen::Index i = 0; i < k0; ++i) {
    w.basis[static_cast<std::size_t>(i)] = static_cast<int>(M + i);
    w.row_ids[static_cast<std::size_t>(i)] = static_cast<int>(i);
  }

  // Default budget grows with both the basis size and the pricing width:
  // on highly degenerate problems the Bland-guarded phases may pivot through
  // a sizeable fraction of the columns before making progress.
  const int max_iter = opt.max_iterations > 0
                           ? opt.max_iterations
                           : 10000 + 100 * static_cast<int>(k0) +
                                 10 * static_cast<int>(M);
  int iters = 0;

  // Phase 1: drive artificials to zero.
  const auto phase1_cost = [M](int j) { return j >= M ? 1.0 : 0.0; };
  const auto enter_real = [M](int j) { return j < M; };
  const SfStatus ph1 = run_phase(w, phase1_cost, enter_real, 1.0, opt, max_iter,
                                 iters, out.note);
  out.iterations = iters;
  if (ph1 == SfStatus::Failure) return out;
  if (ph1 == SfStatus::Unbounded) {
    out.note = "phase-1 unbounded";  // cannot happen with a well-posed setup
    return out;
  }

  {
    w.rebuild_basis_matrix();
    Eigen::PartialPivLU<Eigen::MatrixXd> lu(w.B);
    w.xB = lu.solve(w.h);
    double art_sum = 0.0;
    for (std::size_t i = 0; i < w.basis.size(); ++i)
      if (w.basis[i] >= M) art_sum += std::max(w.xB(static_cast<Eigen::Index>(i)), 0.0);
    if (art_sum > opt.feas_tol * (1.0 + inf_norm_or_zero(w.h))) {
      out.status = SfStatus::Infeasible;
      return out;
    }
  }

  // Remove residual artificials from the basis: pivot them out where possible
  // and delete redundant equality rows otherwise.
  for (std::size_t pos = 0; pos < w.basis.size();) {
    if (w.basis[pos] < M) {
      ++pos;
      continue;
    }
    w.rebuild_basis_matrix();
    Eigen::PartialPivLU<Eigen::MatrixXd> lut(w.B.transpose());
    const auto k = static_cast<Eigen::Index>(w.basis.size());
    const Eigen::VectorXd row_mult =
        lut.solve(Eigen::VectorXd::Unit(k, static_cast<Eigen::Index>(pos)));
    std::vector<char> is_basic(static_cast<std::size_t>(M), 0);
    for (int bi : w.basis)
      if (bi < M) is_basic[static_cast<std::size_t>(bi)] = 1;
    int replacement = -1;
    for (Eigen::Index j = 0; j < M; ++j) {
      if (is_basic[static_cast<std::size_t>(j)]) continue;
      if (std::abs(row_mult.dot(w.E.col(j))) > 1e-9) {
        replacement = static_cast<int>(j);
        break;
      }
    }
    if (replacement >= 0) {
      w.basis[pos] = replacement;
      ++pos;
      continue;
    }
    // Redundant row: delete it together with its artificial. The artificial
    // at `pos` points at the unit direction of its own row in the current
    // row ordering.
    const int r = w.basis[pos] - static_cast<int>(M);
    {
      const Eigen::Index rows = w.E.rows();
      Eigen::MatrixXd E2(rows - 1, w.E.cols());
      Eigen::VectorXd h2(rows - 1);
      std::vector<char> fl2;
      std::vector<int> ids2;
      fl2.reserve(static_cast<std::size_t>(rows) - 1);
      ids2.reserve(static_cast<std::size_t>(rows) - 1);
      Eigen::Index t = 0;
      for (Eigen::Index i = 0; i < rows; ++i) {
        if (i == r) continue;
        E2.row(t) = w.E.row(i);
        h2(t) = w.h(i);
        fl2.push_back(w.flipped[static_cast<std::size_t>(i)]);
        ids2.push_back(w.row_ids[static_cast<std::size_t>(i)]);
        ++t;
      }
      w.E = std::move(E2);
      w.h = std::move(h2);
      w.flipped = std::move(fl2);
      w.row_ids = std::move(ids2);
    }
    w.basis.erase(w.basis.begin() + static_cast<std::ptrdiff_t>(pos));
    // Remaining artificials above the deleted row shift down one direction.
    for (auto& e : w.basis)
      if (e >= M && e - static_cast<int>(M) > r) --e;
    // Restart the sweep: indices moved.
    pos = 0;
  }

  // Phase 2 on the real costs.
  const double cost_scale = inf_norm_or_zero(cost);
  const auto phase2_cost = [&](int j) {
    return j < M ? cost(j) : 0.0;
  };
  const SfStatus ph2 = run_phase(w, phase2_cost, enter_real, cost_scale, opt,
                                 max_iter, iters, out.note);
  out.iterations = iters;
  if (ph2 == SfStatus::Failure) return out;
  if (ph2 == SfStatus::Unbounded) {
    out.status = SfStatus::Unbounded;
    return out;
  }

  w.rebuild_basis_matrix();
  Eigen::PartialPivLU<Eigen::MatrixXd> lu(w.B);
  w.xB = lu.solve(w.h);
  const auto k = static_cast<Eigen::Index>(w.basis.size());
  Eigen::VectorXd cB(k);
  for (Eigen::Index i = 0; i < k; ++i)
    cB(i) = phase2_cost(w.basis[static_cast<std::size_t>(i)]);
  Eigen::PartialPivLU<Eigen::MatrixXd> lut(w.B.transpose());
  Eigen::VectorXd pi = lut.solve(cB);

  out.y = Eigen::VectorXd::Zero(M);
  for (Eigen::Index i = 0; i < k; ++i)
    if (w.basis[static_cast<std::size_t>(i)] < M)
      out.y(w.basis[static_cast<std::size_t>(i)]) = std::max(w.xB(i), 0.0);
  out.objective = cB.dot(w.xB);

  // Undo row flips and map surviving-row multipliers back to their original
  // positions. Deleted (redundant) rows keep a zero multiplier; the caller
  // verifies feasibility and the duality gap explicitly, so any harm from a
  // deletion surfaces as a checked failure rather than a silent wrong answer.
  Eigen::VectorXd pi_orig = Eigen::VectorXd::Zero(k0);
  for (Eigen::Index i = 0; i < w.E.rows(); ++i) {
    const auto si = static_cast<std::size_t>(i);
    pi_orig(w.row_ids[si]) = w.flipped[si] ? -pi(i) : pi(i);
  }
  out.pi = pi_orig;
  out.status = SfStatus::Optimal;
  return out;
}

// ---------------------------------------------------------------------------
// Inequality-form LP  min c'x  s.t.  A x <= b  solved through its dual
//   min b'y  s.t.  A'y = -c,  y >= 0,
// whose basis dimension is the (small) primal variable count. The simplex
// multipliers of the dual at optimality are exactly the primal solution.
// ---------------------------------------------------------------------------

struct IneqOutcome {
  SolveStatus status = SolveStatus::NumericalFailure;
  Eigen::VectorXd x;
  Eigen::VectorXd dual;
  double objective = std::numeric_limits<double>::quiet_NaN();  // min sense
  int iterations = 0;
  std::string note;
};

IneqOutcome solve_ineq_min(const Eigen::VectorXd& c, const Eigen::MatrixXd& A,
                           const Eigen::VectorXd& b, const SolverOptions& opt,
                           bool allow_distinguish);

// Distinguishes feasible-unbounded from infeasible once the dual of the
// original LP turns out infeasible:  min t  s.t.  A x - t <= b,  t >= 0
// is always feasible and bounded, and its optimum is zero exactly when the
// original constraints admit a point.
IneqOutcome classify_by_feasibility(const Eigen::MatrixXd& A,
                                    const Eigen::VectorXd& b,
                                    const SolverOptions& opt) {
  const Eigen::Index n = A.cols();
  const Eigen::Index m = A.rows();
  Eigen::MatrixXd Af(m + 1, n + 1);
  Af.topLeftCorner(m, n) = A;
  Af.topRightCorner(m, 1).setConstant(-1.0);
  Af.bottomLeftCorner(1, n).setZero();
  Af(m, n) = -1.0;
  Eigen::VectorXd bf(m + 1);
  bf.head(m) = b;
  bf(m) = 0.0;
  Eigen::VectorXd cf = Eigen::VectorXd::Zero(n + 1);
  cf(n) = 1.0;
  return solve_ineq_min(cf, Af, bf, opt, /*allow_distinguish=*/false);
}

IneqOutcome solve_ineq_min(const Eigen::VectorXd& c, const Eigen::MatrixXd& A,
                           const Eigen::VectorXd& b, const SolverOptions& opt,
                           bool allow_distinguish) {
  IneqOutcome out;
  const Eigen::Index n = c.size();
  const Eigen::Index m = A.rows();

  if (m == 0) {
    if (inf_norm_or_zero(c) == 0.0) {
      out.status = SolveStatus::Optimal;
      out.x = Eigen::VectorXd::Zero(n);
      out.dual.resize(0);
      out.objective = 0.0;
    } else {
      out.status = SolveStatus::Unbounded;
    }
    return out;
  }

  const SfResult sf = solve_standard_form(A.transpose(), -c, b, opt);
  out.iterations = sf.iterations;

  switch (sf.status) {
    case SfStatus::Optimal: {
      if (!sf.note.empty() && sf.pi.size() != n) {
        out.note = sf.note;
        return out;
      }
      const Eigen::VectorXd x = sf.pi;
      const double feas_scale = 1.0 + inf_norm_or_zero(b);
      const double viol = (A * x - b).maxCoeff();
      if (viol > 10.0 * opt.feas_tol * feas_scale) {
        out.note = "primal residual " + std::to_string(viol) +
                   " after dual solve";
        return out;
      }
      const double primal_obj = c.dot(x);
      const double dual_obj = -sf.objective;
      const double gap = std::abs(primal_obj - dual_obj);
      if (gap > 1e-7 * (1.0 + std::max(std::abs(primal_obj),
                                       std::abs(dual_obj)))) {
        out.note = "duality gap " + std::to_string(gap);
        return out;
      }
      out.status = SolveStatus::Optimal;
      out.x = x;
      out.dual = sf.y;
      out.objective = primal_obj;
      return out;
    }
    case SfStatus::Unbounded:
      out.status = SolveStatus::Infeasible;
      return out;
    case SfStatus::Infeasible: {
      if (!allow_distinguish) {
        out.note = "feasibility probe failed to solve";
        return out;
      }
      const IneqOutcome probe = classify_by_feasibility(A, b, opt);
      if (probe.status != SolveStatus::Optimal) {
        out.note = "feasibility probe: " + probe.note;
        return out;
      }
      const double t_star = probe.objective;
      if (t_star <= 10.0 * opt.feas_tol * (1.0 + inf_norm_or_zero(b))) {
        out.status = SolveStatus::Unbounded;
      } else {
        out.status = SolveStatus::Infeasible;
      }
      return out;
    }
    case SfStatus::Failure:
      out.note = sf.note.empty() ? "simplex failure" : sf.note;
      return out;
  }
  return out;
}

}  // namespace

const char* to_string(SolveStatus status) {
  switch (status) {
    case SolveStatus::Optimal: return "Optimal";
    case SolveStatus::Infeasible: return "Infeasible";
    case SolveStatus::Unbounded: return "Unbounded";
    case SolveStatus::NumericalFailure: return "NumericalFailure";
  }
  return "NumericalFailure";
}

SolveResult solve_lp(const LinearProgram& lp, const SolverOptions& options) {
  const Eigen::Index n = lp.c.size();
  if (n == 0) throw std::invalid_argument("solve_lp: empty objective");
  if (lp.A.rows() != lp.b.size())
    throw std::invalid_argument("solve_lp: A row count != b length");
  if (lp.A.rows() > 0 && lp.A.cols() != n)
    throw std::invalid_argument("solve_lp: A column count != objective length");
  if (lp.lower.size() != 0 && lp.lower.size() != n)
    throw std::invalid_argument("solve_lp: lower bound length mismatch");
  if (lp.upper.size() != 0 && lp.upper.size() != n)
    throw std::invalid_argument("solve_lp: upper bound length mismatch");

  // Fold finite bounds into inequality rows.
  std::vector<std::pair<int, double>> lo_rows, hi_rows;
  if (lp.lower.size() == n)
    for (Eigen::Index j = 0; j < n; ++j)
      if (std::isfinite(lp.lower(j))) lo_rows.emplace_back(static_cast<int>(j), lp.lower(j));
  if (lp.upper.size() == n)
    for (Eigen::Index j = 0; j < n; ++j)
      if (std::isfinite(lp.upper(j))) hi_rows.emplace_back(static_cast<int>(j), lp.upper(j));

  const Eigen::Index m0 = lp.A.rows();
  const Eigen::Index m_all =
      m0 + static_cast<Eigen::Index>(lo_rows.size() + hi_rows.size());
  Eigen::MatrixXd A_all(m_all, n);
  Eigen::VectorXd b_all(m_all);
  if (m0 > 0) {
    A_all.topRows(m0) = lp.A;
    b_all.head(m0) = lp.b;
  }
  Eigen::Index r = m0;
  for (const auto& [j, lo] : lo_rows) {
    A_all.row(r).setZero();
    A_all(r, j) = -1.0;
    b_all(r) = -lo;
    ++r;
  }
  for (const auto& [j, hi] : hi_rows) {
    A_all.row(r).setZero();
    A_all(r, j) = 1.0;
    b_all(r) = hi;
    ++r;
  }

  const Eigen::VectorXd c_min = lp.maximize ? Eigen::VectorXd(-lp.c) : lp.c;
  const IneqOutcome o = solve_ineq_min(c_min, A_all, b_all, options, true);

  SolveResult result;
  result.status = o.status;
  result.iterations = o.iterations;
  result.note = o.note;
  if (o.status == SolveStatus::Optimal) {
    result.x = o.x;
    result.dual = o.dual;
    result.objective = lp.maximize ? -o.objective : o.objective;
  }
  return result;
}

SolveResult solve_qp(const QuadraticProgram& qp, const SolverOptions& options) {
  const Eigen::Index n = qp.H.rows();
  if (n == 0 || qp.H.cols() != n)
    throw std::invalid_argument("solve_qp: H must be square and nonempty");
  if (qp.f.size() != n)
    throw std::invalid_argument("solve_qp: f length != H dimension");
  if (qp.A.rows() != qp.b.size())
    throw std::invalid_argument("solve_qp: A row count != b length");
  if (qp.A.rows() > 0 && qp.A.cols() != n)
    throw std::invalid_argument("solve_qp: A column count != H dimension");

  const double h_norm = qp.H.cwiseAbs().maxCoeff();
  if ((qp.H - qp.H.transpose()).cwiseAbs().maxCoeff() >
      1e-9 * std::max(1.0, h_norm))
    throw std::invalid_argument("solve_qp: H is not symmetric");
  const Eigen::MatrixXd Hs = 0.5 * (qp.H + qp.H.transpose());
  {
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(Hs,
                                                      Eigen::EigenvaluesOnly);
    if (es.eigenvalues().minCoeff() < -1e-8 * std::max(1.0, h_norm))
      throw std::invalid_argument("solve_qp: H is not positive semidefinite");
  }

  SolveResult result;
  const Eigen::Index m = qp.A.rows();
  const double ftol = options.feas_tol * (1.0 + inf_norm_or_zero(qp.b));

  const auto objective_at = [&](const Eigen::VectorXd& x) {
    return 0.5 * x.dot(Hs * x) + qp.f.dot(x);
  };

  // Unconstrained case: any stationary point is a global minimizer; a
  // gradient component outside range(H) certifies an unbounded ray.
  if (m == 0) {
    Eigen::LDLT<Eigen::MatrixXd> ldlt(Hs);
    const Eigen::VectorXd x = ldlt.solve(-qp.f);
    const double res = inf_norm_or_zero(Hs * x + qp.f);
    if (res <= 1e-7 * (1.0 + inf_norm_or_zero(qp.f))) {
      result.status = SolveStatus::Optimal;
      result.x = x;
      result.dual.resize(0);
      result.objective = objective_at(x);
    } else {
      result.status = SolveStatus::Unbounded;
    }
    return result;
  }

  // Feasible starting point: the origin if it qualifies, otherwise phase 1.
  Eigen::VectorXd x = Eigen::VectorXd::Zero(n);
  if (qp.b.minCoeff() < -ftol) {
    const Eigen::Index nn = n;
    Eigen::MatrixXd Af(m + 1, nn + 1);
    Af.topLeftCorner(m, nn) = qp.A;
    Af.topRightCorner(m, 1).setConstant(-1.0);
    Af.bottomLeftCorner(1, nn).setZero();
    Af(m, nn) = -1.0;
    Eigen::VectorXd bf(m + 1);
    bf.head(m) = qp.b;
    bf(m) = 0.0;
    LinearProgram phase1;
    phase1.c = Eigen::VectorXd::Zero(nn + 1);
    phase1.c(nn) = 1.0;
    phase1.A = std::move(Af);
    phase1.b = std::move(bf);
    const SolveResult lp_res = solve_lp(phase1, options);
    if (lp_res.status != SolveStatus::Optimal) {
      result.status = SolveStatus::NumericalFailure;
      result.note = "phase-1 LP: " + std::string(to_string(lp_res.status));
      return result;
    }
    if (lp_res.objective > 10.0 * ftol) {
      result.status = SolveStatus::Infeasible;
      return result;
    }
    x = lp_res.x.head(nn);
  }

  Eigen::VectorXd slack = qp.b - qp.A * x;  // maintained incrementally

  std::vector<int> working;  // active row indices, kept linearly independent
  std::vector<char> in_working(static_cast<std::size_t>(m), 0);

  const int max_iter = options.max_iterations > 0
                           ? options.max_iterations
                           : 200 + 40 * static_cast<int>(n) +
                                 static_cast<int>(std::min<Eigen::Index>(m, 2000));
  int iter = 0;
  int since_refresh = 0;

  while (true) {
    if (++iter > max_iter) {
      result.status = SolveStatus::NumericalFailure;
      result.note = "active-set iteration cap reached";
      return result;
    }
    if (++since_refresh >= 64) {  // guard against slack drift
      slack = qp.b - qp.A * x;
      since_refresh = 0;
    }

    const Eigen::VectorXd g = Hs * x + qp.f;
    const auto w = static_cast<Eigen::Index>(working.size());

    Eigen::MatrixXd AW(w, n);
    for (Eigen::Index i = 0; i < w; ++i)
      AW.row(i) = qp.A.row(working[static_cast<std::size_t>(i)]);

    Eigen::VectorXd p = Eigen::VectorXd::Zero(n);
    bool ray = false;
    bool stationary = false;
    Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr;
    if (w > 0) qr.compute(AW.transpose());

    if (w == n) {
      stationary = true;  // null space empty: vertex of the working set
    } else {
      Eigen::MatrixXd Z;
      if (w == 0) {
        Z = Eigen::MatrixXd::Identity(n, n);
      } else {
        const Eigen::MatrixXd Q =
            qr.householderQ() * Eigen::MatrixXd::Identity(n, n);
        Z = Q.rightCols(n - w);
      }
      const Eigen::MatrixXd Hr = Z.transpose() * Hs * Z;
      const Eigen::VectorXd gr = Z.transpose() * g;
      Eigen::LDLT<Eigen::MatrixXd> ldlt(Hr);
      Eigen::VectorXd pz = ldlt.solve(-gr);
      const double res = inf_norm_or_zero(Hr * pz + gr);
      if (res <= 1e-9 * (1.0 + inf_norm_or_zero(gr))) {
        p = Z * pz;
        if (inf_norm_or_zero(p) <= 1e-10 * (1.0 + inf_norm_or_zero(x)))
          stationary = true;
      } else {
        // Reduced Hessian singular with an incompatible gradient: move along
        // a zero-curvature descent direction.
        Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> er(Hr);
        const double lam_tol = 1e-10 * std::max(1.0, er.eigenvalues().maxCoeff());
        int pick = -1;
        for (Eigen::Index i = 0; i < Hr.rows(); ++i) {
          if (er.eigenvalues()(i) <= lam_tol &&
              std::abs(er.eigenvectors().col(i).dot(gr)) >
                  1e-10 * (1.0 + inf_norm_or_zero(gr))) {
            pick = static_cast<int>(i);
            break;
          }
        }
        if (pick < 0) {
          result.status = SolveStatus::NumericalFailure;
          result.note = "singular reduced Hessian without descent ray";
          return result;
        }
        Eigen::VectorXd d = er.eigenvectors().col(pick);
        if (d.dot(gr) > 0) d = -d;
        p = Z * d;
        ray = true;
      }
    }

    if (stationary) {
      if (w == 0) break;  // unconstrained stationary point, feasible: done
      const Eigen::VectorXd lambda = qr.solve(-g);
      if (inf_norm_or_zero(AW.transpose() * lambda + g) >
          1e-6 * (1.0 + inf_norm_or_zero(g))) {
        result.status = SolveStatus::NumericalFailure;
        result.note = "stationarity system inconsistent";
        return result;
      }
      int drop = -1;
      double most_negative = -1e-8 * (1.0 + inf_norm_or_zero(g));
      for (Eigen::Index i = 0; i < w; ++i) {
        if (lambda(i) < most_negative) {
          most_negative = lambda(i);
          drop = static_cast<int>(i);
        }
      }
      if (drop < 0) break;  // KKT satisfied
      in_working[static_cast<std::size_t>(working[static_cast<std::size_t>(drop)])] = 0;
      working.erase(working.begin() + drop);
      continue;
    }

    // Ratio test against rows outside the working set.
    const Eigen::VectorXd Ap = qp.A * p;
    double alpha = ray ? kInf : 1.0;
    int blocking = -1;
    for (Eigen::Index i = 0; i < m; ++i) {
      if (in_working[static_cast<std::size_t>(i)]) continue;
      if (Ap(i) <= 1e-12) continue;
      const double ratio = std::max(slack(i), 0.0) / Ap(i);
      if (ratio < alpha - 1e-14) {
        alpha = ratio;
        blocking = static_cast<int>(i);
      }
    }
    if (ray && blocking < 0) {
      result.status = SolveStatus::Unbounded;
      return result;
    }
    x += alpha * p;
    slack -= alpha * Ap;
    if (blocking >= 0) {
      if (static_cast<Eigen::Index>(working.size()) >= n) {
        result.status = SolveStatus::NumericalFailure;
        result.note = "working set overflow";
        return result;
      }
      working.push_back(blocking);
      in_working[static_cast<std::size_t>(blocking)] = 1;
      slack(blocking) = 0.0;
    }
  }

  // Assemble multipliers and verify the KKT system.
  Eigen::VectorXd lambda_full = Eigen::VectorXd::Zero(m);
  if (!working.empty()) {
    const auto w = static_cast<Eigen::Index>(working.size());
    Eigen::MatrixXd AW(w, n);
    for (Eigen::Index i = 0; i < w; ++i)
      AW.row(i) = qp.A.row(working[static_cast<std::size_t>(i)]);
    const Eigen::VectorXd g = Hs * x + qp.f;
    Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(AW.transpose());
    const Eigen::VectorXd lambda = qr.solve(-g);
    for (Eigen::Index i = 0; i < w; ++i)
      lambda_full(working[static_cast<std::size_t>(i)]) =
          std::max(lambda(i), 0.0);
  }
  slack = qp.b - qp.A * x;
  const double g_scale =
      1.0 + inf_norm_or_zero(qp.f) + h_norm * (1.0 + inf_norm_or_zero(x));
  const double stat_res =
      inf_norm_or_zero(Hs * x + qp.f + qp.A.transpose() * lambda_full);
  const double feas_res = std::max(-slack.minCoeff(), 0.0);
  double compl_res = 0.0;
  for (Eigen::Index i = 0; i < m; ++i)
    compl_res = std::max(compl_res, std::abs(lambda_full(i) * slack(i)));
  if (stat_res > 1e-7 * g_scale || feas_res > 1e-7 * (1.0 + inf_norm_or_zero(qp.b)) ||
      compl_res > 1e-6 * g_scale * (1.0 + inf_norm_or_zero(qp.b))) {
    result.status = SolveStatus::NumericalFailure;
    result.note = "KKT residual too large";
    return result;
  }

  result.status = SolveStatus::Optimal;
  result.x = x;
  result.dual = lambda_full;
  result.objective = objective_at(x);
  result.iterations = iter;
  return result;
}

}  // namespace psmpc::optim
