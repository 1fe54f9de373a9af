#include "parspl/admm.hpp"

#include <algorithm>
#include <cmath>

#include "parspl/amd.hpp"
#include "parspl/half.hpp"

namespace parspl {

const char* to_string(SolveStatus s) noexcept {
  switch (s) {
    case SolveStatus::solved: return "solved";
    case SolveStatus::max_iter: return "max_iter";
    case SolveStatus::diverged: return "diverged";
  }
  return "unknown";
}

void AdmmSettings::validate() const {
  auto bad = [](const char* what) { throw Error(ErrorCode::invalid_argument, what); };
  if (!(rho > 0)) bad("admm: rho must be positive");
  if (!(sigma > 0)) bad("admm: sigma must be positive");
  if (!(alpha > 0 && alpha < 2)) bad("admm: alpha must lie in (0, 2)");
  if (max_iter < 1) bad("admm: max_iter must be at least 1");
  if (check_interval < 1) bad("admm: check_interval must be at least 1");
  if (!(rho_eq_scale > 0)) bad("admm: rho_eq_scale must be positive");
  if (!(eps_prim >= 0 && eps_dual >= 0)) bad("admm: tolerances must be non-negative");
}

template <typename T>
KktSystem<T> assemble_kkt(const QpProblem<T>& qp, const AdmmSettings& s) {
  qp.validate();
  s.validate();
  const index_t n = qp.n(), m = qp.m();
  KktSystem<T> sys;
  sys.rho.resize(m);
  for (index_t i = 0; i < m; ++i)
    sys.rho[i] = static_cast<T>(qp.l[i] == qp.u[i] ? s.rho * s.rho_eq_scale : s.rho);

  std::vector<Triplet<T>> t;
  t.reserve(static_cast<std::size_t>(qp.P.nnz() + qp.A.nnz() + n + m));
  for (index_t j = 0; j < n; ++j) {
    const auto r = qp.P.col_rows(j);
    const auto v = qp.P.col_values(j);
    for (std::size_t k = 0; k < r.size(); ++k) t.push_back({r[k], j, v[k]});
    t.push_back({j, j, static_cast<T>(s.sigma)});
  }
  // A' occupies the upper-right block: entry A(i, j) lands at (j, n + i).
  for (index_t j = 0; j < n; ++j) {
    const auto r = qp.A.col_rows(j);
    const auto v = qp.A.col_values(j);
    for (std::size_t k = 0; k < r.size(); ++k) t.push_back({j, n + r[k], v[k]});
  }
  for (index_t i = 0; i < m; ++i) t.push_back({n + i, n + i, T(-1) / sys.rho[i]});
  sys.K = SparseCSC<T>::from_triplets(n + m, n + m, t);
  sys.factor = ldl_factor(sys.K);
  return sys;
}

template <typename T>
AdmmSolver<T>::AdmmSolver(QpProblem<T> qp, AdmmSettings settings)
    : qp_(std::move(qp)), settings_(settings) {
  if (emulate_half()) {
    round_to_half<T>(qp_.P.values_mut());
    round_to_half<T>(qp_.A.values_mut());
    round_to_half<T>(qp_.q);
    round_to_half<T>(qp_.l);
    round_to_half<T>(qp_.u);
  }
  kkt_ = assemble_kkt(qp_, settings_);
  ++factorizations_;
  if (emulate_half()) {
    round_to_half<T>(kkt_.factor.L.values_mut());
    round_to_half<T>(kkt_.factor.dinv);
  }
  backend_ = std::make_shared<ReferenceSolver<T>>(kkt_.factor);
  work_.resize(qp_.n() + qp_.m());
  perm_work_.resize(qp_.n() + qp_.m());
}

template <typename T>
void AdmmSolver<T>::update_q(std::span<const T> q) {
  if (static_cast<index_t>(q.size()) != qp_.n()) throw DimensionError("admm: q length mismatch");
  qp_.q.assign(q.begin(), q.end());
  if (emulate_half()) round_to_half<T>(qp_.q);
}

template <typename T>
void AdmmSolver<T>::update_bounds(std::span<const T> l, std::span<const T> u) {
  if (static_cast<index_t>(l.size()) != qp_.m() || static_cast<index_t>(u.size()) != qp_.m())
    throw DimensionError("admm: bound length mismatch");
  // Per-row rho stays as assembled even if a row switches between equality
  // and inequality; any positive rho vector is valid.
  for (index_t i = 0; i < qp_.m(); ++i)
    if (l[i] > u[i]) throw Error(ErrorCode::invalid_argument, "admm: l > u");
  qp_.l.assign(l.begin(), l.end());
  qp_.u.assign(u.begin(), u.end());
  if (emulate_half()) {
    round_to_half<T>(qp_.l);
    round_to_half<T>(qp_.u);
  }
}

template <typename T>
void AdmmSolver<T>::set_backend(std::shared_ptr<TriangularSolver<T>> backend) {
  backend_ = backend ? std::move(backend) : std::make_shared<ReferenceSolver<T>>(kkt_.factor);
}

template <typename T>
AdmmState<T> AdmmSolver<T>::cold_state() const {
  AdmmState<T> s;
  s.x.assign(qp_.n(), T(0));
  s.xtilde.assign(qp_.n(), T(0));
  s.z.assign(qp_.m(), T(0));
  s.y.assign(qp_.m(), T(0));
  s.ztilde.assign(qp_.m(), T(0));
  s.nu.assign(qp_.m(), T(0));
  // z must start inside the box.
  for (index_t i = 0; i < qp_.m(); ++i) s.z[i] = std::clamp(T(0), qp_.l[i], qp_.u[i]);
  return s;
}

template <typename T>
void AdmmSolver<T>::kkt_solve(std::span<T> rhs) const {
  const auto& perm = kkt_.factor.perm;
  perm.template apply<T>(std::span<const T>(rhs.data(), rhs.size()), std::span<T>(perm_work_));
  backend_->solve_permuted(perm_work_);
  perm.template apply_inverse<T>(std::span<const T>(perm_work_), rhs);
}

template <typename T>
void AdmmSolver<T>::step(AdmmState<T>& s) const {
  const index_t n = qp_.n(), m = qp_.m();
  const T sigma = static_cast<T>(settings_.sigma);
  const T alpha = static_cast<T>(settings_.alpha);
  const auto& rho = kkt_.rho;

  for (index_t i = 0; i < n; ++i) work_[i] = sigma * s.x[i] - qp_.q[i];
  for (index_t i = 0; i < m; ++i) work_[n + i] = s.z[i] - s.y[i] / rho[i];
  kkt_solve(work_);

  for (index_t i = 0; i < n; ++i) s.xtilde[i] = work_[i];
  for (index_t i = 0; i < m; ++i) {
    s.nu[i] = work_[n + i];
    s.ztilde[i] = s.z[i] + (s.nu[i] - s.y[i]) / rho[i];
  }
  for (index_t i = 0; i < n; ++i) s.x[i] = alpha * s.xtilde[i] + (T(1) - alpha) * s.x[i];
  for (index_t i = 0; i < m; ++i) {
    const T zr = alpha * s.ztilde[i] + (T(1) - alpha) * s.z[i];
    const T znew = std::clamp(zr + s.y[i] / rho[i], qp_.l[i], qp_.u[i]);
    s.y[i] += rho[i] * (zr - znew);
    s.z[i] = znew;
  }
  if (emulate_half()) {
    for (auto* v : {&s.x, &s.z, &s.y, &s.xtilde, &s.ztilde, &s.nu}) round_to_half<T>(*v);
    // Rounding can push z a half-ulp outside a non-representable bound.
    for (index_t i = 0; i < m; ++i) s.z[i] = std::clamp(s.z[i], qp_.l[i], qp_.u[i]);
  }
  ++s.iterations;
}

template <typename T>
std::pair<double, double> AdmmSolver<T>::residuals(const AdmmState<T>& s) const {
  const index_t n = qp_.n(), m = qp_.m();
  std::vector<T> rp(m, T(0)), rd(qp_.q.begin(), qp_.q.end());
  qp_.A.multiply_add(s.x, rp);
  for (index_t i = 0; i < m; ++i) rp[i] -= s.z[i];
  qp_.P.symmetric_upper_multiply_add(s.x, rd);
  qp_.A.multiply_transpose_add(s.y, rd);
  auto norm = [&](const std::vector<T>& v) {
    double r = 0.0;
    for (T x : v) {
      const double d = static_cast<double>(x);
      if (settings_.norm == ResidualNorm::inf)
        r = std::max(r, std::abs(d));
      else
        r += d * d;
      if (std::isnan(d)) return d;
    }
    return r;
  };
  (void)n;
  return {norm(rp), norm(rd)};
}

template <typename T>
SolveResult<T> AdmmSolver<T>::solve(const std::optional<AdmmState<T>>& initial) {
  AdmmState<T> s;
  if (initial) {
    s = *initial;
    if (static_cast<index_t>(s.x.size()) != qp_.n() || static_cast<index_t>(s.z.size()) != qp_.m() ||
        static_cast<index_t>(s.y.size()) != qp_.m())
      throw DimensionError("admm: initial guess has wrong dimensions");
    s.xtilde.assign(qp_.n(), T(0));
    s.ztilde.assign(qp_.m(), T(0));
    s.nu.assign(qp_.m(), T(0));
  } else if (settings_.warm_start && prior_) {
    s = *prior_;
  } else {
    s = cold_state();
  }
  s.iterations = 0;
  if (emulate_half())
    for (auto* v : {&s.x, &s.z, &s.y}) round_to_half<T>(*v);

  SolveResult<T> out;
  out.status = SolveStatus::max_iter;
  const double limit = settings_.divergence_limit;
  for (int k = 1; k <= settings_.max_iter; ++k) {
    step(s);

    bool blown = false;
    for (const auto* v : {&s.x, &s.z, &s.y})
      for (T x : *v)
        if (!(std::abs(static_cast<double>(x)) <= limit)) blown = true;

    const bool check = k % settings_.check_interval == 0 || k == settings_.max_iter;
    if (settings_.record_trace || check || blown) {
      std::tie(s.r_prim, s.r_dual) = residuals(s);
      if (settings_.record_trace) out.trace.push_back({k, s.r_prim, s.r_dual});
    }
    if (blown) {
      out.status = SolveStatus::diverged;
      break;
    }
    if (check && s.r_prim <= settings_.eps_prim && s.r_dual <= settings_.eps_dual) {
      out.status = SolveStatus::solved;
      if (settings_.termination == TerminationMode::residual) break;
    } else if (check) {
      out.status = SolveStatus::max_iter;
    }
  }

  out.x = s.x;
  out.z = s.z;
  out.y = s.y;
  out.iterations = s.iterations;
  out.r_prim = s.r_prim;
  out.r_dual = s.r_dual;
  if (out.status != SolveStatus::diverged)
    prior_ = std::move(s);
  else
    prior_.reset();
  return out;
}

template KktSystem<float> assemble_kkt(const QpProblem<float>&, const AdmmSettings&);
template KktSystem<double> assemble_kkt(const QpProblem<double>&, const AdmmSettings&);
template class AdmmSolver<float>;
template class AdmmSolver<double>;

}  // namespace parspl
