#include "radsym/solvers.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

namespace radsym {

SparsityPattern SparsityPattern::global(Index L, Index K) {
  SparsityPattern p;
  p.blocks.push_back({0, L});
  p.k.push_back(K);
  p.validate(L);
  return p;
}

SparsityPattern SparsityPattern::blockwise(const std::vector<IndexRange>& blocks,
                                           const std::vector<Index>& k) {
  SparsityPattern p;
  p.blocks = blocks;
  p.k = k;
  p.validate(p.length());
  return p;
}

Index SparsityPattern::total() const {
  Index t = 0;
  for (std::size_t b = 0; b < blocks.size(); ++b) t += std::min(k[b], blocks[b].size());
  return t;
}

void SparsityPattern::validate(Index L) const {
  if (blocks.empty() || blocks.size() != k.size()) {
    throw ConfigError("sparsity pattern needs one K per block");
  }
  Index pos = 0;
  for (std::size_t b = 0; b < blocks.size(); ++b) {
    if (blocks[b].begin != pos || blocks[b].end < pos) {
      throw ConfigError("sparsity blocks must tile the coefficient vector");
    }
    if (k[b] <= 0) throw ConfigError("sparsity K must be positive");
    if (k[b] > blocks[b].size()) throw ConfigError("sparsity K exceeds its block size");
    pos = blocks[b].end;
  }
  if (pos != L) throw DimensionError("sparsity pattern length does not match vector length");
}

IndexList top_k_indices(const Vector& v, const SparsityPattern& pattern) {
  if (pattern.length() != v.size()) throw DimensionError("sparsity pattern length mismatch");
  IndexList out;
  IndexList idx;
  for (std::size_t b = 0; b < pattern.blocks.size(); ++b) {
    const IndexRange& r = pattern.blocks[b];
    const Index keep = std::min(pattern.k[b], r.size());
    idx.resize(static_cast<std::size_t>(r.size()));
    std::iota(idx.begin(), idx.end(), r.begin);
    std::partial_sort(idx.begin(), idx.begin() + keep, idx.end(), [&](Index a, Index c) {
      const double fa = std::abs(v[a]), fc = std::abs(v[c]);
      return fa > fc || (fa == fc && a < c);
    });
    out.insert(out.end(), idx.begin(), idx.begin() + keep);
  }
  std::sort(out.begin(), out.end());
  return out;
}

Vector hard_threshold(const Vector& v, const SparsityPattern& pattern) {
  Vector out = Vector::Zero(v.size());
  for (Index i : top_k_indices(v, pattern)) out[i] = v[i];
  return out;
}

Vector hard_threshold(const Vector& v, Index K) {
  if (K <= 0) throw ConfigError("hard threshold needs K > 0");
  return hard_threshold(v, SparsityPattern::global(v.size(), std::min<Index>(K, v.size())));
}

IndexList support_of(const Vector& v) {
  IndexList s;
  for (Index i = 0; i < v.size(); ++i) {
    if (v[i] != 0) s.push_back(i);
  }
  return s;
}

const char* algorithm_name(GreedyAlgorithm a) {
  switch (a) {
    case GreedyAlgorithm::IHT:
      return "IHT";
    case GreedyAlgorithm::NIHT:
      return "NIHT";
    case GreedyAlgorithm::CGIHT:
      return "CGIHT";
    case GreedyAlgorithm::SP:
      return "SP";
    case GreedyAlgorithm::CGSTP:
      return "CGSTP";
  }
  return "?";
}

namespace {
std::string upper(std::string s) {
  for (char& ch : s) ch = static_cast<char>(std::toupper(static_cast<unsigned char>(ch)));
  return s;
}
}  // namespace

bool is_greedy_name(const std::string& name) {
  const std::string u = upper(name);
  return u == "IHT" || u == "NIHT" || u == "CGIHT" || u == "SP" || u == "CGSTP";
}

GreedyAlgorithm parse_algorithm(const std::string& name) {
  const std::string u = upper(name);
  if (u == "IHT") return GreedyAlgorithm::IHT;
  if (u == "NIHT") return GreedyAlgorithm::NIHT;
  if (u == "CGIHT") return GreedyAlgorithm::CGIHT;
  if (u == "SP") return GreedyAlgorithm::SP;
  if (u == "CGSTP") return GreedyAlgorithm::CGSTP;
  throw ConfigError("unknown greedy algorithm: " + name);
}

double spectral_norm(const Matrix& A, int iterations, double tol) {
  if (A.size() == 0) return 0;
  Eigen::VectorXd x = Eigen::VectorXd::Ones(A.cols()) / std::sqrt(double(A.cols()));
  double s = 0;
  for (int it = 0; it < iterations; ++it) {
    Eigen::VectorXd w = A.transpose() * (A * x);
    const double nw = w.norm();
    if (nw == 0) return 0;
    const double s_new = std::sqrt(nw);
    x = w / nw;
    if (std::abs(s_new - s) <= tol * s_new) return s_new;
    s = s_new;
  }
  return s;
}

Vector restricted_least_squares(const Matrix& A, const Vector& y, const IndexList& support,
                                bool* rank_deficient) {
  Vector c = Vector::Zero(A.cols());
  if (rank_deficient) *rank_deficient = false;
  if (support.empty()) return c;
  Eigen::MatrixXd As(A.rows(), static_cast<Index>(support.size()));
  for (std::size_t k = 0; k < support.size(); ++k) As.col(static_cast<Index>(k)) = A.col(support[k]);
  Eigen::CompleteOrthogonalDecomposition<Eigen::MatrixXd> cod(As);
  const Eigen::VectorXd x = cod.solve(y);
  if (rank_deficient && cod.rank() < As.cols()) *rank_deficient = true;
  for (std::size_t k = 0; k < support.size(); ++k) c[support[k]] = x[static_cast<Index>(k)];
  return c;
}

namespace {

// Column-major working copy with helpers for products against sparse vectors.
// The IHT family switches on the Gram form, which makes each gradient cost
// O(L·|T|) instead of O(M·L).
struct Problem {
  Eigen::MatrixXd A;
  Vector y;
  double ynorm = 0;
  Eigen::MatrixXd gram;
  Vector Aty;

  Problem(const Matrix& a, const Vector& yy) : A(a), y(yy), ynorm(yy.norm()) {
    if (a.rows() != yy.size()) throw DimensionError("A and y disagree in row count");
  }

  void enable_gram() {
    if (A.cols() > 6000) return;
    gram.noalias() = A.transpose() * A;
    Aty.noalias() = A.transpose() * y;
  }
  bool has_gram() const { return gram.size() > 0; }

  Vector apply(const Vector& c, const IndexList& supp) const {
    Vector out = Vector::Zero(A.rows());
    for (Index j : supp) out.noalias() += c[j] * A.col(j);
    return out;
  }
  Vector gradient(const Vector& r) const { return A.transpose() * r; }
  // Aᵀ(y - Ac) for c supported on supp, with r = y - Ac.
  Vector gradient_at(const Vector& c, const IndexList& supp, const Vector& r) const {
    if (!has_gram()) return gradient(r);
    Vector g = Aty;
    for (Index j : supp) g.noalias() -= c[j] * gram.col(j);
    return g;
  }
  // <A u_S, A v_S> with u, v restricted to S.
  double inner(const Vector& u, const Vector& v, const IndexList& S) const {
    if (has_gram()) {
      double s = 0;
      for (Index i : S) {
        double gi = 0;
        for (Index j : S) gi += gram(i, j) * v[j];
        s += u[i] * gi;
      }
      return s;
    }
    return apply(u, S).dot(apply(v, S));
  }
  double rel(const Vector& r) const { return ynorm > 0 ? r.norm() / ynorm : 0.0; }
};

// Best residual over the last `window` iterations against the best before it.
class StagnationMonitor {
 public:
  StagnationMonitor(double tol, int window) : tol_(tol), window_(std::max(1, window)) {}
  bool push(double rel) {
    hist_.push_back(rel);
    prefix_.push_back(prefix_.empty() ? rel : std::min(prefix_.back(), rel));
    const std::size_t n = hist_.size();
    const std::size_t w = static_cast<std::size_t>(window_);
    if (n <= w || tol_ <= 0) return false;
    const double before = prefix_[n - w - 1];
    double recent = hist_[n - w];
    for (std::size_t k = n - w; k < n; ++k) recent = std::min(recent, hist_[k]);
    return before - recent < tol_ * double(window_) * before;
  }

 private:
  double tol_;
  int window_;
  std::vector<double> hist_, prefix_;
};

double restricted_sq(const Vector& v, const IndexList& set) {
  double s = 0;
  for (Index j : set) s += v[j] * v[j];
  return s;
}

IndexList set_union(const IndexList& a, const IndexList& b) {
  IndexList out;
  std::set_union(a.begin(), a.end(), b.begin(), b.end(), std::back_inserter(out));
  return out;
}

int default_max(GreedyAlgorithm a, const GreedyOptions& opt) {
  if (opt.max_iter > 0) return opt.max_iter;
  return (a == GreedyAlgorithm::SP || a == GreedyAlgorithm::CGSTP) ? 200 : 5000;
}

bool trivial(const Problem& p, GreedyResult& out) {
  if (p.ynorm == 0) {
    out.c = Vector::Zero(p.A.cols());
    out.residual_history = {0.0};
    out.converged = true;
    out.stop_reason = "zero_rhs";
    return true;
  }
  return false;
}

void check_divergence(double rel, double best, const GreedyOptions& opt, const char* name) {
  if (!std::isfinite(rel) || rel > opt.divergence_factor * best) {
    std::ostringstream msg;
    msg << name << " diverged: relative residual " << rel << " vs best " << best;
    throw ConvergenceError(msg.str());
  }
}

double gram_spectral_norm(const Problem& p) {
  if (!p.has_gram()) return spectral_norm(Matrix(p.A));
  Eigen::VectorXd x = Eigen::VectorXd::Ones(p.gram.cols()) / std::sqrt(double(p.gram.cols()));
  double s = 0;
  for (int it = 0; it < 200; ++it) {
    const Eigen::VectorXd w = p.gram.selfadjointView<Eigen::Lower>() * x;
    const double nw = w.norm();
    if (nw == 0) return 0;
    x = w / nw;
    const double s_new = std::sqrt(nw);
    if (std::abs(s_new - s) <= 1e-10 * s_new) return s_new;
    s = s_new;
  }
  return s;
}

// Shared loop for IHT and NIHT; `adaptive` switches on the NIHT step.
GreedyResult iht_family(const Matrix& A, const Vector& y, const SparsityPattern& K,
                        const GreedyOptions& opt, bool adaptive) {
  K.validate(A.cols());
  Problem p(A, y);
  GreedyResult out;
  if (trivial(p, out)) return out;
  p.enable_gram();
  const GreedyAlgorithm alg = adaptive ? GreedyAlgorithm::NIHT : GreedyAlgorithm::IHT;
  const int max_iter = default_max(alg, opt);

  double mu_fixed = opt.step;
  if (!adaptive) {
    const double sigma = gram_spectral_norm(p);
    if (sigma >= 1.0) mu_fixed /= (1.05 * sigma) * (1.05 * sigma);
  }

  Vector c = Vector::Zero(A.cols());
  Vector r = y;
  IndexList T = support_of(hard_threshold(p.gradient(y), K));
  IndexList supp;
  double best = 1.0;
  StagnationMonitor monitor(opt.stagnation, opt.stagnation_window);
  monitor.push(1.0);
  out.residual_history.push_back(1.0);
  out.stop_reason = "max_iter";
  for (int n = 0; n < max_iter; ++n) {
    const Vector g = p.gradient_at(c, supp, r);
    double mu = mu_fixed;
    Vector c_new;
    if (adaptive) {
      const double agg = p.inner(g, g, T);
      mu = agg > 0 ? restricted_sq(g, T) / agg : 0.0;
      if (mu == 0) {
        out.stop_reason = "zero_step";
        break;
      }
      c_new = hard_threshold(c + mu * g, K);
      if (support_of(c_new) != T) {
        constexpr double kappa = 2.0, shrink = 0.01;
        for (int guard = 0; guard < 60; ++guard) {
          const Vector dc = c_new - c;
          const double adc = p.inner(dc, dc, support_of(dc));
          const double omega = adc > 0 ? (1 - shrink) * dc.squaredNorm() / adc : mu;
          if (mu <= omega) break;
          mu /= kappa * (1 - shrink);
          c_new = hard_threshold(c + mu * g, K);
        }
      }
    } else {
      c_new = hard_threshold(c + mu * g, K);
    }
    supp = support_of(c_new);
    const Vector r_new = y - p.apply(c_new, supp);
    const double rel_new = p.rel(r_new);
    check_divergence(rel_new, best, opt, adaptive ? "NIHT" : "IHT");
    c = c_new;
    r = r_new;
    T = supp;
    ++out.iterations;
    if (opt.observer) {
      GreedyTrace tr;
      tr.iteration = out.iterations;
      tr.c = &c;
      tr.support = &T;
      tr.step = mu;
      tr.residual = rel_new;
      opt.observer(tr);
    }
    out.residual_history.push_back(rel_new);
    best = std::min(best, rel_new);
    if (rel_new < opt.tol) {
      out.converged = true;
      out.stop_reason = "tolerance";
      break;
    }
    if (monitor.push(rel_new)) {
      out.stop_reason = "stagnation";
      break;
    }
  }
  out.c = c;
  out.support = support_of(c);
  return out;
}

}  // namespace

GreedyResult iht(const Matrix& A, const Vector& y, const SparsityPattern& K,
                 const GreedyOptions& opt) {
  return iht_family(A, y, K, opt, false);
}

GreedyResult niht(const Matrix& A, const Vector& y, const SparsityPattern& K,
                  const GreedyOptions& opt) {
  return iht_family(A, y, K, opt, true);
}

GreedyResult cgiht(const Matrix& A, const Vector& y, const SparsityPattern& K,
                   const GreedyOptions& opt) {
  K.validate(A.cols());
  Problem p(A, y);
  GreedyResult out;
  if (trivial(p, out)) return out;
  p.enable_gram();
  const int max_iter = default_max(GreedyAlgorithm::CGIHT, opt);

  Vector c = Vector::Zero(A.cols());
  Vector d_prev = Vector::Zero(A.cols());
  Vector r = y;
  IndexList T_prev, supp;
  IndexList T = support_of(hard_threshold(p.gradient(y), K));
  double best = 1.0;
  StagnationMonitor monitor(opt.stagnation, opt.stagnation_window);
  monitor.push(1.0);
  out.residual_history.push_back(1.0);
  out.stop_reason = "max_iter";
  for (int n = 0; n < max_iter; ++n) {
    const Vector g = p.gradient_at(c, supp, r);
    double chi = 0;
    if (n > 0 && T == T_prev) {
      const double den = p.inner(d_prev, d_prev, T);
      if (den > 0) chi = -p.inner(g, d_prev, T) / den;
    }
    const Vector d = g + chi * d_prev;
    const double den = p.inner(d, d, T);
    if (!(den > 0)) {
      out.stop_reason = "zero_step";
      break;
    }
    const double alpha = restricted_sq(g, T) / den;
    const Vector c_new = hard_threshold(c + alpha * d, K);
    supp = support_of(c_new);
    const Vector r_new = y - p.apply(c_new, supp);
    const double rel_new = p.rel(r_new);
    check_divergence(rel_new, best, opt, "CGIHT");
    T_prev = T;
    T = supp;
    d_prev = d;
    c = c_new;
    r = r_new;
    ++out.iterations;
    if (opt.observer) {
      GreedyTrace tr;
      tr.iteration = out.iterations;
      tr.c = &c;
      tr.direction = &d_prev;
      tr.support = &T;
      tr.restriction = &T_prev;
      tr.step = alpha;
      tr.weight = chi;
      tr.residual = rel_new;
      opt.observer(tr);
    }
    out.residual_history.push_back(rel_new);
    best = std::min(best, rel_new);
    if (rel_new < opt.tol) {
      out.converged = true;
      out.stop_reason = "tolerance";
      break;
    }
    if (monitor.push(rel_new)) {
      out.stop_reason = "stagnation";
      break;
    }
  }
  out.c = c;
  out.support = support_of(c);
  return out;
}

GreedyResult subspace_pursuit(const Matrix& A, const Vector& y, const SparsityPattern& K,
                              const GreedyOptions& opt) {
  K.validate(A.cols());
  Problem p(A, y);
  GreedyResult out;
  if (trivial(p, out)) return out;
  const int max_iter = default_max(GreedyAlgorithm::SP, opt);
  out.residual_history.push_back(1.0);
  bool deficient = false;

  // The initial projection counts as the first iteration.
  IndexList T = top_k_indices(p.gradient(y), K);
  Vector c = restricted_least_squares(A, y, T, &deficient);
  out.rank_deficient_solves += deficient;
  Vector r = y - p.apply(c, T);
  double rel = p.rel(r);
  out.iterations = 1;
  out.residual_history.push_back(rel);
  if (opt.observer) {
    GreedyTrace tr;
    tr.iteration = 1;
    tr.c = &c;
    tr.support = &T;
    tr.residual = rel;
    opt.observer(tr);
  }
  out.stop_reason = "max_iter";
  if (rel < opt.tol) {
    out.converged = true;
    out.stop_reason = "tolerance";
  }
  while (!out.converged && out.iterations < max_iter) {
    const IndexList cand = set_union(T, top_k_indices(p.gradient(r), K));
    const Vector c_hat = restricted_least_squares(A, y, cand, &deficient);
    out.rank_deficient_solves += deficient;
    IndexList T_new = support_of(hard_threshold(c_hat, K));
    const Vector c_new = restricted_least_squares(A, y, T_new, &deficient);
    out.rank_deficient_solves += deficient;
    const Vector r_new = y - p.apply(c_new, T_new);
    const double rel_new = p.rel(r_new);
    if (!(rel_new < rel)) {
      out.stop_reason = "no_decrease";
      break;
    }
    T = std::move(T_new);
    c = c_new;
    r = r_new;
    rel = rel_new;
    ++out.iterations;
    out.residual_history.push_back(rel);
    if (opt.observer) {
      GreedyTrace tr;
      tr.iteration = out.iterations;
      tr.c = &c;
      tr.support = &T;
      tr.residual = rel;
      opt.observer(tr);
    }
    if (rel < opt.tol) {
      out.converged = true;
      out.stop_reason = "tolerance";
    }
  }
  out.c = c;
  out.support = support_of(c);
  return out;
}

GreedyResult cgstp(const Matrix& A, const Vector& y, const SparsityPattern& K,
                   const GreedyOptions& opt) {
  K.validate(A.cols());
  Problem p(A, y);
  GreedyResult out;
  if (trivial(p, out)) return out;
  const int max_iter = default_max(GreedyAlgorithm::CGSTP, opt);
  bool deficient = false;

  Vector c = Vector::Zero(A.cols());
  Vector d_prev = Vector::Zero(A.cols());
  Vector r = y;
  IndexList T_prev;
  IndexList T = support_of(hard_threshold(p.gradient(y), K));
  double rel = 1.0;
  out.residual_history.push_back(rel);
  out.stop_reason = "max_iter";
  for (int n = 0; n < max_iter; ++n) {
    const Vector g = p.gradient(r);
    // After a least-squares solve g vanishes on T, so the weight and step are
    // measured on T plus the K strongest gradient entries.
    const IndexList Tg = set_union(T, top_k_indices(g, K));
    double chi = 0;
    if (n > 0 && T == T_prev) {
      const Vector Ad = p.apply(d_prev, Tg);
      const double den = Ad.squaredNorm();
      if (den > 0) chi = -p.apply(g, Tg).dot(Ad) / den;
    }
    const Vector d = g + chi * d_prev;
    const double den = p.apply(d, Tg).squaredNorm();
    if (!(den > 0)) {
      out.stop_reason = "zero_step";
      break;
    }
    const double mu = restricted_sq(g, Tg) / den;
    const IndexList cand = set_union(support_of(hard_threshold(c + mu * d, K)), T);
    const Vector c_hat = restricted_least_squares(A, y, cand, &deficient);
    out.rank_deficient_solves += deficient;
    IndexList T_new = support_of(hard_threshold(c_hat, K));
    const Vector c_new = restricted_least_squares(A, y, T_new, &deficient);
    out.rank_deficient_solves += deficient;
    const Vector r_new = y - p.apply(c_new, T_new);
    const double rel_new = p.rel(r_new);
    if (!(rel_new < rel)) {
      out.stop_reason = "no_decrease";
      break;
    }
    T_prev = T;
    T = std::move(T_new);
    d_prev = d;
    c = c_new;
    r = r_new;
    rel = rel_new;
    ++out.iterations;
    out.residual_history.push_back(rel);
    if (opt.observer) {
      GreedyTrace tr;
      tr.iteration = out.iterations;
      tr.c = &c;
      tr.direction = &d_prev;
      tr.support = &T;
      tr.restriction = &Tg;
      tr.step = mu;
      tr.weight = chi;
      tr.residual = rel;
      opt.observer(tr);
    }
    if (rel < opt.tol) {
      out.converged = true;
      out.stop_reason = "tolerance";
      break;
    }
  }
  out.c = c;
  out.support = support_of(c);
  return out;
}

GreedyResult run_greedy(GreedyAlgorithm a, const Matrix& A, const Vector& y,
                        const SparsityPattern& K, const GreedyOptions& opt) {
  switch (a) {
    case GreedyAlgorithm::IHT:
      return iht(A, y, K, opt);
    case GreedyAlgorithm::NIHT:
      return niht(A, y, K, opt);
    case GreedyAlgorithm::CGIHT:
      return cgiht(A, y, K, opt);
    case GreedyAlgorithm::SP:
      return subspace_pursuit(A, y, K, opt);
    case GreedyAlgorithm::CGSTP:
      return cgstp(A, y, K, opt);
  }
  throw ConfigError("unknown greedy algorithm");
}

}  // namespace radsym
