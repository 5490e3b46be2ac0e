#include "trav/gp.hpp"

#include <algorithm>
#include <istream>
#include <numeric>
#include <ostream>
#include <random>

#include "trav/forest.hpp"
#include "trav/text_io.hpp"

namespace trav {

namespace {

constexpr double kLog2Pi = 1.8378770664093453;
constexpr double kJitterLadder[] = {0.0, 1e-10, 1e-9, 1e-8, 1e-7, 1e-6};

// Box on log-hyperparameters keeping the optimizer away from overflow.
constexpr double kLogLengthMin = -7.0, kLogLengthMax = 9.0;
constexpr double kLogSignalMin = -12.0, kLogSignalMax = 12.0;
constexpr double kLogNoiseMax = 12.0;
constexpr double kLogAlphaMin = -5.0, kLogAlphaMax = 9.0;

bool factorize(const Matrix& K, Eigen::LLT<Matrix>& llt, double& used_jitter) {
  for (double j : kJitterLadder) {
    used_jitter = j;
    if (j == 0.0) {
      llt.compute(K);
    } else {
      llt.compute(K + j * Matrix::Identity(K.rows(), K.cols()));
    }
    if (llt.info() == Eigen::Success) return true;
  }
  return false;
}

Matrix gram(const KernelParams& p, const Matrix& X) {
  Matrix K = kernel_matrix(p, X, X);
  K.diagonal().array() += p.noise_variance;
  return K;
}

}  // namespace

const char* to_string(KernelKind kind) { return kind == KernelKind::kSE ? "SE" : "RQ"; }

KernelKind kernel_kind_from_string(const std::string& s) {
  if (s == "SE" || s == "se") return KernelKind::kSE;
  if (s == "RQ" || s == "rq") return KernelKind::kRQ;
  throw ParameterError("unknown kernel kind: " + s);
}

void KernelParams::validate() const {
  if (!(signal_variance > 0.0)) throw ParameterError("signal variance must be positive");
  if (!(noise_variance > 0.0)) throw ParameterError("noise variance must be positive");
  if (kind == KernelKind::kRQ && !(rq_alpha > 0.0)) throw ParameterError("RQ alpha must be positive");
  if (length_scales.size() == 0 || !(length_scales.array() > 0.0).all()) {
    throw ParameterError("length scales must be positive");
  }
}

Matrix kernel_matrix(const KernelParams& p, const Matrix& A, const Matrix& B) {
  if (A.cols() != p.dim() || B.cols() != p.dim()) throw ParameterError("kernel input dimension mismatch");
  const Eigen::ArrayXd inv_l = p.length_scales.array().inverse();
  const Matrix As = A * inv_l.matrix().asDiagonal();
  const Matrix Bs = B * inv_l.matrix().asDiagonal();
  Matrix K(A.rows(), B.rows());
  for (Eigen::Index j = 0; j < B.rows(); ++j) {
    for (Eigen::Index i = 0; i < A.rows(); ++i) {
      K(i, j) = kernel_from_sq_distance(p, (As.row(i) - Bs.row(j)).squaredNorm());
    }
  }
  return K;
}

Vector pack_log_params(const KernelParams& p) {
  const int n = p.dim();
  Vector theta(n + (p.kind == KernelKind::kRQ ? 3 : 2));
  theta.head(n) = p.length_scales.array().log().matrix();
  theta[n] = std::log(p.signal_variance);
  theta[n + 1] = std::log(p.noise_variance);
  if (p.kind == KernelKind::kRQ) theta[n + 2] = std::log(p.rq_alpha);
  return theta;
}

KernelParams unpack_log_params(KernelKind kind, const Vector& theta) {
  const int extra = kind == KernelKind::kRQ ? 3 : 2;
  const int n = static_cast<int>(theta.size()) - extra;
  if (n < 1) throw ParameterError("hyperparameter vector too short");
  KernelParams p;
  p.kind = kind;
  p.length_scales = theta.head(n).array().exp().matrix();
  p.signal_variance = std::exp(theta[n]);
  p.noise_variance = std::exp(theta[n + 1]);
  if (kind == KernelKind::kRQ) p.rq_alpha = std::exp(theta[n + 2]);
  return p;
}

std::optional<double> log_marginal_likelihood(const Matrix& X, const Vector& y, const KernelParams& p,
                                              Vector* grad) {
  const Eigen::Index m = X.rows();
  const int n = p.dim();
  // Noise-free kernel matrix and, for the gradient, the pieces of dK.
  const Eigen::ArrayXd inv_l = p.length_scales.array().inverse();
  const Matrix Xs = X * inv_l.matrix().asDiagonal();
  Matrix R2(m, m);
  for (Eigen::Index j = 0; j < m; ++j) {
    for (Eigen::Index i = j; i < m; ++i) {
      const double r2 = (Xs.row(i) - Xs.row(j)).squaredNorm();
      R2(i, j) = r2;
      R2(j, i) = r2;
    }
  }
  Matrix Kf = R2.unaryExpr([&](double r2) { return kernel_from_sq_distance(p, r2); });
  Matrix K = Kf;
  K.diagonal().array() += p.noise_variance;
  Eigen::LLT<Matrix> llt(K);
  if (llt.info() != Eigen::Success) return std::nullopt;
  const Vector alpha = llt.solve(y);
  const double logdet = 2.0 * llt.matrixLLT().diagonal().array().log().sum();
  const double lml = -0.5 * y.dot(alpha) - 0.5 * logdet - 0.5 * static_cast<double>(m) * kLog2Pi;
  if (!std::isfinite(lml)) return std::nullopt;
  if (grad == nullptr) return lml;

  // dL/dtheta = 1/2 sum_ij W_ij dK_ij/dtheta with W = alpha alpha^T - K^-1.
  Matrix W = alpha * alpha.transpose() - llt.solve(Matrix::Identity(m, m));
  grad->resize(n + (p.kind == KernelKind::kRQ ? 3 : 2));

  // dK/dlog l_d = G o D_d with D_d = (x_id - x_jd)^2 / l_d^2.
  Matrix G;
  if (p.kind == KernelKind::kSE) {
    G = Kf;
  } else {
    G = R2.unaryExpr([&](double r2) {
      const double base = 1.0 + r2 / (2.0 * p.rq_alpha);
      return p.signal_variance * std::pow(base, -p.rq_alpha - 1.0);
    });
  }
  const Matrix A = W.cwiseProduct(G);
  const Vector rows = A.rowwise().sum();
  // sum_ij A_ij (z_i - z_j)^2 = 2 sum_i z_i^2 rowsum_i - 2 z^T A z for symmetric A.
  const Matrix AXs = A * Xs;
  for (int d = 0; d < n; ++d) {
    const auto z = Xs.col(d);
    const double s = 2.0 * z.array().square().matrix().dot(rows) - 2.0 * z.dot(AXs.col(d));
    (*grad)[d] = 0.5 * s;
  }
  (*grad)[n] = 0.5 * W.cwiseProduct(Kf).sum();
  (*grad)[n + 1] = 0.5 * p.noise_variance * W.trace();
  if (p.kind == KernelKind::kRQ) {
    const double a = p.rq_alpha;
    const Matrix dA = R2.unaryExpr([&](double r2) {
      const double base = 1.0 + r2 / (2.0 * a);
      const double k = p.signal_variance * std::pow(base, -a);
      return k * (r2 / (2.0 * base) - a * std::log(base));
    });
    (*grad)[n + 2] = 0.5 * W.cwiseProduct(dA).sum();
  }
  return lml;
}

GPModel::GPModel(Matrix X, Vector q, KernelParams kernel)
    : X_(std::move(X)), q_(std::move(q)), kernel_(std::move(kernel)) {
  kernel_.validate();
  if (X_.rows() < 1 || X_.rows() != q_.size()) throw ParameterError("GP needs matching inputs and targets");
  if (X_.cols() != kernel_.dim()) throw ParameterError("length scales do not match input dimension");
  if (!X_.allFinite() || !q_.allFinite()) throw ParameterError("GP training data must be finite");
  offset_ = q_.mean();
  if (!factorize(gram(kernel_, X_), llt_, jitter_)) {
    throw TrainingError("kernel matrix not positive definite after maximum jitter");
  }
  alpha_ = llt_.solve((q_.array() - offset_).matrix());
  inverse_ = llt_.solve(Matrix::Identity(size(), size()));
}


namespace {

struct Bounds {
  Vector lo, hi;
};

Bounds log_bounds(KernelKind kind, int n, double min_noise) {
  const int extra = kind == KernelKind::kRQ ? 3 : 2;
  Bounds b{Vector(n + extra), Vector(n + extra)};
  b.lo.head(n).setConstant(kLogLengthMin);
  b.hi.head(n).setConstant(kLogLengthMax);
  b.lo[n] = kLogSignalMin;
  b.hi[n] = kLogSignalMax;
  b.lo[n + 1] = std::log(min_noise);
  b.hi[n + 1] = kLogNoiseMax;
  if (kind == KernelKind::kRQ) {
    b.lo[n + 2] = kLogAlphaMin;
    b.hi[n + 2] = kLogAlphaMax;
  }
  return b;
}

Vector clamp(const Vector& theta, const Bounds& b) { return theta.cwiseMax(b.lo).cwiseMin(b.hi); }

struct Ascent {
  Vector theta;
  double lml = -std::numeric_limits<double>::infinity();
};

Ascent ascend(const Matrix& X, const Vector& y, KernelKind kind, Vector theta, const Bounds& bounds,
              const GpTrainParams& params) {
  Vector g;
  theta = clamp(theta, bounds);
  auto first = log_marginal_likelihood(X, y, unpack_log_params(kind, theta), &g);
  if (!first) return {};
  double lml = *first;
  double step = 1.0 / std::max(1.0, g.norm());
  for (int it = 0; it < params.max_iters; ++it) {
    bool accepted = false;
    Vector next;
    double next_lml = 0.0;
    for (double t = step; t > 1e-14; t *= 0.5) {
      next = clamp(theta + t * g, bounds);
      const double moved = g.dot(next - theta);
      if (!(moved > 0.0)) break;
      auto v = log_marginal_likelihood(X, y, unpack_log_params(kind, next));
      if (v && *v >= lml + 1e-4 * moved) {
        accepted = true;
        next_lml = *v;
        step = 2.0 * t;
        break;
      }
    }
    if (!accepted) break;
    const double change = next_lml - lml;
    theta = next;
    auto v = log_marginal_likelihood(X, y, unpack_log_params(kind, theta), &g);
    lml = v.value_or(next_lml);
    if (change < params.tolerance) break;
  }
  return {theta, lml};
}

}  // namespace

GPModel train_gp(const Matrix& X, const Vector& q, KernelKind kind, const GpTrainParams& params,
                 std::uint64_t seed) {
  if (X.rows() < 2 || X.rows() != q.size()) throw ParameterError("GP training needs at least two samples");
  if (!X.allFinite() || !q.allFinite()) throw ParameterError("GP training data must be fully observed");
  if (params.restarts < 1 || params.max_iters < 0 || params.max_points < 2) {
    throw ParameterError("invalid GP training parameters");
  }
  Matrix Xt = X;
  Vector qt = q;
  if (X.rows() > params.max_points) {
    std::vector<int> idx(X.rows());
    std::iota(idx.begin(), idx.end(), 0);
    std::mt19937_64 rng(derive_seed(seed, 0x5ab5));
    for (int i = 0; i < params.max_points; ++i) {
      std::uniform_int_distribution<int> pick(i, static_cast<int>(idx.size()) - 1);
      std::swap(idx[i], idx[pick(rng)]);
    }
    idx.resize(params.max_points);
    std::sort(idx.begin(), idx.end());
    Xt = X(idx, Eigen::all);
    qt = q(idx);
  }
  const int n = static_cast<int>(Xt.cols());
  const Vector y = (qt.array() - qt.mean()).matrix();
  const double var_y = y.squaredNorm() / static_cast<double>(y.size());
  const double scale_y = var_y > 0.0 ? var_y : 1.0;

  KernelParams init;
  init.kind = kind;
  init.length_scales.resize(n);
  const Vector mean_x = Xt.colwise().mean();
  for (int d = 0; d < n; ++d) {
    const double sd = std::sqrt((Xt.col(d).array() - mean_x[d]).square().mean());
    init.length_scales[d] = (sd > 0.0 ? sd : 1.0) * std::sqrt(static_cast<double>(n));
  }
  init.signal_variance = scale_y;
  init.noise_variance = std::max(0.1 * scale_y, params.min_noise_variance);
  init.rq_alpha = 1.0;
  const Vector theta0 = pack_log_params(init);
  const Bounds bounds = log_bounds(kind, n, params.min_noise_variance);

  Ascent best;
  for (int r = 0; r < params.restarts; ++r) {
    Vector start = theta0;
    if (r > 0) {
      std::mt19937_64 rng(derive_seed(seed, 0x7e57, static_cast<std::uint64_t>(r)));
      std::uniform_real_distribution<double> jitter(-1.0, 1.0);
      for (Eigen::Index i = 0; i < start.size(); ++i) start[i] += jitter(rng);
    }
    Ascent a = ascend(Xt, y, kind, start, bounds, params);
    if (a.theta.size() > 0 && a.lml > best.lml) best = std::move(a);
  }
  if (best.theta.size() == 0) throw TrainingError("no restart produced a positive definite kernel matrix");
  return GPModel(std::move(Xt), std::move(qt), unpack_log_params(kind, best.theta));
}

GaussPred predict(const GPModel& model, const Eigen::Ref<const Vector>& x) {
  if (x.size() != model.dim()) throw ParameterError("GP input dimension mismatch");
  const Matrix xr = x.transpose();
  const Vector ks = kernel_matrix(model.kernel(), model.inputs(), xr).col(0);
  const double mean = model.mean_offset() + ks.dot(model.weights());
  const Vector v = model.factor().matrixL().solve(ks);
  const double var = model.kernel().signal_variance - v.squaredNorm();
  return {mean, std::max(0.0, var)};
}

double predict_mean(const GPModel& model, const Eigen::Ref<const Vector>& x) {
  if (x.size() != model.dim()) throw ParameterError("GP input dimension mismatch");
  const KernelParams& p = model.kernel();
  const Matrix& X = model.inputs();
  const Vector& w = model.weights();
  double mean = model.mean_offset();
  for (Eigen::Index i = 0; i < X.rows(); ++i) {
    mean += w[i] * kernel_eval(p, X.row(i).transpose(), x);
  }
  return mean;
}

GaussPred predict_uncertain(const GPModel& model, const Vector& mu, const Matrix& cov) {
  const KernelParams& p = model.kernel();
  if (p.kind != KernelKind::kSE) throw ParameterError("uncertain-input prediction needs an SE kernel");
  const int n = model.dim();
  if (mu.size() != n || cov.rows() != n || cov.cols() != n) {
    throw ParameterError("input distribution dimension mismatch");
  }
  std::vector<int> active;
  for (int d = 0; d < n; ++d) {
    if ((cov.row(d).array() != 0.0).any() || (cov.col(d).array() != 0.0).any()) active.push_back(d);
  }
  if (active.empty()) return predict(model, mu);
  std::vector<int> inactive;
  for (int d = 0, a = 0; d < n; ++d) {
    if (a < static_cast<int>(active.size()) && active[a] == d) {
      ++a;
    } else {
      inactive.push_back(d);
    }
  }
  const int na = static_cast<int>(active.size());
  const Matrix& X = model.inputs();
  const Eigen::Index m = X.rows();
  const double sv = p.signal_variance;
  const Vector l = p.length_scales;
  const Vector la = l(active);
  const Matrix S = cov(active, active);

  // Offsets from the input mean, scaled per dimension.
  const Matrix D = X.rowwise() - mu.transpose();
  const Matrix Da = D(Eigen::all, active);
  Vector e(m);  // exp(-1/2 sum over inactive dims of (d / l)^2)
  if (inactive.empty()) {
    e.setOnes();
  } else {
    const Matrix Di = D(Eigen::all, inactive) * l(inactive).cwiseInverse().asDiagonal();
    e = (-0.5 * Di.rowwise().squaredNorm()).array().exp().matrix();
  }

  const Eigen::ArrayXd inv_la = la.cwiseInverse().array();
  const Matrix Id = Matrix::Identity(na, na);

  // First moment: q_i = sv |S L^-1 + I|^-1/2 exp(-1/2 d^T (S + L)^-1 d).
  const Matrix B1 = inv_la.matrix().asDiagonal() * S * inv_la.matrix().asDiagonal() + Id;
  Eigen::LLT<Matrix> llt_b1(B1);
  Eigen::LLT<Matrix> llt_s1(S + Matrix(la.array().square().matrix().asDiagonal()));
  if (llt_b1.info() != Eigen::Success || llt_s1.info() != Eigen::Success) {
    throw ParameterError("input covariance is not positive semidefinite");
  }
  const double c1 = sv / std::exp(llt_b1.matrixLLT().diagonal().array().log().sum());
  const Matrix Y1 = llt_s1.matrixL().solve(Da.transpose());
  const Vector qv =
      (c1 * e.array() * (-0.5 * Y1.colwise().squaredNorm().transpose()).array().exp()).matrix();
  const Vector& beta = model.weights();
  const double mq = beta.dot(qv);

  // Second moment: Q_ij = sv^2 |2 S L^-1 + I|^-1/2 e_i e_j
  //   exp(-1/4 |z_i - z_j|^2 - 1/8 |y_i + y_j|^2), z = x_a / l_a,
  //   y = chol(S + L/2)^-1 (x_a - mu_a).
  Eigen::LLT<Matrix> llt_b2(2.0 * inv_la.matrix().asDiagonal() * S * inv_la.matrix().asDiagonal() + Id);
  Eigen::LLT<Matrix> llt_s2(S + Matrix((0.5 * la.array().square()).matrix().asDiagonal()));
  if (llt_b2.info() != Eigen::Success || llt_s2.info() != Eigen::Success) {
    throw ParameterError("input covariance is not positive semidefinite");
  }
  const double c2 = sv * sv / std::exp(llt_b2.matrixLLT().diagonal().array().log().sum());
  const Matrix Z = Da * inv_la.matrix().asDiagonal();  // offsets cancel in differences
  const Matrix Y2 = llt_s2.matrixL().solve(Da.transpose());
  Matrix Q(m, m);
  for (Eigen::Index j = 0; j < m; ++j) {
    for (Eigen::Index i = j; i < m; ++i) {
      const double dz = (Z.row(i) - Z.row(j)).squaredNorm();
      const double sy = (Y2.col(i) + Y2.col(j)).squaredNorm();
      const double v = c2 * e[i] * e[j] * std::exp(-0.25 * dz - 0.125 * sy);
      Q(i, j) = v;
      Q(j, i) = v;
    }
  }
  const double var = sv - model.inverse().cwiseProduct(Q).sum() + beta.dot(Q * beta) - mq * mq;
  return {model.mean_offset() + mq, std::max(0.0, var)};
}

double predict_uncertain_mean(const GPModel& model, const Vector& mu, const Vector& variances) {
  const KernelParams& p = model.kernel();
  if (p.kind != KernelKind::kSE) throw ParameterError("uncertain-input prediction needs an SE kernel");
  if (mu.size() != model.dim() || variances.size() != model.dim()) {
    throw ParameterError("input distribution dimension mismatch");
  }
  const Eigen::ArrayXd l2 = p.length_scales.array().square();
  const Eigen::ArrayXd denom = l2 + variances.array();
  const double c = p.signal_variance / std::sqrt((denom / l2).prod());
  const Eigen::ArrayXd inv = denom.inverse();
  const Matrix& X = model.inputs();
  const Vector& beta = model.weights();
  double mean = 0.0;
  for (Eigen::Index i = 0; i < X.rows(); ++i) {
    const double r = ((X.row(i).transpose() - mu).array().square() * inv).sum();
    mean += beta[i] * std::exp(-0.5 * r);
  }
  return model.mean_offset() + c * mean;
}

Vector ard_values(const GPModel& model) { return model.kernel().length_scales; }

void write_gp(std::ostream& out, const GPModel& model) {
  const KernelParams& p = model.kernel();
  out << "trav-gp 1\n";
  out << "kernel " << to_string(p.kind) << "\n";
  out << "signal_variance ";
  io::put(out, p.signal_variance);
  out << "\nnoise_variance ";
  io::put(out, p.noise_variance);
  out << "\nrq_alpha ";
  io::put(out, p.rq_alpha);
  out << "\nlength_scales " << p.dim();
  for (double v : p.length_scales) {
    out << ' ';
    io::put(out, v);
  }
  out << "\ndata " << model.size() << ' ' << model.dim() << '\n';
  for (int i = 0; i < model.size(); ++i) {
    io::put(out, model.targets()[i]);
    for (int d = 0; d < model.dim(); ++d) {
      out << ' ';
      io::put(out, model.inputs()(i, d));
    }
    out << '\n';
  }
}

GPModel read_gp(std::istream& in) {
  io::expect_token(in, "trav-gp");
  if (io::read_int(in) != 1) throw DataError("unsupported GP format version");
  KernelParams p;
  std::string kind;
  io::expect_token(in, "kernel");
  in >> kind;
  p.kind = kernel_kind_from_string(kind);
  io::expect_token(in, "signal_variance");
  p.signal_variance = io::read_double(in);
  io::expect_token(in, "noise_variance");
  p.noise_variance = io::read_double(in);
  io::expect_token(in, "rq_alpha");
  p.rq_alpha = io::read_double(in);
  io::expect_token(in, "length_scales");
  const long long n = io::read_int(in);
  if (n < 1) throw DataError("GP file has no input dimensions");
  p.length_scales.resize(n);
  for (long long d = 0; d < n; ++d) p.length_scales[d] = io::read_double(in);
  io::expect_token(in, "data");
  const long long m = io::read_int(in);
  if (io::read_int(in) != n || m < 1) throw DataError("GP data block does not match the kernel");
  Matrix X(m, n);
  Vector q(m);
  for (long long i = 0; i < m; ++i) {
    q[i] = io::read_double(in);
    for (long long d = 0; d < n; ++d) X(i, d) = io::read_double(in);
  }
  return GPModel(std::move(X), std::move(q), std::move(p));
}

}  // namespace trav
