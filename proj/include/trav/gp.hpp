#ifndef TRAV_GP_HPP
#define TRAV_GP_HPP

#include <cmath>
#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>

#include "trav/types.hpp"

namespace trav {

enum class KernelKind { kSE, kRQ };

const char* to_string(KernelKind kind);
KernelKind kernel_kind_from_string(const std::string& s);

/// Kernel hyperparameters with one length scale per input dimension (ARD).
struct KernelParams {
  KernelKind kind = KernelKind::kSE;
  double signal_variance = 1.0;
  Vector length_scales;
  double rq_alpha = 1.0;         // RQ only
  double noise_variance = 1e-2;  // observation noise on q

  int dim() const { return static_cast<int>(length_scales.size()); }
  void validate() const;
};

/// Scaled squared distance sum_d ((a_d - b_d) / l_d)^2.
template <typename DerivedA, typename DerivedB>
typename DerivedA::Scalar scaled_sq_distance(const KernelParams& p, const Eigen::MatrixBase<DerivedA>& a,
                                             const Eigen::MatrixBase<DerivedB>& b) {
  using Scalar = typename DerivedA::Scalar;
  return ((a - b).array() / p.length_scales.template cast<Scalar>().array()).square().sum();
}

/// SE: sv exp(-r2 / 2); RQ: sv (1 + r2 / (2 alpha))^(-alpha).
template <typename Scalar>
Scalar kernel_from_sq_distance(const KernelParams& p, Scalar r2) {
  using std::exp;
  using std::pow;
  const Scalar sv(p.signal_variance);
  if (p.kind == KernelKind::kSE) return sv * exp(Scalar(-0.5) * r2);
  const Scalar alpha(p.rq_alpha);
  return sv * pow(Scalar(1) + r2 / (Scalar(2) * alpha), -alpha);
}

template <typename DerivedA, typename DerivedB>
typename DerivedA::Scalar kernel_eval(const KernelParams& p, const Eigen::MatrixBase<DerivedA>& a,
                                      const Eigen::MatrixBase<DerivedB>& b) {
  return kernel_from_sq_distance(p, scaled_sq_distance(p, a, b));
}

/// Cross-covariance between the rows of A and the rows of B.
Matrix kernel_matrix(const KernelParams& p, const Matrix& A, const Matrix& B);

struct GaussPred {
  double mean = 0.0;
  double variance = 0.0;
};

/// Log-space hyperparameter vector:
/// [log l_1..log l_n, log sv, log noise, (log alpha for RQ)].
Vector pack_log_params(const KernelParams& p);
KernelParams unpack_log_params(KernelKind kind, const Vector& theta);

/// Log marginal likelihood of y (already centered) under `p`; fills the
/// gradient with respect to pack_log_params(p) when `grad` is non-null.
/// Returns nullopt when the Gram matrix cannot be factorized.
std::optional<double> log_marginal_likelihood(const Matrix& X, const Vector& y, const KernelParams& p,
                                              Vector* grad = nullptr);

class TrainingError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// GP regression model with a constant mean equal to the training-target
/// average and a cached Cholesky factor of K + noise I (+ jitter).
class GPModel {
 public:
  GPModel(Matrix X, Vector q, KernelParams kernel);

  const Matrix& inputs() const { return X_; }
  const Vector& targets() const { return q_; }
  const KernelParams& kernel() const { return kernel_; }
  double mean_offset() const { return offset_; }
  double jitter() const { return jitter_; }
  int dim() const { return static_cast<int>(X_.cols()); }
  int size() const { return static_cast<int>(X_.rows()); }

  /// K^-1 (q - offset).
  const Vector& weights() const { return alpha_; }
  const Eigen::LLT<Matrix>& factor() const { return llt_; }
  /// (K + noise I)^-1.
  const Matrix& inverse() const { return inverse_; }

 private:
  Matrix X_;
  Vector q_;
  KernelParams kernel_;
  double offset_ = 0.0;
  double jitter_ = 0.0;
  Eigen::LLT<Matrix> llt_;
  Vector alpha_;
  Matrix inverse_;
};

struct GpTrainParams {
  int restarts = 5;
  int max_iters = 200;
  double tolerance = 1e-6;      // on the log-likelihood change per iteration
  int max_points = 150;         // seeded subsample above this size
  double min_noise_variance = 1e-6;
};

/// Maximizes the log marginal likelihood over log-hyperparameters by
/// gradient ascent with backtracking, from several seeded starts; keeps the
/// best start (ties to the lower restart index).
GPModel train_gp(const Matrix& X, const Vector& q, KernelKind kind, const GpTrainParams& params,
                 std::uint64_t seed);

/// Posterior of the latent function at a fully observed input.
GaussPred predict(const GPModel& model, const Eigen::Ref<const Vector>& x);
double predict_mean(const GPModel& model, const Eigen::Ref<const Vector>& x);

/// Exact mean and variance of the latent function when the input is
/// Gaussian, N(input_mean, input_cov). SE kernels only; throws
/// ParameterError otherwise.
GaussPred predict_uncertain(const GPModel& model, const Vector& input_mean, const Matrix& input_cov);

/// Mean of predict_uncertain() for a diagonal input covariance, in O(m n).
double predict_uncertain_mean(const GPModel& model, const Vector& input_mean, const Vector& input_variances);

/// ARD length scales, one per input dimension; smaller means more relevant.
Vector ard_values(const GPModel& model);

/// Versioned text format with hyperparameters and training data in
/// round-trip decimal; the factorization is rebuilt on load.
void write_gp(std::ostream& out, const GPModel& model);
GPModel read_gp(std::istream& in);

}  // namespace trav

#endif  // TRAV_GP_HPP
