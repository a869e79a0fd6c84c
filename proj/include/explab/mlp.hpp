#pragma once

#include <Eigen/Core>
#include <cstdint>
#include <iosfwd>
#include <span>
#include <string>

#include "explab/rng.hpp"

namespace explab {

struct MlpShape {
  int input = 1;
  int hidden1 = 512;
  int hidden2 = 512;

  bool operator==(const MlpShape&) const = default;
  /// Total number of scalar parameters.
  std::int64_t parameter_count() const;
};

/// Fully connected input -> hidden1 -> hidden2 -> 1 network with ReLU
/// activations. All parameters live in one flat vector laid out as
/// [W1 | b1 | W2 | b2 | W3 | b3], matrices column-major, so optimizers and
/// snapshots treat the network as a single array.
template <class Scalar>
class BasicMlp {
 public:
  using Matrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
  using Vector = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;
  using RowVector = Eigen::Matrix<Scalar, 1, Eigen::Dynamic>;
  using MatrixMap = Eigen::Map<Matrix>;
  using ConstMatrixMap = Eigen::Map<const Matrix>;
  using VectorMap = Eigen::Map<Vector>;
  using ConstVectorMap = Eigen::Map<const Vector>;

  /// All-zero parameters.
  explicit BasicMlp(MlpShape shape);

  /// He-uniform hidden layers, zero biases, output layer uniform in
  /// [-output_scale, output_scale].
  static BasicMlp initialized(MlpShape shape, Rng& rng, double output_scale = 3e-3);

  const MlpShape& shape() const { return shape_; }
  Vector& params() { return params_; }
  const Vector& params() const { return params_; }

  MatrixMap weight(int layer);
  ConstMatrixMap weight(int layer) const;
  VectorMap bias(int layer);
  ConstVectorMap bias(int layer) const;

  /// Single-example prediction. Throws std::invalid_argument on width mismatch.
  Scalar forward(std::span<const Scalar> x) const;

  /// Column-per-example batch prediction; inputs is input x batch.
  RowVector forward(const Matrix& inputs) const;

  /// Mean squared error over the batch and its gradient with respect to
  /// every parameter (same layout as params()).
  Scalar loss_and_gradient(const Matrix& inputs, std::span<const Scalar> targets,
                           Vector& gradient) const;

  bool all_finite() const { return params_.allFinite(); }

  /// Versioned text snapshot (see README for the format).
  void save(std::ostream& out) const;
  static BasicMlp load(std::istream& in);

 private:
  struct Offsets {
    std::int64_t w[3];
    std::int64_t b[3];
  };
  int rows(int layer) const;
  int cols(int layer) const;
  void check_input(std::int64_t rows) const;

  MlpShape shape_;
  Offsets off_{};
  Vector params_;
};

using Mlp = BasicMlp<float>;
using MlpD = BasicMlp<double>;

/// Adam moments for one network.
template <class Scalar>
struct AdamState {
  using Vector = typename BasicMlp<Scalar>::Vector;

  explicit AdamState(std::int64_t size = 0) : m(Vector::Zero(size)), v(Vector::Zero(size)) {}

  Vector m;
  Vector v;
  std::int64_t step = 0;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

/// One bias-corrected Adam update in place.
template <class Scalar>
void adam_step(BasicMlp<Scalar>& net, AdamState<Scalar>& state,
               const typename BasicMlp<Scalar>::Vector& gradient, double lr);

}  // namespace explab
