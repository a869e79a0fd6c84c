#include "explab/mlp.hpp"

#include <charconv>
#include <cmath>
#include <istream>
#include <ostream>
#include <sstream>
#include <stdexcept>
#include <string_view>
#include <type_traits>

namespace explab {

namespace {

constexpr std::string_view kMagic = "explab-mlp";
constexpr int kFormatVersion = 1;

template <class Scalar>
constexpr std::string_view scalar_name() {
  return std::is_same_v<Scalar, float> ? "f32" : "f64";
}

}  // namespace

std::int64_t MlpShape::parameter_count() const {
  const std::int64_t h1 = hidden1, h2 = hidden2;
  return h1 * input + h1 + h2 * h1 + h2 + h2 + 1;
}

template <class Scalar>
BasicMlp<Scalar>::BasicMlp(MlpShape shape) : shape_(shape) {
  if (shape.input < 1 || shape.hidden1 < 1 || shape.hidden2 < 1) {
    throw std::invalid_argument("mlp widths must be positive");
  }
  std::int64_t at = 0;
  for (int l = 0; l < 3; ++l) {
    off_.w[l] = at;
    at += std::int64_t{rows(l)} * cols(l);
    off_.b[l] = at;
    at += rows(l);
  }
  params_ = Vector::Zero(at);
}

template <class Scalar>
int BasicMlp<Scalar>::rows(int layer) const {
  return layer == 0 ? shape_.hidden1 : layer == 1 ? shape_.hidden2 : 1;
}

template <class Scalar>
int BasicMlp<Scalar>::cols(int layer) const {
  return layer == 0 ? shape_.input : layer == 1 ? shape_.hidden1 : shape_.hidden2;
}

template <class Scalar>
BasicMlp<Scalar> BasicMlp<Scalar>::initialized(MlpShape shape, Rng& rng, double output_scale) {
  BasicMlp net(shape);
  for (int l = 0; l < 3; ++l) {
    const double limit = l < 2 ? std::sqrt(6.0 / net.cols(l)) : output_scale;
    auto w = net.weight(l);
    for (Eigen::Index j = 0; j < w.cols(); ++j) {
      for (Eigen::Index i = 0; i < w.rows(); ++i) w(i, j) = Scalar(rng.uniform(-limit, limit));
    }
  }
  return net;
}

template <class Scalar>
typename BasicMlp<Scalar>::MatrixMap BasicMlp<Scalar>::weight(int layer) {
  return MatrixMap(params_.data() + off_.w[layer], rows(layer), cols(layer));
}

template <class Scalar>
typename BasicMlp<Scalar>::ConstMatrixMap BasicMlp<Scalar>::weight(int layer) const {
  return ConstMatrixMap(params_.data() + off_.w[layer], rows(layer), cols(layer));
}

template <class Scalar>
typename BasicMlp<Scalar>::VectorMap BasicMlp<Scalar>::bias(int layer) {
  return VectorMap(params_.data() + off_.b[layer], rows(layer));
}

template <class Scalar>
typename BasicMlp<Scalar>::ConstVectorMap BasicMlp<Scalar>::bias(int layer) const {
  return ConstVectorMap(params_.data() + off_.b[layer], rows(layer));
}

template <class Scalar>
void BasicMlp<Scalar>::check_input(std::int64_t rows) const {
  if (rows != shape_.input) {
    throw std::invalid_argument("mlp input width " + std::to_string(rows) + " != " +
                                std::to_string(shape_.input));
  }
}

template <class Scalar>
Scalar BasicMlp<Scalar>::forward(std::span<const Scalar> x) const {
  check_input(std::int64_t(x.size()));
  const Matrix in = ConstVectorMap(x.data(), Eigen::Index(x.size()));
  return forward(in)(0);
}

template <class Scalar>
typename BasicMlp<Scalar>::RowVector BasicMlp<Scalar>::forward(const Matrix& inputs) const {
  check_input(inputs.rows());
  Matrix h1 = weight(0) * inputs;
  h1.colwise() += bias(0);
  h1 = h1.cwiseMax(Scalar(0));
  Matrix h2 = weight(1) * h1;
  h2.colwise() += bias(1);
  h2 = h2.cwiseMax(Scalar(0));
  RowVector out = weight(2) * h2;
  out.array() += bias(2)(0);
  return out;
}

template <class Scalar>
Scalar BasicMlp<Scalar>::loss_and_gradient(const Matrix& inputs, std::span<const Scalar> targets,
                                           Vector& gradient) const {
  check_input(inputs.rows());
  const Eigen::Index batch = inputs.cols();
  if (batch == 0 || Eigen::Index(targets.size()) != batch) {
    throw std::invalid_argument("mlp gradient needs a non-empty batch aligned with targets");
  }
  Matrix h1 = weight(0) * inputs;
  h1.colwise() += bias(0);
  h1 = h1.cwiseMax(Scalar(0));
  Matrix h2 = weight(1) * h1;
  h2.colwise() += bias(1);
  h2 = h2.cwiseMax(Scalar(0));
  RowVector out = weight(2) * h2;
  out.array() += bias(2)(0);

  const Eigen::Map<const RowVector> y(targets.data(), batch);
  const RowVector err = out - y;
  const Scalar loss = err.squaredNorm() / Scalar(batch);
  const RowVector d_out = err * (Scalar(2) / Scalar(batch));

  gradient.resize(params_.size());
  MatrixMap(gradient.data() + off_.w[2], 1, shape_.hidden2).noalias() = d_out * h2.transpose();
  gradient(off_.b[2]) = d_out.sum();

  Matrix d_h2 = weight(2).transpose() * d_out;
  d_h2 = (h2.array() > Scalar(0)).select(d_h2, Scalar(0));
  MatrixMap(gradient.data() + off_.w[1], shape_.hidden2, shape_.hidden1).noalias() =
      d_h2 * h1.transpose();
  VectorMap(gradient.data() + off_.b[1], shape_.hidden2) = d_h2.rowwise().sum();

  Matrix d_h1 = weight(1).transpose() * d_h2;
  d_h1 = (h1.array() > Scalar(0)).select(d_h1, Scalar(0));
  MatrixMap(gradient.data() + off_.w[0], shape_.hidden1, shape_.input).noalias() =
      d_h1 * inputs.transpose();
  VectorMap(gradient.data() + off_.b[0], shape_.hidden1) = d_h1.rowwise().sum();
  return loss;
}

template <class Scalar>
void BasicMlp<Scalar>::save(std::ostream& out) const {
  out << kMagic << ' ' << kFormatVersion << '\n'
      << "scalar " << scalar_name<Scalar>() << '\n'
      << "shape " << shape_.input << ' ' << shape_.hidden1 << ' ' << shape_.hidden2 << '\n'
      << "params " << params_.size() << '\n';
  char buf[64];
  for (Eigen::Index i = 0; i < params_.size(); ++i) {
    auto res = std::to_chars(buf, buf + sizeof buf, params_(i));
    out.write(buf, res.ptr - buf);
    out.put('\n');
  }
}

template <class Scalar>
BasicMlp<Scalar> BasicMlp<Scalar>::load(std::istream& in) {
  std::string magic, key, scalar;
  int version = 0;
  if (!(in >> magic >> version) || magic != kMagic) throw std::runtime_error("not an mlp snapshot");
  if (version != kFormatVersion) throw std::runtime_error("unsupported mlp snapshot version");
  if (!(in >> key >> scalar) || key != "scalar" || scalar != scalar_name<Scalar>()) {
    throw std::runtime_error("mlp snapshot scalar type mismatch");
  }
  MlpShape shape;
  if (!(in >> key >> shape.input >> shape.hidden1 >> shape.hidden2) || key != "shape") {
    throw std::runtime_error("malformed mlp snapshot shape");
  }
  std::int64_t count = 0;
  if (!(in >> key >> count) || key != "params") throw std::runtime_error("malformed mlp snapshot");
  BasicMlp net(shape);
  if (count != net.params_.size()) throw std::runtime_error("mlp snapshot parameter count mismatch");
  std::string token;
  for (std::int64_t i = 0; i < count; ++i) {
    if (!(in >> token)) throw std::runtime_error("truncated mlp snapshot");
    Scalar v{};
    auto res = std::from_chars(token.data(), token.data() + token.size(), v);
    if (res.ec != std::errc{} || res.ptr != token.data() + token.size()) {
      throw std::runtime_error("bad number in mlp snapshot: " + token);
    }
    net.params_(i) = v;
  }
  return net;
}

template <class Scalar>
void adam_step(BasicMlp<Scalar>& net, AdamState<Scalar>& state,
               const typename BasicMlp<Scalar>::Vector& gradient, double lr) {
  auto& p = net.params();
  if (gradient.size() != p.size()) throw std::invalid_argument("adam gradient shape mismatch");
  if (state.m.size() != p.size()) {
    state.m = BasicMlp<Scalar>::Vector::Zero(p.size());
    state.v = BasicMlp<Scalar>::Vector::Zero(p.size());
  }
  ++state.step;
  const Scalar b1 = Scalar(state.beta1), b2 = Scalar(state.beta2);
  state.m = b1 * state.m + (Scalar(1) - b1) * gradient;
  state.v = b2 * state.v + (Scalar(1) - b2) * gradient.cwiseProduct(gradient);
  const double c1 = 1.0 - std::pow(state.beta1, double(state.step));
  const double c2 = 1.0 - std::pow(state.beta2, double(state.step));
  const Scalar step_size = Scalar(lr / c1);
  const Scalar inv_sqrt_c2 = Scalar(1.0 / std::sqrt(c2));
  const Scalar eps = Scalar(state.epsilon);
  p.array() -= step_size * state.m.array() / (state.v.array().sqrt() * inv_sqrt_c2 + eps);
}

template class BasicMlp<float>;
template class BasicMlp<double>;
template void adam_step<float>(Mlp&, AdamState<float>&, const Mlp::Vector&, double);
template void adam_step<double>(MlpD&, AdamState<double>&, const MlpD::Vector&, double);

}  // namespace explab
