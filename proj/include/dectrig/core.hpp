#pragma once

#include <Eigen/Dense>

#include <concepts>
#include <cstddef>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace dectrig {

/// Upper bound on state, input and node counts. Vectors live on the stack.
inline constexpr int kMaxDim = 16;

using Vector = Eigen::Matrix<double, Eigen::Dynamic, 1, Eigen::ColMajor, kMaxDim, 1>;
using Matrix = Eigen::MatrixXd;

// Error hierarchy. Every failure raised by the library derives from Error.

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A coordinate left the model's domain (e.g. a negative tank level under the strict policy).
class DomainError : public Error {
 public:
  DomainError(int coordinate, double value)
      : Error("state coordinate x" + std::to_string(coordinate + 1) + " = " + std::to_string(value) +
              " is outside the model domain"),
        coordinate_(coordinate),
        value_(value) {}

  int coordinate() const noexcept { return coordinate_; }
  double value() const noexcept { return value_; }

 private:
  int coordinate_;
  double value_;
};

class PreconditionError : public Error {
 public:
  using Error::Error;
};

/// Non-finite values produced during evaluation.
class NumericError : public Error {
 public:
  using Error::Error;
};

/// A requested feature needs a model capability that is missing.
class CapabilityError : public Error {
 public:
  using Error::Error;
};

/// Simulation blew up. Carries the last time at which the state was finite.
class DivergenceError : public Error {
 public:
  DivergenceError(const std::string& what, double last_good_time)
      : Error(what), last_good_time_(last_good_time) {}
  double last_good_time() const noexcept { return last_good_time_; }

 private:
  double last_good_time_;
};

/// Validation failure listing every violated invariant.
class ConfigError : public Error {
 public:
  explicit ConfigError(std::vector<std::string> violations)
      : Error(join(violations)), violations_(std::move(violations)) {}

  const std::vector<std::string>& violations() const noexcept { return violations_; }

 private:
  static std::string join(const std::vector<std::string>& v) {
    std::string out;
    for (const auto& s : v) {
      if (!out.empty()) out += "; ";
      out += s;
    }
    return out;
  }
  std::vector<std::string> violations_;
};

// Plant capabilities.

/// Anything that evaluates xdot = f(x, u) and reports its dimensions.
template <class M>
concept PlantModel = requires(const M& m, const Vector& x, const Vector& u) {
  { m.state_dim() } -> std::convertible_to<int>;
  { m.input_dim() } -> std::convertible_to<int>;
  { m.derivative(x, u) } -> std::convertible_to<Vector>;
};

/// A plant that can also evaluate the directional derivative d_x f(x, u)[v].
template <class M>
concept DirectionalDerivativeModel =
    PlantModel<M> && requires(const M& m, const Vector& x, const Vector& u, const Vector& v) {
      { m.directional_derivative(x, u, v) } -> std::convertible_to<Vector>;
    };

inline bool all_finite(const Vector& v) { return v.allFinite(); }

inline std::vector<double> to_std(const Vector& v) { return {v.data(), v.data() + v.size()}; }

inline Vector from_std(const std::vector<double>& v) {
  return Eigen::Map<const Eigen::VectorXd>(v.data(), static_cast<Eigen::Index>(v.size()));
}

inline Vector make_vector(std::initializer_list<double> values) {
  Vector v(static_cast<Eigen::Index>(values.size()));
  Eigen::Index i = 0;
  for (double value : values) v(i++) = value;
  return v;
}

}  // namespace dectrig
