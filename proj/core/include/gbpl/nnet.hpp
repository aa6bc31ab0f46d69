#pragma once

#include <cstddef>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Dense>

#include "gbpl/rng.hpp"

namespace gbpl {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

namespace nnet {

enum class Head {
  TanhScalar,     // f(x) = tanh(g(x)), one output in (-1, 1)
  SoftmaxVector,  // K >= 2 outputs on the open simplex
  Identity,       // raw affine output
};

std::string_view to_string(Head head);
Head head_from_string(std::string_view name);

/// Fully connected ReLU network with a configurable output head.
struct MlpArchitecture {
  int input_dim = 1;
  std::vector<int> hidden_dims{128, 128};
  int output_dim = 1;
  Head head = Head::TanhScalar;

  /// Throws InvalidArgument when dimensions or the head/output pairing are
  /// inconsistent.
  void validate() const;

  std::size_t param_count() const;

  /// Layer widths from input to output, e.g. {d, 128, 128, 1}.
  std::vector<int> layer_widths() const;

  friend bool operator==(const MlpArchitecture&, const MlpArchitecture&) = default;
};

/// Flat parameter vector. Layout per layer l: weights as an
/// (in_l x out_l) row-major block, followed by the out_l biases.
struct ParamVector {
  Vector values;

  std::size_t dim() const { return static_cast<std::size_t>(values.size()); }
  bool all_finite() const { return values.allFinite(); }
};

/// Glorot-uniform weights, zero biases.
ParamVector init_params(const MlpArchitecture& arch, SeededRng& rng);

/// Intermediate activations kept for the backward pass.
struct ForwardTrace {
  std::vector<Matrix> activations;  // input followed by each post-ReLU hidden layer
  Matrix output;                    // head output, n x output_dim
};

Matrix forward(const MlpArchitecture& arch, const ParamVector& params, const Matrix& x);

ForwardTrace forward_trace(const MlpArchitecture& arch, const ParamVector& params,
                           const Matrix& x);

/// Gradient of a scalar total loss L with respect to the parameters, given
/// dL/d(head output) for every row.
ParamVector backward(const MlpArchitecture& arch, const ParamVector& params,
                     const ForwardTrace& trace, const Matrix& grad_output);

ParamVector backward(const MlpArchitecture& arch, const ParamVector& params, const Matrix& x,
                     const Matrix& grad_output);

/// Raw little-endian float64 blob of the parameter values.
void write_param_blob(const std::filesystem::path& path, const ParamVector& params);
/// Reads exactly `dim` values; throws IoError on a short or long file.
ParamVector read_param_blob(const std::filesystem::path& path, std::size_t dim);

/// Writes `<stem>.bin` (little-endian float64 values) and `<stem>.json`
/// (architecture sidecar).
void save_params(const std::filesystem::path& stem, const MlpArchitecture& arch,
                 const ParamVector& params);

struct LoadedModel {
  MlpArchitecture arch;
  ParamVector params;
};

LoadedModel load_params(const std::filesystem::path& stem);

}  // namespace nnet
}  // namespace gbpl
