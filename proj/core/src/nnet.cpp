#include "gbpl/nnet.hpp"

#include <array>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>

#include "gbpl/error.hpp"
#include "json_io.hpp"

namespace gbpl::nnet {
namespace {

using RowMajorMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using ConstWeights = Eigen::Map<const RowMajorMatrix>;
using MutWeights = Eigen::Map<RowMajorMatrix>;

struct LayerSlice {
  Eigen::Index in = 0;
  Eigen::Index out = 0;
  Eigen::Index weight_offset = 0;
  Eigen::Index bias_offset = 0;
};

std::vector<LayerSlice> layer_slices(const MlpArchitecture& arch) {
  const auto widths = arch.layer_widths();
  std::vector<LayerSlice> slices;
  Eigen::Index offset = 0;
  for (std::size_t l = 0; l + 1 < widths.size(); ++l) {
    LayerSlice s;
    s.in = widths[l];
    s.out = widths[l + 1];
    s.weight_offset = offset;
    s.bias_offset = offset + s.in * s.out;
    offset = s.bias_offset + s.out;
    slices.push_back(s);
  }
  return slices;
}

void check_params(const MlpArchitecture& arch, const ParamVector& params) {
  if (params.dim() != arch.param_count()) {
    throw DimensionMismatch("parameter vector has " + std::to_string(params.dim()) +
                            " entries, architecture needs " +
                            std::to_string(arch.param_count()));
  }
}

void apply_head(Head head, Matrix& z) {
  switch (head) {
    case Head::TanhScalar: {
      const double edge = std::nextafter(1.0, 0.0);
      z = z.array().tanh().cwiseMax(-edge).cwiseMin(edge).matrix();
      break;
    }
    case Head::SoftmaxVector:
      for (Eigen::Index i = 0; i < z.rows(); ++i) {
        const double m = z.row(i).maxCoeff();
        z.row(i) = (z.row(i).array() - m).exp().matrix();
        z.row(i) /= z.row(i).sum();
      }
      break;
    case Head::Identity:
      break;
  }
}

}  // namespace

std::string_view to_string(Head head) {
  switch (head) {
    case Head::TanhScalar:
      return "tanh_scalar";
    case Head::SoftmaxVector:
      return "softmax_vector";
    case Head::Identity:
      return "identity";
  }
  return "unknown";
}

Head head_from_string(std::string_view name) {
  if (name == "tanh_scalar") return Head::TanhScalar;
  if (name == "softmax_vector") return Head::SoftmaxVector;
  if (name == "identity") return Head::Identity;
  throw InvalidArgument("unknown head '" + std::string(name) + "'");
}

void MlpArchitecture::validate() const {
  if (input_dim <= 0 || output_dim <= 0) {
    throw InvalidArgument("input_dim and output_dim must be positive");
  }
  for (int h : hidden_dims) {
    if (h <= 0) throw InvalidArgument("hidden widths must be positive");
  }
  if (head == Head::TanhScalar && output_dim != 1) {
    throw InvalidArgument("tanh_scalar head requires output_dim = 1");
  }
  if (head == Head::SoftmaxVector && output_dim < 2) {
    throw InvalidArgument("softmax_vector head requires output_dim >= 2");
  }
}

std::vector<int> MlpArchitecture::layer_widths() const {
  std::vector<int> w;
  w.reserve(hidden_dims.size() + 2);
  w.push_back(input_dim);
  w.insert(w.end(), hidden_dims.begin(), hidden_dims.end());
  w.push_back(output_dim);
  return w;
}

std::size_t MlpArchitecture::param_count() const {
  const auto widths = layer_widths();
  std::size_t count = 0;
  for (std::size_t l = 0; l + 1 < widths.size(); ++l) {
    count += static_cast<std::size_t>(widths[l]) * widths[l + 1] + widths[l + 1];
  }
  return count;
}

ParamVector init_params(const MlpArchitecture& arch, SeededRng& rng) {
  arch.validate();
  ParamVector p;
  p.values = Vector::Zero(static_cast<Eigen::Index>(arch.param_count()));
  for (const auto& s : layer_slices(arch)) {
    const double scale = std::sqrt(6.0 / static_cast<double>(s.in + s.out));
    for (Eigen::Index k = 0; k < s.in * s.out; ++k) {
      p.values[s.weight_offset + k] = rng.uniform(-scale, scale);
    }
  }
  return p;
}

ForwardTrace forward_trace(const MlpArchitecture& arch, const ParamVector& params,
                           const Matrix& x) {
  arch.validate();
  check_params(arch, params);
  if (x.cols() != arch.input_dim) {
    throw DimensionMismatch("input has " + std::to_string(x.cols()) + " columns, expected " +
                            std::to_string(arch.input_dim));
  }
  const auto slices = layer_slices(arch);
  ForwardTrace trace;
  trace.activations.reserve(slices.size());
  trace.activations.push_back(x);
  for (std::size_t l = 0; l < slices.size(); ++l) {
    const auto& s = slices[l];
    ConstWeights w(params.values.data() + s.weight_offset, s.in, s.out);
    const auto b = params.values.segment(s.bias_offset, s.out).transpose();
    Matrix z = trace.activations.back() * w;
    z.rowwise() += b;
    if (l + 1 < slices.size()) {
      trace.activations.push_back(z.cwiseMax(0.0));
    } else {
      apply_head(arch.head, z);
      trace.output = std::move(z);
    }
  }
  return trace;
}

Matrix forward(const MlpArchitecture& arch, const ParamVector& params, const Matrix& x) {
  return forward_trace(arch, params, x).output;
}

ParamVector backward(const MlpArchitecture& arch, const ParamVector& params,
                     const ForwardTrace& trace, const Matrix& grad_output) {
  check_params(arch, params);
  const Matrix& out = trace.output;
  if (grad_output.rows() != out.rows() || grad_output.cols() != out.cols()) {
    throw DimensionMismatch("output gradient shape does not match network output");
  }
  // Pull the upstream gradient back through the head.
  Matrix delta;
  switch (arch.head) {
    case Head::TanhScalar:
      delta = grad_output.array() * (1.0 - out.array().square());
      break;
    case Head::SoftmaxVector: {
      const Vector inner = (grad_output.array() * out.array()).rowwise().sum();
      delta = out.array() * (grad_output.colwise() - inner).array();
      break;
    }
    case Head::Identity:
      delta = grad_output;
      break;
  }

  const auto slices = layer_slices(arch);
  ParamVector grad;
  grad.values = Vector::Zero(params.values.size());
  for (std::size_t l = slices.size(); l-- > 0;) {
    const auto& s = slices[l];
    const Matrix& input = trace.activations[l];
    MutWeights gw(grad.values.data() + s.weight_offset, s.in, s.out);
    gw.noalias() = input.transpose() * delta;
    grad.values.segment(s.bias_offset, s.out) = delta.colwise().sum().transpose();
    if (l > 0) {
      ConstWeights w(params.values.data() + s.weight_offset, s.in, s.out);
      Matrix upstream = delta * w.transpose();
      // ReLU derivative: pass-through where the activation was positive.
      delta = (input.array() > 0.0).select(upstream, 0.0);
    }
  }
  return grad;
}

ParamVector backward(const MlpArchitecture& arch, const ParamVector& params, const Matrix& x,
                     const Matrix& grad_output) {
  return backward(arch, params, forward_trace(arch, params, x), grad_output);
}

void write_param_blob(const std::filesystem::path& path, const ParamVector& params) {
  std::ofstream bin(path, std::ios::binary);
  if (!bin) throw IoError("cannot open " + path.string() + " for writing");
  for (Eigen::Index i = 0; i < params.values.size(); ++i) {
    const auto bits = std::bit_cast<std::uint64_t>(params.values[i]);
    std::array<char, 8> bytes{};
    for (int b = 0; b < 8; ++b) bytes[b] = static_cast<char>((bits >> (8 * b)) & 0xffU);
    bin.write(bytes.data(), bytes.size());
  }
  if (!bin) throw IoError("failed writing " + path.string());
}

ParamVector read_param_blob(const std::filesystem::path& path, std::size_t dim) {
  std::ifstream bin(path, std::ios::binary);
  if (!bin) throw IoError("cannot open " + path.string());
  ParamVector p;
  p.values.resize(static_cast<Eigen::Index>(dim));
  for (Eigen::Index i = 0; i < p.values.size(); ++i) {
    std::array<unsigned char, 8> bytes{};
    bin.read(reinterpret_cast<char*>(bytes.data()), bytes.size());
    if (!bin) throw IoError(path.string() + " is shorter than the architecture requires");
    std::uint64_t bits = 0;
    for (int b = 0; b < 8; ++b) bits |= static_cast<std::uint64_t>(bytes[b]) << (8 * b);
    p.values[i] = std::bit_cast<double>(bits);
  }
  if (bin.peek() != std::char_traits<char>::eof()) {
    throw IoError(path.string() + " is longer than the architecture requires");
  }
  return p;
}

void save_params(const std::filesystem::path& stem, const MlpArchitecture& arch,
                 const ParamVector& params) {
  check_params(arch, params);
  auto bin_path = stem;
  bin_path += ".bin";
  auto json_path = stem;
  json_path += ".json";
  write_param_blob(bin_path, params);

  auto meta = detail::architecture_to_json(arch);
  meta["dim"] = params.dim();
  meta["encoding"] = "float64-le";
  detail::write_json_file(json_path, meta);
}

LoadedModel load_params(const std::filesystem::path& stem) {
  auto bin_path = stem;
  bin_path += ".bin";
  auto json_path = stem;
  json_path += ".json";

  const auto meta = detail::read_json_file(json_path);
  LoadedModel model;
  model.arch = detail::architecture_from_json(meta);
  model.params = read_param_blob(bin_path, model.arch.param_count());
  return model;
}

}  // namespace gbpl::nnet
