#include "gbpl/policy.hpp"

#include <string>

#include "gbpl/data.hpp"
#include "gbpl/error.hpp"
#include "json_io.hpp"

namespace gbpl {

DecisionRule rule_from_string(std::string_view name) {
  if (name == "deterministic") return DecisionRule::Deterministic;
  if (name == "randomized") return DecisionRule::Randomized;
  throw InvalidArgument("unknown decision rule '" + std::string(name) + "'");
}

std::string_view to_string(DecisionRule rule) {
  return rule == DecisionRule::Deterministic ? "deterministic" : "randomized";
}

Matrix randomized_from_output(nnet::Head head, const Matrix& output) {
  if (head == nnet::Head::TanhScalar) {
    if (output.cols() != 1) throw DimensionMismatch("tanh score must be one column");
    Matrix d(output.rows(), 2);
    d.col(kBinaryTreatColumn) = ((output.col(0).array() + 1.0) / 2.0).cwiseMax(0.0).cwiseMin(1.0);
    d.col(kBinaryControlColumn) = (1.0 - d.col(kBinaryTreatColumn).array()).matrix();
    return d;
  }
  if (head == nnet::Head::SoftmaxVector) return output;
  throw InvalidArgument("an identity head does not define a randomized policy");
}

Matrix argmax_one_hot(const Matrix& scores) {
  Matrix d = Matrix::Zero(scores.rows(), scores.cols());
  for (Eigen::Index i = 0; i < scores.rows(); ++i) {
    Eigen::Index best = 0;
    for (Eigen::Index a = 1; a < scores.cols(); ++a) {
      if (scores(i, a) > scores(i, best)) best = a;
    }
    d(i, best) = 1.0;
  }
  return d;
}

Matrix deterministic_from_output(nnet::Head head, const Matrix& output) {
  if (head == nnet::Head::TanhScalar) {
    if (output.cols() != 1) throw DimensionMismatch("tanh score must be one column");
    Matrix d = Matrix::Zero(output.rows(), 2);
    for (Eigen::Index i = 0; i < output.rows(); ++i) {
      d(i, output(i, 0) >= 0.0 ? kBinaryTreatColumn : kBinaryControlColumn) = 1.0;
    }
    return d;
  }
  return argmax_one_hot(output);
}

Matrix decisions_from_output(nnet::Head head, const Matrix& output, DecisionRule rule) {
  return rule == DecisionRule::Deterministic ? deterministic_from_output(head, output)
                                             : randomized_from_output(head, output);
}

std::string_view to_string(ScoreKind kind) {
  switch (kind) {
    case ScoreKind::TanhScore:
      return "tanh_score";
    case ScoreKind::Softmax:
      return "softmax";
    case ScoreKind::Threshold:
      return "threshold";
    case ScoreKind::OutcomeArgmax:
      return "outcome_argmax";
  }
  return "unknown";
}

ScoreKind score_kind_from_string(std::string_view name) {
  for (auto k : {ScoreKind::TanhScore, ScoreKind::Softmax, ScoreKind::Threshold,
                 ScoreKind::OutcomeArgmax}) {
    if (name == to_string(k)) return k;
  }
  throw InvalidArgument("unknown score kind '" + std::string(name) + "'");
}

Matrix FittedPolicy::scores(const Matrix& x) const {
  if (nets.empty()) throw InvalidArgument("policy has no networks");
  if (nets.size() == 1) return nnet::forward(nets.front().arch, nets.front().params, x);
  std::vector<Matrix> parts;
  Eigen::Index cols = 0;
  for (const auto& net : nets) {
    parts.push_back(nnet::forward(net.arch, net.params, x));
    cols += parts.back().cols();
  }
  Matrix out(x.rows(), cols);
  Eigen::Index c = 0;
  for (const auto& p : parts) {
    out.middleCols(c, p.cols()) = p;
    c += p.cols();
  }
  return out;
}

Matrix FittedPolicy::decide(const Matrix& x, DecisionRule rule) const {
  const Matrix s = scores(x);
  Matrix d;
  switch (score) {
    case ScoreKind::TanhScore:
      d = decisions_from_output(nnet::Head::TanhScalar, s, rule);
      break;
    case ScoreKind::Softmax:
      d = decisions_from_output(nnet::Head::SoftmaxVector, s, rule);
      break;
    case ScoreKind::Threshold:
      d = deterministic_from_output(nnet::Head::TanhScalar, s);
      break;
    case ScoreKind::OutcomeArgmax:
      d = argmax_one_hot(s);
      break;
  }
  if (d.cols() != K) throw DimensionMismatch("policy output does not match K");
  return d;
}

void FittedPolicy::save(const std::filesystem::path& dir) const {
  std::filesystem::create_directories(dir);
  nlohmann::json meta;
  meta["method"] = method;
  meta["score"] = std::string(to_string(score));
  meta["K"] = K;
  meta["nets"] = nlohmann::json::array();
  for (std::size_t j = 0; j < nets.size(); ++j) {
    const std::string blob = "net_" + std::to_string(j) + ".bin";
    nnet::write_param_blob(dir / blob, nets[j].params);
    meta["nets"].push_back({{"architecture", detail::architecture_to_json(nets[j].arch)},
                            {"params", blob},
                            {"dim", nets[j].arch.param_count()}});
  }
  detail::write_json_file(dir / "policy.json", meta);
}

FittedPolicy FittedPolicy::load(const std::filesystem::path& dir) {
  const auto meta = detail::read_json_file(dir / "policy.json");
  FittedPolicy out;
  try {
    out.method = meta.at("method").get<std::string>();
    out.score = score_kind_from_string(meta.at("score").get<std::string>());
    out.K = meta.at("K").get<int>();
    for (const auto& n : meta.at("nets")) {
      PolicyNet net;
      net.arch = detail::architecture_from_json(n.at("architecture"));
      net.params = nnet::read_param_blob(dir / n.at("params").get<std::string>(),
                                         net.arch.param_count());
      out.nets.push_back(std::move(net));
    }
  } catch (const nlohmann::json::exception& e) {
    throw IoError("malformed policy.json: " + std::string(e.what()));
  }
  return out;
}

}  // namespace gbpl
