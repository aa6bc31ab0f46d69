#pragma once

#include <string_view>
#include <vector>

#include "gbpl/data.hpp"
#include "gbpl/policy.hpp"
#include "gbpl/posterior.hpp"

namespace gbpl::baselines {

enum class BaselineKind { DiffReg, PluginReg, PluginRegK, WeightedLogistic, DirectWelfare };

std::string_view to_string(BaselineKind kind);
BaselineKind baseline_from_string(std::string_view name);

/// DiffReg and WeightedLogistic need K = 2.
bool supports(BaselineKind kind, int K);

struct BaselineConfig {
  std::vector<int> hidden_dims{128, 128};
  posterior::TrainConfig train;
  /// Gaussian prior variance used by map_train; large means effectively none.
  double tau2 = 1e6;
};

/// Full-feedback fit with early stopping on `val`.
FittedPolicy fit_baseline(BaselineKind kind, const FullFeedbackDataset& train,
                          const FullFeedbackDataset& val, const BaselineConfig& config);

/// Logged-feedback fit. PluginReg and PluginRegK regress observed outcomes;
/// the other kinds use the pseudo-outcome tables (n x K) in place of Y.
FittedPolicy fit_baseline_logged(BaselineKind kind, const LoggedDataset& train,
                                 const Matrix& pseudo_train, const LoggedDataset& val,
                                 const Matrix& pseudo_val, const BaselineConfig& config);

}  // namespace gbpl::baselines
