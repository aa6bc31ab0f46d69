#pragma once

#include <filesystem>

#include <json.hpp>

#include "gbpl/nnet.hpp"

namespace gbpl::detail {

nlohmann::json architecture_to_json(const nnet::MlpArchitecture& arch);
nnet::MlpArchitecture architecture_from_json(const nlohmann::json& meta);

nlohmann::json read_json_file(const std::filesystem::path& path);
/// Pretty-printed with a trailing newline.
void write_json_file(const std::filesystem::path& path, const nlohmann::json& value);

}  // namespace gbpl::detail
