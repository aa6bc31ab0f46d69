#include "json_io.hpp"

#include <fstream>
#include <string>

#include "gbpl/error.hpp"

namespace gbpl::detail {

nlohmann::json architecture_to_json(const nnet::MlpArchitecture& arch) {
  nlohmann::json meta;
  meta["input_dim"] = arch.input_dim;
  meta["hidden_dims"] = arch.hidden_dims;
  meta["output_dim"] = arch.output_dim;
  meta["head"] = std::string(nnet::to_string(arch.head));
  return meta;
}

nnet::MlpArchitecture architecture_from_json(const nlohmann::json& meta) {
  nnet::MlpArchitecture arch;
  try {
    arch.input_dim = meta.at("input_dim").get<int>();
    arch.hidden_dims = meta.at("hidden_dims").get<std::vector<int>>();
    arch.output_dim = meta.at("output_dim").get<int>();
    arch.head = nnet::head_from_string(meta.at("head").get<std::string>());
  } catch (const nlohmann::json::exception& e) {
    throw IoError(std::string("bad architecture description: ") + e.what());
  }
  arch.validate();
  return arch;
}

nlohmann::json read_json_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path.string());
  try {
    return nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw IoError("malformed JSON in " + path.string() + ": " + e.what());
  }
}

void write_json_file(const std::filesystem::path& path, const nlohmann::json& value) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot open " + path.string() + " for writing");
  out << value.dump(2) << '\n';
  if (!out) throw IoError("failed writing " + path.string());
}

}  // namespace gbpl::detail
