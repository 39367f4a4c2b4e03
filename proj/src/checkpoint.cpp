#include "fusereader/checkpoint.hpp"

#include <fstream>

#include "fusereader/serialize.hpp"
#include "fusereader/util.hpp"

namespace fusereader {

using nlohmann::json;

void save_checkpoint(const std::filesystem::path& dir, const ParamMap& params,
                     const json& manifest_extra) {
  std::filesystem::create_directories(dir);
  json manifest = manifest_extra;
  json names = json::array();
  for (const auto& [name, tensor] : params) {
    save_tensor(dir / (name + ".ftsr"), tensor);
    names.push_back(name);
  }
  manifest["parameters"] = names;
  std::ofstream out(dir / "manifest.json");
  if (!out) throw DataError("cannot write checkpoint manifest in " + dir.string());
  out << manifest.dump(2) << "\n";
}

json load_checkpoint_manifest(const std::filesystem::path& dir) {
  std::ifstream in(dir / "manifest.json");
  if (!in) throw DataError("missing checkpoint manifest in " + dir.string());
  try {
    return json::parse(in);
  } catch (const json::parse_error& e) {
    throw DataError("malformed checkpoint manifest: " + std::string(e.what()));
  }
}

void load_checkpoint_into(const std::filesystem::path& dir, ParamMap& params) {
  for (auto& [name, tensor] : params) {
    std::filesystem::path file = dir / (name + ".ftsr");
    Tensor loaded = load_tensor(file);
    if (loaded.shape() != tensor.shape()) {
      throw DataError("checkpoint tensor " + name + " has shape " + shape_str(loaded.shape()) +
                      ", expected " + shape_str(tensor.shape()));
    }
    std::copy(loaded.data().begin(), loaded.data().end(), tensor.mutable_data().begin());
  }
}

std::string params_hash(const ParamMap& params) {
  std::string all;
  for (const auto& [name, tensor] : params) {
    all += name;
    auto bytes = tensor_bytes(tensor);
    all.append(bytes.begin(), bytes.end());
  }
  return sha256_hex(all);
}

json encoder_config_to_json(const EncoderConfig& c) {
  return json{{"num_layers", c.num_layers}, {"num_heads", c.num_heads},
              {"d_model", c.d_model},       {"d_ff", c.d_ff},
              {"max_len", c.max_len},       {"vocab_size", c.vocab_size},
              {"dropout_p", c.dropout_p}};
}

EncoderConfig encoder_config_from_json(const json& j) {
  EncoderConfig c;
  c.num_layers = j.at("num_layers").get<std::size_t>();
  c.num_heads = j.at("num_heads").get<std::size_t>();
  c.d_model = j.at("d_model").get<std::size_t>();
  c.d_ff = j.at("d_ff").get<std::size_t>();
  c.max_len = j.at("max_len").get<std::size_t>();
  c.vocab_size = j.at("vocab_size").get<std::size_t>();
  c.dropout_p = j.at("dropout_p").get<double>();
  c.validate();
  return c;
}

}  // namespace fusereader
