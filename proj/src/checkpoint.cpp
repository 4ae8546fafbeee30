#include "dmtl/checkpoint.hpp"

#include <fstream>
#include <map>

#include <json.hpp>

#include "dmtl/error.hpp"

namespace dmtl {

using nlohmann::json;

namespace {

json tensor_json(const std::string& name, std::vector<std::size_t> shape,
                 std::span<const double> data) {
  return json{{"name", name}, {"shape", std::move(shape)},
              {"data", std::vector<double>(data.begin(), data.end())}};
}

std::vector<Layer> read_stack(std::map<std::string, NamedTensor>& tensors,
                              const std::string& prefix, Activation act) {
  std::vector<Layer> layers;
  for (std::size_t i = 0;; ++i) {
    const std::string base = prefix + "." + std::to_string(i) + ".";
    auto w = tensors.find(base + "weight");
    auto b = tensors.find(base + "bias");
    if (w == tensors.end() || b == tensors.end()) break;
    if (w->second.shape.size() != 2 || b->second.shape.size() != 1 ||
        b->second.shape[0] != w->second.shape[0]) {
      fail(ErrorCode::kIo, "checkpoint: inconsistent shapes for " + base);
    }
    Layer layer;
    layer.spec = {w->second.shape[1], w->second.shape[0], act};
    layer.weight = Matrix(w->second.shape[0], w->second.shape[1], w->second.data);
    layer.bias = b->second.data;
    layers.push_back(std::move(layer));
  }
  return layers;
}

}  // namespace

void save_checkpoint(const Checkpoint& checkpoint, const std::filesystem::path& path) {
  json tensors = json::array();
  for (const NamedTensor& t : named_tensors(checkpoint.network)) {
    tensors.push_back(tensor_json(t.name, t.shape, t.data));
  }
  if (checkpoint.unit) {
    const WeightUnitParams& u = *checkpoint.unit;
    tensors.push_back(tensor_json("unit.psi", {u.psi.rows(), u.psi.cols()}, u.psi.data()));
    tensors.push_back(tensor_json("unit.bias", {u.bias.size()}, u.bias));
  }
  if (checkpoint.centers) {
    const Matrix& c = *checkpoint.centers;
    tensors.push_back(tensor_json("centers", {c.rows(), c.cols()}, c.data()));
  }
  const json doc{{"format", "dmtl-checkpoint"}, {"version", 1}, {"tensors", tensors}};
  std::ofstream out(path);
  if (!out) fail(ErrorCode::kIo, "cannot write " + path.string());
  out << doc.dump(1) << "\n";
  if (!out) fail(ErrorCode::kIo, "write failed for " + path.string());
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) fail(ErrorCode::kIo, "cannot read " + path.string());
  std::map<std::string, NamedTensor> tensors;
  try {
    const json doc = json::parse(in);
    if (doc.at("format") != "dmtl-checkpoint" || doc.at("version") != 1) {
      fail(ErrorCode::kIo, path.string() + ": not a version-1 dmtl checkpoint");
    }
    for (const json& t : doc.at("tensors")) {
      NamedTensor nt{t.at("name").get<std::string>(), t.at("shape").get<std::vector<std::size_t>>(),
                     t.at("data").get<std::vector<double>>()};
      std::size_t count = 1;
      for (std::size_t d : nt.shape) count *= d;
      if (count != nt.data.size()) fail(ErrorCode::kIo, "checkpoint: bad length for " + nt.name);
      tensors[nt.name] = std::move(nt);
    }
  } catch (const json::exception& e) {
    fail(ErrorCode::kIo, path.string() + ": " + e.what());
  }

  Checkpoint cp;
  cp.network.shared = read_stack(tensors, "shared", Activation::kRelu);
  cp.network.branch1 = read_stack(tensors, "branch1", Activation::kIdentity);
  cp.network.branch2 = read_stack(tensors, "branch2", Activation::kIdentity);
  if (cp.network.shared.empty()) fail(ErrorCode::kIo, "checkpoint: no trunk layers");
  if (auto psi = tensors.find("unit.psi"); psi != tensors.end()) {
    WeightUnitParams unit;
    unit.psi = Matrix(psi->second.shape.at(0), psi->second.shape.at(1), psi->second.data);
    unit.bias = tensors.at("unit.bias").data;
    cp.unit = std::move(unit);
  }
  if (auto c = tensors.find("centers"); c != tensors.end()) {
    cp.centers = Matrix(c->second.shape.at(0), c->second.shape.at(1), c->second.data);
  }
  return cp;
}

}  // namespace dmtl
