#include "fwnet/checkpoint.hpp"

#include <json.hpp>

#include <cstring>
#include <fstream>

namespace fwnet {

using nlohmann::json;

namespace {

constexpr char kMagic[4] = {'F', 'W', 'N', 'C'};
constexpr uint32_t kVersion = 1;

json config_to_json(const SegNetConfig& c) {
  return json{{"input_size", c.input_size},
              {"in_channels", c.in_channels},
              {"encoder_channels", c.encoder_channels}};
}

json config_to_json(const FlowNetConfig& c) {
  return json{{"input_size", c.input_size},
              {"in_channels", c.in_channels},
              {"channels", c.channels},
              {"kernels", c.kernels}};
}

SegNetConfig segnet_config_from_json(const json& j) {
  SegNetConfig c;
  c.input_size = j.at("input_size").get<int>();
  c.in_channels = j.at("in_channels").get<int>();
  c.encoder_channels = j.at("encoder_channels").get<std::vector<int>>();
  return c;
}

FlowNetConfig flownet_config_from_json(const json& j) {
  FlowNetConfig c;
  c.input_size = j.at("input_size").get<int>();
  c.in_channels = j.at("in_channels").get<int>();
  c.channels = j.at("channels").get<std::vector<int>>();
  c.kernels = j.at("kernels").get<std::vector<int>>();
  return c;
}

}  // namespace

void save_checkpoint(const std::filesystem::path& path, const FwNet& model, uint64_t iteration) {
  auto& mutable_model = const_cast<FwNet&>(model);
  auto params = mutable_model.params();

  json tensors = json::array();
  uint64_t offset = 0;
  for (auto* p : params) {
    for (const char* kind : {"", ".momentum"}) {
      const auto& t = kind[0] ? p->momentum : p->value;
      tensors.push_back(json{{"name", p->name + kind},
                             {"shape", t.shape()},
                             {"offset", offset}});
      offset += t.numel() * sizeof(float);
    }
  }

  json header{{"format", "fwnet-checkpoint"},
              {"version", kVersion},
              {"iteration", iteration},
              {"segnet", config_to_json(model.segnet.config())},
              {"flownet", config_to_json(model.flownet.config())},
              {"tensors", tensors}};
  const std::string header_str = header.dump();

  std::ofstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("save_checkpoint: cannot open " + path.string());
  f.write(kMagic, 4);
  f.write(reinterpret_cast<const char*>(&kVersion), 4);
  const uint64_t hlen = header_str.size();
  f.write(reinterpret_cast<const char*>(&hlen), 8);
  f.write(header_str.data(), static_cast<std::streamsize>(hlen));
  for (auto* p : params) {
    f.write(reinterpret_cast<const char*>(p->value.data()),
            static_cast<std::streamsize>(p->value.numel() * sizeof(float)));
    f.write(reinterpret_cast<const char*>(p->momentum.data()),
            static_cast<std::streamsize>(p->momentum.numel() * sizeof(float)));
  }
  if (!f) throw std::runtime_error("save_checkpoint: write failed for " + path.string());
}

LoadedCheckpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("load_checkpoint: cannot open " + path.string());
  char magic[4];
  uint32_t version = 0;
  uint64_t hlen = 0;
  f.read(magic, 4);
  f.read(reinterpret_cast<char*>(&version), 4);
  f.read(reinterpret_cast<char*>(&hlen), 8);
  if (!f || std::memcmp(magic, kMagic, 4) != 0)
    throw std::runtime_error("load_checkpoint: not a checkpoint file: " + path.string());
  if (version != kVersion)
    throw std::runtime_error("load_checkpoint: unsupported version " + std::to_string(version));
  std::string header_str(hlen, '\0');
  f.read(header_str.data(), static_cast<std::streamsize>(hlen));
  if (!f) throw std::runtime_error("load_checkpoint: truncated header in " + path.string());

  json header = json::parse(header_str);
  LoadedCheckpoint out;
  out.iteration = header.at("iteration").get<uint64_t>();
  const auto seg_cfg = segnet_config_from_json(header.at("segnet"));
  const auto flow_cfg = flownet_config_from_json(header.at("flownet"));
  out.model = fwnet_init<float>(0, seg_cfg, flow_cfg);

  const std::streampos blob_start = f.tellg();
  auto params = out.model.params();
  const auto& tensors = header.at("tensors");

  for (auto* p : params) {
    for (const char* kind : {"", ".momentum"}) {
      const std::string name = p->name + kind;
      auto& dst = kind[0] ? p->momentum : p->value;
      const json* entry = nullptr;
      for (const auto& t : tensors)
        if (t.at("name").get<std::string>() == name) {
          entry = &t;
          break;
        }
      if (!entry) {
        if (kind[0]) continue;  // momentum buffers are optional
        throw std::runtime_error("load_checkpoint: missing tensor '" + name + "'");
      }
      const auto shape = entry->at("shape").get<std::vector<int>>();
      require(shape == dst.shape(), "load_checkpoint: shape mismatch for '" + name +
                                        "': checkpoint " + TensorT<float>(shape).shape_str() +
                                        " vs model " + dst.shape_str());
      f.seekg(blob_start + static_cast<std::streamoff>(entry->at("offset").get<uint64_t>()));
      f.read(reinterpret_cast<char*>(dst.data()),
             static_cast<std::streamsize>(dst.numel() * sizeof(float)));
      if (!f) throw std::runtime_error("load_checkpoint: truncated data in " + path.string());
    }
  }
  return out;
}

}  // namespace fwnet
