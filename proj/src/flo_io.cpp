#include "fwnet/flo_io.hpp"

#include <cstdint>
#include <fstream>

namespace fwnet {

namespace {
constexpr float kFloMagic = 202021.25f;
constexpr int kFloMaxDim = 1 << 20;
}  // namespace

void write_flo(const std::filesystem::path& path, const FlowField& flow) {
  require(flow.data.rank() == 3 && flow.data.dim(2) == 2, "write_flo: flow must be (H,W,2)");
  std::ofstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("write_flo: cannot open " + path.string());
  const int32_t w = flow.width(), h = flow.height();
  f.write(reinterpret_cast<const char*>(&kFloMagic), 4);
  f.write(reinterpret_cast<const char*>(&w), 4);
  f.write(reinterpret_cast<const char*>(&h), 4);
  f.write(reinterpret_cast<const char*>(flow.data.data()),
          static_cast<std::streamsize>(flow.data.numel() * sizeof(float)));
  if (!f) throw std::runtime_error("write_flo: write failed for " + path.string());
}

FlowField read_flo(const std::filesystem::path& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("read_flo: cannot open " + path.string());
  float magic = 0;
  int32_t w = 0, h = 0;
  f.read(reinterpret_cast<char*>(&magic), 4);
  f.read(reinterpret_cast<char*>(&w), 4);
  f.read(reinterpret_cast<char*>(&h), 4);
  if (!f || magic != kFloMagic)
    throw std::runtime_error("read_flo: bad magic in " + path.string());
  if (w < 1 || h < 1 || w > kFloMaxDim || h > kFloMaxDim)
    throw std::runtime_error("read_flo: implausible dimensions in " + path.string());
  FlowField flow(h, w);
  f.read(reinterpret_cast<char*>(flow.data.data()),
         static_cast<std::streamsize>(flow.data.numel() * sizeof(float)));
  if (!f) throw std::runtime_error("read_flo: truncated file " + path.string());
  return flow;
}

}  // namespace fwnet
