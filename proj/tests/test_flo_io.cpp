#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cstdio>
#include <filesystem>
#include <fstream>

#include "fwnet/flo_io.hpp"
#include "fwnet/rng.hpp"

using namespace fwnet;
namespace fs = std::filesystem;

namespace {
fs::path temp_file(const char* name) {
  auto p = fs::temp_directory_path() / name;
  fs::remove(p);
  return p;
}
}  // namespace

TEST_CASE("flo roundtrip preserves bytes") {
  Rng rng(1);
  FlowField flow(6, 9);
  for (size_t i = 0; i < flow.data.numel(); ++i) flow.data[i] = rng.uniform_f(-40.f, 40.f);
  auto path = temp_file("fwnet_roundtrip.flo");
  write_flo(path, flow);
  auto back = read_flo(path);
  REQUIRE(back.height() == 6);
  REQUIRE(back.width() == 9);
  for (size_t i = 0; i < flow.data.numel(); ++i) CHECK(back.data[i] == flow.data[i]);
  fs::remove(path);
}

TEST_CASE("flo header carries the PIEH magic") {
  auto path = temp_file("fwnet_magic.flo");
  write_flo(path, FlowField::constant(2, 3, 1.f, -1.f));
  std::ifstream f(path, std::ios::binary);
  char tag[4];
  f.read(tag, 4);
  CHECK(tag[0] == 'P');
  CHECK(tag[1] == 'I');
  CHECK(tag[2] == 'E');
  CHECK(tag[3] == 'H');
  int32_t w = 0, h = 0;
  f.read(reinterpret_cast<char*>(&w), 4);
  f.read(reinterpret_cast<char*>(&h), 4);
  CHECK(w == 3);
  CHECK(h == 2);
  fs::remove(path);
}

TEST_CASE("read_flo rejects corrupt input") {
  auto path = temp_file("fwnet_bad.flo");
  {
    std::ofstream f(path, std::ios::binary);
    f << "not a flow file";
  }
  CHECK_THROWS(read_flo(path));
  CHECK_THROWS(read_flo(fs::temp_directory_path() / "fwnet_missing.flo"));
  fs::remove(path);
}
