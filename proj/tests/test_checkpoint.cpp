#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <filesystem>
#include <fstream>

#include "fwnet/checkpoint.hpp"
#include "fwnet/rng.hpp"

using namespace fwnet;
namespace fs = std::filesystem;

namespace {

FwNet small_model(uint64_t seed) {
  SegNetConfig seg;
  seg.input_size = 32;
  seg.in_channels = 1;
  seg.encoder_channels = {4, 8};
  FlowNetConfig flow;
  flow.input_size = 32;
  flow.in_channels = 2;
  flow.channels = {4, 8};
  flow.kernels = {3, 3};
  return fwnet_init<float>(seed, seg, flow);
}

}  // namespace

TEST_CASE("checkpoint roundtrip restores every tensor bitwise") {
  auto model = small_model(11);
  // make momentum non-trivial so the roundtrip covers it
  Rng rng(4);
  for (auto* p : model.params())
    for (size_t i = 0; i < p->momentum.numel(); ++i)
      p->momentum[i] = rng.uniform_f(-0.1f, 0.1f);

  const auto path = fs::temp_directory_path() / "fwnet_ckpt_test.fwnc";
  save_checkpoint(path, model, 1234);
  auto loaded = load_checkpoint(path);
  CHECK(loaded.iteration == 1234);
  CHECK(loaded.model.segnet.config() == model.segnet.config());
  CHECK(loaded.model.flownet.config() == model.flownet.config());

  auto pa = model.params();
  auto pb = loaded.model.params();
  REQUIRE(pa.size() == pb.size());
  for (size_t i = 0; i < pa.size(); ++i) {
    CHECK(pa[i]->name == pb[i]->name);
    REQUIRE(pa[i]->value.shape() == pb[i]->value.shape());
    for (size_t j = 0; j < pa[i]->value.numel(); ++j) {
      CHECK(pa[i]->value[j] == pb[i]->value[j]);
      CHECK(pa[i]->momentum[j] == pb[i]->momentum[j]);
    }
  }

  // loaded model predicts identically
  Tensor frame({1, 32, 32});
  Rng fr(7);
  for (size_t i = 0; i < frame.numel(); ++i) frame[i] = fr.uniform_f(0.f, 1.f);
  auto a = model.segnet.forward(frame);
  auto b = loaded.model.segnet.forward(frame);
  for (size_t i = 0; i < a.probabilities.numel(); ++i)
    CHECK(a.probabilities[i] == b.probabilities[i]);

  fs::remove(path);
}

TEST_CASE("corrupt checkpoints are rejected") {
  const auto path = fs::temp_directory_path() / "fwnet_ckpt_bad.fwnc";
  {
    std::ofstream f(path, std::ios::binary);
    f << "garbage";
  }
  CHECK_THROWS(load_checkpoint(path));
  CHECK_THROWS(load_checkpoint(fs::temp_directory_path() / "fwnet_ckpt_missing.fwnc"));

  // truncated data blob
  auto model = small_model(1);
  save_checkpoint(path, model, 0);
  const auto full = fs::file_size(path);
  fs::resize_file(path, full - 64);
  CHECK_THROWS(load_checkpoint(path));
  fs::remove(path);
}
