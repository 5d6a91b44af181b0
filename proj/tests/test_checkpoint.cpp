#include <cstdio>
#include <sstream>
#include <string>

#include "doctest.h"
#include "treesrl/checkpoint.hpp"
#include "treesrl/common.hpp"
#include "treesrl/nn.hpp"

using namespace treesrl;

namespace {

Checkpoint sample_checkpoint() {
  Checkpoint ckpt;
  ckpt.config_text = "seed = 42\nword_dim = 8\n";
  ckpt.sections.emplace_back("vocab", "#labels 3\n<NONE>\nA0\nA1\n");
  ckpt.sections.emplace_back("rules", "#language=xx\n#syntax=gold\n#k=1\n0\t1\t9\n");
  Rng rng(1);
  Tensor& w = ckpt.params.add("emb.word", {4, 3});
  init_uniform(w, rng, 0.1);
  Tensor& b = ckpt.params.add("scorer.b", {5});
  init_uniform(b, rng, 0.1);
  ckpt.params.add("emb.pre", {2, 3}).v = {1, 2, 3, 4, 5, 6};
  ckpt.params.frozen.insert("emb.pre");
  return ckpt;
}

Checkpoint reload(const std::string& bytes) {
  std::istringstream in(bytes);
  return load_checkpoint(in);
}

}  // namespace

TEST_CASE("checkpoints round-trip everything, byte for byte") {
  Checkpoint ckpt = sample_checkpoint();
  std::string bytes = checkpoint_bytes(ckpt);
  Checkpoint back = reload(bytes);

  CHECK(back.config_text == ckpt.config_text);
  REQUIRE(back.sections.size() == 2);
  CHECK(back.sections[0].first == "vocab");
  CHECK(back.sections[0].second == ckpt.sections[0].second);
  REQUIRE(back.section("rules") != nullptr);
  CHECK(*back.section("rules") == ckpt.sections[1].second);
  CHECK(back.section("missing") == nullptr);

  REQUIRE(back.params.t.size() == 3);
  for (const auto& [name, tensor] : ckpt.params.t) {
    CHECK(back.params.at(name).shape == tensor.shape);
    CHECK(back.params.at(name).v == tensor.v);  // f64 payload is exact
  }
  CHECK(back.params.frozen == ckpt.params.frozen);

  // Serializing the reload reproduces identical bytes.
  CHECK(checkpoint_bytes(back) == bytes);
}

TEST_CASE("an empty checkpoint still round-trips") {
  Checkpoint empty;
  Checkpoint back = reload(checkpoint_bytes(empty));
  CHECK(back.config_text.empty());
  CHECK(back.sections.empty());
  CHECK(back.params.t.empty());
}

TEST_CASE("truncation anywhere in the stream is detected") {
  std::string bytes = checkpoint_bytes(sample_checkpoint());
  // Chop at a spread of depths: inside magic, header, sections, tensor data.
  for (std::size_t cut : {std::size_t(3), std::size_t(9), std::size_t(14), std::size_t(40),
                          bytes.size() / 2, bytes.size() - 1}) {
    CAPTURE(cut);
    CHECK_THROWS_AS(reload(bytes.substr(0, cut)), data_error);
  }
}

TEST_CASE("foreign and future files are refused") {
  CHECK_THROWS_WITH_AS(reload("definitely not a checkpoint"), doctest::Contains("bad magic"),
                       data_error);

  // Flip the version field (bytes 8..11, little-endian u32).
  std::string bytes = checkpoint_bytes(sample_checkpoint());
  bytes[8] = 9;
  CHECK_THROWS_WITH_AS(reload(bytes), doctest::Contains("unsupported checkpoint version"),
                       data_error);
}

TEST_CASE("file round-trip through disk") {
  Checkpoint ckpt = sample_checkpoint();
  const std::string path = "test_ckpt_tmp.bin";
  save_checkpoint_file(ckpt, path);
  Checkpoint back = load_checkpoint_file(path);
  CHECK(checkpoint_bytes(back) == checkpoint_bytes(ckpt));
  std::remove(path.c_str());

  CHECK_THROWS_WITH_AS(load_checkpoint_file("no/such/dir/x.bin"), doctest::Contains("cannot open"),
                       data_error);
}
