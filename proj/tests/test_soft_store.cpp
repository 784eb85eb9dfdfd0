/*
 * Copyright 2026 The sardec Authors. All Rights Reserved.
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#include <gtest/gtest.h>

#include <cctype>
#include <filesystem>
#include <fstream>
#include <sstream>

#include <unistd.h>

#include "sardec/soft_store.hpp"
#include "sardec/tuner.hpp"
#include "test_util.hpp"

namespace sardec {
namespace {

namespace fs = std::filesystem;

class SoftStore : public ::testing::Test {
 protected:
  void SetUp() override {
    dir_ = fs::temp_directory_path() / ("sardec_store_" + std::to_string(::getpid()));
    fs::create_directories(dir_);
  }
  void TearDown() override { fs::remove_all(dir_); }
  std::string path(const std::string& name) const { return (dir_ / name).string(); }

  fs::path dir_;
};

std::string corrupt_first_array_digit(std::string text) {
  std::size_t at = text.find("\"data\"", text.find("\"arrays\""));
  while (at < text.size() && !std::isdigit(static_cast<unsigned char>(text[at]))) ++at;
  text[at] = text[at] == '9' ? '8' : static_cast<char>(text[at] + 1);
  return text;
}

TEST_F(SoftStore, WeightsRoundTripExactly) {
  const ModelWeights w = init_weights(testing::tiny_config(), 5);
  const Checkpoint ckpt = to_checkpoint(w, {{"seed", "5"}});
  save(ckpt, path("w.json"));
  const Checkpoint back = load(path("w.json"));
  EXPECT_EQ(back, ckpt);
  EXPECT_EQ(weights_from_checkpoint(back), w);
  EXPECT_EQ(weights_checksum(weights_from_checkpoint(back)), weights_checksum(w));
  for (const auto& entry : fs::directory_iterator(dir_)) {
    EXPECT_EQ(entry.path().filename(), "w.json");
  }
}

TEST_F(SoftStore, SoftParamsRoundTripExactly) {
  const ModelConfig c = testing::tiny_config();
  for (PromptingMode mode : {PromptingMode::mask_only, PromptingMode::shallow, PromptingMode::deep}) {
    const SoftParams s = testing::random_soft(c, mode, 3, 2, 9);
    save(to_checkpoint(s, c), path("s.json"));
    EXPECT_EQ(soft_from_checkpoint(load(path("s.json")), c), s) << to_string(mode);
  }
}

TEST_F(SoftStore, SerializationIsDeterministic) {
  const ModelWeights w = init_weights(testing::tiny_config(), 6);
  EXPECT_EQ(serialize(to_checkpoint(w)), serialize(to_checkpoint(w)));
  EXPECT_EQ(parse_checkpoint(serialize(to_checkpoint(w))), to_checkpoint(w));
}

TEST_F(SoftStore, CorruptedByteFailsTheChecksum) {
  const std::string text = serialize(to_checkpoint(init_weights(testing::tiny_config(), 7)));
  EXPECT_THROW(parse_checkpoint(corrupt_first_array_digit(text)), ChecksumError);
  EXPECT_THROW(parse_checkpoint(text.substr(0, text.size() / 2)), ChecksumError);
}

TEST_F(SoftStore, CorruptedFileOnDiskFailsToLoad) {
  save(to_checkpoint(init_weights(testing::tiny_config(), 7)), path("w.json"));
  std::stringstream ss;
  ss << std::ifstream(path("w.json")).rdbuf();
  std::ofstream(path("w.json"), std::ios::trunc) << corrupt_first_array_digit(ss.str());
  EXPECT_THROW(load(path("w.json")), ChecksumError);
}

TEST_F(SoftStore, VersionMismatchIsDistinct) {
  std::string text = serialize(to_checkpoint(init_weights(testing::tiny_config(), 8)));
  const std::string key = "\"format_version\": 1";
  const std::size_t at = text.find(key);
  ASSERT_NE(at, std::string::npos);
  text.replace(at, key.size(), "\"format_version\": 2");
  EXPECT_THROW(parse_checkpoint(text), VersionError);
}

TEST_F(SoftStore, SoftAgainstMismatchedWeightsIsAShapeError) {
  const ModelConfig small = testing::tiny_config();
  const ModelConfig wide = testing::tiny_config(8, 16);
  const SoftParams s = testing::random_soft(small, PromptingMode::deep, 2, 2, 1);
  save(to_checkpoint(s, small), path("s.json"));
  EXPECT_THROW(soft_from_checkpoint(load(path("s.json")), wide), ShapeError);
}

TEST_F(SoftStore, MissingArrayIsAShapeError) {
  Checkpoint ckpt = to_checkpoint(init_weights(testing::tiny_config(), 2));
  ckpt.arrays.pop_back();
  EXPECT_THROW(weights_from_checkpoint(ckpt), ShapeError);
}

TEST_F(SoftStore, WrongKindIsRejected) {
  const ModelConfig c = testing::tiny_config();
  const Checkpoint soft = to_checkpoint(testing::random_soft(c, PromptingMode::deep, 2, 2, 1), c);
  EXPECT_THROW(weights_from_checkpoint(soft), ShapeError);
}

TEST_F(SoftStore, MissingFileIsAnIoError) {
  EXPECT_THROW(load(path("absent.json")), IoError);
}

}  // namespace
}  // namespace sardec
