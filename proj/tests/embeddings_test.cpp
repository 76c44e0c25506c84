#include "dactx/embeddings.hpp"

#include <filesystem>
#include <fstream>

#include "doctest.h"

using namespace dactx;

namespace {

std::string write_temp(const std::string& name, const std::string& content) {
  const std::string path = (std::filesystem::temp_directory_path() / name).string();
  std::ofstream out(path);
  out << content;
  return path;
}

Vocabulary small_vocab() {
  Vocabulary v;
  v.add("right");
  v.add("hello");
  v.add("world");
  return v;
}

}  // namespace

TEST_SUITE_BEGIN("embeddings");

TEST_CASE("random init contracts") {
  EmbeddingTable zero = init_random(5, 4, 0.0, 1);
  for (double v : zero.matrix.data()) CHECK(v == 0.0);

  EmbeddingTable a = init_random(5, 300, 0.25, 9);
  EmbeddingTable b = init_random(5, 300, 0.25, 9);
  CHECK(a.matrix.data() == b.matrix.data());
  for (double v : a.matrix.data()) {
    CHECK(v >= -0.25);
    CHECK(v <= 0.25);
  }
  // PAD row is zero
  for (int j = 0; j < a.dim; ++j) CHECK(a.matrix.at(Vocabulary::kPad, j) == 0.0);

  EmbeddingTable c = init_random(5, 300, 0.25, 10);
  CHECK(a.matrix.data() != c.matrix.data());
  CHECK_THROWS_AS(init_random(5, 0, 0.25, 1), ConfigError);
}

TEST_CASE("pretrained file is copied exactly") {
  Vocabulary v = small_vocab();
  const std::string path = write_temp("dactx_emb1.txt",
                                      "3 3\n"
                                      "right 0.5 -1.25 3\n"
                                      "hello 1 2 3\n"
                                      "world -1 -2 -3\n");
  EmbeddingTable t = load_pretrained(path, v, 3, 0.25, 7);
  CHECK(t.coverage == 1.0);
  const int rid = v.lookup("right");
  CHECK(t.matrix.at(rid, 0) == 0.5);
  CHECK(t.matrix.at(rid, 1) == -1.25);
  CHECK(t.matrix.at(rid, 2) == 3.0);
  for (int j = 0; j < 3; ++j) CHECK(t.matrix.at(Vocabulary::kPad, j) == 0.0);
}

TEST_CASE("missing words fall back to seeded random init") {
  Vocabulary v = small_vocab();
  const std::string path = write_temp("dactx_emb2.txt",
                                      "1 3\n"
                                      "right 9 9 9\n");
  EmbeddingTable t = load_pretrained(path, v, 3, 0.25, 7);
  CHECK(t.coverage == doctest::Approx(1.0 / 3).epsilon(1e-12));
  EmbeddingTable base = init_random(v.size(), 3, 0.25, 7);
  const int hid = v.lookup("hello");
  for (int j = 0; j < 3; ++j) CHECK(t.matrix.at(hid, j) == base.matrix.at(hid, j));
}

TEST_CASE("empty pretrained file equals random init") {
  Vocabulary v = small_vocab();
  const std::string path = write_temp("dactx_emb3.txt", "");
  EmbeddingTable t = load_pretrained(path, v, 3, 0.25, 7);
  CHECK(t.coverage == 0.0);
  EmbeddingTable base = init_random(v.size(), 3, 0.25, 7);
  CHECK(t.matrix.data() == base.matrix.data());
}

TEST_CASE("pretrained format errors") {
  Vocabulary v = small_vocab();
  const std::string short_row = write_temp("dactx_emb4.txt",
                                           "1 3\n"
                                           "right 1 2\n");
  CHECK_THROWS_WITH_AS(load_pretrained(short_row, v, 3, 0.25, 7),
                       doctest::Contains("dactx_emb4.txt:2"), DataFormatError);

  const std::string long_row = write_temp("dactx_emb5.txt",
                                          "1 2\n"
                                          "right 1 2 3\n");
  CHECK_THROWS_AS(load_pretrained(long_row, v, 2, 0.25, 7), DataFormatError);

  const std::string bad_number = write_temp("dactx_emb6.txt",
                                            "1 2\n"
                                            "right 1 abc\n");
  CHECK_THROWS_AS(load_pretrained(bad_number, v, 2, 0.25, 7), DataFormatError);

  const std::string bad_header = write_temp("dactx_emb7.txt", "w 12\nright 1 2\n");
  CHECK_THROWS_AS(load_pretrained(bad_header, v, 2, 0.25, 7), DataFormatError);

  CHECK_THROWS_AS(load_pretrained("/no/such/file.txt", v, 2, 0.25, 7), IoError);
}

TEST_CASE("embed_tokens layout") {
  Vocabulary v = small_vocab();
  const std::string path = write_temp("dactx_emb8.txt",
                                      "3 2\n"
                                      "right 1 2\n"
                                      "hello 3 4\n"
                                      "world 5 6\n");
  EmbeddingTable t = load_pretrained(path, v, 2, 0.25, 7);
  Tape tape;

  // two tokens, max_len 4: columns 0-1 populated, 2-3 zero
  Tensor m = embed_tokens(tape, {v.lookup("right"), v.lookup("world")}, t, 4);
  CHECK(m.shape() == Shape{2, 4});
  CHECK(m.at(0, 0) == 1.0);
  CHECK(m.at(1, 0) == 2.0);
  CHECK(m.at(0, 1) == 5.0);
  CHECK(m.at(1, 1) == 6.0);
  for (int i = 0; i < 2; ++i)
    for (int j = 2; j < 4; ++j) CHECK(m.at(i, j) == 0.0);

  // pad slot: all-zero matrix
  Tensor pad = embed_tokens(tape, {}, t, 4);
  for (double x : pad.data()) CHECK(x == 0.0);

  // OOV token gets the OOV row
  Tensor oov = embed_tokens(tape, {v.lookup("never-seen")}, t, 1);
  for (int i = 0; i < 2; ++i) CHECK(oov.at(i, 0) == t.matrix.at(Vocabulary::kOov, i));

  // truncation at max_len
  Tensor trunc = embed_tokens(tape, {2, 3, 4}, t, 2);
  CHECK(trunc.shape() == Shape{2, 2});
  CHECK_THROWS_AS(embed_tokens(tape, {2}, t, 0), ConfigError);
}

TEST_CASE("trainable table routes gradients to looked-up rows only") {
  EmbeddingTable t = init_random(4, 3, 0.5, 2, /*trainable=*/true);
  Tape tape;
  Tensor m = embed_tokens(tape, {2, 2}, t, 3);
  tape.backward(sum(tape, m));
  for (int j = 0; j < 3; ++j) {
    CHECK(t.matrix.grad()[2 * 3 + j] == 2.0);  // used twice
    CHECK(t.matrix.grad()[0 * 3 + j] == 0.0);  // PAD untouched
    CHECK(t.matrix.grad()[3 * 3 + j] == 0.0);
  }

  // frozen table records nothing
  EmbeddingTable frozen = init_random(4, 3, 0.5, 2);
  Tape t2;
  Tensor fm = embed_tokens(t2, {2}, frozen, 2);
  CHECK_FALSE(fm.needs_grad());
}

TEST_SUITE_END();
