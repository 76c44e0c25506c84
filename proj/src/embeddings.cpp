#include "dactx/embeddings.hpp"

#include <fstream>
#include <sstream>

namespace dactx {

EmbeddingTable init_random(int vocab_size, int dim, double scale, std::uint64_t seed,
                           bool trainable) {
  if (dim < 1) throw ConfigError("embedding dim must be >= 1, got " + std::to_string(dim));
  if (vocab_size < 2) throw ConfigError("vocabulary must contain at least PAD and OOV");
  Rng rng(seed);
  std::vector<double> values(static_cast<std::size_t>(vocab_size) * dim);
  for (double& v : values) v = rng.uniform(-scale, scale);
  for (int j = 0; j < dim; ++j) values[Vocabulary::kPad * dim + j] = 0.0;

  EmbeddingTable table;
  table.dim = dim;
  table.trainable = trainable;
  table.matrix = trainable ? Tensor::param({vocab_size, dim}, std::move(values))
                           : Tensor::from_data({vocab_size, dim}, std::move(values));
  return table;
}

EmbeddingTable load_pretrained(const std::string& path, const Vocabulary& vocab,
                               int fallback_dim, double fallback_scale, std::uint64_t seed) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open embedding file " + path);

  std::string header;
  int file_count = 0, file_dim = 0;
  if (std::getline(in, header)) {
    std::istringstream hs(header);
    if (!(hs >> file_count >> file_dim) || file_count < 0 || file_dim < 1) {
      throw DataFormatError(path + ":1: expected header 'count dim'");
    }
  }
  const int dim = file_dim > 0 ? file_dim : fallback_dim;

  EmbeddingTable table = init_random(vocab.size(), dim, fallback_scale, seed);
  auto& values = table.matrix.data();

  int covered = 0;
  std::string line;
  int line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    std::istringstream ls(line);
    std::string word;
    ls >> word;
    std::vector<double> row(static_cast<std::size_t>(dim));
    for (int j = 0; j < dim; ++j) {
      if (!(ls >> row[j])) {
        throw DataFormatError(path + ":" + std::to_string(line_no) +
                              ": expected " + std::to_string(dim) + " values for '" + word + "'");
      }
    }
    double extra;
    if (ls >> extra) {
      throw DataFormatError(path + ":" + std::to_string(line_no) + ": row for '" + word +
                            "' has more than " + std::to_string(dim) + " values");
    }
    const int id = vocab.lookup(word);
    if (id != Vocabulary::kOov && id != Vocabulary::kPad) {
      for (int j = 0; j < dim; ++j) values[static_cast<std::size_t>(id) * dim + j] = row[j];
      ++covered;
    }
  }

  const int real_words = vocab.size() - 2;
  table.coverage = real_words > 0 ? static_cast<double>(covered) / real_words : 0.0;
  return table;
}

Tensor embed_tokens(Tape& tape, const std::vector<int>& token_ids, const EmbeddingTable& table,
                    int max_len) {
  if (max_len < 1) throw ConfigError("max_len must be >= 1, got " + std::to_string(max_len));
  const int d = table.dim;
  const int count = std::min<int>(static_cast<int>(token_ids.size()), max_len);
  std::vector<double> out(static_cast<std::size_t>(d) * max_len, 0.0);
  const auto& m = table.matrix.data();
  for (int j = 0; j < count; ++j) {
    const int id = token_ids[j];
    for (int i = 0; i < d; ++i) out[static_cast<std::size_t>(i) * max_len + j] = m[static_cast<std::size_t>(id) * d + i];
  }
  Tensor x = Tensor::from_data({d, max_len}, std::move(out));
  if (table.trainable && table.matrix.needs_grad() && count > 0) {
    Tensor matrix = table.matrix;
    x.set_needs_grad(true);
    std::vector<int> ids(token_ids.begin(), token_ids.begin() + count);
    tape.record([matrix, x, ids, d, max_len]() mutable {
      const auto& G = x.grad();
      auto& dM = matrix.grad();
      for (std::size_t j = 0; j < ids.size(); ++j)
        for (int i = 0; i < d; ++i)
          dM[static_cast<std::size_t>(ids[j]) * d + i] += G[static_cast<std::size_t>(i) * max_len + j];
    });
  }
  return x;
}

Tensor embed_utterance(Tape& tape, const Utterance& u, const EmbeddingTable& table, int max_len) {
  return embed_tokens(tape, u.token_ids, table, max_len);
}

}  // namespace dactx
