#pragma once

#include <cstdint>
#include <string>

#include "dactx/corpus.hpp"
#include "dactx/tensor.hpp"

namespace dactx {

// Word-vector table, one row per vocabulary entry. The PAD row is always the
// zero vector. Kept fixed during training unless trainable is set.
struct EmbeddingTable {
  int dim = 0;
  bool trainable = false;
  double coverage = 0.0;  // fraction of non-reserved words found in a pretrained file
  Tensor matrix;          // |V| x dim

  int vocab_size() const { return matrix.dim(0); }
};

EmbeddingTable init_random(int vocab_size, int dim, double scale, std::uint64_t seed,
                           bool trainable = false);

// Text format: header "count dim", then "word v1 ... vdim" per line. Words
// absent from the file keep their random initialization.
EmbeddingTable load_pretrained(const std::string& path, const Vocabulary& vocab,
                               int fallback_dim, double fallback_scale, std::uint64_t seed);

// d x max_len matrix; column j holds the embedding of token j, the rest are
// zero. Longer utterances are truncated at max_len. An empty id list (a pad
// slot) yields the all-zero matrix.
Tensor embed_tokens(Tape& tape, const std::vector<int>& token_ids, const EmbeddingTable& table,
                    int max_len);
Tensor embed_utterance(Tape& tape, const Utterance& u, const EmbeddingTable& table, int max_len);

}  // namespace dactx
