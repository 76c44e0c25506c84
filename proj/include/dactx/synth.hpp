#pragma once

#include <cstdint>
#include <string>

#include "dactx/corpus.hpp"

namespace dactx {

// Generator for context-dependent corpora. Unambiguous utterances carry
// label-specific tokens; ambiguous utterances consist of the single shared
// token "amb" and their label is previous_label mod resolutions, so only the
// context can disambiguate them. Each conversation places exactly
// round(ambiguous_rate * conversation_len) ambiguous utterances, never at
// position 0, which makes the context-free Bayes accuracy an exact closed
// form rather than merely an expectation.
struct SynthGrammar {
  int labels = 4;             // K
  int resolutions = 2;        // R; ambiguous labels are 0..R-1
  double ambiguous_rate = 0.4;
  int conversation_len = 5;   // T
  int train_conversations = 200;
  int validation_conversations = 40;
  int test_conversations = 40;
  int tokens_per_label = 3;
  int max_unambiguous_tokens = 3;
  bool allow_adjacent = false;  // permit back-to-back ambiguous utterances

  int ambiguous_per_conversation() const;
  // 1 - (k/T) * (1 - best_guess), best_guess = ceil(K/R)/K
  double context_free_ceiling() const;
  void validate() const;
};

Corpus synth_corpus(const SynthGrammar& grammar, std::uint64_t seed);

// Writes train.tsv / validation.tsv / test.tsv plus synth_info.txt (the
// resolved grammar and the analytic context-free accuracy ceiling).
void write_synth_corpus(const SynthGrammar& grammar, std::uint64_t seed,
                        const std::string& out_dir);

SynthGrammar load_grammar(const std::string& path);

}  // namespace dactx
