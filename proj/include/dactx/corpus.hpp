#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <unordered_map>
#include <vector>

#include "dactx/error.hpp"
#include "dactx/rng.hpp"

namespace dactx {

struct Utterance {
  std::vector<std::string> tokens;  // lowercased at load, never empty
  std::vector<int> token_ids;       // filled once the vocabulary is built
  int label_id = -1;
  std::string speaker;
};

struct Conversation {
  std::string id;
  std::vector<Utterance> utterances;
};

// Token ids; index 0 is PAD, index 1 is OOV. Built from the training split
// only, so unseen validation/test tokens map to OOV.
class Vocabulary {
 public:
  static constexpr int kPad = 0;
  static constexpr int kOov = 1;

  Vocabulary();
  int add(const std::string& token);
  int lookup(const std::string& token) const;  // kOov when absent
  const std::string& token(int id) const { return tokens_[id]; }
  int size() const { return static_cast<int>(tokens_.size()); }

 private:
  std::vector<std::string> tokens_;
  std::unordered_map<std::string, int> index_;
};

class LabelSet {
 public:
  int add(const std::string& label);
  int lookup(const std::string& label) const;  // -1 when absent
  const std::string& name(int id) const { return names_[id]; }
  int size() const { return static_cast<int>(names_.size()); }

  void count(const std::string& split, int label_id);
  const std::vector<std::int64_t>& counts(const std::string& split) const;

 private:
  std::vector<std::string> names_;
  std::unordered_map<std::string, int> index_;
  mutable std::map<std::string, std::vector<std::int64_t>> split_counts_;
};

struct Corpus {
  std::vector<Conversation> train;
  std::vector<Conversation> validation;
  std::vector<Conversation> test;
  Vocabulary vocab;
  LabelSet labels;

  const std::vector<Conversation>& split(const std::string& name) const;
  std::int64_t utterance_count(const std::string& split_name) const;
};

// One utterance per line: conversation_id<TAB>speaker<TAB>label<TAB>tokens.
// Lines of a conversation must be contiguous; '#' lines are comments and
// blank lines are ignored.
Corpus load_corpus(const std::string& train_path, const std::string& validation_path,
                   const std::string& test_path);

// The current utterance plus up to n predecessors from the same conversation.
struct ContextWindow {
  const Conversation* conversation = nullptr;
  int current = 0;  // index into conversation->utterances
  int n = 0;

  int context_size() const { return current < n ? current : n; }
  int pad_count() const { return n - context_size(); }
  const Utterance& current_utterance() const { return conversation->utterances[current]; }
  // i in [0, context_size()), oldest first
  const Utterance& context_at(int i) const {
    return conversation->utterances[current - context_size() + i];
  }
};

std::vector<ContextWindow> make_context_windows(const Corpus& corpus,
                                                const std::string& split_name, int n);

// Frequency of the most frequent *training* label, measured on the split.
double majority_class_accuracy(const Corpus& corpus, const std::string& split_name);
int majority_train_label(const Corpus& corpus);

// Deterministic per-epoch shuffle; the final partial batch is emitted.
std::vector<std::vector<int>> shuffled_batches(int window_count, int batch_size,
                                               std::uint64_t seed, int epoch);

// max_len heuristic: smallest L covering the given fraction of training
// utterance lengths.
int length_percentile(const Corpus& corpus, double fraction);

}  // namespace dactx
