#include "dactx/corpus.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <set>
#include <sstream>

namespace dactx {

Vocabulary::Vocabulary() {
  add("<pad>");
  add("<oov>");
}

int Vocabulary::add(const std::string& token) {
  auto it = index_.find(token);
  if (it != index_.end()) return it->second;
  const int id = static_cast<int>(tokens_.size());
  tokens_.push_back(token);
  index_.emplace(token, id);
  return id;
}

int Vocabulary::lookup(const std::string& token) const {
  auto it = index_.find(token);
  return it == index_.end() ? kOov : it->second;
}

int LabelSet::add(const std::string& label) {
  auto it = index_.find(label);
  if (it != index_.end()) return it->second;
  const int id = static_cast<int>(names_.size());
  names_.push_back(label);
  index_.emplace(label, id);
  return id;
}

int LabelSet::lookup(const std::string& label) const {
  auto it = index_.find(label);
  return it == index_.end() ? -1 : it->second;
}

void LabelSet::count(const std::string& split, int label_id) {
  auto& c = split_counts_[split];
  if (static_cast<int>(c.size()) < size()) c.resize(size(), 0);
  ++c[label_id];
}

const std::vector<std::int64_t>& LabelSet::counts(const std::string& split) const {
  auto& c = split_counts_[split];
  if (static_cast<int>(c.size()) < size()) c.resize(size(), 0);
  return c;
}

const std::vector<Conversation>& Corpus::split(const std::string& name) const {
  if (name == "train") return train;
  if (name == "validation") return validation;
  if (name == "test") return test;
  throw ConfigError("unknown split '" + name + "' (expected train, validation or test)");
}

std::int64_t Corpus::utterance_count(const std::string& split_name) const {
  std::int64_t n = 0;
  for (const Conversation& c : split(split_name)) n += static_cast<std::int64_t>(c.utterances.size());
  return n;
}

namespace {

std::string lowercased(std::string s) {
  for (char& c : s) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return s;
}

[[noreturn]] void parse_fail(const std::string& path, int line_no, const std::string& reason) {
  throw DataFormatError(path + ":" + std::to_string(line_no) + ": " + reason);
}

std::vector<Conversation> load_split(const std::string& path, const std::string& split_name,
                                     LabelSet& labels, bool allow_new_labels) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open corpus file " + path);

  std::vector<Conversation> conversations;
  std::set<std::string> finished_ids;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty() || line[0] == '#') continue;

    std::vector<std::string> fields;
    std::size_t start = 0;
    for (std::size_t i = 0; i <= line.size(); ++i) {
      if (i == line.size() || line[i] == '\t') {
        fields.push_back(line.substr(start, i - start));
        start = i + 1;
      }
    }
    if (fields.size() != 4) {
      parse_fail(path, line_no,
                 "expected 4 tab-separated fields, got " + std::to_string(fields.size()));
    }
    const std::string& conv_id = fields[0];
    if (conv_id.empty()) parse_fail(path, line_no, "empty conversation id");

    Utterance utt;
    utt.speaker = fields[1];
    std::istringstream toks(fields[3]);
    std::string tok;
    while (toks >> tok) utt.tokens.push_back(lowercased(tok));
    if (utt.tokens.empty()) parse_fail(path, line_no, "utterance has no tokens");

    const std::string& label = fields[2];
    if (label.empty()) parse_fail(path, line_no, "empty label");
    int label_id = labels.lookup(label);
    if (label_id < 0) {
      if (!allow_new_labels) {
        parse_fail(path, line_no, "unknown label '" + label + "' in " + split_name +
                                      " split (labels come from the training split)");
      }
      label_id = labels.add(label);
    }
    utt.label_id = label_id;
    labels.count(split_name, label_id);

    if (conversations.empty() || conversations.back().id != conv_id) {
      if (finished_ids.count(conv_id)) {
        parse_fail(path, line_no, "conversation '" + conv_id + "' is not contiguous");
      }
      if (!conversations.empty()) finished_ids.insert(conversations.back().id);
      conversations.push_back(Conversation{conv_id, {}});
    }
    conversations.back().utterances.push_back(std::move(utt));
  }
  if (conversations.empty()) {
    throw DataFormatError(path + ": empty " + split_name + " split");
  }
  return conversations;
}

void assign_token_ids(std::vector<Conversation>& split, const Vocabulary& vocab) {
  for (Conversation& c : split)
    for (Utterance& u : c.utterances) {
      u.token_ids.clear();
      u.token_ids.reserve(u.tokens.size());
      for (const std::string& t : u.tokens) u.token_ids.push_back(vocab.lookup(t));
    }
}

}  // namespace

Corpus load_corpus(const std::string& train_path, const std::string& validation_path,
                   const std::string& test_path) {
  Corpus corpus;
  corpus.train = load_split(train_path, "train", corpus.labels, true);
  corpus.validation = load_split(validation_path, "validation", corpus.labels, false);
  corpus.test = load_split(test_path, "test", corpus.labels, false);

  std::set<std::string> seen;
  for (const auto* split : {&corpus.train, &corpus.validation, &corpus.test})
    for (const Conversation& c : *split) {
      if (!seen.insert(c.id).second) {
        throw DataFormatError("conversation '" + c.id + "' appears in more than one split");
      }
    }

  for (const Conversation& c : corpus.train)
    for (const Utterance& u : c.utterances)
      for (const std::string& t : u.tokens) corpus.vocab.add(t);

  assign_token_ids(corpus.train, corpus.vocab);
  assign_token_ids(corpus.validation, corpus.vocab);
  assign_token_ids(corpus.test, corpus.vocab);
  return corpus;
}

std::vector<ContextWindow> make_context_windows(const Corpus& corpus,
                                                const std::string& split_name, int n) {
  if (n < 0) throw ConfigError("context length must be >= 0, got " + std::to_string(n));
  std::vector<ContextWindow> windows;
  for (const Conversation& c : corpus.split(split_name)) {
    for (int i = 0; i < static_cast<int>(c.utterances.size()); ++i) {
      windows.push_back(ContextWindow{&c, i, n});
    }
  }
  return windows;
}

int majority_train_label(const Corpus& corpus) {
  const auto& counts = corpus.labels.counts("train");
  int best = 0;
  for (int i = 1; i < static_cast<int>(counts.size()); ++i)
    if (counts[i] > counts[best]) best = i;
  return best;
}

double majority_class_accuracy(const Corpus& corpus, const std::string& split_name) {
  const int majority = majority_train_label(corpus);
  std::int64_t hits = 0, total = 0;
  for (const Conversation& c : corpus.split(split_name))
    for (const Utterance& u : c.utterances) {
      ++total;
      if (u.label_id == majority) ++hits;
    }
  if (total == 0) throw DataFormatError("empty split " + split_name);
  return static_cast<double>(hits) / static_cast<double>(total);
}

std::vector<std::vector<int>> shuffled_batches(int window_count, int batch_size,
                                               std::uint64_t seed, int epoch) {
  if (batch_size < 1) throw ConfigError("batch size must be >= 1");
  std::vector<int> order(static_cast<std::size_t>(window_count));
  for (int i = 0; i < window_count; ++i) order[i] = i;
  Rng rng(seed + static_cast<std::uint64_t>(epoch));
  rng.shuffle(order);

  std::vector<std::vector<int>> batches;
  for (int at = 0; at < window_count; at += batch_size) {
    const int end = std::min(at + batch_size, window_count);
    batches.emplace_back(order.begin() + at, order.begin() + end);
  }
  return batches;
}

int length_percentile(const Corpus& corpus, double fraction) {
  std::vector<int> lengths;
  for (const Conversation& c : corpus.train)
    for (const Utterance& u : c.utterances) lengths.push_back(static_cast<int>(u.tokens.size()));
  std::sort(lengths.begin(), lengths.end());
  const std::size_t idx = static_cast<std::size_t>(fraction * (lengths.size() - 1) + 0.5);
  return lengths[std::min(idx, lengths.size() - 1)];
}

}  // namespace dactx
