#include "dactx/synth.hpp"

#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>

namespace dactx {

int SynthGrammar::ambiguous_per_conversation() const {
  return static_cast<int>(std::floor(ambiguous_rate * conversation_len + 0.5));
}

double SynthGrammar::context_free_ceiling() const {
  const int k = ambiguous_per_conversation();
  const double best_guess =
      static_cast<double>((labels + resolutions - 1) / resolutions) / labels;
  return 1.0 - (static_cast<double>(k) / conversation_len) * (1.0 - best_guess);
}

void SynthGrammar::validate() const {
  if (labels < 2) throw ConfigError("synth grammar: labels must be >= 2");
  if (resolutions < 2 || resolutions > labels) {
    throw ConfigError("synth grammar: resolutions must be in [2, labels]");
  }
  if (ambiguous_rate < 0.0 || ambiguous_rate > 1.0) {
    throw ConfigError("synth grammar: ambiguous_rate must be in [0, 1]");
  }
  if (conversation_len < 1) throw ConfigError("synth grammar: conversation_len must be >= 1");
  if (tokens_per_label < 1) throw ConfigError("synth grammar: tokens_per_label must be >= 1");
  if (max_unambiguous_tokens < 1) {
    throw ConfigError("synth grammar: max_unambiguous_tokens must be >= 1");
  }
  if (train_conversations < 1 || validation_conversations < 1 || test_conversations < 1) {
    throw ConfigError("synth grammar: every split needs at least one conversation");
  }
  const int k = ambiguous_per_conversation();
  const int slots = conversation_len - 1;  // position 0 is always unambiguous
  const int capacity = allow_adjacent ? slots : (slots + 1) / 2;
  if (k > capacity) {
    throw ConfigError("synth grammar: cannot place " + std::to_string(k) +
                      " ambiguous utterances in " + std::to_string(slots) +
                      (allow_adjacent ? " slots" : " non-adjacent slots"));
  }
}

namespace {

std::vector<bool> choose_ambiguous_positions(const SynthGrammar& g, Rng& rng) {
  const int T = g.conversation_len;
  const int k = g.ambiguous_per_conversation();
  std::vector<bool> ambiguous(static_cast<std::size_t>(T), false);
  if (k == 0) return ambiguous;
  while (true) {
    std::fill(ambiguous.begin(), ambiguous.end(), false);
    int placed = 0;
    // uniform k-subset of positions 1..T-1 by rejection
    while (placed < k) {
      const int pos = 1 + static_cast<int>(rng.index(static_cast<std::size_t>(T - 1)));
      if (!ambiguous[pos]) {
        ambiguous[pos] = true;
        ++placed;
      }
    }
    if (g.allow_adjacent) return ambiguous;
    bool ok = true;
    for (int i = 1; i < T; ++i)
      if (ambiguous[i] && ambiguous[i - 1]) ok = false;
    if (ok) return ambiguous;
  }
}

Conversation generate_conversation(const SynthGrammar& g, Rng& rng, const std::string& id) {
  Conversation conv;
  conv.id = id;
  const std::vector<bool> ambiguous = choose_ambiguous_positions(g, rng);
  int prev_label = 0;
  for (int t = 0; t < g.conversation_len; ++t) {
    Utterance u;
    u.speaker = (t % 2 == 0) ? "A" : "B";
    if (ambiguous[t]) {
      u.label_id = prev_label % g.resolutions;
      u.tokens = {"amb"};
    } else {
      u.label_id = static_cast<int>(rng.index(static_cast<std::size_t>(g.labels)));
      const int len = 1 + static_cast<int>(rng.index(static_cast<std::size_t>(g.max_unambiguous_tokens)));
      for (int j = 0; j < len; ++j) {
        const int tok = static_cast<int>(rng.index(static_cast<std::size_t>(g.tokens_per_label)));
        u.tokens.push_back("w" + std::to_string(u.label_id) + "_" + std::to_string(tok));
      }
    }
    prev_label = u.label_id;
    conv.utterances.push_back(std::move(u));
  }
  return conv;
}

std::vector<Conversation> generate_split(const SynthGrammar& g, Rng& rng,
                                         const std::string& split_name, int count,
                                         LabelSet& labels, const std::string& split_tag) {
  std::vector<Conversation> out;
  for (int i = 0; i < count; ++i) {
    Conversation c =
        generate_conversation(g, rng, "synth_" + split_tag + "_" + std::to_string(i));
    for (Utterance& u : c.utterances) {
      const int id = labels.add("L" + std::to_string(u.label_id));
      u.label_id = id;
      labels.count(split_name, id);
    }
    out.push_back(std::move(c));
  }
  return out;
}

}  // namespace

Corpus synth_corpus(const SynthGrammar& grammar, std::uint64_t seed) {
  grammar.validate();
  Corpus corpus;
  // Register every label up front so ids are stable regardless of draw order.
  for (int i = 0; i < grammar.labels; ++i) corpus.labels.add("L" + std::to_string(i));
  Rng rng(seed);
  corpus.train = generate_split(grammar, rng, "train", grammar.train_conversations,
                                corpus.labels, "train");
  corpus.validation = generate_split(grammar, rng, "validation",
                                     grammar.validation_conversations, corpus.labels, "val");
  corpus.test =
      generate_split(grammar, rng, "test", grammar.test_conversations, corpus.labels, "test");

  for (const Conversation& c : corpus.train)
    for (const Utterance& u : c.utterances)
      for (const std::string& t : u.tokens) corpus.vocab.add(t);

  for (auto* split : {&corpus.train, &corpus.validation, &corpus.test})
    for (Conversation& c : *split)
      for (Utterance& u : c.utterances) {
        u.token_ids.clear();
        for (const std::string& t : u.tokens) u.token_ids.push_back(corpus.vocab.lookup(t));
      }
  return corpus;
}

namespace {

void write_split(const std::string& path, const std::vector<Conversation>& split,
                 const LabelSet& labels) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write corpus file " + path);
  for (const Conversation& c : split)
    for (const Utterance& u : c.utterances) {
      out << c.id << '\t' << u.speaker << '\t' << labels.name(u.label_id) << '\t';
      for (std::size_t i = 0; i < u.tokens.size(); ++i) {
        if (i) out << ' ';
        out << u.tokens[i];
      }
      out << '\n';
    }
}

}  // namespace

void write_synth_corpus(const SynthGrammar& grammar, std::uint64_t seed,
                        const std::string& out_dir) {
  Corpus corpus = synth_corpus(grammar, seed);
  std::filesystem::create_directories(out_dir);
  write_split(out_dir + "/train.tsv", corpus.train, corpus.labels);
  write_split(out_dir + "/validation.tsv", corpus.validation, corpus.labels);
  write_split(out_dir + "/test.tsv", corpus.test, corpus.labels);

  std::ofstream info(out_dir + "/synth_info.txt");
  if (!info) throw IoError("cannot write " + out_dir + "/synth_info.txt");
  info.precision(17);
  info << "context_free_ceiling=" << grammar.context_free_ceiling() << "\n";
  info << "labels=" << grammar.labels << "\n";
  info << "resolutions=" << grammar.resolutions << "\n";
  info << "ambiguous_rate=" << grammar.ambiguous_rate << "\n";
  info << "conversation_len=" << grammar.conversation_len << "\n";
  info << "ambiguous_per_conversation=" << grammar.ambiguous_per_conversation() << "\n";
  info << "train_conversations=" << grammar.train_conversations << "\n";
  info << "validation_conversations=" << grammar.validation_conversations << "\n";
  info << "test_conversations=" << grammar.test_conversations << "\n";
  info << "tokens_per_label=" << grammar.tokens_per_label << "\n";
  info << "max_unambiguous_tokens=" << grammar.max_unambiguous_tokens << "\n";
  info << "allow_adjacent=" << (grammar.allow_adjacent ? 1 : 0) << "\n";
  info << "seed=" << seed << "\n";
}

SynthGrammar load_grammar(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open grammar file " + path);
  SynthGrammar g;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty() || line[0] == '#') continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw ConfigError(path + ":" + std::to_string(line_no) + ": expected key=value");
    }
    const std::string key = line.substr(0, eq);
    const std::string value = line.substr(eq + 1);
    try {
      if (key == "labels") g.labels = std::stoi(value);
      else if (key == "resolutions") g.resolutions = std::stoi(value);
      else if (key == "ambiguous_rate") g.ambiguous_rate = std::stod(value);
      else if (key == "conversation_len") g.conversation_len = std::stoi(value);
      else if (key == "train_conversations") g.train_conversations = std::stoi(value);
      else if (key == "validation_conversations") g.validation_conversations = std::stoi(value);
      else if (key == "test_conversations") g.test_conversations = std::stoi(value);
      else if (key == "tokens_per_label") g.tokens_per_label = std::stoi(value);
      else if (key == "max_unambiguous_tokens") g.max_unambiguous_tokens = std::stoi(value);
      else if (key == "allow_adjacent") g.allow_adjacent = (value == "1" || value == "true");
      else throw ConfigError(path + ":" + std::to_string(line_no) + ": unknown key '" + key + "'");
    } catch (const std::invalid_argument&) {
      throw ConfigError(path + ":" + std::to_string(line_no) + ": bad value for '" + key + "'");
    }
  }
  g.validate();
  return g;
}

}  // namespace dactx
