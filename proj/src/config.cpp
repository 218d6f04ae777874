#include "coclust/config.hpp"

#include <charconv>
#include <cstdio>
#include <sstream>

#include "coclust/error.hpp"
#include "coclust/io.hpp"

namespace coclust {

namespace {

std::string trim(const std::string& s) {
  const auto first = s.find_first_not_of(" \t\r");
  if (first == std::string::npos) return "";
  const auto last = s.find_last_not_of(" \t\r");
  return s.substr(first, last - first + 1);
}

std::string format_double(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

}  // namespace

KeyValues KeyValues::parse(const std::string& text, const std::string& source) {
  KeyValues kv;
  kv.source_ = source;
  std::istringstream in(text);
  std::string line;
  for (std::size_t number = 1; std::getline(in, line); ++number) {
    if (auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    const std::string at = source + ":" + std::to_string(number) + ": ";
    if (eq == std::string::npos) throw UsageError(at + "expected key = value");
    const std::string key = trim(line.substr(0, eq));
    if (key.empty()) throw UsageError(at + "empty key");
    if (kv.entries_.contains(key)) throw UsageError(at + "duplicate key '" + key + "'");
    kv.entries_[key] = Entry{trim(line.substr(eq + 1)), number};
  }
  return kv;
}

void KeyValues::bad(const std::string& key, const std::string& what) const {
  const Entry& e = entries_.at(key);
  throw UsageError(source_ + ":" + std::to_string(e.line) + ": " + key + ": " + what + " '" +
                   e.value + "'");
}

bool KeyValues::take(const std::string& key, std::string& out) {
  auto it = entries_.find(key);
  if (it == entries_.end()) return false;
  out = it->second.value;
  entries_.erase(it);
  return true;
}

bool KeyValues::take(const std::string& key, double& out) {
  auto it = entries_.find(key);
  if (it == entries_.end()) return false;
  const std::string& v = it->second.value;
  std::size_t used = 0;
  try {
    out = std::stod(v, &used);
  } catch (const std::exception&) {
    bad(key, "not a number");
  }
  if (used != v.size()) bad(key, "not a number");
  entries_.erase(it);
  return true;
}

bool KeyValues::take(const std::string& key, std::size_t& out) {
  auto it = entries_.find(key);
  if (it == entries_.end()) return false;
  const std::string& v = it->second.value;
  auto [end, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc() || end != v.data() + v.size()) bad(key, "not a non-negative integer");
  entries_.erase(it);
  return true;
}

bool KeyValues::take(const std::string& key, bool& out) {
  auto it = entries_.find(key);
  if (it == entries_.end()) return false;
  const std::string& v = it->second.value;
  if (v == "true" || v == "1" || v == "on") {
    out = true;
  } else if (v == "false" || v == "0" || v == "off") {
    out = false;
  } else {
    bad(key, "not a boolean");
  }
  entries_.erase(it);
  return true;
}

bool KeyValues::take(const std::string& key, std::vector<double>& out) {
  auto it = entries_.find(key);
  if (it == entries_.end()) return false;
  std::vector<double> values;
  std::stringstream ss(it->second.value);
  std::string item;
  while (std::getline(ss, item, ',')) {
    item = trim(item);
    std::size_t used = 0;
    try {
      values.push_back(std::stod(item, &used));
    } catch (const std::exception&) {
      bad(key, "not a list of numbers");
    }
    if (used != item.size()) bad(key, "not a list of numbers");
  }
  out = std::move(values);
  entries_.erase(it);
  return true;
}

void KeyValues::finish() const {
  if (entries_.empty()) return;
  const auto& [key, entry] = *entries_.begin();
  throw UsageError(source_ + ":" + std::to_string(entry.line) + ": unknown key '" + key + "'");
}

RunConfig parse_run_config(const std::string& text, const std::string& source) {
  KeyValues kv = KeyValues::parse(text, source);
  RunConfig c;
  TransformerConfig& m = c.model;
  m.input_dim = 0;
  m.label_width = 0;
  kv.take("layers", m.layers);
  kv.take("heads", m.heads);
  kv.take("hidden", m.hidden);
  kv.take("ffn_hidden", m.ffn_hidden);
  kv.take("head_hidden", m.head_hidden);
  kv.take("dropout", m.dropout);
  kv.take("input_dim", m.input_dim);
  kv.take("label_width", m.label_width);

  TrainConfig& t = c.train;
  kv.take("alpha", t.alpha);
  kv.take("beta", t.beta);
  kv.take("clusters", t.clusters);
  kv.take("margin", t.margin);
  kv.take("lr", t.learning_rate);
  kv.take("epochs", t.epochs);
  kv.take("warmup_epochs", t.warmup_epochs);
  std::size_t seed = t.seed;
  kv.take("seed", seed);
  t.seed = seed;
  std::vector<double> split;
  if (kv.take("split", split)) {
    if (split.size() != 3) throw UsageError(source + ": split needs three fractions");
    t.split = {split[0], split[1], split[2]};
  }
  kv.take("batch_size", t.batch_size);
  kv.take("cluster_layer", t.cluster_layer);
  kv.take("projection_dim", t.projection_dim);
  kv.take("clustering", t.clustering);

  FeatureConfig& f = c.features;
  kv.take("structural_dim", f.structural_dim);
  kv.take("walk_length", f.walk_length);
  kv.take("walks_per_node", f.walks_per_node);
  kv.take("window", f.window);
  kv.take("negatives", f.negatives);
  kv.take("skipgram_epochs", f.skipgram_epochs);
  kv.take("skipgram_lr", f.skipgram_lr);
  kv.take("text_dim", f.text_dim);
  kv.take("text_features", f.text_features);
  kv.take("text_vectors", f.text_vectors);
  kv.finish();

  t.validate();
  if (m.layers < 1 || m.heads < 1 || m.hidden % m.heads != 0) {
    throw UsageError(source + ": hidden must be a multiple of heads and layers positive");
  }
  if (f.structural_dim == 0 || f.text_dim == 0) {
    throw UsageError(source + ": structural_dim and text_dim must be positive");
  }
  return c;
}

RunConfig load_run_config(const std::filesystem::path& path) {
  return parse_run_config(read_text_file(path), path.string());
}

std::string to_text(const RunConfig& c) {
  std::ostringstream out;
  auto put = [&](const char* key, const std::string& value) {
    out << key << " = " << value << '\n';
  };
  auto num = [](std::size_t v) { return std::to_string(v); };
  auto flag = [](bool v) { return std::string(v ? "true" : "false"); };
  put("layers", num(c.model.layers));
  put("heads", num(c.model.heads));
  put("hidden", num(c.model.hidden));
  put("ffn_hidden", num(c.model.ffn_hidden));
  put("head_hidden", num(c.model.head_hidden));
  put("dropout", format_double(c.model.dropout));
  put("input_dim", num(c.model.input_dim));
  put("label_width", num(c.model.label_width));
  put("alpha", format_double(c.train.alpha));
  put("beta", format_double(c.train.beta));
  put("clusters", num(c.train.clusters));
  put("margin", format_double(c.train.margin));
  put("lr", format_double(c.train.learning_rate));
  put("epochs", num(c.train.epochs));
  put("warmup_epochs", num(c.train.warmup_epochs));
  put("seed", std::to_string(c.train.seed));
  put("split", format_double(c.train.split[0]) + "," + format_double(c.train.split[1]) + "," +
                   format_double(c.train.split[2]));
  put("batch_size", num(c.train.batch_size));
  put("cluster_layer", num(c.train.cluster_layer));
  put("projection_dim", num(c.train.projection_dim));
  put("clustering", flag(c.train.clustering));
  put("structural_dim", num(c.features.structural_dim));
  put("walk_length", num(c.features.walk_length));
  put("walks_per_node", num(c.features.walks_per_node));
  put("window", num(c.features.window));
  put("negatives", num(c.features.negatives));
  put("skipgram_epochs", num(c.features.skipgram_epochs));
  put("skipgram_lr", format_double(c.features.skipgram_lr));
  put("text_dim", num(c.features.text_dim));
  put("text_features", flag(c.features.text_features));
  put("text_vectors", c.features.text_vectors);
  return out.str();
}

}  // namespace coclust
