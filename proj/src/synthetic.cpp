#include "coclust/synthetic.hpp"

#include <algorithm>
#include <cstdio>
#include <random>
#include <set>
#include <sstream>

#include "coclust/config.hpp"
#include "coclust/error.hpp"

namespace coclust {

namespace {

std::string numbered(const char* format, std::size_t a, std::size_t b = 0) {
  char buf[64];
  std::snprintf(buf, sizeof buf, format, a, b);
  return buf;
}

const char* const kWords[] = {"acute",    "chronic",  "primary", "secondary", "disorder",
                              "syndrome", "deficit",  "lesion",  "infection", "injury",
                              "episode",  "screen",   "therapy", "panel",     "imaging",
                              "level",    "agent",    "dose",    "finding",   "history"};

}  // namespace

void SyntheticSpec::validate() const {
  if (n_subtypes < 1 || n_visits < 1 || codes_min < 1 || codes_max < codes_min) {
    throw UsageError("synthetic spec: counts must be positive with codes_min <= codes_max");
  }
  if (label_probs.size() != n_subtypes) {
    throw UsageError("synthetic spec: label_probs needs one probability per subtype");
  }
  for (double p : label_probs) {
    if (!(p >= 0.0 && p <= 1.0)) throw UsageError("synthetic spec: label_probs outside [0, 1]");
  }
  if (!(noise_rate >= 0.0 && noise_rate <= 1.0)) {
    throw UsageError("synthetic spec: noise_rate outside [0, 1]");
  }
  if (marker_concepts < 1) throw UsageError("synthetic spec: marker_concepts must be positive");
  if (concepts_per_subtype < marker_concepts + codes_max) {
    throw DataError("synthetic spec: " + std::to_string(concepts_per_subtype) +
                    " concepts per subtype cannot supply " + std::to_string(codes_max) +
                    " distinct codes besides " + std::to_string(marker_concepts) + " markers");
  }
}

SyntheticSpec parse_synthetic_spec(const std::string& text, const std::string& source) {
  KeyValues kv = KeyValues::parse(text, source);
  SyntheticSpec s;
  kv.take("n_subtypes", s.n_subtypes);
  kv.take("concepts_per_subtype", s.concepts_per_subtype);
  kv.take("shared_concepts", s.shared_concepts);
  kv.take("marker_concepts", s.marker_concepts);
  kv.take("n_visits", s.n_visits);
  kv.take("codes_min", s.codes_min);
  kv.take("codes_max", s.codes_max);
  kv.take("label_probs", s.label_probs);
  kv.take("noise_rate", s.noise_rate);
  std::size_t seed = s.seed;
  kv.take("seed", seed);
  s.seed = seed;
  kv.finish();
  s.validate();
  return s;
}

std::string to_text(const SyntheticSpec& s) {
  std::ostringstream out;
  out.precision(17);
  out << "n_subtypes = " << s.n_subtypes << "\nconcepts_per_subtype = " << s.concepts_per_subtype
      << "\nshared_concepts = " << s.shared_concepts << "\nmarker_concepts = " << s.marker_concepts
      << "\nn_visits = " << s.n_visits << "\ncodes_min = " << s.codes_min
      << "\ncodes_max = " << s.codes_max << "\nlabel_probs = ";
  for (std::size_t i = 0; i < s.label_probs.size(); ++i) {
    out << (i ? "," : "") << s.label_probs[i];
  }
  out << "\nnoise_rate = " << s.noise_rate << "\nseed = " << s.seed << '\n';
  return out.str();
}

SyntheticData generate_synthetic(const SyntheticSpec& spec) {
  spec.validate();
  SyntheticData data;
  std::mt19937_64 rng(spec.seed);
  const std::size_t regular = spec.concepts_per_subtype - spec.marker_concepts;
  std::vector<std::vector<std::string>> pools(spec.n_subtypes), markers(spec.n_subtypes);
  std::vector<std::string> background;
  std::vector<std::string> all;
  for (std::size_t s = 0; s < spec.n_subtypes; ++s) {
    for (std::size_t j = 0; j < regular; ++j) {
      pools[s].push_back(numbered("P%zu_%02zu", s, j));
      background.push_back(pools[s].back());
      data.truth.concepts[pools[s].back()] = static_cast<int>(s);
    }
    for (std::size_t j = 0; j < spec.marker_concepts; ++j) {
      markers[s].push_back(numbered("P%zu_M%zu", s, j));
      data.truth.concepts[markers[s].back()] = static_cast<int>(s);
    }
    all.insert(all.end(), pools[s].begin(), pools[s].end());
    all.insert(all.end(), markers[s].begin(), markers[s].end());
  }
  for (std::size_t j = 0; j < spec.shared_concepts; ++j) {
    background.push_back(numbered("SH_%02zu", j));
    all.push_back(background.back());
    data.truth.concepts[background.back()] = -1;
  }
  std::uniform_int_distribution<std::size_t> word(0, std::size(kWords) - 1);
  for (std::size_t g = 0; g < all.size(); ++g) {
    data.descriptions[all[g]] =
        std::string(kWords[word(rng)]) + " " + kWords[word(rng)] + " item " + std::to_string(g);
  }

  std::uniform_int_distribution<std::size_t> subtype(0, spec.n_subtypes - 1);
  std::uniform_int_distribution<std::size_t> size(spec.codes_min, spec.codes_max);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  const int width = static_cast<int>(std::to_string(spec.n_visits).size());
  for (std::size_t v = 0; v < spec.n_visits; ++v) {
    const std::size_t s = subtype(rng);
    const bool positive = unit(rng) < spec.label_probs[s];
    const std::size_t n = size(rng);
    VisitRecord record;
    char id[32];
    std::snprintf(id, sizeof id, "V%0*zu", width, v);
    record.visit_id = id;
    std::set<std::string> seen;
    const std::size_t regular_codes = positive ? n - 1 : n;
    while (record.codes.size() < regular_codes) {
      const std::vector<std::string>& from = unit(rng) < spec.noise_rate ? background : pools[s];
      std::uniform_int_distribution<std::size_t> pick(0, from.size() - 1);
      const std::string& code = from[pick(rng)];
      if (seen.insert(code).second) record.codes.push_back(code);
    }
    if (positive) {
      std::uniform_int_distribution<std::size_t> pick(0, markers[s].size() - 1);
      std::uniform_int_distribution<std::size_t> slot(0, record.codes.size());
      record.codes.insert(record.codes.begin() + static_cast<std::ptrdiff_t>(slot(rng)),
                          markers[s][pick(rng)]);
    }
    record.labels = {positive ? 1 : 0};
    data.truth.visits[record.visit_id] = static_cast<int>(s);
    data.visits.push_back(std::move(record));
  }
  return data;
}

void write_synthetic(const std::filesystem::path& dir, const SyntheticData& data) {
  std::filesystem::create_directories(dir);
  write_visits(dir / "visits.jsonl", data.visits);
  write_descriptions(dir / "descriptions.csv", data.descriptions);
  write_ground_truth(dir / "ground_truth.csv", data.truth);
}

}  // namespace coclust
