#include "coclust/features.hpp"

#include <cctype>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <iostream>
#include <set>
#include <unordered_map>

#include <json.hpp>

#include "coclust/error.hpp"

namespace coclust {

namespace {

std::uint64_t fnv1a(std::string_view s) {
  std::uint64_t h = 1469598103934665603ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  return h;
}

}  // namespace

std::vector<double> hashed_fallback(const std::string& code, const std::string& description,
                                    std::size_t dim) {
  if (dim < 1) throw UsageError("hashed_fallback: dimension must be at least 1");
  std::string text = "^";
  for (unsigned char c : description.empty() ? code : description) {
    text.push_back(static_cast<char>(std::tolower(c)));
  }
  text.push_back('$');
  std::vector<double> v(dim, 0.0);
  for (std::size_t i = 0; i + 3 <= text.size(); ++i) {
    v[fnv1a(std::string_view(text).substr(i, 3)) % dim] += 1.0;
  }
  double norm = 0.0;
  for (double x : v) norm += x * x;
  norm = std::sqrt(norm);
  for (double& x : v) x /= norm;
  return v;
}

EmbeddingTable fallback_text_embeddings(const std::vector<std::string>& vocab,
                                        const DescriptionMap& descriptions, std::size_t dim) {
  EmbeddingTable table;
  table.vocab = vocab;
  table.source = EmbeddingSource::textual;
  table.matrix = Tensor::matrix(vocab.size(), dim);
  for (std::size_t i = 0; i < vocab.size(); ++i) {
    auto it = descriptions.find(vocab[i]);
    auto row = hashed_fallback(vocab[i], it == descriptions.end() ? "" : it->second, dim);
    std::copy(row.begin(), row.end(), table.matrix.row(i).begin());
  }
  return table;
}

TextLoadResult load_text_embeddings(const std::filesystem::path& path,
                                    const std::vector<std::string>& vocab,
                                    const DescriptionMap& descriptions, std::size_t fallback_dim) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open vector file " + path.string());
  std::unordered_map<std::string, std::vector<double>> vectors;
  std::size_t dim = 0, duplicates = 0, line_no = 0;
  std::string line;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    const std::string where = path.string() + ":" + std::to_string(line_no);
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(line);
    } catch (const nlohmann::json::exception& e) {
      throw DataError(where + ": malformed line: " + e.what());
    }
    if (!j.is_object() || !j.contains("code") || !j["code"].is_string() || !j.contains("vector") ||
        !j["vector"].is_array() || j["vector"].empty()) {
      throw DataError(where + ": expected {\"code\": string, \"vector\": [numbers]}");
    }
    std::vector<double> v;
    for (const auto& x : j["vector"]) {
      if (!x.is_number()) throw DataError(where + ": non-numeric vector entry");
      v.push_back(x.get<double>());
      if (!std::isfinite(v.back())) throw DataError(where + ": non-finite vector entry");
    }
    if (dim == 0) {
      dim = v.size();
    } else if (v.size() != dim) {
      throw DataError(where + ": vector has " + std::to_string(v.size()) +
                      " entries, expected " + std::to_string(dim));
    }
    const std::string code = j["code"].get<std::string>();
    if (vectors.contains(code)) ++duplicates;
    vectors[code] = std::move(v);
  }
  if (duplicates > 0) {
    std::clog << "warning: " << duplicates << " duplicate code(s) in " << path.string()
              << "; last occurrence kept\n";
  }
  if (dim == 0) dim = fallback_dim;

  TextLoadResult result;
  result.duplicate_count = duplicates;
  result.table.vocab = vocab;
  result.table.source = EmbeddingSource::textual;
  result.table.matrix = Tensor::matrix(vocab.size(), dim);
  for (std::size_t i = 0; i < vocab.size(); ++i) {
    auto it = vectors.find(vocab[i]);
    std::vector<double> row;
    if (it != vectors.end()) {
      row = it->second;
    } else {
      auto d = descriptions.find(vocab[i]);
      row = hashed_fallback(vocab[i], d == descriptions.end() ? "" : d->second, dim);
      ++result.fallback_count;
    }
    std::copy(row.begin(), row.end(), result.table.matrix.row(i).begin());
  }
  if (result.fallback_count > 0) {
    std::clog << "warning: " << result.fallback_count << " code(s) missing from "
              << path.string() << "; using hashed text fallback\n";
  }
  return result;
}

FeatureTable concat_features(const EmbeddingTable& structural, const EmbeddingTable& textual) {
  if (structural.vocab != textual.vocab) {
    std::set<std::string> a(structural.vocab.begin(), structural.vocab.end());
    std::set<std::string> b(textual.vocab.begin(), textual.vocab.end());
    std::string diff;
    for (const auto& c : a) {
      if (!b.contains(c)) diff += " " + c;
    }
    for (const auto& c : b) {
      if (!a.contains(c)) diff += " " + c;
    }
    if (diff.empty()) diff = " (same codes, different order)";
    throw DataError("concat_features: vocabularies differ:" + diff);
  }
  const std::size_t n = structural.vocab.size();
  const std::size_t ds = structural.dim(), dt = textual.dim();
  FeatureTable out;
  out.vocab = structural.vocab;
  out.structural_dim = ds;
  out.text_dim = dt;
  out.matrix = Tensor::matrix(n, ds + dt);
  for (std::size_t i = 0; i < n; ++i) {
    auto dst = out.matrix.row(i);
    std::copy(structural.matrix.row(i).begin(), structural.matrix.row(i).end(), dst.begin());
    std::copy(textual.matrix.row(i).begin(), textual.matrix.row(i).end(), dst.begin() + ds);
  }
  return out;
}

void write_vector_file(const std::filesystem::path& path, const EmbeddingTable& table) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write vector file " + path.string());
  for (std::size_t i = 0; i < table.vocab.size(); ++i) {
    auto row = table.matrix.row(i);
    nlohmann::json j{{"code", table.vocab[i]},
                     {"vector", std::vector<double>(row.begin(), row.end())}};
    out << j.dump() << '\n';
  }
}

}  // namespace coclust
