#include "coclust/io.hpp"

#include <fstream>
#include <sstream>

#include <json.hpp>

#include "coclust/error.hpp"

namespace coclust {

namespace {

std::ifstream open_input(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open " + path.string());
  return in;
}

std::ofstream open_output(const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write " + path.string());
  return out;
}

std::string where(const std::filesystem::path& path, std::size_t line) {
  return path.string() + ":" + std::to_string(line) + ": ";
}

}  // namespace

std::vector<VisitRecord> read_visits(const std::filesystem::path& path) {
  std::ifstream in = open_input(path);
  std::vector<VisitRecord> visits;
  std::string line;
  for (std::size_t number = 1; std::getline(in, line); ++number) {
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    VisitRecord v;
    try {
      const nlohmann::json j = nlohmann::json::parse(line);
      v.visit_id = j.at("visit_id").get<std::string>();
      v.codes = j.at("codes").get<std::vector<std::string>>();
      if (j.contains("labels") && !j.at("labels").is_null()) {
        for (const auto& x : j.at("labels")) {
          const int y = x.get<int>();
          if (y != 0 && y != 1) throw DataError(where(path, number) + "labels must be 0 or 1");
          v.labels.push_back(y);
        }
      }
    } catch (const nlohmann::json::exception& e) {
      throw DataError(where(path, number) + e.what());
    }
    visits.push_back(std::move(v));
  }
  if (visits.empty()) throw DataError(path.string() + ": no visits");
  return visits;
}

void write_visits(const std::filesystem::path& path, const std::vector<VisitRecord>& visits) {
  std::ofstream out = open_output(path);
  for (const VisitRecord& v : visits) {
    nlohmann::json j;
    j["visit_id"] = v.visit_id;
    j["codes"] = v.codes;
    j["labels"] = v.labels;
    out << j.dump() << '\n';
  }
}

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> fields;
  std::string field;
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    const char c = line[i];
    if (quoted) {
      if (c == '"' && i + 1 < line.size() && line[i + 1] == '"') {
        field += '"';
        ++i;
      } else if (c == '"') {
        quoted = false;
      } else {
        field += c;
      }
    } else if (c == '"') {
      quoted = true;
    } else if (c == ',') {
      fields.push_back(std::move(field));
      field.clear();
    } else if (c != '\r') {
      field += c;
    }
  }
  if (quoted) throw DataError("unterminated quote in CSV line: " + line);
  fields.push_back(std::move(field));
  return fields;
}

std::string csv_escape(const std::string& field) {
  if (field.find_first_of(",\"\n") == std::string::npos) return field;
  std::string out = "\"";
  for (char c : field) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + '"';
}

DescriptionMap read_descriptions(const std::filesystem::path& path) {
  std::ifstream in = open_input(path);
  DescriptionMap out;
  std::string line;
  for (std::size_t number = 1; std::getline(in, line); ++number) {
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    std::vector<std::string> fields;
    try {
      fields = split_csv_line(line);
    } catch (const DataError& e) {
      throw DataError(where(path, number) + e.what());
    }
    if (number == 1 && fields.size() == 2 && fields[0] == "code" && fields[1] == "description") {
      continue;
    }
    if (fields.size() != 2) {
      throw DataError(where(path, number) + "expected 2 columns, got " +
                      std::to_string(fields.size()));
    }
    out[fields[0]] = fields[1];
  }
  return out;
}

void write_descriptions(const std::filesystem::path& path, const DescriptionMap& descriptions) {
  std::ofstream out = open_output(path);
  out << "code,description\n";
  for (const auto& [code, text] : descriptions) {
    out << csv_escape(code) << ',' << csv_escape(text) << '\n';
  }
}

GroundTruth read_ground_truth(const std::filesystem::path& path) {
  std::ifstream in = open_input(path);
  GroundTruth truth;
  std::string line;
  for (std::size_t number = 1; std::getline(in, line); ++number) {
    if (number == 1 || line.empty()) continue;
    const std::vector<std::string> f = split_csv_line(line);
    if (f.size() != 3) throw DataError(where(path, number) + "expected kind,id,subtype");
    int subtype = 0;
    try {
      subtype = std::stoi(f[2]);
    } catch (const std::exception&) {
      throw DataError(where(path, number) + "bad subtype '" + f[2] + "'");
    }
    if (f[0] == "concept") {
      truth.concepts[f[1]] = subtype;
    } else if (f[0] == "visit") {
      truth.visits[f[1]] = subtype;
    } else {
      throw DataError(where(path, number) + "unknown kind '" + f[0] + "'");
    }
  }
  return truth;
}

void write_ground_truth(const std::filesystem::path& path, const GroundTruth& truth) {
  std::ofstream out = open_output(path);
  out << "kind,id,subtype\n";
  for (const auto& [id, s] : truth.concepts) out << "concept," << csv_escape(id) << ',' << s << '\n';
  for (const auto& [id, s] : truth.visits) out << "visit," << csv_escape(id) << ',' << s << '\n';
}

std::string read_text_file(const std::filesystem::path& path) {
  std::ifstream in = open_input(path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_text_file(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out = open_output(path);
  out << text;
}

}  // namespace coclust
