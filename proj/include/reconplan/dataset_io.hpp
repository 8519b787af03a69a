#pragma once
//
// Dataset files. Two encodings of the same three tables (units, roads,
// dependencies):
//
//   * JSON document (canonical; used for per-cycle snapshots "cycle-<n>.dataset")
//   * sectioned CSV: "[units]", "[roads]", "[dependencies]" and optional "[meta]"
//     lines each followed by a header row and data rows.
//
// Optional columns: units.status (derived from vulnerability), units.priority
// (derived from kind), roads.cost/time (default 0), roads.priority (default 8),
// roads.direct_benefit (default 0). docs/dataset-format.md has the full layout.
//

#include <charconv>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "city_model.hpp"
#include "error.hpp"

namespace reconplan {

inline constexpr std::string_view kDatasetFormat = "reconplan-dataset";
inline constexpr int kDatasetVersion = 1;

namespace detail {

inline std::string trim(std::string_view s) {
  auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string_view::npos) return {};
  auto e = s.find_last_not_of(" \t\r\n");
  return std::string(s.substr(b, e - b + 1));
}

// Splits one CSV record; supports double-quoted fields with "" escapes.
inline std::vector<std::string> split_csv(std::string_view line) {
  std::vector<std::string> out;
  std::string cur;
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    char c = line[i];
    if (quoted) {
      if (c == '"' && i + 1 < line.size() && line[i + 1] == '"') {
        cur.push_back('"');
        ++i;
      } else if (c == '"') {
        quoted = false;
      } else {
        cur.push_back(c);
      }
    } else if (c == '"') {
      quoted = true;
    } else if (c == ',') {
      out.push_back(trim(cur));
      cur.clear();
    } else {
      cur.push_back(c);
    }
  }
  out.push_back(trim(cur));
  return out;
}

template <class T>
T parse_number(const std::string& text, const std::string& where) {
  T value{};
  const char* first = text.data();
  const char* last = first + text.size();
  auto [ptr, ec] = std::from_chars(first, last, value);
  if (ec != std::errc{} || ptr != last) throw ValidationError("expected a number, got '" + text + "'", where);
  return value;
}

inline int parse_binary(const std::string& text, const std::string& where) {
  int v = parse_number<int>(text, where);
  if (v != 0 && v != 1) throw ValidationError("status must be 0 or 1", where);
  return v;
}

class CsvTable {
public:
  std::vector<std::string> header;
  std::vector<std::pair<std::size_t, std::vector<std::string>>> rows;  // (file line, cells)

  std::optional<std::size_t> column(std::string_view name) const {
    for (std::size_t i = 0; i < header.size(); ++i)
      if (header[i] == name) return i;
    return std::nullopt;
  }

  // Cell text or nullopt when the column is absent or the cell is blank.
  std::optional<std::string> cell(const std::vector<std::string>& row, std::string_view name) const {
    auto c = column(name);
    if (!c || *c >= row.size() || row[*c].empty()) return std::nullopt;
    return row[*c];
  }

  std::string required(const std::vector<std::string>& row, std::string_view name, const std::string& where) const {
    auto v = cell(row, name);
    if (!v) throw ValidationError("missing required field", where + ", field " + std::string(name));
    return *v;
  }
};

}  // namespace detail

// Parses the sectioned CSV encoding. Missing status/priority are filled via
// derive_status / priority_for_kind; the result is validated.
inline Dataset parse_dataset_csv(std::istream& in) {
  std::map<std::string, detail::CsvTable> tables;
  std::string section;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    auto t = detail::trim(line);
    if (t.empty() || t[0] == '#') continue;
    if (t.front() == '[' && t.back() == ']') {
      section = t.substr(1, t.size() - 2);
      if (section != "units" && section != "roads" && section != "dependencies" && section != "meta")
        throw ValidationError("unknown section [" + section + "]", "line " + std::to_string(lineno));
      if (tables.count(section)) throw ValidationError("duplicate section [" + section + "]", "line " + std::to_string(lineno));
      tables[section];
      continue;
    }
    if (section.empty()) throw ValidationError("data before the first [section] line", "line " + std::to_string(lineno));
    auto& tab = tables[section];
    auto cells = detail::split_csv(t);
    if (tab.header.empty()) {
      tab.header = std::move(cells);
    } else {
      if (cells.size() > tab.header.size())
        throw ValidationError("row has " + std::to_string(cells.size()) + " cells, header has " + std::to_string(tab.header.size()),
                              section + " line " + std::to_string(lineno));
      tab.rows.emplace_back(lineno, std::move(cells));
    }
  }
  if (!tables.count("units")) throw ValidationError("missing [units] section");

  Dataset ds;
  if (auto it = tables.find("meta"); it != tables.end() && !it->second.rows.empty()) {
    const auto& [ln, row] = it->second.rows.front();
    if (auto c = it->second.cell(row, "cycle")) ds.cycle = detail::parse_number<int>(*c, "meta line " + std::to_string(ln) + ", field cycle");
  }

  const auto& units = tables["units"];
  for (const auto& [ln, row] : units.rows) {
    const std::string at = "units line " + std::to_string(ln);
    Unit u;
    u.id = units.required(row, "id", at);
    try {
      u.kind = parse_kind(units.required(row, "kind", at));
    } catch (const ValidationError& e) {
      if (!e.where().empty()) throw;
      throw ValidationError(e.what(), at + ", field kind");
    }
    u.vulnerability = detail::parse_number<int>(units.required(row, "vulnerability", at), at + ", field vulnerability");
    if (u.vulnerability < 0 || u.vulnerability > 5) throw ValidationError("vulnerability outside 0..5", at + ", field vulnerability");
    if (auto s = units.cell(row, "status")) u.status = detail::parse_binary(*s, at + ", field status");
    else u.status = derive_status(u.vulnerability);
    u.cost = detail::parse_number<double>(units.required(row, "cost", at), at + ", field cost");
    u.time = detail::parse_number<double>(units.required(row, "time", at), at + ", field time");
    if (auto p = units.cell(row, "priority")) u.priority = detail::parse_number<int>(*p, at + ", field priority");
    else u.priority = priority_for_kind(u.kind);
    u.direct_benefit = detail::parse_number<long>(units.required(row, "direct_benefit", at), at + ", field direct_benefit");
    ds.units.push_back(std::move(u));
  }

  if (auto it = tables.find("roads"); it != tables.end()) {
    const auto& roads = it->second;
    for (const auto& [ln, row] : roads.rows) {
      const std::string at = "roads line " + std::to_string(ln);
      RoadEdge r;
      r.from = roads.required(row, "from", at);
      r.to = roads.required(row, "to", at);
      r.status = detail::parse_binary(roads.required(row, "status", at), at + ", field status");
      r.length = detail::parse_number<double>(roads.required(row, "length", at), at + ", field length");
      if (auto c = roads.cell(row, "cost")) r.cost = detail::parse_number<double>(*c, at + ", field cost");
      if (auto c = roads.cell(row, "time")) r.time = detail::parse_number<double>(*c, at + ", field time");
      if (auto c = roads.cell(row, "priority")) r.priority = detail::parse_number<int>(*c, at + ", field priority");
      if (auto c = roads.cell(row, "direct_benefit")) r.direct_benefit = detail::parse_number<long>(*c, at + ", field direct_benefit");
      ds.roads.push_back(std::move(r));
    }
  }

  if (auto it = tables.find("dependencies"); it != tables.end()) {
    const auto& deps = it->second;
    for (const auto& [ln, row] : deps.rows) {
      const std::string at = "dependencies line " + std::to_string(ln);
      ds.dependencies.push_back({deps.required(row, "blocked", at), deps.required(row, "blocker", at)});
    }
  }

  validate(ds);
  return ds;
}

inline nlohmann::json dataset_to_json(const Dataset& ds) {
  nlohmann::json j;
  j["format"] = kDatasetFormat;
  j["version"] = kDatasetVersion;
  j["cycle"] = ds.cycle;
  j["units"] = nlohmann::json::array();
  for (const auto& u : ds.units) {
    j["units"].push_back({{"id", u.id},
                          {"kind", kind_name(u.kind)},
                          {"vulnerability", u.vulnerability},
                          {"status", u.status},
                          {"cost", u.cost},
                          {"time", u.time},
                          {"priority", u.priority},
                          {"direct_benefit", u.direct_benefit}});
  }
  j["roads"] = nlohmann::json::array();
  for (const auto& r : ds.roads) {
    j["roads"].push_back({{"from", r.from},
                          {"to", r.to},
                          {"status", r.status},
                          {"length", r.length},
                          {"cost", r.cost},
                          {"time", r.time},
                          {"priority", r.priority},
                          {"direct_benefit", r.direct_benefit}});
  }
  j["dependencies"] = nlohmann::json::array();
  for (const auto& d : ds.dependencies) j["dependencies"].push_back({{"blocked", d.blocked}, {"blocker", d.blocker}});
  return j;
}

inline Dataset dataset_from_json(const nlohmann::json& j) {
  auto field = [](const nlohmann::json& obj, const char* name, const std::string& at) -> const nlohmann::json& {
    if (!obj.contains(name) || obj[name].is_null()) throw ValidationError("missing required field", at + ", field " + name);
    return obj[name];
  };
  auto as = [](const nlohmann::json& v, auto tag, const std::string& where) {
    using T = decltype(tag);
    try {
      return v.get<T>();
    } catch (const nlohmann::json::exception&) {
      throw ValidationError("wrong type: " + v.dump(), where);
    }
  };

  if (!j.is_object()) throw ValidationError("dataset document must be a JSON object");
  if (j.contains("format") && j["format"] != kDatasetFormat) throw ValidationError("unexpected format tag", "format");
  if (j.contains("version") && j["version"] != kDatasetVersion) throw ValidationError("unsupported version", "version");

  Dataset ds;
  if (j.contains("cycle")) ds.cycle = as(j["cycle"], int{}, "cycle");
  if (!j.contains("units") || !j["units"].is_array()) throw ValidationError("missing units table", "units");
  for (std::size_t i = 0; i < j["units"].size(); ++i) {
    const auto& o = j["units"][i];
    const std::string at = "units row " + std::to_string(i + 1);
    Unit u;
    u.id = as(field(o, "id", at), std::string{}, at + ", field id");
    u.kind = [&] {
      try {
        return parse_kind(as(field(o, "kind", at), std::string{}, at + ", field kind"));
      } catch (const ValidationError& e) {
        if (!e.where().empty()) throw;
        throw ValidationError(e.what(), at + ", field kind");
      }
    }();
    u.vulnerability = as(field(o, "vulnerability", at), int{}, at + ", field vulnerability");
    if (u.vulnerability < 0 || u.vulnerability > 5) throw ValidationError("vulnerability outside 0..5", at + ", field vulnerability");
    u.status = o.contains("status") && !o["status"].is_null() ? as(o["status"], int{}, at + ", field status") : derive_status(u.vulnerability);
    u.cost = as(field(o, "cost", at), double{}, at + ", field cost");
    u.time = as(field(o, "time", at), double{}, at + ", field time");
    u.priority = o.contains("priority") && !o["priority"].is_null() ? as(o["priority"], int{}, at + ", field priority")
                                                                     : priority_for_kind(u.kind);
    u.direct_benefit = as(field(o, "direct_benefit", at), long{}, at + ", field direct_benefit");
    ds.units.push_back(std::move(u));
  }
  if (j.contains("roads")) {
    for (std::size_t i = 0; i < j["roads"].size(); ++i) {
      const auto& o = j["roads"][i];
      const std::string at = "roads row " + std::to_string(i + 1);
      RoadEdge r;
      r.from = as(field(o, "from", at), std::string{}, at + ", field from");
      r.to = as(field(o, "to", at), std::string{}, at + ", field to");
      r.status = as(field(o, "status", at), int{}, at + ", field status");
      r.length = as(field(o, "length", at), double{}, at + ", field length");
      if (o.contains("cost")) r.cost = as(o["cost"], double{}, at + ", field cost");
      if (o.contains("time")) r.time = as(o["time"], double{}, at + ", field time");
      if (o.contains("priority")) r.priority = as(o["priority"], int{}, at + ", field priority");
      if (o.contains("direct_benefit")) r.direct_benefit = as(o["direct_benefit"], long{}, at + ", field direct_benefit");
      ds.roads.push_back(std::move(r));
    }
  }
  if (j.contains("dependencies")) {
    for (std::size_t i = 0; i < j["dependencies"].size(); ++i) {
      const auto& o = j["dependencies"][i];
      const std::string at = "dependencies row " + std::to_string(i + 1);
      ds.dependencies.push_back({as(field(o, "blocked", at), std::string{}, at + ", field blocked"),
                                 as(field(o, "blocker", at), std::string{}, at + ", field blocker")});
    }
  }
  validate(ds);
  return ds;
}

// Reads either encoding; JSON is detected by a leading '{'.
inline Dataset load_dataset(std::istream& in) {
  std::stringstream buf;
  buf << in.rdbuf();
  const std::string text = buf.str();
  const auto first = text.find_first_not_of(" \t\r\n");
  if (first != std::string::npos && text[first] == '{') {
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(text);
    } catch (const nlohmann::json::parse_error& e) {
      throw ValidationError(std::string("malformed JSON: ") + e.what());
    }
    return dataset_from_json(j);
  }
  std::istringstream csv(text);
  return parse_dataset_csv(csv);
}

inline Dataset load_dataset(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot open dataset file '" + path.string() + "'");
  return load_dataset(in);
}

inline void save_dataset(const Dataset& ds, std::ostream& out) { out << dataset_to_json(ds).dump(2) << '\n'; }

inline void save_dataset(const Dataset& ds, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw Error("cannot write '" + path.string() + "'");
  save_dataset(ds, out);
}

// Sectioned CSV writer (all columns, canonical order).
inline void save_dataset_csv(const Dataset& ds, std::ostream& out) {
  auto num = [](double v) {
    std::ostringstream s;
    s.precision(17);
    s << v;
    return s.str();
  };
  out << "[meta]\ncycle\n" << ds.cycle << "\n[units]\nid,kind,vulnerability,status,cost,time,priority,direct_benefit\n";
  for (const auto& u : ds.units)
    out << u.id << ',' << kind_name(u.kind) << ',' << u.vulnerability << ',' << u.status << ',' << num(u.cost) << ','
        << num(u.time) << ',' << u.priority << ',' << u.direct_benefit << '\n';
  out << "[roads]\nfrom,to,status,length,cost,time,priority,direct_benefit\n";
  for (const auto& r : ds.roads)
    out << r.from << ',' << r.to << ',' << r.status << ',' << num(r.length) << ',' << num(r.cost) << ',' << num(r.time) << ','
        << r.priority << ',' << r.direct_benefit << '\n';
  out << "[dependencies]\nblocked,blocker\n";
  for (const auto& d : ds.dependencies) out << d.blocked << ',' << d.blocker << '\n';
}

inline std::string snapshot_name(int cycle) { return "cycle-" + std::to_string(cycle) + ".dataset"; }

}  // namespace reconplan
