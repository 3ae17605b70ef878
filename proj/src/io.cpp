#include "amfewma/io.hpp"

#include <json.hpp>

#include <charconv>
#include <fstream>
#include <map>
#include <sstream>
#include <stdexcept>

namespace amfewma {

namespace {

double parse_double(const std::string& field, int line_no, const char* what) {
  try {
    size_t pos = 0;
    double v = std::stod(field, &pos);
    if (pos != field.size()) throw std::invalid_argument("trailing characters");
    return v;
  } catch (const std::exception&) {
    throw std::runtime_error("ingest: line " + std::to_string(line_no) + ": bad " + what +
                             " value '" + field + "'");
  }
}

int parse_int(const std::string& field, int line_no, const char* what) {
  try {
    size_t pos = 0;
    int v = std::stoi(field, &pos);
    if (pos != field.size()) throw std::invalid_argument("trailing characters");
    return v;
  } catch (const std::exception&) {
    throw std::runtime_error("ingest: line " + std::to_string(line_no) + ": bad " + what +
                             " value '" + field + "'");
  }
}

}  // namespace

std::vector<UnitProfiles> ingest_csv(std::istream& in, const IngestOptions& options,
                                     IngestReport* report) {
  std::string line;
  if (!std::getline(in, line)) throw std::runtime_error("ingest: empty file");

  // header order fixed: unit_id,channel,t,y
  std::vector<std::string> unit_order;
  std::map<std::string, std::map<int, DiscreteProfile>> by_unit;
  int line_no = 1, rows = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    std::istringstream ls(line);
    std::string unit, channel_s, t_s, y_s;
    if (!std::getline(ls, unit, ',') || !std::getline(ls, channel_s, ',') ||
        !std::getline(ls, t_s, ',') || !std::getline(ls, y_s, ','))
      throw std::runtime_error("ingest: line " + std::to_string(line_no) +
                               ": expected 4 comma-separated fields");
    int channel = parse_int(channel_s, line_no, "channel");
    double t = parse_double(t_s, line_no, "t");
    double y = parse_double(y_s, line_no, "y");
    if (channel < 1)
      throw std::runtime_error("ingest: line " + std::to_string(line_no) +
                               ": channel must be >= 1");
    if (t < 0.0 || t > 1.0)
      throw std::runtime_error("ingest: line " + std::to_string(line_no) +
                               ": t outside [0,1]");
    auto& unit_map = by_unit[unit];
    if (unit_map.empty() && by_unit.size() > unit_order.size()) unit_order.push_back(unit);
    DiscreteProfile& prof = unit_map[channel];
    if (prof.t.empty()) {
      prof.unit_id = unit;
      prof.channel = channel;
    }
    if (!prof.t.empty() && t <= prof.t.back())
      throw std::runtime_error("ingest: line " + std::to_string(line_no) +
                               ": t not strictly increasing within (unit,channel)");
    prof.t.push_back(t);
    prof.y.push_back(y);
    ++rows;
  }
  if (rows == 0) throw std::runtime_error("ingest: no data rows");

  int p = -1;
  std::vector<UnitProfiles> out;
  for (const auto& unit : unit_order) {
    const auto& unit_map = by_unit.at(unit);
    int channels = static_cast<int>(unit_map.size());
    if (p < 0) p = channels;
    if (channels != p)
      throw std::runtime_error("ingest: unit '" + unit + "' has " + std::to_string(channels) +
                               " channels, expected " + std::to_string(p));
    UnitProfiles profs;
    int expect = 1;
    for (const auto& [ch, prof] : unit_map) {
      if (ch != expect++)
        throw std::runtime_error("ingest: unit '" + unit + "' channels are not contiguous 1..p");
      if (static_cast<int>(prof.t.size()) < options.min_rows_per_channel)
        throw std::runtime_error("ingest: unit '" + unit + "' channel " + std::to_string(ch) +
                                 " has too few rows");
      profs.push_back(prof);
    }
    out.push_back(std::move(profs));
  }
  if (report) {
    report->rows_read = rows;
    report->units = static_cast<int>(out.size());
    report->channels = p;
  }
  return out;
}

std::vector<UnitProfiles> ingest_csv_file(const std::string& path, const IngestOptions& options,
                                          IngestReport* report) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("ingest: cannot open " + path);
  return ingest_csv(in, options, report);
}

void write_profiles_csv(std::ostream& out, const std::vector<UnitProfiles>& units) {
  out << "unit_id,channel,t,y\n";
  out.precision(17);
  for (const auto& unit : units)
    for (const auto& ch : unit)
      for (size_t i = 0; i < ch.t.size(); ++i)
        out << ch.unit_id << "," << ch.channel << "," << ch.t[i] << "," << ch.y[i] << "\n";
}

std::string scenario_sidecar_json(const ScenarioSpec& spec, int n_units, uint64_t seed,
                                  bool as_printed) {
  nlohmann::json j;
  j["format_version"] = 1;
  j["kind"] = "scenario-sidecar";
  j["scenario"] = spec.scenario;
  j["severity"] = spec.severity;
  j["m_e"] = spec.m_e;
  j["m_p"] = spec.m_p;
  j["b_e"] = spec.b_e;
  j["b_p"] = spec.b_p;
  j["n_units"] = n_units;
  j["seed"] = seed;
  j["warp_as_printed"] = as_printed;
  return j.dump(2);
}

std::string read_text_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path);
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

void write_text_file(const std::string& path, const std::string& content) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path);
  out << content;
}

}  // namespace amfewma
