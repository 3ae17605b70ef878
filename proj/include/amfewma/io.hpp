#pragma once

#include "amfewma/simgen.hpp"
#include "amfewma/smoother.hpp"

#include <iosfwd>
#include <string>
#include <vector>

namespace amfewma {

/// One unit's channels, grouped and validated.
using UnitProfiles = std::vector<DiscreteProfile>;

struct IngestOptions {
  int min_rows_per_channel = 2;
};

struct IngestReport {
  int rows_read = 0;
  int units = 0;
  int channels = 0;
};

/// Parse long-format CSV (unit_id,channel,t,y) into per-unit channel groups.
/// Malformed rows raise errors naming the offending line.
std::vector<UnitProfiles> ingest_csv(std::istream& in, const IngestOptions& options,
                                     IngestReport* report = nullptr);
std::vector<UnitProfiles> ingest_csv_file(const std::string& path, const IngestOptions& options,
                                          IngestReport* report = nullptr);

void write_profiles_csv(std::ostream& out, const std::vector<UnitProfiles>& units);

/// JSON sidecar describing how a simulated data set was produced.
std::string scenario_sidecar_json(const ScenarioSpec& spec, int n_units, uint64_t seed,
                                  bool as_printed);

std::string read_text_file(const std::string& path);
void write_text_file(const std::string& path, const std::string& content);

}  // namespace amfewma
