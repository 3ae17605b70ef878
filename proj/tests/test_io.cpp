#include <doctest.h>

#include "amfewma/io.hpp"

#include <json.hpp>

#include <sstream>

using namespace amfewma;

namespace {

std::vector<UnitProfiles> parse(const std::string& text, IngestReport* report = nullptr) {
  std::istringstream in(text);
  return ingest_csv(in, IngestOptions{}, report);
}

}  // namespace

TEST_CASE("long-format CSV parses into per-unit channel groups") {
  IngestReport report;
  auto units = parse(
      "unit_id,channel,t,y\n"
      "a,1,0.0,1.5\n"
      "a,1,0.5,1.6\n"
      "a,2,0.0,2.5\n"
      "a,2,0.5,2.6\n"
      "b,1,0.0,3.5\n"
      "b,1,1.0,3.6\n"
      "b,2,0.0,4.5\n"
      "b,2,1.0,4.6\n",
      &report);
  REQUIRE(units.size() == 2);
  REQUIRE(units[0].size() == 2);
  CHECK(report.rows_read == 8);
  CHECK(report.units == 2);
  CHECK(report.channels == 2);
  CHECK(units[0][0].unit_id == "a");
  CHECK(units[0][1].channel == 2);
  CHECK(units[0][1].y == std::vector<double>{2.5, 2.6});
  CHECK(units[1][0].unit_id == "b");
  CHECK(units[1][0].t == std::vector<double>{0.0, 1.0});
}

TEST_CASE("unit order follows first appearance, not lexicographic order") {
  auto units = parse(
      "unit_id,channel,t,y\n"
      "zeta,1,0.0,1\n"
      "zeta,1,0.5,2\n"
      "alpha,1,0.0,3\n"
      "alpha,1,0.5,4\n");
  REQUIRE(units.size() == 2);
  CHECK(units[0][0].unit_id == "zeta");
  CHECK(units[1][0].unit_id == "alpha");
}

TEST_CASE("malformed input raises errors naming the offending line") {
  CHECK_THROWS_WITH(parse("unit_id,channel,t,y\na,1,0.0\n"), doctest::Contains("line 2"));
  CHECK_THROWS_WITH(parse("unit_id,channel,t,y\na,1,0.0,1\na,x,0.5,2\n"),
                    doctest::Contains("line 3"));
  CHECK_THROWS_WITH(parse("unit_id,channel,t,y\na,1,abc,1\n"), doctest::Contains("bad t"));
  CHECK_THROWS_WITH(parse("unit_id,channel,t,y\na,1,0.1,1z\n"), doctest::Contains("bad y"));
  CHECK_THROWS_WITH(parse("unit_id,channel,t,y\na,1,1.5,1\n"), doctest::Contains("outside [0,1]"));
  CHECK_THROWS_WITH(parse("unit_id,channel,t,y\na,1,-0.1,1\n"), doctest::Contains("outside [0,1]"));
  CHECK_THROWS_WITH(parse("unit_id,channel,t,y\na,0,0.1,1\n"), doctest::Contains("channel"));
  CHECK_THROWS_WITH(parse("unit_id,channel,t,y\na,1,0.5,1\na,1,0.5,2\n"),
                    doctest::Contains("strictly increasing"));
  CHECK_THROWS_WITH(parse("unit_id,channel,t,y\na,1,0.5,1\na,1,0.4,2\n"),
                    doctest::Contains("strictly increasing"));
  CHECK_THROWS_WITH(parse(""), doctest::Contains("empty"));
  CHECK_THROWS_WITH(parse("unit_id,channel,t,y\n"), doctest::Contains("no data rows"));
}

TEST_CASE("structural validation across units and channels") {
  // non-contiguous channels
  CHECK_THROWS_WITH(parse("unit_id,channel,t,y\na,1,0.0,1\na,1,0.5,1\na,3,0.0,1\na,3,0.5,1\n"),
                    doctest::Contains("contiguous"));
  // inconsistent channel counts across units
  CHECK_THROWS_WITH(
      parse("unit_id,channel,t,y\n"
            "a,1,0.0,1\na,1,0.5,1\na,2,0.0,1\na,2,0.5,1\n"
            "b,1,0.0,1\nb,1,0.5,1\n"),
      doctest::Contains("channels, expected"));
  // too few rows in one channel
  CHECK_THROWS_WITH(parse("unit_id,channel,t,y\na,1,0.0,1\n"), doctest::Contains("too few rows"));
}

TEST_CASE("write and re-ingest is lossless") {
  auto units = parse(
      "unit_id,channel,t,y\n"
      "a,1,0.0,1.2345678901234567\n"
      "a,1,0.3333333333333333,1.6\n"
      "a,2,0.0,-2.5e-3\n"
      "a,2,0.5,2.6e8\n");
  std::ostringstream out;
  write_profiles_csv(out, units);
  auto back = parse(out.str());
  REQUIRE(back.size() == units.size());
  for (size_t u = 0; u < units.size(); ++u)
    for (size_t c = 0; c < units[u].size(); ++c) {
      CHECK(back[u][c].t == units[u][c].t);
      CHECK(back[u][c].y == units[u][c].y);
    }
}

TEST_CASE("scenario sidecar captures the generation settings") {
  ScenarioSpec spec = scenario_table(2, 3);
  std::string text = scenario_sidecar_json(spec, 120, 42, false);
  auto j = nlohmann::json::parse(text);
  CHECK(j["kind"] == "scenario-sidecar");
  CHECK(j["scenario"] == 2);
  CHECK(j["severity"] == 3);
  CHECK(j["m_p"] == doctest::Approx(0.075));
  CHECK(j["n_units"] == 120);
  CHECK(j["seed"] == 42);
  CHECK(j["warp_as_printed"] == false);
}

TEST_CASE("file helpers report unreadable paths") {
  CHECK_THROWS(read_text_file("/nonexistent/path/x.txt"));
  CHECK_THROWS(write_text_file("/nonexistent/dir/y.txt", "z"));
  CHECK_THROWS(ingest_csv_file("/nonexistent/data.csv", IngestOptions{}));
}
