#include "ccgas/error.hpp"
#include "ccgas/report.hpp"

#include "fixtures.hpp"

#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

using namespace ccgas;
using namespace fixtures;

TEST_CASE("report: FNV-1a reference values") {
  CHECK(fnv1a("") == 0xcbf29ce484222325ULL);
  CHECK(fnv1a("a") == 0xaf63dc4c8601ec8cULL);
  CHECK(fnv1a("foobar") == 0x85944171f73967e8ULL);
  CHECK(hex64(0xabcULL) == "0000000000000abc");
}

TEST_CASE("report: number formatting") {
  CHECK(fmt_num(0.0) == "0");
  CHECK(fmt_num(-0.0) == "0");
  CHECK(fmt_num(1.5) == "1.5");
  CHECK(fmt_num(1.0 / 3.0) == "0.3333333333");
  CHECK(fmt_num(std::nan("")) == "nan");
}

TEST_CASE("report: tables carry the provenance line") {
  SummaryRow r;
  r.label = "cc";
  r.expected_cost = 80.5;
  const std::string csv = summary_csv({r}, "00ff", 7);
  std::istringstream in(csv);
  std::string line;
  std::getline(in, line);
  CHECK(line == "# config_hash=00ff seed=7");
  std::getline(in, line);
  CHECK(line.rfind("configuration,expected_cost,", 0) == 0);
  std::getline(in, line);
  CHECK(line == "cc,80.5,0,0,0,0,,,");
  CHECK_THROWS_AS(table_csv({"a", "b"}, {{"1"}}, "0", 0), DimensionError);
}

TEST_CASE("report: regulation totals") {
  const GasNetwork net = small_mesh();
  VectorXd k = VectorXd::Zero(net.num_edges());
  k(1) = 16.0;  // compressor
  k(5) = -9.0;  // valve
  const auto [c, v] = regulation_totals(net, k);
  CHECK(c == doctest::Approx(4.0));
  CHECK(v == doctest::Approx(3.0));
}

TEST_CASE("report: write_text creates directories") {
  const auto dir = std::filesystem::temp_directory_path() / "ccgas_report_test" / "nested";
  std::filesystem::remove_all(dir.parent_path());
  write_text(dir / "x.csv", "a,b\n");
  std::ifstream f(dir / "x.csv");
  std::string s((std::istreambuf_iterator<char>(f)), {});
  CHECK(s == "a,b\n");
  std::filesystem::remove_all(dir.parent_path());
}
