#include <algorithm>
#include <cmath>

#include "doctest.h"
#include "lidarint/error.hpp"
#include "lidarint/file_util.hpp"
#include "lidarint/ontology.hpp"
#include "lidarint/robust_stats.hpp"
#include "test_support.hpp"

using namespace lidarint;
using testing_support::Gen;
using testing_support::TempDir;

TEST_CASE("format_double round-trips exactly") {
  Gen gen(3);
  for (int i = 0; i < 2000; ++i) {
    const double v = gen.normal(0, 1) * std::pow(10.0, gen.uniform(-30, 30));
    CHECK(parse_double(format_double(v), "test") == v);
  }
  CHECK(format_double(6.0) == "6");
}

TEST_CASE("strict number parsing") {
  CHECK_THROWS_AS(parse_double("1.5x", "ctx"), FormatError);
  CHECK_THROWS_AS(parse_double("", "ctx"), FormatError);
  CHECK_THROWS_AS(parse_int("3.5", "ctx"), FormatError);
  CHECK(parse_int("-12", "ctx") == -12);
}

TEST_CASE("atomic write leaves no temp file behind") {
  TempDir dir;
  write_file_atomic(dir / "a.txt", std::string_view("hello\n"));
  write_file_atomic(dir / "a.txt", std::string_view("world\n"));
  CHECK(read_file_text(dir / "a.txt") == "world\n");
  std::size_t files = 0;
  for ([[maybe_unused]] const auto& e : std::filesystem::directory_iterator(dir.path())) ++files;
  CHECK(files == 1);
  CHECK_THROWS_AS(write_file_atomic("/nonexistent/dir/a.txt", std::string_view("x")), IoError);
}

TEST_CASE("text helpers") {
  const auto lines = split_lines("a\nb c\r\n\nd");
  REQUIRE(lines.size() == 4);
  CHECK(lines[1] == "b c");
  CHECK(lines[2].empty());
  const auto tok = split_ws("  x\t y  z ");
  REQUIRE(tok.size() == 3);
  CHECK(tok[2] == "z");
  CHECK(comment_block("k v\nk2 v2\n") == "# k v\n# k2 v2\n");
}

TEST_CASE("nearest-rank percentile against a sort oracle") {
  Gen gen(5);
  for (int trial = 0; trial < 200; ++trial) {
    const std::size_t n = 1 + gen.index(500);
    std::vector<double> v(n);
    for (auto& x : v) x = gen.uniform(-10, 10);
    const double p = trial % 3 == 0 ? 99.0 : gen.uniform(0.5, 100.0);
    auto sorted = v;
    std::sort(sorted.begin(), sorted.end());
    const auto rank = static_cast<std::size_t>(std::ceil(p / 100.0 * static_cast<double>(n)));
    const double expected = sorted[std::max<std::size_t>(rank, 1) - 1];
    CHECK(nearest_rank_percentile(v, p) == expected);
    auto copy = v;
    CHECK(nearest_rank_percentile_inplace(copy, p) == expected);
  }
}

TEST_CASE("99th percentile of small samples is the maximum") {
  std::vector<double> v{3, 9, 1, 4};
  CHECK(nearest_rank_percentile(v, 99.0) == 9.0);
  CHECK(nearest_rank_percentile(v, 100.0) == 9.0);
  CHECK_THROWS_AS(nearest_rank_percentile(std::vector<double>{}, 50.0), ContractError);
  CHECK_THROWS_AS(nearest_rank_percentile(v, 0.0), ContractError);
}

TEST_CASE("interpolated quantile") {
  CHECK(interpolated_quantile({1, 2, 3, 4, 5}, 0.25) == 2.0);
  CHECK(interpolated_quantile({1, 2}, 0.5) == 1.5);
  CHECK(interpolated_quantile({7}, 0.75) == 7.0);
}

TEST_CASE("ontology parsing") {
  const auto onto = Ontology::parse("# comment\n3 grass\n4 tree\n\n17 person\n");
  CHECK(onto.map(3) == ClassId::grass);
  CHECK(onto.map(17) == ClassId::person);
  CHECK(onto.map(5) == ClassId::void_);
  CHECK(onto.is_listed(4));
  CHECK_FALSE(onto.is_listed(5));
  CHECK(onto.raw_id_for(ClassId::tree) == 4);
  CHECK_FALSE(onto.raw_id_for(ClassId::bush).has_value());
  CHECK(onto.raw_id_for(ClassId::void_).has_value());

  CHECK_THROWS_AS(Ontology::parse("3 grass\n3 tree\n"), FormatError);
  CHECK_THROWS_AS(Ontology::parse("70000 grass\n"), FormatError);
  CHECK_THROWS_AS(Ontology::parse("3 car\n"), FormatError);
  try {
    Ontology::parse("1 grass\n2 oops\n");
    FAIL("expected a format error");
  } catch (const FormatError& e) {
    CHECK(std::string(e.what()).find("line 2") != std::string::npos);
  }
}

TEST_CASE("property: every 16-bit id maps to exactly one valid class") {
  const auto onto = Ontology::parse("3 grass\n4 tree\n19 bush\n31 puddle\n17 person\n0 void\n");
  for (std::uint32_t id = 0; id <= 0xFFFF; ++id) {
    const auto c = onto.map(static_cast<std::uint16_t>(id));
    CHECK_UNARY(index_of(c) < kClassCount);
  }
}

TEST_CASE("shipped ontology files load") {
  const auto root = std::filesystem::path(LIDARINT_SOURCE_DIR) / "config";
  const auto rellis = Ontology::load(root / "rellis3d_ontology.txt");
  CHECK(rellis.map(3) == ClassId::grass);
  CHECK(rellis.map(4) == ClassId::tree);
  CHECK(rellis.map(31) == ClassId::puddle);
  const auto ident = Ontology::load(root / "identity_ontology.txt");
  for (std::size_t c = 0; c < kClassCount; ++c) {
    CHECK(ident.map(static_cast<std::uint16_t>(c)) == class_from_index(c));
  }
}

TEST_CASE("error kinds are named") {
  CHECK(to_string(ErrorKind::format) == "format");
  const GateError e("x");
  CHECK(e.kind() == ErrorKind::gate);
}
