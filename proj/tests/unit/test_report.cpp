#include <doctest.h>

#include <cmath>
#include <sstream>

#include "uidpipe/error.hpp"
#include "uidpipe/io/csv.hpp"
#include "uidpipe/report/binned_density.hpp"
#include "uidpipe/rng.hpp"

using namespace uidpipe;
using namespace uidpipe::report;

TEST_CASE("average ranks and spearman") {
  const std::vector<double> v{3, 1, 3, 2};
  CHECK(average_ranks(v) == std::vector<double>{3.5, 1, 3.5, 2});
  const std::vector<double> a{1, 2, 3, 4}, b{10, 20, 25, 100}, c{4, 3, 2, 1};
  CHECK(spearman(a, b).value() == doctest::Approx(1.0));
  CHECK(spearman(a, c).value() == doctest::Approx(-1.0));
  CHECK_FALSE(spearman(a, std::vector<double>{1, 1, 1, 1}));
  // Pearson correlation of ranks with ties, worked by hand: ranks (1,2,3,4) and (1.5,1.5,3,4).
  CHECK(spearman(a, std::vector<double>{5, 5, 6, 7}).value() == doctest::Approx(4.5 / std::sqrt(5.0 * 4.5)));
}

TEST_CASE("monotone generator gives increasing bin proportions") {
  Rng rng(99);
  std::vector<double> d;
  std::vector<int> y;
  for (int i = 0; i < 20000; ++i) {
    const double x = rng.uniform(0.0, 8.0);
    d.push_back(x);
    y.push_back(rng.uniform() < 1.0 / (1.0 + std::exp(-(x - 4.0))) ? 1 : 0);
  }
  auto r = binned_density(d, y, 10);
  REQUIRE(r.bins.size() == 10);
  for (std::size_t b = 1; b < r.bins.size(); ++b) CHECK(r.bins[b].proportion > r.bins[b - 1].proportion);
  CHECK(r.spearman.value() == doctest::Approx(1.0));
  std::size_t total = 0;
  for (const auto& b : r.bins) total += b.count;
  CHECK(total == d.size());
  CHECK(r.warnings.empty());
}

TEST_CASE("constant density merges into one bin") {
  std::vector<double> d(50, 1.25);
  std::vector<int> y(50, 0);
  y[3] = 1;
  auto r = binned_density(d, y, 10);
  REQUIRE(r.bins.size() == 1);
  CHECK(r.bins[0].count == 50);
  CHECK(r.bins[0].proportion == doctest::Approx(0.02));
  CHECK_FALSE(r.warnings.empty());
  CHECK_FALSE(r.spearman);
}

TEST_CASE("shuffled labels give rho near zero on average") {
  double sum = 0;
  for (std::uint64_t seed = 1; seed <= 20; ++seed) {
    Rng rng(seed);
    std::vector<double> d;
    std::vector<int> y;
    for (int i = 0; i < 5000; ++i) {
      d.push_back(rng.normal());
      y.push_back(rng.uniform() < 0.4 ? 1 : 0);
    }
    sum += binned_density(d, y, 10).spearman.value_or(0.0);
  }
  // Each rho has sd about 1/3 under the null; the mean of 20 about 0.075.
  CHECK(std::abs(sum / 20) < 0.25);
}

TEST_CASE("per-verb breakdown and bad input") {
  const std::vector<double> d{1, 2, 3, 4};
  const std::vector<int> y{0, 1, 1, 1};
  const std::vector<std::string> v{"know", "think", "know", "think"};
  auto r = binned_density(d, y, 2, v);
  REQUIRE(r.verbs.size() == 2);
  CHECK(r.verbs[0].verb == "know");
  CHECK(r.verbs[0].mean_density == 2.0);
  CHECK(r.verbs[0].proportion == 0.5);
  CHECK_THROWS_AS(binned_density(std::vector<double>{}, std::vector<int>{}, 10), DataError);
  CHECK_THROWS_AS(binned_density(d, std::vector<int>{1}, 10), ArgumentError);
  CHECK_THROWS_AS(binned_density(std::vector<double>{NAN}, std::vector<int>{1}, 10), DataError);
}

TEST_CASE("csv quoting round trip") {
  io::CsvTable t;
  t.header = {"a", "b"};
  t.rows = {{"plain", "with,comma"}, {"say \"hi\"", "two\nlines"}, {"", "x"}};
  std::stringstream s;
  io::write_csv(s, t);
  auto back = io::read_csv(s);
  CHECK(back.header == t.header);
  CHECK(back.rows == t.rows);
  CHECK(io::csv_escape("q\"") == "\"q\"\"\"");
}

TEST_CASE("csv errors and typed access") {
  std::stringstream bad("a,b\n1,2,3\n");
  try {
    io::read_csv(bad);
    FAIL("expected a parse error");
  } catch (const ParseError& e) {
    CHECK(e.line() == 2);
  }
  std::stringstream ok("n,x\n3,0.25\nx,\n");
  auto t = io::read_csv(ok);
  CHECK(t.integer(0, "n") == 3);
  CHECK(t.number(0, "x") == 0.25);
  CHECK_THROWS_AS(t.integer(1, "n"), DataError);
  CHECK_THROWS_AS(t.column("zzz"), DataError);
  std::stringstream open("a\n\"unterminated\n");
  CHECK_THROWS_AS(io::read_csv(open), ParseError);
}

TEST_CASE("shortest round-trip doubles") {
  CHECK(io::format_double(0.1) == "0.1");
  const double v = 1.0 / 3.0;
  CHECK(std::stod(io::format_double(v)) == v);
  CHECK(io::format_double(NAN) == "NaN");
}
