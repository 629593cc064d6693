/*
 * Copyright 2026 The predgap Authors.
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     https://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#include <cmath>
#include <limits>

#include "common/error.hpp"
#include "common/io.hpp"
#include "common/logistic.hpp"
#include "common/parallel.hpp"
#include "common/rng.hpp"
#include "doctest.h"
#include "fixtures.hpp"

using namespace predgap;

TEST_CASE("sha256 of known inputs") {
  CHECK(Sha256Hex("abc") == "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
  CHECK(Sha256Hex("") == "e3b0c44298fc1c149afbf4c8996fb92427ae41e4649b934ca495991b7852b855");
}

TEST_CASE("rng streams are reproducible and seed-sensitive") {
  Rng a(42), b(42);
  for (int i = 0; i < 100; ++i) CHECK(a.NextU64() == b.NextU64());
  CHECK(Rng(42).NextU64() != Rng(43).NextU64());
  CHECK(DeriveSeed(1, 0) != DeriveSeed(1, 1));
  CHECK(DeriveSeed(1, 5) == DeriveSeed(1, 5));

  Rng r(9);
  double sum = 0, sq = 0;
  const int n = 200000;
  for (int i = 0; i < n; ++i) {
    const double z = r.Normal();
    sum += z;
    sq += z * z;
  }
  CHECK(std::abs(sum / n) < 0.01);
  CHECK(std::abs(sq / n - 1.0) < 0.02);
  for (int i = 0; i < 1000; ++i) CHECK(r.Below(7) < 7);
}

TEST_CASE("format double round-trips") {
  for (double v : {0.1, 1.0 / 3.0, -2.5e-300, 1e300, 123456789.0, 0.0}) {
    CHECK(ParseDouble(FormatDouble(v)) == v);
  }
  CHECK(FormatDouble(0.5) == "0.5");
  CHECK(FormatOptional(std::nullopt).empty());
  CHECK_FALSE(ParseOptionalDouble("").has_value());
  CHECK_THROWS_AS(ParseDouble("abc"), Error);
}

TEST_CASE("csv write then read") {
  testing::TempDir dir("csv");
  {
    CsvWriter w(dir / "t.csv");
    w.WriteRow({"a", "b"});
    w.WriteRow({"1", "x,y"});
    w.WriteRow({"2", ""});
  }
  const CsvTable t = ReadCsv(dir / "t.csv");
  REQUIRE(t.rows.size() == 2);
  CHECK(t.header == std::vector<std::string>{"a", "b"});
  CHECK(t.rows[0][1] == "x,y");
  CHECK(t.rows[1][1].empty());
  CHECK(t.Column("b") == 1);
  CHECK_THROWS_AS(t.Column("zzz"), DependencyError);
}

TEST_CASE("logistic helpers are stable at the extremes") {
  CHECK(Sigmoid(800) == 1.0);
  CHECK(Sigmoid(-800) >= 0.0);
  CHECK(std::isfinite(LogLossFromLogit(-800, 1)));
  CHECK(LogLossFromLogit(-800, 1) == doctest::Approx(800));
  CHECK(LogLossFromLogit(0, 0) == doctest::Approx(std::log(2.0)));
}

TEST_CASE("parallel for covers every index once and rethrows") {
  std::vector<int> hits(10000, 0);
  ParallelFor(hits.size(), [&](size_t i) { hits[i]++; }, 16);
  for (int h : hits) CHECK(h == 1);
  CHECK_THROWS(ParallelFor(100, [](size_t i) {
    if (i == 50) throw InvalidArgument("boom");
  }, 1));
}
