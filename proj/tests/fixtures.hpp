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

#ifndef PREDGAP_TESTS_FIXTURES_HPP_
#define PREDGAP_TESTS_FIXTURES_HPP_

#include <Eigen/Dense>
#include <atomic>
#include <cmath>
#include <filesystem>
#include <string>
#include <unistd.h>
#include <vector>

#include "common/io.hpp"
#include "common/rng.hpp"
#include "hetgraph/hetero_graph.hpp"

namespace predgap::testing {

// Scratch directory removed on destruction.
class TempDir {
 public:
  explicit TempDir(const std::string& tag) {
    static std::atomic<int> counter{0};
    path_ = std::filesystem::temp_directory_path() /
            ("predgap_" + tag + "_" + std::to_string(::getpid()) + "_" + std::to_string(counter++));
    std::filesystem::remove_all(path_);
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  const std::filesystem::path& path() const { return path_; }
  std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

 private:
  std::filesystem::path path_;
};

inline std::filesystem::path DataFile(const std::string& name) {
  return std::filesystem::path(PREDGAP_TEST_DATA) / name;
}

// Numeric CSV fixture as a matrix (all columns).
inline Eigen::MatrixXd LoadMatrix(const std::string& name) {
  const CsvTable t = ReadCsv(DataFile(name));
  Eigen::MatrixXd m(t.rows.size(), t.header.size());
  for (size_t r = 0; r < t.rows.size(); ++r)
    for (size_t c = 0; c < t.header.size(); ++c) m(r, c) = ParseDouble(t.rows[r][c]);
  return m;
}

inline std::vector<size_t> AllRows(size_t n) {
  std::vector<size_t> rows(n);
  for (size_t i = 0; i < n; ++i) rows[i] = i;
  return rows;
}

// 10 children and 10 persons with every relation present. Child 9 has no
// parents, so isolated-node paths get exercised.
inline hetgraph::HeteroGraph ToyGraph(uint64_t seed, size_t n_children = 10, size_t n_persons = 10) {
  using synthpop::Relation;
  Rng rng(seed);
  hetgraph::HeteroGraph g;
  g.context = "I,F,E,H,S,N";
  for (size_t i = 0; i < n_children; ++i) {
    g.child_ids.push_back(static_cast<int64_t>(i));
    g.outcomes.push_back(rng.Bernoulli(0.5) ? 1 : 0);
    g.split.push_back(hetgraph::SplitLabel::kTrain);
  }
  for (size_t i = 0; i < n_persons; ++i) g.person_ids.push_back(static_cast<int64_t>(100 + i));
  g.child_feature_names = {"a", "b", "c"};
  g.person_feature_names = {"x", "y"};
  g.child_features = RowMatrix(n_children, 3);
  g.person_features = RowMatrix(n_persons, 2);
  for (Eigen::Index i = 0; i < g.child_features.size(); ++i) g.child_features.data()[i] = rng.Normal();
  for (Eigen::Index i = 0; i < g.person_features.size(); ++i) g.person_features.data()[i] = rng.Normal();

  auto symmetric = [&](size_t n, double p) {
    std::vector<std::pair<int32_t, int32_t>> e;
    for (size_t s = 0; s < n; ++s)
      for (size_t t = s + 1; t < n; ++t)
        if (rng.Bernoulli(p)) {
          e.push_back({static_cast<int32_t>(s), static_cast<int32_t>(t)});
          e.push_back({static_cast<int32_t>(t), static_cast<int32_t>(s)});
        }
    return e;
  };
  const auto classmates = symmetric(n_children, 0.3);
  std::vector<std::pair<int32_t, int32_t>> parents, children;
  const size_t half = n_persons / 2;
  for (size_t c = 0; c + 1 < n_children; ++c) {
    const auto mother = static_cast<int32_t>(c % half);
    parents.push_back({static_cast<int32_t>(c), mother});
    children.push_back({mother, static_cast<int32_t>(c)});
    if (c % 2) {
      const auto father = static_cast<int32_t>(half + c % half);
      parents.push_back({static_cast<int32_t>(c), father});
      children.push_back({father, static_cast<int32_t>(c)});
    }
  }
  const auto family = symmetric(n_persons, 0.2);
  const auto neighbors = symmetric(n_persons, 0.3);
  g.relations[0] = hetgraph::MakeAdjacency(Relation::kClassmates, n_children, n_children, classmates);
  g.relations[1] = hetgraph::MakeAdjacency(Relation::kParents, n_children, n_persons, parents);
  g.relations[2] = hetgraph::MakeAdjacency(Relation::kChildren, n_persons, n_children, children);
  g.relations[3] = hetgraph::MakeAdjacency(Relation::kParentOrChild, n_persons, n_persons, family);
  g.relations[4] = hetgraph::MakeAdjacency(Relation::kNeighbors, n_persons, n_persons, neighbors);
  return g;
}

// XOR of two signs, 400 rows. Every point (u, v) has a mirror (-u, -v)
// with the same label, so an unpenalized linear fit has zero slopes.
// Positives are 35% of rows; with balanced classes the 0.5 threshold would
// sit on a knife edge for a constant predictor.
inline void XorFixture(Eigen::MatrixXd* x, std::vector<int>* y, uint64_t seed = 3) {
  Rng rng(seed);
  const int half = 200;
  *x = Eigen::MatrixXd(2 * half, 2);
  y->assign(2 * half, 0);
  for (int i = 0; i < half; ++i) {
    const double u = 1.0 + 0.3 * std::abs(rng.Normal());
    const double v = (i < 70 ? -1.0 : 1.0) * (1.0 + 0.3 * std::abs(rng.Normal()));
    for (int k = 0; k < 2; ++k) {
      const double sign = k ? -1.0 : 1.0;
      const int r = 2 * i + k;
      (*x)(r, 0) = sign * u;
      (*x)(r, 1) = sign * v;
      (*y)[static_cast<size_t>(r)] = ((*x)(r, 0) > 0) != ((*x)(r, 1) > 0);
    }
  }
}

}  // namespace predgap::testing

#endif  // PREDGAP_TESTS_FIXTURES_HPP_
