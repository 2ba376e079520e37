#include <catch2/catch_amalgamated.hpp>

#include <algorithm>
#include <set>

#include "qclp/temporal_graph.hpp"
#include "testutil.hpp"

using namespace qclp;

namespace {

std::vector<CooccurrenceRecord> random_records(Rng& rng, int n, int count, int year_lo,
                                               int year_hi) {
  std::vector<CooccurrenceRecord> recs;
  recs.reserve(static_cast<std::size_t>(count));
  for (int i = 0; i < count; ++i) {
    int u = rng.next_int(0, n - 1);
    int v = rng.next_int(0, n - 1);
    while (v == u) v = rng.next_int(0, n - 1);
    if (u > v) std::swap(u, v);
    recs.push_back({u, v, rng.next_int(year_lo, year_hi), "d" + std::to_string(i)});
  }
  return recs;
}

std::set<std::pair<int, int>> as_pairs(const std::vector<Edge>& edges) {
  std::set<std::pair<int, int>> out;
  for (const auto& e : edges) out.emplace(e.u, e.v);
  return out;
}

}  // namespace

TEST_CASE("build dedupes edges and keeps the earliest year", "[graph]") {
  std::vector<CooccurrenceRecord> recs = {{0, 1, 2010, "x"}, {0, 1, 2008, "y"}};
  auto g = TemporalGraph::build(recs, 2);
  REQUIRE(g.edge_count() == 1);
  CHECK(g.edges()[0].u == 0);
  CHECK(g.edges()[0].v == 1);
  CHECK(g.edges()[0].first_year == 2008);
  CHECK(g.yearly_counts().at(2008).at(edge_key(0, 1)) == 1);
  CHECK(g.yearly_counts().at(2010).at(edge_key(0, 1)) == 1);
}

TEST_CASE("build on empty records yields an empty graph", "[graph]") {
  auto g = TemporalGraph::build({}, 5);
  CHECK(g.edge_count() == 0);
  CHECK(g.node_count() == 5);
  CHECK(isolated_nodes({}, 5).size() == 5);
}

TEST_CASE("build rejects out-of-range node ids", "[graph]") {
  std::vector<CooccurrenceRecord> recs = {{0, 7, 2010, "x"}};
  CHECK_THROWS_AS(TemporalGraph::build(recs, 3), ValidationError);
}

TEST_CASE("yearly counts accumulate per document", "[graph]") {
  std::vector<CooccurrenceRecord> recs = {
      {0, 1, 2010, "a"}, {0, 1, 2010, "b"}, {1, 2, 2010, "a"}, {0, 1, 2011, "c"}};
  auto g = TemporalGraph::build(recs, 3);
  CHECK(g.yearly_counts().at(2010).at(edge_key(0, 1)) == 2);
  CHECK(g.yearly_counts().at(2010).at(edge_key(1, 2)) == 1);
  CHECK(g.yearly_counts().at(2011).at(edge_key(0, 1)) == 1);
}

TEST_CASE("adjacency lists are sorted and symmetric", "[graph]") {
  std::vector<CooccurrenceRecord> recs = {{0, 2, 2010, "a"}, {0, 1, 2010, "b"}, {1, 2, 2011, "c"}};
  auto adj = TemporalGraph::build(recs, 4).adjacency();
  CHECK(adj.neighbors[0] == std::vector<int>{1, 2});
  CHECK(adj.neighbors[3].empty());
  CHECK(adj.degree(1) == 2);
  CHECK(adj.connected(2, 0));
  CHECK(adj.connected(0, 2));
  CHECK_FALSE(adj.connected(0, 3));
}

TEST_CASE("chronological split assigns by first-year window", "[graph]") {
  // first-years {2010, 2022, 2023} under spec (2021, 2022, 2024)
  std::vector<CooccurrenceRecord> recs = {{0, 1, 2010, "a"}, {1, 2, 2022, "b"}, {2, 3, 2023, "c"}};
  auto g = TemporalGraph::build(recs, 4);
  auto pos = chronological_split(g, SplitSpec{2021, 2022, 2024});
  REQUIRE(pos.train.size() == 1);
  REQUIRE(pos.val.size() == 1);
  REQUIRE(pos.test.size() == 1);
  CHECK(pos.train[0] == Edge{0, 1});
  CHECK(pos.val[0] == Edge{1, 2});
  CHECK(pos.test[0] == Edge{2, 3});
}

TEST_CASE("edges after test_end are dropped; early edges leave val/test empty", "[graph]") {
  std::vector<CooccurrenceRecord> recs = {{0, 1, 2010, "a"}, {1, 2, 2030, "b"}};
  auto g = TemporalGraph::build(recs, 3);
  auto pos = chronological_split(g, SplitSpec{2021, 2022, 2024});
  CHECK(pos.train.size() == 1);
  CHECK(pos.val.empty());
  CHECK(pos.test.empty());
}

TEST_CASE("split spec ordering is validated", "[graph]") {
  CHECK_THROWS_AS(chronological_split(TemporalGraph::build({}, 1), SplitSpec{2022, 2022, 2024}),
                  ValidationError);
  CHECK_THROWS_AS(chronological_split(TemporalGraph::build({}, 1), SplitSpec{2021, 2023, 2022}),
                  ValidationError);
  CHECK_NOTHROW(chronological_split(TemporalGraph::build({}, 1), SplitSpec{2021, 2022, 2022}));
}

TEST_CASE("negative sampling on a complete graph is infeasible", "[graph]") {
  std::vector<CooccurrenceRecord> recs = {{0, 1, 2010, "a"}, {0, 2, 2010, "a"}, {1, 2, 2010, "a"}};
  auto g = TemporalGraph::build(recs, 3);
  CHECK_THROWS_AS(sample_negatives(g, 1, {}, 7), ValidationError);
}

TEST_CASE("forced enumeration returns every remaining pair", "[graph]") {
  std::vector<CooccurrenceRecord> recs = {{0, 1, 2010, "a"}};
  auto g = TemporalGraph::build(recs, 4);
  auto negs = sample_negatives(g, 5, {}, 3);
  REQUIRE(negs.size() == 5);
  auto got = as_pairs(negs);
  std::set<std::pair<int, int>> expect = {{0, 2}, {0, 3}, {1, 2}, {1, 3}, {2, 3}};
  CHECK(got == expect);
}

TEST_CASE("negative sampling is deterministic per seed", "[graph]") {
  Rng rng(11);
  auto recs = random_records(rng, 40, 120, 2000, 2020);
  auto g = TemporalGraph::build(recs, 40);
  auto a = sample_negatives(g, 50, {}, 99);
  auto b = sample_negatives(g, 50, {}, 99);
  auto c = sample_negatives(g, 50, {}, 100);
  CHECK(a == b);
  CHECK(a != c);
}

TEST_CASE("exclude sets are honored", "[graph]") {
  Rng rng(5);
  auto recs = random_records(rng, 30, 60, 2000, 2020);
  auto g = TemporalGraph::build(recs, 30);
  auto first = sample_negatives(g, 40, {}, 1);
  auto second = sample_negatives(g, 40, {first}, 2);
  auto fp = as_pairs(first);
  for (const auto& e : second) {
    CHECK_FALSE(fp.count({e.u, e.v}));
    CHECK_FALSE(g.has_edge(e.u, e.v));
  }
}

TEST_CASE("isolated nodes are exactly the train-degree-zero nodes", "[graph]") {
  std::vector<Edge> train = {{0, 1}};
  auto iso = isolated_nodes(train, 3);
  CHECK(iso == std::vector<int>{2});
}

TEST_CASE("slice-restricted negatives touch the slice", "[graph]") {
  Rng rng(17);
  auto recs = random_records(rng, 25, 40, 2000, 2020);
  auto g = TemporalGraph::build(recs, 25);
  std::vector<int> slice = {3, 11, 19};
  auto negs = sample_negatives_in_slice(g, 10, slice, {}, 4);
  REQUIRE(negs.size() == 10);
  std::set<std::pair<int, int>> seen;
  for (const auto& e : negs) {
    CHECK((std::count(slice.begin(), slice.end(), e.u) > 0 ||
           std::count(slice.begin(), slice.end(), e.v) > 0));
    CHECK_FALSE(g.has_edge(e.u, e.v));
    CHECK(seen.emplace(e.u, e.v).second);
  }
  CHECK(sample_negatives_in_slice(g, 10, slice, {}, 4) == negs);
}

TEST_CASE("make_split honors windows, disjointness, and collision-freedom", "[graph]") {
  Rng rng(23);
  for (int trial = 0; trial < 25; ++trial) {
    const int n = rng.next_int(8, 40);
    auto recs = random_records(rng, n, rng.next_int(5, 120), 2000, 2024);
    auto g = TemporalGraph::build(recs, n);
    SplitSpec spec{2015, 2019, 2024};
    EdgeSplit split;
    try {
      split = make_split(g, spec, derive_seed(777, static_cast<std::uint64_t>(trial)));
    } catch (const ValidationError&) {
      continue;  // tiny graph without enough non-edges; infeasibility is its own test
    }

    // Window membership per positive set.
    std::unordered_map<std::uint64_t, int> first_year;
    for (const auto& e : g.edges()) first_year[edge_key(e.u, e.v)] = e.first_year;
    for (const auto& e : split.train_pos) CHECK(first_year.at(edge_key(e)) <= 2015);
    for (const auto& e : split.val_pos) {
      CHECK(first_year.at(edge_key(e)) > 2015);
      CHECK(first_year.at(edge_key(e)) <= 2019);
    }
    for (const auto& e : split.test_pos) {
      CHECK(first_year.at(edge_key(e)) > 2019);
      CHECK(first_year.at(edge_key(e)) <= 2024);
    }

    // Union of positives = all edges in window; pairwise disjoint across all five sets.
    std::size_t in_window = 0;
    for (const auto& e : g.edges()) in_window += (e.first_year <= 2024) ? 1 : 0;
    CHECK(split.train_pos.size() + split.val_pos.size() + split.test_pos.size() == in_window);

    std::vector<const std::vector<Edge>*> sets = {&split.train_pos, &split.val_pos,
                                                  &split.test_pos, &split.val_neg,
                                                  &split.test_neg};
    std::set<std::pair<int, int>> all;
    std::size_t total = 0;
    for (const auto* s : sets) {
      total += s->size();
      for (const auto& e : *s) all.emplace(e.u, e.v);
    }
    CHECK(all.size() == total);

    // 1:1 negatives, none colliding with an any-period positive.
    CHECK(split.val_neg.size() == split.val_pos.size());
    CHECK(split.test_neg.size() == split.test_pos.size());
    for (const auto& e : split.val_neg) CHECK_FALSE(g.has_edge(e.u, e.v));
    for (const auto& e : split.test_neg) CHECK_FALSE(g.has_edge(e.u, e.v));
  }
}

TEST_CASE("split is invariant under record permutation and reruns", "[graph]") {
  Rng rng(31);
  auto recs = random_records(rng, 30, 80, 2000, 2024);
  auto shuffled = recs;
  rng.shuffle(shuffled);

  auto g1 = TemporalGraph::build(recs, 30);
  auto g2 = TemporalGraph::build(shuffled, 30);
  SplitSpec spec{2015, 2019, 2024};
  auto s1 = make_split(g1, spec, 42);
  auto s2 = make_split(g2, spec, 42);
  auto s3 = make_split(g1, spec, 42);

  CHECK(s1.train_pos == s2.train_pos);
  CHECK(s1.val_neg == s2.val_neg);
  CHECK(s1.test_neg == s2.test_neg);
  CHECK(s1.train_pos == s3.train_pos);
  CHECK(s1.val_neg == s3.val_neg);
  CHECK(s1.test_neg == s3.test_neg);
}

TEST_CASE("split directory round-trips through TSV and metadata", "[graph]") {
  Rng rng(41);
  auto recs = random_records(rng, 20, 50, 2000, 2024);
  auto g = TemporalGraph::build(recs, 20);
  SplitSpec spec{2015, 2019, 2024};
  auto split = make_split(g, spec, 9);

  testutil::TempDir dir("graph");
  write_split(dir.path().string(), split, spec, 20);
  auto loaded = read_split(dir.path().string());

  CHECK(loaded.split.train_pos == split.train_pos);
  CHECK(loaded.split.val_pos == split.val_pos);
  CHECK(loaded.split.test_pos == split.test_pos);
  CHECK(loaded.split.val_neg == split.val_neg);
  CHECK(loaded.split.test_neg == split.test_neg);
  CHECK(loaded.split.seed == 9);
  CHECK(loaded.spec.train_end == 2015);
  CHECK(loaded.spec.val_end == 2019);
  CHECK(loaded.spec.test_end == 2024);
  CHECK(loaded.n == 20);
}

TEST_CASE("edge reader rejects malformed rows", "[graph]") {
  testutil::TempDir dir("graph");
  auto path = (dir.path() / "bad.tsv").string();
  testutil::write_file(path, "0\t1\nnope\n");
  CHECK_THROWS_WITH(read_edge_tsv(path), Catch::Matchers::ContainsSubstring("line 2"));
}
